#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vecdenoise/embed_io.hpp"
#include "vecdenoise/types.hpp"

namespace vecdenoise::eval {

struct WordPair {
  std::string first;
  std::string second;
  double gold = 0.0;
};

struct WordPairDataset {
  std::string name;
  std::vector<WordPair> records;
};

struct MultipleChoiceQuestion {
  std::string target;
  std::array<std::string, 4> candidates;
  int answer = 0;  // 0..3
};

struct MultipleChoiceDataset {
  std::string name;
  std::vector<MultipleChoiceQuestion> questions;
};

enum class Bracketing { Left, Right };

struct NounPhrase {
  std::array<std::string, 3> tokens;
  Bracketing label = Bracketing::Left;
  int fold = 1;  // 1-based
};

struct NPDataset {
  std::string name;
  std::vector<NounPhrase> records;
};

enum class Metric { SpearmanRho, Accuracy };
std::string_view to_string(Metric metric);

struct EvalReport {
  std::string task;
  Metric metric = Metric::SpearmanRho;
  double value = 0.0;
  double coverage = 0.0;   // evaluable items / all items
  std::size_t n_items = 0; // items in the dataset
};

// TSV loaders. Tokens are lowercased unless `lowercase` is false; blank
// lines and lines starting with '#' are skipped. Errors carry line numbers.
WordPairDataset parse_word_pairs(std::istream& in, std::string name, bool lowercase = true);
MultipleChoiceDataset parse_multiple_choice(std::istream& in, std::string name,
                                            bool lowercase = true);
NPDataset parse_noun_phrases(std::istream& in, std::string name, bool lowercase = true);

WordPairDataset load_word_pairs(const std::filesystem::path& path, bool lowercase = true);
MultipleChoiceDataset load_multiple_choice(const std::filesystem::path& path,
                                           bool lowercase = true);
NPDataset load_noun_phrases(const std::filesystem::path& path, bool lowercase = true);

void write_word_pairs(std::ostream& out, const WordPairDataset& ds);
void write_multiple_choice(std::ostream& out, const MultipleChoiceDataset& ds);
void write_noun_phrases(std::ostream& out, const NPDataset& ds);

/// Ranks starting at 1; tied values share the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> values);

struct Spearman {
  double rho = 0.0;
  bool defined = true;  // false when either list has zero rank variance
};

/// Pearson correlation of average ranks. Throws DataError unless the lists
/// have equal length >= 2.
Spearman spearman_rho(std::span<const double> a, std::span<const double> b);

/// Spearman rho between embedding cosines and gold scores over the pairs whose
/// words are both in the vocabulary. Throws DataError if fewer than two pairs
/// are evaluable.
EvalReport evaluate_similarity(const io::EmbeddingMatrix& emb, const WordPairDataset& ds);

/// Accuracy of picking the highest-cosine candidate. Questions with an OOV
/// target are skipped; OOV candidates never win; ties go to the lowest index.
EvalReport evaluate_multiple_choice(const io::EmbeddingMatrix& emb,
                                    const MultipleChoiceDataset& ds);

/// (w1 v1 + w2 v2 + w3 v3) / 3, or nullopt if a token is out of vocabulary.
std::optional<Vector> np_feature_vector(const io::EmbeddingMatrix& emb,
                                        const std::array<std::string, 3>& tokens,
                                        const std::array<double, 3>& weights);

struct NPGrid {
  std::vector<std::array<double, 3>> weights;
  std::vector<double> C;
  std::vector<double> gamma;
  int inner_folds = 5;
  std::uint64_t seed = 1;

  /// w in {0, 0.5, 1, 1.5, 2}^3, C in {0.1, 1, 10}, gamma in {0.01, 0.1, 1}.
  static NPGrid defaults();
};

struct NPResult {
  EvalReport report;
  std::array<double, 3> weights{};
  double C = 0.0;
  double gamma = 0.0;
  double tuning_accuracy = 0.0;  // inner-CV accuracy on fold 1
};

/// Tune (weights, C, gamma) by inner k-fold CV on fold 1, then report mean
/// accuracy of rotating over the remaining folds (train on all but one,
/// test on it). Ties prefer smaller C, then smaller gamma, then earlier
/// weights in grid order.
NPResult evaluate_np_bracketing(const io::EmbeddingMatrix& emb, const NPDataset& ds,
                                const NPGrid& grid = NPGrid::defaults());

/// CSV "task,metric,value,coverage,n_items".
void write_reports_csv(std::ostream& out, std::span<const EvalReport> reports);

}  // namespace vecdenoise::eval
