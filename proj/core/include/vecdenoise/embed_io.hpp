#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "vecdenoise/types.hpp"

namespace vecdenoise::io {

/// Ordered list of unique tokens with the inverse token -> row map.
class Vocabulary {
 public:
  Vocabulary() = default;
  /// Throws DataError naming the first duplicated token.
  explicit Vocabulary(std::vector<std::string> words);

  /// Appends a token and returns its row id. Throws DataError on duplicates.
  std::size_t add(std::string token);

  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }
  const std::string& word(std::size_t row) const { return words_.at(row); }
  const std::vector<std::string>& words() const { return words_; }
  std::optional<std::size_t> find(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token).has_value(); }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.words_ == b.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// A vocabulary and a V x L matrix with one finite row per word.
/// Immutable after construction.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  /// Throws DataError if the row count differs from the vocabulary size or any
  /// entry is non-finite.
  EmbeddingMatrix(Vocabulary vocab, Matrix data);

  const Vocabulary& vocab() const { return vocab_; }
  const Matrix& data() const { return data_; }
  std::size_t size() const { return vocab_.size(); }
  Eigen::Index dim() const { return data_.cols(); }
  auto row(std::size_t i) const { return data_.row(static_cast<Eigen::Index>(i)); }
  std::optional<std::size_t> find(std::string_view token) const { return vocab_.find(token); }

  friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
    return a.vocab_ == b.vocab_ && a.data_.rows() == b.data_.rows() &&
           a.data_.cols() == b.data_.cols() && a.data_ == b.data_;
  }

 private:
  Vocabulary vocab_;
  Matrix data_;
};

struct TextOptions {
  bool header = true;      // first line is "V L"
  bool lowercase = false;  // lowercase tokens; later duplicates are dropped
};

/// word2vec/GloVe text format: optional "V L" header, then "token v1 ... vL".
/// Any run of spaces or tabs separates fields.
EmbeddingMatrix parse_embedding_text(std::istream& in, const TextOptions& opts = {});

/// word2vec binary format: "V L\n" then V records of
/// [token bytes, ' ', L little-endian float32]. Newlines between records are
/// skipped, matching the reference tool's output.
EmbeddingMatrix parse_embedding_binary(std::istream& in, bool lowercase = false);

/// Header "V L" then one line per word. With no precision the shortest
/// representation that round-trips exactly is used; otherwise fixed notation
/// with `precision` digits after the point.
void write_embedding_text(std::ostream& out, const EmbeddingMatrix& emb,
                          std::optional<int> precision = std::nullopt);

/// Narrows to float32; the binary format cannot carry more.
void write_embedding_binary(std::ostream& out, const EmbeddingMatrix& emb);

struct RestrictResult {
  EmbeddingMatrix embedding;
  std::size_t covered = 0;    // tokens of `keep` present in the vocabulary
  std::size_t requested = 0;  // |keep|
  double coverage() const {
    return requested == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(requested);
  }
};

/// Rows of `emb` whose token is in `keep`, in original order.
RestrictResult restrict_vocabulary(const EmbeddingMatrix& emb,
                                   const std::unordered_set<std::string>& keep);

// Plain numeric matrix format ("rows cols" header, no tokens). Used for
// dictionaries and filter parameters.
void write_matrix_text(std::ostream& out, const Matrix& m);
Matrix parse_matrix_text(std::istream& in);

enum class Format { Text, Glove, Binary };

/// "text" (header), "glove" (headerless) or "binary".
Format parse_format(std::string_view name);

EmbeddingMatrix load_embedding(const std::filesystem::path& path, Format format,
                               bool lowercase = false);
void save_embedding_text(const std::filesystem::path& path, const EmbeddingMatrix& emb,
                         std::optional<int> precision = std::nullopt);
Matrix load_matrix(const std::filesystem::path& path);
void save_matrix(const std::filesystem::path& path, const Matrix& m);

std::string to_lower(std::string_view s);

/// Locale-independent number formatting shared by every text writer.
std::string format_number(double value, std::optional<int> precision = std::nullopt);

/// Strict locale-independent parse; throws DataError on trailing garbage.
double parse_number(std::string_view field);

}  // namespace vecdenoise::io
