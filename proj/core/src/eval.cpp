#include "vecdenoise/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <tuple>

#include "vecdenoise/cosine.hpp"
#include "vecdenoise/svm.hpp"

namespace vecdenoise::eval {

namespace {

std::vector<std::string> split_record(const std::string& line) {
  std::vector<std::string> fields;
  if (line.find('\t') != std::string::npos) {
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    for (auto& f : fields) {
      const auto b = f.find_first_not_of(" \r");
      const auto e = f.find_last_not_of(" \r");
      f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
    }
  } else {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\r')) ++i;
      const std::size_t start = i;
      while (i < line.size() && line[i] != ' ' && line[i] != '\r') ++i;
      if (i > start) fields.push_back(line.substr(start, i - start));
    }
  }
  return fields;
}

// Calls `fn(fields, where)` for each non-blank, non-comment line.
template <typename Fn>
void for_each_record(std::istream& in, const std::string& name, std::size_t expected, Fn fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const std::string where = name + " line " + std::to_string(line_no);
    auto fields = split_record(line);
    if (fields.size() != expected) {
      throw DataError("expected " + std::to_string(expected) + " fields at " + where + ", got " +
                      std::to_string(fields.size()));
    }
    try {
      fn(fields, where);
    } catch (const DataError& e) {
      const std::string msg = e.what();
      if (msg.find(where) != std::string::npos) throw;
      throw DataError(msg + " at " + where);
    }
  }
}

std::string norm_token(std::string s, bool lowercase) {
  return lowercase ? io::to_lower(s) : s;
}

template <typename Parse>
auto load_file(const std::filesystem::path& path, bool lowercase, Parse parse) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return parse(in, path.stem().string(), lowercase);
}

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Trains on `train` rows of a precomputed kernel and scores `test` rows.
// A single-class training split degenerates to predicting that class.
std::size_t count_correct(const Matrix& kernel, std::span<const int> labels,
                          const std::vector<Eigen::Index>& train,
                          const std::vector<Eigen::Index>& test, double C) {
  std::vector<int> train_labels;
  train_labels.reserve(train.size());
  for (auto i : train) train_labels.push_back(labels[static_cast<std::size_t>(i)]);
  const bool has_pos = std::find(train_labels.begin(), train_labels.end(), 1) != train_labels.end();
  const bool has_neg = std::find(train_labels.begin(), train_labels.end(), -1) != train_labels.end();

  std::size_t correct = 0;
  if (!has_pos || !has_neg) {
    const int constant = has_pos ? 1 : -1;
    for (auto t : test) correct += labels[static_cast<std::size_t>(t)] == constant ? 1 : 0;
    return correct;
  }

  const auto n = static_cast<Eigen::Index>(train.size());
  Matrix k_train(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      k_train(a, b) = kernel(train[static_cast<std::size_t>(a)], train[static_cast<std::size_t>(b)]);
    }
  }
  const svm::SmoSolution sol = svm::solve_smo(k_train, train_labels, C);
  for (auto t : test) {
    double decision = sol.bias;
    for (Eigen::Index a = 0; a < n; ++a) {
      if (sol.alpha(a) > 0.0) {
        decision += sol.alpha(a) * train_labels[static_cast<std::size_t>(a)] *
                    kernel(t, train[static_cast<std::size_t>(a)]);
      }
    }
    const int predicted = decision >= 0.0 ? 1 : -1;
    correct += labels[static_cast<std::size_t>(t)] == predicted ? 1 : 0;
  }
  return correct;
}

}  // namespace

std::string_view to_string(Metric metric) {
  return metric == Metric::SpearmanRho ? "spearman_rho" : "accuracy";
}

WordPairDataset parse_word_pairs(std::istream& in, std::string name, bool lowercase) {
  WordPairDataset ds{name, {}};
  for_each_record(in, name, 3, [&](std::vector<std::string>& f, const std::string& where) {
    const double gold = io::parse_number(f[2]);
    if (!std::isfinite(gold)) throw DataError("non-finite gold score at " + where);
    ds.records.push_back({norm_token(f[0], lowercase), norm_token(f[1], lowercase), gold});
  });
  return ds;
}

MultipleChoiceDataset parse_multiple_choice(std::istream& in, std::string name, bool lowercase) {
  MultipleChoiceDataset ds{name, {}};
  for_each_record(in, name, 6, [&](std::vector<std::string>& f, const std::string& where) {
    MultipleChoiceQuestion q;
    q.target = norm_token(f[0], lowercase);
    for (std::size_t c = 0; c < 4; ++c) q.candidates[c] = norm_token(f[c + 1], lowercase);
    const double answer = io::parse_number(f[5]);
    if (answer != std::floor(answer) || answer < 0 || answer > 3) {
      throw DataError("answer index must be 0-3 at " + where);
    }
    q.answer = static_cast<int>(answer);
    ds.questions.push_back(std::move(q));
  });
  return ds;
}

NPDataset parse_noun_phrases(std::istream& in, std::string name, bool lowercase) {
  NPDataset ds{name, {}};
  for_each_record(in, name, 5, [&](std::vector<std::string>& f, const std::string& where) {
    NounPhrase np;
    for (std::size_t t = 0; t < 3; ++t) np.tokens[t] = norm_token(f[t], lowercase);
    const std::string label = io::to_lower(f[3]);
    if (label == "left") {
      np.label = Bracketing::Left;
    } else if (label == "right") {
      np.label = Bracketing::Right;
    } else {
      throw DataError("label must be left or right at " + where);
    }
    const double fold = io::parse_number(f[4]);
    if (fold != std::floor(fold) || fold < 1 || fold > 10) {
      throw DataError("fold id must be 1-10 at " + where);
    }
    np.fold = static_cast<int>(fold);
    ds.records.push_back(std::move(np));
  });
  return ds;
}

WordPairDataset load_word_pairs(const std::filesystem::path& path, bool lowercase) {
  return load_file(path, lowercase, parse_word_pairs);
}

MultipleChoiceDataset load_multiple_choice(const std::filesystem::path& path, bool lowercase) {
  return load_file(path, lowercase, parse_multiple_choice);
}

NPDataset load_noun_phrases(const std::filesystem::path& path, bool lowercase) {
  return load_file(path, lowercase, parse_noun_phrases);
}

void write_word_pairs(std::ostream& out, const WordPairDataset& ds) {
  for (const auto& r : ds.records) {
    out << r.first << '\t' << r.second << '\t' << io::format_number(r.gold) << '\n';
  }
}

void write_multiple_choice(std::ostream& out, const MultipleChoiceDataset& ds) {
  for (const auto& q : ds.questions) {
    out << q.target;
    for (const auto& c : q.candidates) out << '\t' << c;
    out << '\t' << q.answer << '\n';
  }
}

void write_noun_phrases(std::ostream& out, const NPDataset& ds) {
  for (const auto& np : ds.records) {
    out << np.tokens[0] << '\t' << np.tokens[1] << '\t' << np.tokens[2] << '\t'
        << (np.label == Bracketing::Left ? "left" : "right") << '\t' << np.fold << '\n';
  }
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

Spearman spearman_rho(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("spearman inputs differ in length");
  if (a.size() < 2) throw DataError("spearman needs at least two values");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double ma = mean(ra);
  const double mb = mean(rb);
  double cov = 0.0;
  double va = 0.0;
  double vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) return {0.0, false};
  return {std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0), true};
}

EvalReport evaluate_similarity(const io::EmbeddingMatrix& emb, const WordPairDataset& ds) {
  std::vector<double> model;
  std::vector<double> gold;
  for (const auto& r : ds.records) {
    const auto a = emb.find(r.first);
    const auto b = emb.find(r.second);
    if (!a || !b) continue;
    model.push_back(cosine_similarity(emb.row(*a), emb.row(*b)).value);
    gold.push_back(r.gold);
  }
  if (model.size() < 2) {
    throw DataError(ds.name + ": fewer than two word pairs are in the vocabulary");
  }
  EvalReport report;
  report.task = ds.name;
  report.metric = Metric::SpearmanRho;
  report.value = spearman_rho(model, gold).rho;
  report.n_items = ds.records.size();
  report.coverage = static_cast<double>(model.size()) / static_cast<double>(ds.records.size());
  return report;
}

EvalReport evaluate_multiple_choice(const io::EmbeddingMatrix& emb,
                                    const MultipleChoiceDataset& ds) {
  std::size_t answered = 0;
  std::size_t correct = 0;
  for (const auto& q : ds.questions) {
    const auto target = emb.find(q.target);
    if (!target) continue;
    ++answered;
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < 4; ++c) {
      const auto cand = emb.find(q.candidates[static_cast<std::size_t>(c)]);
      if (!cand) continue;
      const double score = cosine_similarity(emb.row(*target), emb.row(*cand)).value;
      if (score > best_score) {
        best_score = score;
        best = c;
      }
    }
    if (best == q.answer) ++correct;
  }
  if (answered == 0) throw DataError(ds.name + ": no question target is in the vocabulary");
  EvalReport report;
  report.task = ds.name;
  report.metric = Metric::Accuracy;
  report.value = static_cast<double>(correct) / static_cast<double>(answered);
  report.n_items = ds.questions.size();
  report.coverage = static_cast<double>(answered) / static_cast<double>(ds.questions.size());
  return report;
}

std::optional<Vector> np_feature_vector(const io::EmbeddingMatrix& emb,
                                        const std::array<std::string, 3>& tokens,
                                        const std::array<double, 3>& weights) {
  Vector sum = Vector::Zero(emb.dim());
  for (std::size_t t = 0; t < 3; ++t) {
    const auto row = emb.find(tokens[t]);
    if (!row) return std::nullopt;
    sum += weights[t] * emb.row(*row).transpose();
  }
  return sum / 3.0;
}

NPGrid NPGrid::defaults() {
  NPGrid grid;
  const std::array<double, 5> w{0.0, 0.5, 1.0, 1.5, 2.0};
  for (double a : w) {
    for (double b : w) {
      for (double c : w) grid.weights.push_back({a, b, c});
    }
  }
  grid.C = {0.1, 1.0, 10.0};
  grid.gamma = {0.01, 0.1, 1.0};
  return grid;
}

NPResult evaluate_np_bracketing(const io::EmbeddingMatrix& emb, const NPDataset& ds,
                                const NPGrid& grid) {
  if (grid.weights.empty() || grid.C.empty() || grid.gamma.empty()) {
    throw ConfigError("NP tuning grid has an empty axis");
  }
  if (grid.inner_folds < 2) throw ConfigError("NP inner CV needs at least two folds");

  // Evaluable records, grouped by fold.
  std::vector<std::size_t> usable;
  int max_fold = 0;
  for (std::size_t r = 0; r < ds.records.size(); ++r) {
    const auto& np = ds.records[r];
    max_fold = std::max(max_fold, np.fold);
    if (emb.find(np.tokens[0]) && emb.find(np.tokens[1]) && emb.find(np.tokens[2])) {
      usable.push_back(r);
    }
  }
  if (max_fold < 3) {
    throw DataError(ds.name + ": NP evaluation needs a tuning fold and at least two test folds");
  }
  std::vector<std::vector<Eigen::Index>> folds(static_cast<std::size_t>(max_fold));
  std::vector<int> labels;
  for (std::size_t u = 0; u < usable.size(); ++u) {
    const auto& np = ds.records[usable[u]];
    folds[static_cast<std::size_t>(np.fold - 1)].push_back(static_cast<Eigen::Index>(u));
    labels.push_back(np.label == Bracketing::Left ? 1 : -1);
  }
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (folds[f].empty()) {
      throw DataError(ds.name + ": fold " + std::to_string(f + 1) + " has no evaluable records");
    }
  }

  auto features_for = [&](const std::array<double, 3>& w) {
    Matrix feats(static_cast<Eigen::Index>(usable.size()), emb.dim());
    for (std::size_t u = 0; u < usable.size(); ++u) {
      feats.row(static_cast<Eigen::Index>(u)) =
          np_feature_vector(emb, ds.records[usable[u]].tokens, w)->transpose();
    }
    return feats;
  };

  // Inner CV splits of fold 1.
  std::vector<Eigen::Index> tune = folds[0];
  std::mt19937_64 rng(grid.seed);
  std::shuffle(tune.begin(), tune.end(), rng);
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(grid.inner_folds), tune.size());
  std::vector<std::vector<Eigen::Index>> inner(k);
  for (std::size_t i = 0; i < tune.size(); ++i) inner[i % k].push_back(tune[i]);

  NPResult result;
  double best_acc = -1.0;
  std::size_t best_w = 0;
  std::size_t best_c = 0;
  std::size_t best_g = 0;
  for (std::size_t wi = 0; wi < grid.weights.size(); ++wi) {
    const Matrix feats = features_for(grid.weights[wi]);
    const Matrix dist = svm::squared_distances(feats, feats);
    for (std::size_t gi = 0; gi < grid.gamma.size(); ++gi) {
      const Matrix kernel = (-grid.gamma[gi] * dist).array().exp().matrix();
      for (std::size_t ci = 0; ci < grid.C.size(); ++ci) {
        std::size_t correct = 0;
        std::size_t total = 0;
        for (std::size_t h = 0; h < k; ++h) {
          if (inner[h].empty()) continue;
          std::vector<Eigen::Index> train;
          for (std::size_t o = 0; o < k; ++o) {
            if (o != h) train.insert(train.end(), inner[o].begin(), inner[o].end());
          }
          if (train.empty()) continue;
          correct += count_correct(kernel, labels, train, inner[h], grid.C[ci]);
          total += inner[h].size();
        }
        const double acc = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
        const auto key = std::make_tuple(grid.C[ci], grid.gamma[gi], wi);
        const auto best_key = std::make_tuple(grid.C[best_c], grid.gamma[best_g], best_w);
        if (acc > best_acc || (acc == best_acc && key < best_key)) {
          best_acc = acc;
          best_w = wi;
          best_c = ci;
          best_g = gi;
        }
      }
    }
  }

  result.weights = grid.weights[best_w];
  result.C = grid.C[best_c];
  result.gamma = grid.gamma[best_g];
  result.tuning_accuracy = best_acc;

  // Rotate over the remaining folds.
  const Matrix feats = features_for(result.weights);
  const Matrix kernel = svm::rbf_kernel(feats, feats, result.gamma);
  std::vector<double> fold_acc;
  for (std::size_t test = 1; test < folds.size(); ++test) {
    std::vector<Eigen::Index> train;
    for (std::size_t f = 1; f < folds.size(); ++f) {
      if (f != test) train.insert(train.end(), folds[f].begin(), folds[f].end());
    }
    const std::size_t correct = count_correct(kernel, labels, train, folds[test], result.C);
    fold_acc.push_back(static_cast<double>(correct) / static_cast<double>(folds[test].size()));
  }

  result.report.task = ds.name;
  result.report.metric = Metric::Accuracy;
  result.report.value = mean(fold_acc);
  result.report.n_items = ds.records.size();
  result.report.coverage =
      ds.records.empty() ? 0.0
                         : static_cast<double>(usable.size()) / static_cast<double>(ds.records.size());
  return result;
}

void write_reports_csv(std::ostream& out, std::span<const EvalReport> reports) {
  out << "task,metric,value,coverage,n_items\n";
  for (const auto& r : reports) {
    out << r.task << ',' << to_string(r.metric) << ',' << io::format_number(r.value) << ','
        << io::format_number(r.coverage) << ',' << r.n_items << '\n';
  }
}

}  // namespace vecdenoise::eval
