#include "vecdenoise/synthetic.hpp"

#include <algorithm>
#include <array>
#include <random>
#include <set>
#include <string>
#include <utility>

#include "vecdenoise/cosine.hpp"

namespace vecdenoise::synth {

namespace {

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

}  // namespace

SyntheticBenchmark generate_synthetic_benchmark(const SyntheticConfig& cfg) {
  if (cfg.dim < 1) throw ConfigError("synthetic dim must be >= 1");
  if (cfg.rank < 1 || cfg.rank > cfg.dim) throw ConfigError("synthetic rank must be in [1, dim]");
  if (!(cfg.sigma >= 0.0)) throw ConfigError("synthetic sigma must be >= 0");

  std::mt19937_64 rng(cfg.seed);
  const auto v = static_cast<Eigen::Index>(cfg.vocab);

  // Orthonormal basis of the signal subspace, as rows.
  const Eigen::MatrixXd raw = gaussian(cfg.dim, cfg.rank, rng);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(raw).householderQ() *
                            Eigen::MatrixXd::Identity(cfg.dim, cfg.rank);
  const Matrix basis = q.transpose();

  Matrix clean = gaussian(v, cfg.rank, rng) * basis;
  Matrix noisy = clean;
  if (cfg.sigma > 0.0) noisy += cfg.sigma * gaussian(v, cfg.dim, rng);

  io::Vocabulary vocab;
  for (std::size_t i = 0; i < cfg.vocab; ++i) vocab.add("w" + std::to_string(i));

  SyntheticBenchmark out{io::EmbeddingMatrix(vocab, std::move(noisy)),
                         io::EmbeddingMatrix(vocab, clean),
                         {"synthetic_pairs", {}},
                         {"synthetic_choice", {}}};

  if (cfg.vocab >= 2) {
    std::uniform_int_distribution<std::size_t> pick(0, cfg.vocab - 1);
    const std::size_t max_pairs = cfg.vocab * (cfg.vocab - 1) / 2;
    const std::size_t want = std::min(cfg.pairs, max_pairs);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    while (out.pairs.records.size() < want) {
      std::size_t a = pick(rng);
      std::size_t b = pick(rng);
      if (a == b) continue;
      if (a > b) std::swap(a, b);
      if (!seen.emplace(a, b).second) continue;
      const double gold = cosine_similarity(clean.row(static_cast<Eigen::Index>(a)),
                                            clean.row(static_cast<Eigen::Index>(b)))
                              .value;
      out.pairs.records.push_back({vocab.word(a), vocab.word(b), gold});
    }
  }

  if (cfg.vocab >= 5) {
    std::uniform_int_distribution<std::size_t> pick(0, cfg.vocab - 1);
    for (std::size_t n = 0; n < cfg.questions; ++n) {
      const std::size_t target = pick(rng);
      std::array<std::size_t, 4> cands{};
      std::size_t filled = 0;
      while (filled < 4) {
        const std::size_t c = pick(rng);
        if (c == target || std::find(cands.begin(), cands.begin() + filled, c) != cands.begin() + filled) {
          continue;
        }
        cands[filled++] = c;
      }
      eval::MultipleChoiceQuestion question;
      question.target = vocab.word(target);
      double best = -2.0;
      for (int c = 0; c < 4; ++c) {
        const auto idx = cands[static_cast<std::size_t>(c)];
        question.candidates[static_cast<std::size_t>(c)] = vocab.word(idx);
        const double score = cosine_similarity(clean.row(static_cast<Eigen::Index>(target)),
                                               clean.row(static_cast<Eigen::Index>(idx)))
                                 .value;
        if (score > best) {
          best = score;
          question.answer = c;
        }
      }
      out.questions.questions.push_back(std::move(question));
    }
  }
  return out;
}

}  // namespace vecdenoise::synth
