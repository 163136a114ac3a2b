#pragma once

#include <cstddef>
#include <cstdint>

#include "vecdenoise/embed_io.hpp"
#include "vecdenoise/eval.hpp"

namespace vecdenoise::synth {

struct SyntheticConfig {
  std::size_t vocab = 2000;
  Eigen::Index dim = 50;
  Eigen::Index rank = 10;
  double sigma = 0.3;
  std::uint64_t seed = 1;
  std::size_t pairs = 1000;     // word-pair records (capped at V(V-1)/2)
  std::size_t questions = 200;  // multiple-choice questions (none if V < 5)
};

/// Clean rows live in a random rank-r subspace of R^L; noisy rows add iid
/// Gaussian noise. Gold data is derived from the clean rows only: pair scores
/// are clean cosines and each question's answer is its clean-nearest
/// candidate (ties to the lowest index).
struct SyntheticBenchmark {
  io::EmbeddingMatrix noisy;
  io::EmbeddingMatrix clean;
  eval::WordPairDataset pairs;
  eval::MultipleChoiceDataset questions;
};

SyntheticBenchmark generate_synthetic_benchmark(const SyntheticConfig& cfg);

}  // namespace vecdenoise::synth
