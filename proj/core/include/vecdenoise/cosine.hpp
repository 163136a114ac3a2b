#pragma once

#include <algorithm>

#include "vecdenoise/types.hpp"

namespace vecdenoise {

inline constexpr double kZeroNorm = 1e-12;

struct Cosine {
  double value = 0.0;
  bool degenerate = false;  // a norm was below kZeroNorm; value is 0
};

/// a.b / (|a| |b|), clamped to [-1, 1]. Near-zero vectors give 0 rather than NaN.
template <typename A, typename B>
Cosine cosine_similarity(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na < kZeroNorm || nb < kZeroNorm) return {0.0, true};
  const double c = a.dot(b) / (na * nb);
  return {std::clamp(c, -1.0, 1.0), false};
}

}  // namespace vecdenoise
