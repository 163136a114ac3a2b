#pragma once

#include <span>
#include <vector>

#include "vecdenoise/types.hpp"

namespace vecdenoise::svm {

struct SmoOptions {
  double tol = 1e-3;         // stop when the maximal KKT violation gap drops below this
  int max_iters = 1000000;   // pair updates
};

/// Dual solution of the soft-margin SVM
///   min 1/2 a'Qa - e'a,  Q_ij = y_i y_j K_ij,  0 <= a_i <= C,  y'a = 0.
struct SmoSolution {
  Vector alpha;
  double bias = 0.0;  // decision(x) = sum_i alpha_i y_i K(x_i, x) + bias
  double kkt_gap = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Sequential minimal optimization with second-order working-set selection
/// over a precomputed kernel matrix. Labels must be +1/-1.
SmoSolution solve_smo(const Matrix& kernel, std::span<const int> labels, double C,
                      const SmoOptions& opts = {});

/// Pairwise squared Euclidean distances between the rows of a and b.
Matrix squared_distances(const Matrix& a, const Matrix& b);

/// exp(-gamma ||a_i - b_j||^2)
Matrix rbf_kernel(const Matrix& a, const Matrix& b, double gamma);

class RbfSvm {
 public:
  RbfSvm(Matrix support, Vector coef, double bias, double gamma, bool converged);

  /// sum_i coef_i K(s_i, x) + bias, where coef_i = alpha_i y_i.
  double decision(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  Vector decision(const Matrix& xs) const;
  /// +1 or -1; a zero decision value maps to +1.
  int predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  std::vector<int> predict(const Matrix& xs) const;

  const Matrix& support_vectors() const { return support_; }
  const Vector& coefficients() const { return coef_; }
  double bias() const { return bias_; }
  bool converged() const { return converged_; }

 private:
  Matrix support_;
  Vector coef_;
  double bias_;
  double gamma_;
  bool converged_;
};

/// Throws DataError unless N >= 2, both classes are present, labels are
/// +1/-1, and C, gamma > 0.
RbfSvm train_rbf_svm(const Matrix& features, std::span<const int> labels, double C, double gamma,
                     const SmoOptions& opts = {});

}  // namespace vecdenoise::svm
