#include "vecdenoise/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace vecdenoise::svm {

namespace {

constexpr double kTau = 1e-12;

void check_labels(std::span<const int> labels, Eigen::Index n) {
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw DataError("svm has " + std::to_string(n) + " rows but " +
                    std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y != 1 && y != -1) throw DataError("svm labels must be +1 or -1");
  }
}

}  // namespace

SmoSolution solve_smo(const Matrix& kernel, std::span<const int> labels, double C,
                      const SmoOptions& opts) {
  const Eigen::Index n = kernel.rows();
  if (kernel.cols() != n) throw DataError("svm kernel must be square");
  check_labels(labels, n);
  if (!(C > 0.0)) throw ConfigError("svm C must be > 0");

  auto y = [&](Eigen::Index i) { return static_cast<double>(labels[static_cast<std::size_t>(i)]); };
  auto is_upper = [&](double a) { return a >= C; };
  auto is_lower = [&](double a) { return a <= 0.0; };

  SmoSolution sol;
  sol.alpha = Vector::Zero(n);
  Vector& alpha = sol.alpha;
  Vector grad = Vector::Constant(n, -1.0);  // Q alpha - e

  for (;;) {
    // i: maximal violator in I_up; j: second-order choice in I_low.
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      const bool up = y(t) > 0 ? !is_upper(alpha(t)) : !is_lower(alpha(t));
      if (up && -y(t) * grad(t) >= gmax) {
        gmax = -y(t) * grad(t);
        i = t;
      }
    }
    Eigen::Index j = -1;
    double best_obj = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      const bool low = y(t) > 0 ? !is_lower(alpha(t)) : !is_upper(alpha(t));
      if (!low) continue;
      const double v = -y(t) * grad(t);
      gmin = std::min(gmin, v);
      if (i < 0) continue;
      const double b = gmax - v;
      if (b > 0.0) {
        double a = kernel(i, i) + kernel(t, t) - 2.0 * kernel(i, t);
        if (a <= 0.0) a = kTau;
        const double obj = -(b * b) / a;
        if (obj <= best_obj) {
          best_obj = obj;
          j = t;
        }
      }
    }
    sol.kkt_gap = (i < 0 || !std::isfinite(gmin)) ? 0.0 : gmax - gmin;
    if (i < 0 || j < 0 || sol.kkt_gap < opts.tol) {
      sol.converged = true;
      break;
    }
    if (sol.iterations >= opts.max_iters) break;
    ++sol.iterations;

    const double yi = y(i);
    const double yj = y(j);
    const double qij = yi * yj * kernel(i, j);
    const double old_i = alpha(i);
    const double old_j = alpha(j);
    if (yi != yj) {
      double quad = kernel(i, i) + kernel(j, j) + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad(i) - grad(j)) / quad;
      const double diff = alpha(i) - alpha(j);
      alpha(i) += delta;
      alpha(j) += delta;
      if (diff > 0.0) {
        if (alpha(j) < 0.0) {
          alpha(j) = 0.0;
          alpha(i) = diff;
        }
      } else if (alpha(i) < 0.0) {
        alpha(i) = 0.0;
        alpha(j) = -diff;
      }
      if (diff > 0.0) {
        if (alpha(i) > C) {
          alpha(i) = C;
          alpha(j) = C - diff;
        }
      } else if (alpha(j) > C) {
        alpha(j) = C;
        alpha(i) = C + diff;
      }
    } else {
      double quad = kernel(i, i) + kernel(j, j) - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad(i) - grad(j)) / quad;
      const double sum = alpha(i) + alpha(j);
      alpha(i) -= delta;
      alpha(j) += delta;
      if (sum > C) {
        if (alpha(i) > C) {
          alpha(i) = C;
          alpha(j) = sum - C;
        }
      } else if (alpha(j) < 0.0) {
        alpha(j) = 0.0;
        alpha(i) = sum;
      }
      if (sum > C) {
        if (alpha(j) > C) {
          alpha(j) = C;
          alpha(i) = sum - C;
        }
      } else if (alpha(i) < 0.0) {
        alpha(i) = 0.0;
        alpha(j) = sum;
      }
    }

    const double di = alpha(i) - old_i;
    const double dj = alpha(j) - old_j;
    for (Eigen::Index k = 0; k < n; ++k) {
      grad(k) += y(k) * (yi * kernel(i, k) * di + yj * kernel(j, k) * dj);
    }
  }

  // Bias from free vectors, or the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  int free_count = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y(t) * grad(t);
    if (is_upper(alpha(t))) {
      if (y(t) < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (is_lower(alpha(t))) {
      if (y(t) > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++free_count;
      free_sum += yg;
    }
  }
  double rho = 0.0;
  if (free_count > 0) {
    rho = free_sum / free_count;
  } else if (std::isfinite(ub) && std::isfinite(lb)) {
    rho = 0.5 * (ub + lb);
  } else if (std::isfinite(ub)) {
    rho = ub;
  } else if (std::isfinite(lb)) {
    rho = lb;
  }
  sol.bias = -rho;
  return sol;
}

Matrix squared_distances(const Matrix& a, const Matrix& b) {
  const Vector na = a.rowwise().squaredNorm();
  const Vector nb = b.rowwise().squaredNorm();
  Matrix d = -2.0 * (a * b.transpose());
  d.colwise() += na;
  d.rowwise() += nb.transpose();
  return d.cwiseMax(0.0);
}

Matrix rbf_kernel(const Matrix& a, const Matrix& b, double gamma) {
  return (-gamma * squared_distances(a, b)).array().exp().matrix();
}

RbfSvm::RbfSvm(Matrix support, Vector coef, double bias, double gamma, bool converged)
    : support_(std::move(support)),
      coef_(std::move(coef)),
      bias_(bias),
      gamma_(gamma),
      converged_(converged) {}

double RbfSvm::decision(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  double sum = bias_;
  for (Eigen::Index i = 0; i < support_.rows(); ++i) {
    sum += coef_(i) * std::exp(-gamma_ * (support_.row(i) - x).squaredNorm());
  }
  return sum;
}

Vector RbfSvm::decision(const Matrix& xs) const {
  if (support_.rows() == 0) return Vector::Constant(xs.rows(), bias_);
  Vector out = rbf_kernel(xs, support_, gamma_) * coef_;
  out.array() += bias_;
  return out;
}

int RbfSvm::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  return decision(x) >= 0.0 ? 1 : -1;
}

std::vector<int> RbfSvm::predict(const Matrix& xs) const {
  const Vector d = decision(xs);
  std::vector<int> out(static_cast<std::size_t>(d.size()));
  for (Eigen::Index i = 0; i < d.size(); ++i) out[static_cast<std::size_t>(i)] = d(i) >= 0.0 ? 1 : -1;
  return out;
}

RbfSvm train_rbf_svm(const Matrix& features, std::span<const int> labels, double C, double gamma,
                     const SmoOptions& opts) {
  const Eigen::Index n = features.rows();
  if (n < 2) throw DataError("svm needs at least two training points");
  check_labels(labels, n);
  const bool has_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
  const bool has_neg = std::find(labels.begin(), labels.end(), -1) != labels.end();
  if (!has_pos || !has_neg) throw DataError("svm needs both classes present");
  if (!(C > 0.0)) throw ConfigError("svm C must be > 0");
  if (!(gamma > 0.0)) throw ConfigError("svm gamma must be > 0");

  const SmoSolution sol = solve_smo(rbf_kernel(features, features, gamma), labels, C, opts);

  std::vector<Eigen::Index> sv;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (sol.alpha(i) > 0.0) sv.push_back(i);
  }
  Matrix support(static_cast<Eigen::Index>(sv.size()), features.cols());
  Vector coef(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t k = 0; k < sv.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    support.row(r) = features.row(sv[k]);
    coef(r) = sol.alpha(sv[k]) * labels[static_cast<std::size_t>(sv[k])];
  }
  return RbfSvm(std::move(support), std::move(coef), sol.bias, gamma, sol.converged);
}

}  // namespace vecdenoise::svm
