#include "vecdenoise/sparse_code.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace vecdenoise::sparse {

namespace {

// Cyclic coordinate descent on ||x - Dz||^2 + lambda |z|_1 given G = D'D and
// b = D'x, warm-started from `z`. Returns (converged, sweeps).
std::pair<bool, int> coordinate_descent(const Matrix& gram, const Vector& b, double lambda,
                                        const LassoConfig& cfg, Eigen::Ref<Vector> z) {
  const Eigen::Index k = gram.rows();
  const double threshold = 0.5 * lambda;
  Vector gz = gram * z;
  for (int sweep = 1; sweep <= cfg.max_iters; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      const double gjj = gram(j, j);
      const double old = z(j);
      double updated = 0.0;
      if (gjj > 0.0) {
        const double c = b(j) - gz(j) + gjj * old;
        updated = soft_threshold(c, threshold) / gjj;
      }
      const double delta = updated - old;
      if (delta != 0.0) {
        z(j) = updated;
        gz.noalias() += gram.col(j) * delta;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    gz.noalias() = gram * z;  // drop accumulated drift
    if (max_change <= cfg.tol) return {true, sweep};
  }
  return {false, cfg.max_iters};
}

Vector normalized_gaussian(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  double norm = 0.0;
  while (norm == 0.0) {
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
    norm = v.norm();
  }
  return v / norm;
}

Matrix project_columns(Matrix atoms) {
  for (Eigen::Index j = 0; j < atoms.cols(); ++j) {
    const double norm = atoms.col(j).norm();
    if (norm > 1.0) atoms.col(j) /= norm;
  }
  return atoms;
}

}  // namespace

Dictionary::Dictionary(Matrix atoms) : atoms_(std::move(atoms)) {
  if (!atoms_.allFinite()) throw DataError("dictionary contains non-finite values");
  for (Eigen::Index j = 0; j < atoms_.cols(); ++j) {
    const double norm = atoms_.col(j).norm();
    if (norm > 1.0 + kNormSlack) {
      throw DataError("dictionary atom " + std::to_string(j) + " has norm " + std::to_string(norm) +
                      " > 1");
    }
  }
}

void LassoConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
  if (max_iters < 1) throw ConfigError("lasso max_iters must be >= 1");
  if (!(tol > 0.0)) throw ConfigError("lasso tol must be > 0");
}

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

LassoResult lasso_encode(const Eigen::Ref<const Vector>& x, const Dictionary& dict,
                         const LassoConfig& cfg) {
  cfg.validate();
  if (x.size() != dict.dim()) {
    throw DataError("input length " + std::to_string(x.size()) + " != dictionary rows " +
                    std::to_string(dict.dim()));
  }
  if (!x.allFinite()) throw DataError("lasso input contains non-finite values");
  const Matrix gram = dict.atoms().transpose() * dict.atoms();
  const Vector b = dict.atoms().transpose() * x;
  LassoResult result;
  result.code = Vector::Zero(dict.atom_count());
  auto [converged, sweeps] = coordinate_descent(gram, b, cfg.lambda, cfg, result.code);
  result.converged = converged;
  result.iterations = sweeps;
  return result;
}

SparseCodeMatrix encode_all(const Matrix& X, const Dictionary& dict, const LassoConfig& cfg) {
  cfg.validate();
  if (X.cols() != dict.dim()) {
    throw DataError("embedding dim " + std::to_string(X.cols()) + " != dictionary rows " +
                    std::to_string(dict.dim()));
  }
  const Matrix gram = dict.atoms().transpose() * dict.atoms();
  const Matrix b_all = X * dict.atoms();  // row i = (D^T x_i)^T
  SparseCodeMatrix out;
  out.lambda = cfg.lambda;
  out.codes = Matrix::Zero(X.rows(), dict.atom_count());
  Vector z(dict.atom_count());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    z.setZero();
    const Vector b = b_all.row(i).transpose();
    auto [converged, sweeps] = coordinate_descent(gram, b, cfg.lambda, cfg, z);
    (void)sweeps;
    if (!converged) ++out.unconverged_rows;
    out.codes.row(i) = z.transpose();
  }
  return out;
}

SparseCodeMatrix encode_all(const io::EmbeddingMatrix& emb, const Dictionary& dict,
                            const LassoConfig& cfg) {
  return encode_all(emb.data(), dict, cfg);
}

double sparse_objective(const Matrix& X, const Dictionary& dict, const Matrix& Z, double lambda) {
  const Matrix residual = X - Z * dict.atoms().transpose();
  return residual.squaredNorm() + lambda * Z.cwiseAbs().sum();
}

DictionaryFit learn_dictionary(const Matrix& X, Eigen::Index atoms, const LassoConfig& cfg,
                               int outer_iters, std::uint64_t seed) {
  cfg.validate();
  if (atoms < 1) throw ConfigError("dictionary needs at least one atom");
  if (X.rows() < 1) throw DataError("dictionary learning needs at least one input row");
  if (outer_iters < 1) throw ConfigError("dictionary outer iterations must be >= 1");

  const Eigen::Index n = X.rows();
  const Eigen::Index dim = X.cols();
  std::mt19937_64 rng(seed);

  // Seed atoms from distinct data rows, then Gaussian directions.
  Matrix D(dim, atoms);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  for (Eigen::Index j = 0; j < atoms; ++j) {
    if (j < n) {
      const Vector row = X.row(order[static_cast<std::size_t>(j)]).transpose();
      const double norm = row.norm();
      D.col(j) = norm > 0.0 ? Vector(row / norm) : normalized_gaussian(dim, rng);
    } else {
      D.col(j) = normalized_gaussian(dim, rng);
    }
  }

  DictionaryFit fit;
  fit.underdetermined = atoms > n && cfg.lambda == 0.0;
  Matrix Z = Matrix::Zero(n, atoms);

  for (int iter = 0; iter < outer_iters; ++iter) {
    // (a) codes, warm-started so the objective cannot increase
    const Matrix gram = D.transpose() * D;
    const Matrix b_all = X * D;
    for (Eigen::Index i = 0; i < n; ++i) {
      Vector z = Z.row(i).transpose();
      const Vector b = b_all.row(i).transpose();
      coordinate_descent(gram, b, cfg.lambda, cfg, z);
      Z.row(i) = z.transpose();
    }

    // (b) one block-coordinate pass over atoms with codes fixed
    const Matrix A = Z.transpose() * Z;  // K x K
    const Matrix B = X.transpose() * Z;  // L x K
    std::vector<Eigen::Index> dead;
    for (Eigen::Index j = 0; j < atoms; ++j) {
      if (A(j, j) <= 0.0) {
        dead.push_back(j);
        continue;
      }
      Vector u = D.col(j) + (B.col(j) - D * A.col(j)) / A(j, j);
      const double norm = u.norm();
      if (norm > 1.0) u /= norm;
      D.col(j) = u;
    }

    if (!dead.empty()) {
      // Codes of dead atoms are zero, so replacing them leaves the objective unchanged.
      const Vector residual = (X - Z * D.transpose()).rowwise().squaredNorm();
      std::vector<Eigen::Index> worst(static_cast<std::size_t>(n));
      std::iota(worst.begin(), worst.end(), Eigen::Index{0});
      std::stable_sort(worst.begin(), worst.end(),
                       [&](Eigen::Index a, Eigen::Index b) { return residual(a) > residual(b); });
      std::size_t next = 0;
      for (Eigen::Index j : dead) {
        while (next < worst.size() && X.row(worst[next]).norm() == 0.0) ++next;
        if (next >= worst.size()) break;
        D.col(j) = X.row(worst[next]).transpose() / X.row(worst[next]).norm();
        ++next;
        ++fit.reseeded_atoms;
      }
    }

    fit.objective.push_back(sparse_objective(X, Dictionary(project_columns(D)), Z, cfg.lambda));
  }

  fit.dictionary = Dictionary(project_columns(std::move(D)));
  fit.codes = std::move(Z);
  return fit;
}

DictionaryFit learn_dictionary(const io::EmbeddingMatrix& emb, Eigen::Index atoms,
                               const LassoConfig& cfg, int outer_iters, std::uint64_t seed) {
  return learn_dictionary(emb.data(), atoms, cfg, outer_iters, seed);
}

SpectralBound spectral_upper_bound(const Dictionary& dict, double safety, double tol,
                                   int max_iters, std::uint64_t seed) {
  return spectral_upper_bound(dict.atoms(), safety, tol, max_iters, seed);
}

SpectralBound spectral_upper_bound(const Matrix& D, double safety, double tol, int max_iters,
                                   std::uint64_t seed) {
  if (!(safety > 1.0)) throw ConfigError("spectral safety factor must be > 1");
  if (!(tol > 0.0)) throw ConfigError("spectral tolerance must be > 0");
  if (!D.allFinite()) throw DataError("spectral bound of a non-finite matrix");
  const Matrix gram = D.rows() < D.cols() ? Matrix(D * D.transpose()) : Matrix(D.transpose() * D);

  SpectralBound out;
  if (gram.size() == 0 || gram.cwiseAbs().maxCoeff() == 0.0) {
    out.value = safety * tol;
    out.degenerate = true;
    out.converged = true;
    return out;
  }

  std::mt19937_64 rng(seed);
  Vector v = normalized_gaussian(gram.rows(), rng);
  double estimate = 0.0;
  for (int it = 1; it <= max_iters; ++it) {
    const Vector w = gram * v;
    const double rayleigh = v.dot(w);
    const double norm = w.norm();
    out.iterations = it;
    if (norm == 0.0) {
      // Start vector landed in the null space; restart from a fresh direction.
      v = normalized_gaussian(gram.rows(), rng);
      continue;
    }
    v = w / norm;
    const bool settled = it > 1 && std::abs(rayleigh - estimate) <= tol * std::abs(rayleigh);
    estimate = rayleigh;
    if (settled) {
      out.converged = true;
      break;
    }
  }
  out.lambda_max = estimate;
  out.value = safety * estimate;
  return out;
}

}  // namespace vecdenoise::sparse
