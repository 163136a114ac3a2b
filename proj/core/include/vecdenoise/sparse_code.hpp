#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "vecdenoise/embed_io.hpp"
#include "vecdenoise/types.hpp"

namespace vecdenoise::sparse {

/// L x K matrix of atoms (columns), each with Euclidean norm <= 1.
class Dictionary {
 public:
  static constexpr double kNormSlack = 1e-12;

  Dictionary() = default;
  /// Throws DataError if an entry is non-finite or a column norm exceeds 1 + 1e-12.
  explicit Dictionary(Matrix atoms);

  const Matrix& atoms() const { return atoms_; }
  Eigen::Index dim() const { return atoms_.rows(); }
  Eigen::Index atom_count() const { return atoms_.cols(); }

 private:
  Matrix atoms_;
};

struct LassoConfig {
  double lambda = 1e-6;   // l1 weight
  int max_iters = 1000;   // coordinate-descent sweeps
  double tol = 1e-10;     // stop when no coordinate moves more than this in a sweep

  void validate() const;
};

/// sign(v) * max(|v| - t, 0)
double soft_threshold(double v, double t);

struct LassoResult {
  Vector code;
  bool converged = false;
  int iterations = 0;
};

/// Minimizes ||x - D z||_2^2 + lambda ||z||_1 by cyclic coordinate descent.
/// There is no 1/2 on the quadratic term, so each coordinate is thresholded at
/// lambda / 2. On hitting max_iters the last iterate is returned with
/// converged == false.
LassoResult lasso_encode(const Eigen::Ref<const Vector>& x, const Dictionary& dict,
                         const LassoConfig& cfg);

struct SparseCodeMatrix {
  Matrix codes;  // V x K
  double lambda = 0.0;
  std::size_t unconverged_rows = 0;
};

/// Row i of the result is lasso_encode(X.row(i)). Rows are independent.
SparseCodeMatrix encode_all(const Matrix& X, const Dictionary& dict, const LassoConfig& cfg);
SparseCodeMatrix encode_all(const io::EmbeddingMatrix& emb, const Dictionary& dict,
                            const LassoConfig& cfg);

/// sum_i ||x_i - D z_i||_2^2 + lambda ||z_i||_1
double sparse_objective(const Matrix& X, const Dictionary& dict, const Matrix& Z, double lambda);

struct DictionaryFit {
  Dictionary dictionary;
  Matrix codes;                    // codes from the last encoding phase
  std::vector<double> objective;   // full objective after each outer iteration
  std::size_t reseeded_atoms = 0;  // total dead-atom re-seeds
  bool underdetermined = false;    // K > V with lambda == 0
};

/// Alternating minimization: warm-started lasso encoding of every row, then
/// one block-coordinate pass over the atoms with projection onto the unit
/// ball. Atoms whose coefficient column is entirely zero are re-seeded to the
/// worst-reconstructed rows. The objective is non-increasing per iteration.
DictionaryFit learn_dictionary(const Matrix& X, Eigen::Index atoms, const LassoConfig& cfg,
                               int outer_iters, std::uint64_t seed);
DictionaryFit learn_dictionary(const io::EmbeddingMatrix& emb, Eigen::Index atoms,
                               const LassoConfig& cfg, int outer_iters, std::uint64_t seed);

struct SpectralBound {
  double value = 0.0;       // safety * lambda_max estimate
  double lambda_max = 0.0;  // power-iteration estimate of lambda_max(D^T D)
  int iterations = 0;
  bool converged = false;
  bool degenerate = false;  // D == 0; value is safety * tol
};

/// Power iteration on the smaller of D^T D and D D^T (same nonzero spectrum).
/// The Rayleigh quotient never exceeds lambda_max, so with a converged
/// estimate safety > 1 gives a strict upper bound.
SpectralBound spectral_upper_bound(const Dictionary& dict, double safety = 1.01,
                                   double tol = 1e-12, int max_iters = 1000,
                                   std::uint64_t seed = 0x5eed);
/// Same bound for an arbitrary matrix (atoms need not lie in the unit ball).
SpectralBound spectral_upper_bound(const Matrix& D, double safety = 1.01, double tol = 1e-12,
                                   int max_iters = 1000, std::uint64_t seed = 0x5eed);

}  // namespace vecdenoise::sparse
