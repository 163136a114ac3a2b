#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "vecdenoise/cosine.hpp"
#include "vecdenoise/embed_io.hpp"
#include "vecdenoise/sparse_code.hpp"
#include "vecdenoise/types.hpp"

namespace vecdenoise::net {

enum class Mode { Complete, Overcomplete };
enum class Activation { Tanh };

std::string_view to_string(Mode mode);
std::string_view to_string(Activation activation);
Mode parse_mode(std::string_view name);

/// Parameters of the depth-T recursive filter
///   Y(0) = tanh(X Q),  Y(k+1) = tanh(X Q + Y(k) S).
/// S is kept symmetric with an exactly zero diagonal.
struct FilterParams {
  Matrix Q;  // L x M
  Matrix S;  // M x M
  double E = 1.0;
  int depth = 3;
  Activation activation = Activation::Tanh;
  Mode mode = Mode::Complete;

  Eigen::Index input_dim() const { return Q.rows(); }
  Eigen::Index output_dim() const { return Q.cols(); }

  /// Throws DataError if shapes disagree, values are non-finite, E <= 0,
  /// depth < 0, or S is not symmetric with zero diagonal.
  void validate() const;
};

/// Symmetrize S in place and zero its diagonal.
void enforce_inhibition_structure(Matrix& S);

/// Q = D / E, S = I - D^T D / E, then S projected to symmetric/zero-diagonal.
FilterParams init_filter_params(const sparse::Dictionary& dict, double E, int depth,
                                Mode mode = Mode::Complete);

struct ForwardPass {
  Matrix projected;                // X Q, shared by every step
  std::vector<Matrix> activations; // Y(0) .. Y(T)

  const Matrix& output() const { return activations.back(); }
};

ForwardPass filter_forward(const Matrix& X, const FilterParams& params);

using vecdenoise::Cosine;
using vecdenoise::cosine_similarity;
using vecdenoise::kZeroNorm;

struct LossParts {
  double mean_delta = 0.0;  // mean over rows of 1 - cos(t_i, y_i)
  double l1_S = 0.0;        // sum |S_ij|
  double total = 0.0;       // mean_delta + alpha * l1_S
};

LossParts batch_loss(const Matrix& target, const Matrix& Y, const Matrix& S, double alpha);

struct Gradients {
  Matrix dQ;
  Matrix dS;  // symmetric, zero diagonal
  LossParts loss;
};

/// Exact gradients of batch_loss(target, output, S, alpha) by reverse
/// accumulation through the unrolled filter. `output_mask`, when given, is
/// multiplied into Y(T) before the loss (dropout on the output layer).
///
/// S is treated as a tied symmetric parameter: dS(i,j) is the derivative with
/// respect to the shared value of S(i,j) and S(j,i), i.e. raw(i,j) + raw(j,i).
Gradients compute_gradients(const Matrix& X, const Matrix& target, const FilterParams& params,
                            double alpha, const Matrix* output_mask = nullptr);

struct AdadeltaState {
  Matrix grad_sq_avg;
  Matrix update_sq_avg;

  static AdadeltaState zeros(Eigen::Index rows, Eigen::Index cols) {
    return {Matrix::Zero(rows, cols), Matrix::Zero(rows, cols)};
  }
};

inline constexpr double kAdadeltaRho = 0.95;
inline constexpr double kAdadeltaEps = 1e-6;

/// g2 <- rho g2 + (1-rho) g^2; d = -sqrt(u2+eps)/sqrt(g2+eps) g;
/// u2 <- rho u2 + (1-rho) d^2; param += d.
void adadelta_update(Matrix& param, const Matrix& grad, AdadeltaState& state,
                     double rho = kAdadeltaRho, double eps = kAdadeltaEps);

struct TrainConfig {
  double alpha = 0.5;
  int batch_size = 100;
  int epochs = 50;
  int depth = 3;
  double adadelta_rho = kAdadeltaRho;
  double adadelta_eps = kAdadeltaEps;
  double dropout_in = 0.5;
  double dropout_out = 0.2;
  std::uint64_t seed = 1;
  Mode mode = Mode::Complete;
  // Early stop once the epoch loss improves by less than min_improvement
  // for `patience` consecutive epochs. patience <= 0 disables it.
  int patience = 5;
  double min_improvement = 1e-5;
  double spectral_safety = 1.01;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double mean_delta = 0.0;
  double l1_S = 0.0;
  double total = 0.0;
};

struct TrainResult {
  FilterParams params;
  std::vector<EpochStats> trace;
  sparse::SpectralBound bound;
  bool early_stopped = false;
};

/// Complete mode: targets are the input rows, dictionary must be L x L,
/// `codes` must be null. Overcomplete mode: targets are the rows of `codes`
/// (V x K) and the dictionary is L x K.
TrainResult train_denoiser(const Matrix& X, const sparse::Dictionary& dict, const Matrix* codes,
                           const TrainConfig& cfg);
TrainResult train_denoiser(const io::EmbeddingMatrix& emb, const sparse::Dictionary& dict,
                           const sparse::SparseCodeMatrix* codes, const TrainConfig& cfg);

/// tanh(X Q) with the same vocabulary. Outputs are clamped strictly inside
/// (-1, 1) since tanh rounds to +-1 in double precision for |x| > ~19.
io::EmbeddingMatrix apply_denoising(const io::EmbeddingMatrix& emb, const FilterParams& params);

// Key-value header (mode, L, M, T, E, activation) followed by Q and S as
// text matrices.
void write_filter_params(std::ostream& out, const FilterParams& params);
FilterParams read_filter_params(std::istream& in);
void save_filter_params(const std::filesystem::path& path, const FilterParams& params);
FilterParams load_filter_params(const std::filesystem::path& path);

/// CSV "epoch,mean_delta,l1_S,total".
void write_loss_trace(std::ostream& out, const std::vector<EpochStats>& trace);

}  // namespace vecdenoise::net
