#include "vecdenoise/denoise_net.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

namespace vecdenoise::net {

namespace {

Matrix tanh_of(const Matrix& m) { return m.array().tanh().matrix(); }

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Matrix gather_rows(const Matrix& m, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = m.row(rows[r]);
  }
  return out;
}

// Inverted dropout mask: 0 with probability `rate`, else 1 / (1 - rate).
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return Matrix::Ones(rows, cols);
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  Matrix mask(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) mask(i, j) = keep(rng) ? scale : 0.0;
  }
  return mask;
}

}  // namespace

std::string_view to_string(Mode mode) {
  return mode == Mode::Complete ? "complete" : "overcomplete";
}

std::string_view to_string(Activation) { return "tanh"; }

Mode parse_mode(std::string_view name) {
  if (name == "complete") return Mode::Complete;
  if (name == "overcomplete") return Mode::Overcomplete;
  throw ConfigError("unknown mode '" + std::string(name) + "' (expected complete or overcomplete)");
}

void FilterParams::validate() const {
  if (S.rows() != Q.cols() || S.cols() != Q.cols()) {
    throw DataError("filter S is " + shape(S) + " but Q is " + shape(Q));
  }
  if (!Q.allFinite() || !S.allFinite()) throw DataError("filter parameters are non-finite");
  if (!(E > 0.0) || !std::isfinite(E)) throw DataError("filter spectral scalar E must be > 0");
  if (depth < 0) throw DataError("filter depth must be >= 0");
  for (Eigen::Index i = 0; i < S.rows(); ++i) {
    if (S(i, i) != 0.0) throw DataError("filter S has a nonzero diagonal");
    for (Eigen::Index j = i + 1; j < S.cols(); ++j) {
      if (std::abs(S(i, j) - S(j, i)) > 1e-12) throw DataError("filter S is not symmetric");
    }
  }
}

void enforce_inhibition_structure(Matrix& S) {
  for (Eigen::Index i = 0; i < S.rows(); ++i) {
    S(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < S.cols(); ++j) {
      const double avg = 0.5 * (S(i, j) + S(j, i));
      S(i, j) = avg;
      S(j, i) = avg;
    }
  }
}

FilterParams init_filter_params(const sparse::Dictionary& dict, double E, int depth, Mode mode) {
  if (!(E > 0.0) || !std::isfinite(E)) throw ConfigError("spectral scalar E must be > 0");
  if (depth < 0) throw ConfigError("filter depth must be >= 0");
  const Matrix& D = dict.atoms();
  FilterParams p;
  p.Q = D / E;
  p.S = Matrix::Identity(D.cols(), D.cols()) - (D.transpose() * D) / E;
  enforce_inhibition_structure(p.S);
  p.E = E;
  p.depth = depth;
  p.mode = mode;
  return p;
}

ForwardPass filter_forward(const Matrix& X, const FilterParams& params) {
  if (X.cols() != params.Q.rows()) {
    throw DataError("filter input has " + std::to_string(X.cols()) + " columns but Q has " +
                    std::to_string(params.Q.rows()) + " rows");
  }
  ForwardPass pass;
  pass.projected = X * params.Q;
  pass.activations.reserve(static_cast<std::size_t>(params.depth) + 1);
  pass.activations.push_back(tanh_of(pass.projected));
  for (int k = 0; k < params.depth; ++k) {
    Matrix pre = pass.projected;
    pre.noalias() += pass.activations.back() * params.S;
    pass.activations.push_back(tanh_of(pre));
  }
  return pass;
}

LossParts batch_loss(const Matrix& target, const Matrix& Y, const Matrix& S, double alpha) {
  if (target.rows() != Y.rows() || target.cols() != Y.cols()) {
    throw DataError("loss target is " + shape(target) + " but output is " + shape(Y));
  }
  LossParts parts;
  if (Y.rows() > 0) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < Y.rows(); ++i) {
      sum += 1.0 - cosine_similarity(target.row(i), Y.row(i)).value;
    }
    parts.mean_delta = sum / static_cast<double>(Y.rows());
  }
  parts.l1_S = S.cwiseAbs().sum();
  parts.total = parts.mean_delta + alpha * parts.l1_S;
  return parts;
}

Gradients compute_gradients(const Matrix& X, const Matrix& target, const FilterParams& params,
                            double alpha, const Matrix* output_mask) {
  const ForwardPass pass = filter_forward(X, params);
  const Eigen::Index rows = X.rows();
  const Eigen::Index m = params.output_dim();

  Matrix out = pass.output();
  if (output_mask) {
    if (output_mask->rows() != out.rows() || output_mask->cols() != out.cols()) {
      throw DataError("output mask is " + shape(*output_mask) + " but output is " + shape(out));
    }
    out = out.cwiseProduct(*output_mask);
  }

  Gradients g;
  g.loss = batch_loss(target, out, params.S, alpha);

  // d loss / d out, row by row: -(1/B) [t/(|t||y|) - cos y/|y|^2]
  Matrix grad = Matrix::Zero(rows, m);
  const double inv_b = rows > 0 ? 1.0 / static_cast<double>(rows) : 0.0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double nt = target.row(i).norm();
    const double ny = out.row(i).norm();
    if (nt < kZeroNorm || ny < kZeroNorm) continue;
    const double cos = target.row(i).dot(out.row(i)) / (nt * ny);
    grad.row(i) = -inv_b * (target.row(i) / (nt * ny) - (cos / (ny * ny)) * out.row(i));
  }
  if (output_mask) grad = grad.cwiseProduct(*output_mask);

  Matrix d_projected = Matrix::Zero(rows, m);
  Matrix dS_raw = Matrix::Zero(m, m);
  for (int k = params.depth; k >= 1; --k) {
    const Matrix& yk = pass.activations[static_cast<std::size_t>(k)];
    const Matrix& prev = pass.activations[static_cast<std::size_t>(k - 1)];
    const Matrix h = grad.array() * (1.0 - yk.array().square());
    d_projected += h;
    dS_raw.noalias() += prev.transpose() * h;
    grad = h * params.S.transpose();
  }
  const Matrix& y0 = pass.activations.front();
  d_projected.array() += grad.array() * (1.0 - y0.array().square());

  g.dQ = X.transpose() * d_projected;
  dS_raw += alpha * params.S.unaryExpr([](double s) { return s > 0.0 ? 1.0 : (s < 0.0 ? -1.0 : 0.0); });
  g.dS = dS_raw + dS_raw.transpose();
  g.dS.diagonal().setZero();
  return g;
}

void adadelta_update(Matrix& param, const Matrix& grad, AdadeltaState& state, double rho,
                     double eps) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols() ||
      state.grad_sq_avg.rows() != param.rows() || state.grad_sq_avg.cols() != param.cols() ||
      state.update_sq_avg.rows() != param.rows() || state.update_sq_avg.cols() != param.cols()) {
    throw DataError("adadelta shapes disagree: param " + shape(param) + ", grad " + shape(grad));
  }
  auto g2 = state.grad_sq_avg.array();
  auto u2 = state.update_sq_avg.array();
  const auto g = grad.array();
  g2 = rho * g2 + (1.0 - rho) * g.square();
  const Eigen::ArrayXXd delta = -((u2 + eps).sqrt() / (g2 + eps).sqrt()) * g;
  u2 = rho * u2 + (1.0 - rho) * delta.square();
  param.array() += delta;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (depth < 0) throw ConfigError("depth must be >= 0");
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  if (!(adadelta_rho > 0.0 && adadelta_rho < 1.0)) throw ConfigError("adadelta rho must be in (0,1)");
  if (!(adadelta_eps > 0.0)) throw ConfigError("adadelta eps must be > 0");
  if (!(dropout_in >= 0.0 && dropout_in < 1.0)) throw ConfigError("dropout_in must be in [0,1)");
  if (!(dropout_out >= 0.0 && dropout_out < 1.0)) throw ConfigError("dropout_out must be in [0,1)");
  if (!(spectral_safety > 1.0)) throw ConfigError("spectral safety must be > 1");
}

TrainResult train_denoiser(const Matrix& X, const sparse::Dictionary& dict, const Matrix* codes,
                           const TrainConfig& cfg) {
  cfg.validate();
  if (X.rows() < 1) throw DataError("training needs at least one embedding row");
  if (dict.dim() != X.cols()) {
    throw DataError("dictionary has " + std::to_string(dict.dim()) + " rows but embedding dim is " +
                    std::to_string(X.cols()));
  }
  const Matrix* target = &X;
  if (cfg.mode == Mode::Complete) {
    if (codes) throw ConfigError("complete mode takes no sparse codes");
    if (dict.atom_count() != X.cols()) {
      throw DataError("complete mode needs an L x L dictionary, got " + shape(dict.atoms()));
    }
  } else {
    if (!codes) throw ConfigError("overcomplete mode needs sparse codes");
    if (codes->rows() != X.rows() || codes->cols() != dict.atom_count()) {
      throw DataError("codes are " + shape(*codes) + ", expected " + std::to_string(X.rows()) +
                      "x" + std::to_string(dict.atom_count()));
    }
    target = codes;
  }

  TrainResult result;
  result.bound = sparse::spectral_upper_bound(dict, cfg.spectral_safety);
  result.params = init_filter_params(dict, result.bound.value, cfg.depth, cfg.mode);
  FilterParams& params = result.params;

  AdadeltaState q_state = AdadeltaState::zeros(params.Q.rows(), params.Q.cols());
  AdadeltaState s_state = AdadeltaState::zeros(params.S.rows(), params.S.cols());

  std::mt19937_64 rng(cfg.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(X.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double delta_sum = 0.0;
    int batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += batch, ++batch_no) {
      const std::vector<Eigen::Index> rows(
          order.begin() + static_cast<std::ptrdiff_t>(start),
          order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + batch)));
      Matrix xb = gather_rows(X, rows);
      const Matrix tb = gather_rows(*target, rows);
      xb = xb.cwiseProduct(dropout_mask(xb.rows(), xb.cols(), cfg.dropout_in, rng));
      const Matrix out_mask =
          dropout_mask(xb.rows(), params.output_dim(), cfg.dropout_out, rng);

      Gradients g = compute_gradients(xb, tb, params, cfg.alpha, &out_mask);
      if (!std::isfinite(g.loss.total) || !g.dQ.allFinite() || !g.dS.allFinite()) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_no));
      }
      delta_sum += g.loss.mean_delta * static_cast<double>(rows.size());

      adadelta_update(params.Q, g.dQ, q_state, cfg.adadelta_rho, cfg.adadelta_eps);
      adadelta_update(params.S, g.dS, s_state, cfg.adadelta_rho, cfg.adadelta_eps);
      enforce_inhibition_structure(params.S);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_delta = delta_sum / static_cast<double>(X.rows());
    stats.l1_S = params.S.cwiseAbs().sum();
    stats.total = stats.mean_delta + cfg.alpha * stats.l1_S;
    result.trace.push_back(stats);

    if (cfg.patience > 0) {
      if (best - stats.total < cfg.min_improvement) {
        if (++stale >= cfg.patience) {
          result.early_stopped = true;
          break;
        }
      } else {
        stale = 0;
      }
      best = std::min(best, stats.total);
    }
  }
  return result;
}

TrainResult train_denoiser(const io::EmbeddingMatrix& emb, const sparse::Dictionary& dict,
                           const sparse::SparseCodeMatrix* codes, const TrainConfig& cfg) {
  return train_denoiser(emb.data(), dict, codes ? &codes->codes : nullptr, cfg);
}

io::EmbeddingMatrix apply_denoising(const io::EmbeddingMatrix& emb, const FilterParams& params) {
  if (emb.dim() != params.input_dim()) {
    throw DataError("embedding dim " + std::to_string(emb.dim()) + " != filter input dim " +
                    std::to_string(params.input_dim()));
  }
  const double bound = std::nextafter(1.0, 0.0);
  Matrix out = tanh_of(emb.data() * params.Q).cwiseMax(-bound).cwiseMin(bound);
  return io::EmbeddingMatrix(emb.vocab(), std::move(out));
}

void write_filter_params(std::ostream& out, const FilterParams& params) {
  out << "# vecdenoise filter\n";
  out << "mode = " << to_string(params.mode) << '\n';
  out << "L = " << params.input_dim() << '\n';
  out << "M = " << params.output_dim() << '\n';
  out << "T = " << params.depth << '\n';
  out << "E = " << io::format_number(params.E) << '\n';
  out << "activation = " << to_string(params.activation) << '\n';
  out << "Q\n";
  io::write_matrix_text(out, params.Q);
  out << "S\n";
  io::write_matrix_text(out, params.S);
}

FilterParams read_filter_params(std::istream& in) {
  FilterParams p;
  long long L = -1;
  long long M = -1;
  bool have_E = false;
  bool have_T = false;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (line == "Q") {
      p.Q = io::parse_matrix_text(in);
      continue;
    }
    if (line == "S") {
      p.S = io::parse_matrix_text(in);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("malformed filter header line '" + line + "'");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "mode") {
      p.mode = parse_mode(value);
    } else if (key == "L") {
      L = static_cast<long long>(io::parse_number(value));
    } else if (key == "M") {
      M = static_cast<long long>(io::parse_number(value));
    } else if (key == "T") {
      p.depth = static_cast<int>(io::parse_number(value));
      have_T = true;
    } else if (key == "E") {
      p.E = io::parse_number(value);
      have_E = true;
    } else if (key == "activation") {
      if (value != "tanh") throw DataError("unsupported activation '" + value + "'");
    } else {
      throw DataError("unknown filter header key '" + key + "'");
    }
  }
  if (!have_E || !have_T || L < 0 || M < 0) throw DataError("filter header incomplete");
  if (p.Q.rows() != L || p.Q.cols() != M) {
    throw DataError("filter Q is " + shape(p.Q) + " but header says " + std::to_string(L) + "x" +
                    std::to_string(M));
  }
  p.validate();
  return p;
}

void save_filter_params(const std::filesystem::path& path, const FilterParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_filter_params(out, params);
  if (!out) throw DataError("write failed for " + path.string());
}

FilterParams load_filter_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return read_filter_params(in);
  } catch (const Error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_loss_trace(std::ostream& out, const std::vector<EpochStats>& trace) {
  out << "epoch,mean_delta,l1_S,total\n";
  for (const auto& s : trace) {
    out << s.epoch << ',' << io::format_number(s.mean_delta) << ',' << io::format_number(s.l1_S)
        << ',' << io::format_number(s.total) << '\n';
  }
}

}  // namespace vecdenoise::net
