// Acceptance checks. Prints one PASS/FAIL/SKIPPED line per criterion and
// exits non-zero if any criterion fails.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "vecdenoise/denoise_net.hpp"
#include "vecdenoise/eval.hpp"
#include "vecdenoise/pipeline.hpp"
#include "vecdenoise/sparse_code.hpp"
#include "vecdenoise/svm.hpp"
#include "vecdenoise/synthetic.hpp"

namespace {

namespace fs = std::filesystem;
using namespace vecdenoise;
using Clock = std::chrono::steady_clock;

enum class Status { Pass, Fail, Skipped };

struct Outcome {
  Status status = Status::Pass;
  std::string detail;
};

Matrix gaussian(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = normal(rng);
  return m;
}

Matrix unit_columns(Matrix m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) m.col(j).normalize();
  return m;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

Outcome fail_if(bool bad, std::string detail) {
  return {bad ? Status::Fail : Status::Pass, std::move(detail)};
}

// The complete-mode dictionary the `train` command would learn.
sparse::Dictionary complete_dictionary(const io::EmbeddingMatrix& emb) {
  const pipeline::PipelineConfig defaults;
  return sparse::learn_dictionary(emb, emb.dim(), defaults.lasso, defaults.dict_iters, defaults.seed)
      .dictionary;
}

Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t entries = 0;
  const int depths[] = {0, 1, 3, 5};
  for (int i = 0; i < 20; ++i) {
    const auto mode = i % 2 == 0 ? net::Mode::Complete : net::Mode::Overcomplete;
    const Eigen::Index m = mode == net::Mode::Complete ? 5 : 10;
    const int depth = depths[(i / 2) % 4];
    const auto inst = oracle::random_grad_instance(8, 5, m, depth, mode, 1000 + i, i % 3 == 0);
    const auto res = oracle::check_gradients(inst, 0.5, 1e-6);
    worst = std::max(worst, res.max_rel_error);
    entries += res.entries;
  }
  const double secs = seconds_since(t0);
  return fail_if(!(worst < 1e-5) || secs >= 30.0,
                 "max relative error " + num(worst) + " over " + std::to_string(entries) +
                     " entries, " + num(secs) + " s");
}

Outcome lasso_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> lam(0.05, 2.0);
  double worst_closed = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix q = Eigen::HouseholderQR<Matrix>(gaussian(6, 6, rng)).householderQ() *
                     Matrix::Identity(6, 6);
    const Vector x = gaussian(6, 1, rng);
    const double lambda = lam(rng);
    const auto r = sparse::lasso_encode(x, sparse::Dictionary(q), {.lambda = lambda});
    const Vector b = q.transpose() * x;
    for (Eigen::Index j = 0; j < 6; ++j) {
      worst_closed = std::max(worst_closed, std::abs(r.code(j) - sparse::soft_threshold(b(j), lambda / 2)));
    }
  }
  double worst_gap = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix d = unit_columns(gaussian(3, 5, rng));
    const Vector x = gaussian(3, 1, rng);
    const double lambda = 0.1;
    const auto r = sparse::lasso_encode(x, sparse::Dictionary(d), {.lambda = lambda});
    const Vector ref = oracle::grid_lasso(x, d, lambda);
    const double gap = oracle::lasso_objective(x, d, r.code, lambda) -
                       oracle::lasso_objective(x, d, ref, lambda);
    worst_gap = std::max(worst_gap, std::abs(gap));
  }
  const double secs = seconds_since(t0);
  return fail_if(!(worst_closed <= 1e-8) || !(worst_gap < 1e-6) || secs >= 60.0,
                 "closed-form max error " + num(worst_closed) + ", grid objective gap " +
                     num(worst_gap) + ", " + num(secs) + " s");
}

Outcome lasso_kkt() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lam(1e-3, 2.0);
  std::uniform_int_distribution<int> dim(2, 12), atoms(2, 30);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix d = unit_columns(gaussian(dim(rng), atoms(rng), rng));
    const Vector x = gaussian(d.rows(), 1, rng);
    const double lambda = lam(rng);
    const auto r = sparse::lasso_encode(x, sparse::Dictionary(d), {.lambda = lambda, .max_iters = 100000});
    const Vector corr = d.transpose() * (x - d * r.code);
    for (Eigen::Index j = 0; j < r.code.size(); ++j) {
      const double v = r.code(j) == 0.0
                           ? std::abs(corr(j)) - lambda / 2
                           : std::abs(corr(j) - (lambda / 2) * (r.code(j) > 0 ? 1.0 : -1.0));
      worst = std::max(worst, v);
    }
  }
  return fail_if(!(worst <= 1e-6), "worst KKT violation " + num(worst) + " (limit 1e-6)");
}

Outcome dictionary_monotone() {
  double worst_rise = -std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    const Matrix x = gaussian(50, 10, rng);
    const auto fit = sparse::learn_dictionary(x, 20, {.lambda = 0.1, .max_iters = 1000}, 20, seed);
    for (std::size_t i = 1; i < fit.objective.size(); ++i) {
      worst_rise = std::max(worst_rise, fit.objective[i] - fit.objective[i - 1]);
    }
  }
  const Vector v{{3.0, -1.0, 2.0, 0.5, 1.5}};
  Matrix x(8, 5);
  for (int i = 0; i < 8; ++i) x.row(i) = v.transpose();
  const auto fit = sparse::learn_dictionary(x, 1, {.lambda = 1e-8}, 10, 1);
  const double err = (x - fit.codes * fit.dictionary.atoms().transpose()).norm();
  const double align = std::abs(fit.dictionary.atoms().col(0).dot(v.normalized()));
  return fail_if(!(worst_rise <= 1e-9) || !(err < 1e-6) || !(std::abs(align - 1.0) < 1e-9),
                 "largest objective increase " + num(worst_rise) + ", rank-1 error " + num(err) +
                     ", |cos(atom, v)| " + num(align));
}

Outcome spectral_bound() {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> rows(2, 50), cols(2, 500);
  double worst = 0.0;
  bool strict = true;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index r = trial == 0 ? 50 : rows(rng);
    const Eigen::Index c = trial == 0 ? 500 : cols(rng);
    const Matrix d = unit_columns(gaussian(r, c, rng));
    const auto b = sparse::spectral_upper_bound(d);
    const Matrix small = r <= c ? Matrix(d * d.transpose()) : Matrix(d.transpose() * d);
    const double ref = oracle::jacobi_eigenvalues(small).back();
    worst = std::max(worst, std::abs(b.lambda_max - ref) / ref);
    strict = strict && b.value > ref;
  }
  return fail_if(!(worst < 1e-6) || !strict,
                 "worst relative error " + num(worst) + (strict ? ", E > lambda_max on all" : ", E <= lambda_max seen"));
}

Outcome baseline_reproduction() {
  const char* glove = std::getenv("VECDENOISE_GLOVE");
  const char* ws353 = std::getenv("VECDENOISE_WS353");
  const char* toefl = std::getenv("VECDENOISE_TOEFL");
  if (!glove || !ws353 || !fs::exists(glove) || !fs::exists(ws353)) {
    return {Status::Skipped, "set VECDENOISE_GLOVE and VECDENOISE_WS353 (optional VECDENOISE_TOEFL)"};
  }
  const auto t0 = Clock::now();
  const auto emb = io::load_embedding(glove, io::Format::Glove);
  const auto ws = eval::evaluate_similarity(emb, eval::load_word_pairs(ws353));
  bool ok = std::abs(100.0 * ws.value - 52.9) <= 1.5;
  std::string detail = "WS353 rho " + num(100.0 * ws.value) + " (52.9 +/- 1.5, coverage " +
                       num(ws.coverage) + ")";
  if (toefl && fs::exists(toefl)) {
    const auto tf = eval::evaluate_multiple_choice(emb, eval::load_multiple_choice(toefl));
    ok = ok && std::abs(100.0 * tf.value - 82.2) <= 2.5;
    detail += ", TOEFL accuracy " + num(100.0 * tf.value) + " (82.2 +/- 2.5)";
  }
  const double secs = seconds_since(t0);
  detail += ", " + num(secs) + " s";
  return fail_if(!ok || secs >= 120.0, detail);
}

Outcome synthetic_improvement() {
  const auto t0 = Clock::now();
  const auto bench = synth::generate_synthetic_benchmark({});
  const auto dict = complete_dictionary(bench.noisy);
  net::TrainConfig cfg;
  cfg.depth = 3;
  const auto result = net::train_denoiser(bench.noisy, dict, nullptr, cfg);
  const double first = result.trace.front().mean_delta;
  const double last = result.trace.back().mean_delta;
  const double noisy_rho = eval::evaluate_similarity(bench.noisy, bench.pairs).value;
  const double denoised_rho =
      eval::evaluate_similarity(net::apply_denoising(bench.noisy, result.params), bench.pairs).value;
  const double secs = seconds_since(t0);
  const bool a = last <= 0.5 * first;
  const bool b = denoised_rho >= noisy_rho - 0.01;
  return fail_if(!a || !b || secs >= 300.0,
                 std::string("(a) ") + (a ? "ok" : "FAILS") + ": epoch " +
                     std::to_string(result.trace.size()) + " delta " + num(last) + " vs epoch 1 " +
                     num(first) + " (ratio " + num(last / first) + ", limit 0.5); (b) " +
                     (b ? "ok" : "FAILS") + ": denoised rho " + num(denoised_rho) + " vs noisy " +
                     num(noisy_rho) + "; " + num(secs) + " s");
}

Outcome depth_harness() {
  const auto bench = synth::generate_synthetic_benchmark({});
  const auto dict = complete_dictionary(bench.noisy);
  const std::vector<int> depths{0, 1, 2, 3, 4, 5, 6};
  const auto cells = pipeline::depth_sweep(depths, [&](int depth) {
    net::TrainConfig cfg;
    cfg.depth = depth;
    const auto r = net::train_denoiser(bench.noisy, dict, nullptr, cfg);
    return eval::evaluate_multiple_choice(net::apply_denoising(bench.noisy, r.params), bench.questions)
        .value;
  });
  bool complete = cells.size() == 7;
  double best = -1.0;
  std::string row;
  for (const auto& c : cells) {
    complete = complete && c.metric.has_value();
    if (c.metric) best = std::max(best, *c.metric);
    row += " T" + std::to_string(c.depth) + "=" + (c.metric ? num(*c.metric) : "error");
  }
  const bool ok = complete && cells.front().metric && best >= *cells.front().metric;
  return fail_if(!ok, "accuracy by depth:" + row);
}

Outcome spearman_correctness() {
  using V = std::vector<double>;
  double worst = 0.0;
  const auto check = [&](const V& a, const V& b, double expected) {
    worst = std::max(worst, std::abs(eval::spearman_rho(a, b).rho - expected));
  };
  check({1, 2, 3}, {1, 2, 3}, 1.0);
  check({1, 2, 3}, {3, 2, 1}, -1.0);
  check({1, 2, 2, 4}, {1, 2, 3, 4}, oracle::hand_spearman({1, 2, 2, 4}, {1, 2, 3, 4}));
  check({1, 2, 2, 4}, {1, 2, 3, 4}, 0.9487);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal;
  double worst_inv = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    V a(25), b(25), ta(25);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = std::round(normal(rng) * 3.0);  // ties are common
      b[i] = normal(rng);
      ta[i] = std::pow(a[i] + 20.0, 3.0) - 7.0;
    }
    worst_inv = std::max(worst_inv, std::abs(eval::spearman_rho(ta, b).rho - eval::spearman_rho(a, b).rho));
  }
  return fail_if(!(worst <= 1e-4) || !(worst_inv <= 1e-12),
                 "worst example error " + num(worst) + ", worst monotone-transform change " + num(worst_inv));
}

Outcome svm_correctness() {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> noise(0.0, 0.4);
  double worst_balance = 0.0, worst_gap = 0.0;
  bool bounds = true, converged = true;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 40;
    Matrix x(n, 3);
    std::vector<int> y;
    for (int i = 0; i < n; ++i) {
      const int label = i % 2 ? 1 : -1;
      for (int j = 0; j < 3; ++j) x(i, j) = noise(rng) + (j == 0 ? 2.0 * label : 0.0);
      y.push_back(label);
    }
    const double c = 1.0;
    const auto sol = svm::solve_smo(svm::rbf_kernel(x, x, 0.5), y, c);
    converged = converged && sol.converged;
    double balance = 0.0;
    for (int i = 0; i < n; ++i) {
      bounds = bounds && sol.alpha(i) >= 0.0 && sol.alpha(i) <= c;
      balance += sol.alpha(i) * y[static_cast<std::size_t>(i)];
    }
    worst_balance = std::max(worst_balance, std::abs(balance));
    worst_gap = std::max(worst_gap, sol.kkt_gap);
  }
  const Matrix xor_x{{0, 0}, {1, 1}, {0, 1}, {1, 0}};
  const std::vector<int> xor_y{-1, -1, 1, 1};
  const auto pred = svm::train_rbf_svm(xor_x, xor_y, 10.0, 1.0).predict(xor_x);
  int right = 0;
  for (std::size_t i = 0; i < 4; ++i) right += pred[i] == xor_y[i];
  const bool ok = bounds && converged && worst_balance <= 1e-6 && worst_gap <= 1e-3 && right == 4;
  return fail_if(!ok, "max |sum a_i y_i| " + num(worst_balance) + ", max KKT gap " + num(worst_gap) +
                          (bounds ? ", 0<=a<=C" : ", bound violated") + ", XOR " +
                          std::to_string(right) + "/4");
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "vecdenoise_acceptance_determinism";
  fs::remove_all(root);
  std::ostringstream log;
  pipeline::PipelineConfig base;
  base.out_dir = root / "data";
  base.synth.vocab = 500;
  base.synth.dim = 20;
  base.synth.rank = 5;
  if (pipeline::run_pipeline(pipeline::Command::Synth, base, log) != 0) {
    return {Status::Fail, "synth failed: " + log.str()};
  }
  std::vector<std::string> runs[2];
  for (int run = 0; run < 2; ++run) {
    auto cfg = base;
    cfg.input = root / "data" / "noisy.txt";
    cfg.out_dir = root / ("run" + std::to_string(run));
    cfg.train.epochs = 10;
    if (pipeline::run_pipeline(pipeline::Command::Train, cfg, log) != 0 ||
        pipeline::run_pipeline(pipeline::Command::Denoise, cfg, log) != 0) {
      return {Status::Fail, "pipeline failed: " + log.str()};
    }
    for (auto name : {pipeline::kDictFile, pipeline::kDictObjectiveFile, pipeline::kFilterFile,
                      pipeline::kLossFile, pipeline::kDenoisedFile}) {
      std::ifstream in(cfg.artifact(name), std::ios::binary);
      std::ostringstream bytes;
      bytes << in.rdbuf();
      runs[run].push_back(bytes.str());
    }
  }
  fs::remove_all(root);
  return fail_if(runs[0] != runs[1],
                 std::to_string(runs[0].size()) + " artifacts compared byte for byte");
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "gradient fidelity vs central differences", gradient_fidelity},
      {2, "lasso oracle equivalence", lasso_oracle},
      {3, "lasso KKT certificates", lasso_kkt},
      {4, "dictionary objective monotone, rank-1 recovery", dictionary_monotone},
      {5, "spectral bound vs dense eigen reference", spectral_bound},
      {6, "GloVe-100 baseline reproduction", baseline_reproduction},
      {7, "synthetic denoising improvement", synthetic_improvement},
      {8, "depth-sweep harness", depth_harness},
      {9, "Spearman correctness", spearman_correctness},
      {10, "SVM correctness", svm_correctness},
      {11, "end-to-end determinism", determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Status::Fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Fail ? "FAIL" : "SKIPPED";
    if (o.status == Status::Fail) ++failures;
    std::cout << tag << " [" << c.id << "] " << c.name << ": " << o.detail << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria met" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
