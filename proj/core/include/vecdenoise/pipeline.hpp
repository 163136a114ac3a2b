#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vecdenoise/config.hpp"
#include "vecdenoise/denoise_net.hpp"
#include "vecdenoise/embed_io.hpp"
#include "vecdenoise/sparse_code.hpp"
#include "vecdenoise/synthetic.hpp"

namespace vecdenoise::pipeline {

enum class Command { LearnDict, Encode, Train, Denoise, Eval, Sweep, DepthSweep, Synth };

std::optional<Command> parse_command(std::string_view name);
std::string_view to_string(Command command);

// Fixed artifact names under the output directory.
inline constexpr std::string_view kDictFile = "dict.txt";
inline constexpr std::string_view kDictObjectiveFile = "dict_objective.csv";
inline constexpr std::string_view kCodesFile = "codes.txt";
inline constexpr std::string_view kFilterFile = "filter.params";
inline constexpr std::string_view kLossFile = "loss.csv";
inline constexpr std::string_view kDenoisedFile = "denoised.txt";
inline constexpr std::string_view kReportFile = "report.csv";
inline constexpr std::string_view kSweepFile = "sweep.csv";
inline constexpr std::string_view kDepthSweepFile = "depth_sweep.csv";

enum class EvalKind { Similarity, MultipleChoice };

struct PipelineConfig {
  std::filesystem::path input;
  io::Format input_format = io::Format::Text;
  bool lowercase = false;
  std::filesystem::path out_dir = ".";
  std::optional<int> precision;  // denoised output digits; shortest round-trip when unset

  std::optional<std::filesystem::path> dict_path;
  std::optional<std::filesystem::path> codes_path;
  std::optional<std::filesystem::path> filter_path;

  std::optional<Eigen::Index> atoms;  // overrides gamma * L
  double gamma = 10.0;
  sparse::LassoConfig lasso{.lambda = 1e-6, .max_iters = 200, .tol = 1e-8};
  int dict_iters = 20;
  std::uint64_t seed = 1;

  net::TrainConfig train;

  std::optional<std::filesystem::path> eval_input;
  io::Format eval_format = io::Format::Text;
  bool eval_lowercase = true;
  std::vector<std::filesystem::path> similarity;
  std::vector<std::filesystem::path> multiple_choice;
  std::vector<std::filesystem::path> np;
  int np_inner_folds = 5;

  std::vector<double> sweep_lambdas{1.0, 0.5, 0.1, 1e-3, 1e-6};
  std::vector<double> sweep_gammas{2, 3, 5, 7, 10, 13, 15};
  std::optional<std::filesystem::path> dev;

  std::vector<int> depths{0, 1, 2, 3, 4, 5, 6};
  std::optional<std::filesystem::path> depth_eval;
  std::optional<EvalKind> depth_eval_kind;

  synth::SyntheticConfig synth;

  /// Throws ConfigError on malformed values.
  static PipelineConfig from(const Config& cfg);

  /// L in complete mode; otherwise `atoms` or round(gamma * L).
  Eigen::Index atom_count(Eigen::Index dim) const;
  std::filesystem::path artifact(std::string_view name) const { return out_dir / name; }
};

struct SweepCell {
  double lambda = 0.0;
  double gamma = 0.0;
  std::optional<double> metric;
  std::string error;
};

struct SweepTable {
  std::vector<SweepCell> cells;
  std::optional<std::size_t> best;
};

using SweepEvaluator = std::function<double(double lambda, double gamma)>;

/// Evaluates every (lambda, gamma) cell; a throwing cell is recorded with its
/// error and the sweep continues.
SweepTable hyperparam_sweep(std::span<const double> lambdas, std::span<const double> gammas,
                            const SweepEvaluator& evaluate);

/// Highest metric; ties go to smaller gamma, then smaller lambda.
std::optional<std::size_t> select_best_cell(std::span<const SweepCell> cells);

/// CSV "lambda,gamma,dev_metric,status,best".
void write_sweep_csv(std::ostream& out, const SweepTable& table);

struct DepthCell {
  int depth = 0;
  std::optional<double> metric;
  std::string error;
};

using DepthEvaluator = std::function<double(int depth)>;

std::vector<DepthCell> depth_sweep(std::span<const int> depths, const DepthEvaluator& evaluate);

/// CSV "depth,metric,status".
void write_depth_csv(std::ostream& out, std::span<const DepthCell> cells);

// Exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

/// Runs one command, writing artifacts under cfg.out_dir and progress to
/// `log`. Errors are reported on `log` and mapped to an exit status.
int run_pipeline(Command command, const PipelineConfig& cfg, std::ostream& log);

}  // namespace vecdenoise::pipeline
