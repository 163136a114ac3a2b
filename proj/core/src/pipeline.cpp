#include "vecdenoise/pipeline.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <ostream>
#include <utility>

#include "vecdenoise/eval.hpp"

namespace vecdenoise::pipeline {

namespace {

constexpr std::array<std::pair<std::string_view, Command>, 8> kCommands{{
    {"learn-dict", Command::LearnDict},
    {"encode", Command::Encode},
    {"train", Command::Train},
    {"denoise", Command::Denoise},
    {"eval", Command::Eval},
    {"sweep", Command::Sweep},
    {"depth-sweep", Command::DepthSweep},
    {"synth", Command::Synth},
}};

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::vector<std::filesystem::path> paths(const Config& cfg, std::string_view key) {
  std::vector<std::filesystem::path> out;
  for (const auto& item : cfg.get_list(key)) out.emplace_back(item);
  return out;
}

template <typename T>
T checked_positive(long long v, std::string_view key) {
  if (v < 1) throw ConfigError("key '" + std::string(key) + "' must be >= 1");
  return static_cast<T>(v);
}

io::EmbeddingMatrix load_input(const PipelineConfig& cfg) {
  if (cfg.input.empty()) throw ConfigError("no input embedding configured (key 'input')");
  if (!std::filesystem::exists(cfg.input)) {
    throw DataError("input embedding not found: " + cfg.input.string());
  }
  return io::load_embedding(cfg.input, cfg.input_format, cfg.lowercase);
}

sparse::DictionaryFit learn(const PipelineConfig& cfg, const io::EmbeddingMatrix& emb,
                            double lambda, Eigen::Index atoms) {
  sparse::LassoConfig lasso = cfg.lasso;
  lasso.lambda = lambda;
  return sparse::learn_dictionary(emb, atoms, lasso, cfg.dict_iters, cfg.seed);
}

void save_dictionary(const PipelineConfig& cfg, const sparse::DictionaryFit& fit,
                     const std::filesystem::path& dir, std::ostream& log) {
  io::save_matrix(dir / kDictFile, fit.dictionary.atoms());
  auto out = open_output(dir / kDictObjectiveFile);
  out << "iteration,objective\n";
  for (std::size_t i = 0; i < fit.objective.size(); ++i) {
    out << i + 1 << ',' << io::format_number(fit.objective[i]) << '\n';
  }
  log << "dictionary " << fit.dictionary.dim() << "x" << fit.dictionary.atom_count()
      << " lambda=" << io::format_number(cfg.lasso.lambda)
      << " final objective=" << (fit.objective.empty() ? 0.0 : fit.objective.back())
      << (fit.underdetermined ? " (underdetermined: K > V with lambda = 0)" : "") << '\n';
}

sparse::Dictionary obtain_dictionary(const PipelineConfig& cfg, const io::EmbeddingMatrix& emb,
                                     std::ostream& log) {
  if (cfg.dict_path) {
    if (!std::filesystem::exists(*cfg.dict_path)) {
      throw DataError("dictionary not found: " + cfg.dict_path->string());
    }
    return sparse::Dictionary(io::load_matrix(*cfg.dict_path));
  }
  auto fit = learn(cfg, emb, cfg.lasso.lambda, cfg.atom_count(emb.dim()));
  save_dictionary(cfg, fit, cfg.out_dir, log);
  return std::move(fit.dictionary);
}

sparse::SparseCodeMatrix obtain_codes(const PipelineConfig& cfg, const io::EmbeddingMatrix& emb,
                                      const sparse::Dictionary& dict, std::ostream& log) {
  if (cfg.codes_path) {
    if (!std::filesystem::exists(*cfg.codes_path)) {
      throw DataError("codes not found: " + cfg.codes_path->string());
    }
    auto codes = io::load_embedding(*cfg.codes_path, io::Format::Text);
    if (!(codes.vocab() == emb.vocab())) {
      throw DataError("codes vocabulary in " + cfg.codes_path->string() +
                      " does not match the input embedding");
    }
    return {codes.data(), cfg.lasso.lambda, 0};
  }
  auto codes = sparse::encode_all(emb, dict, cfg.lasso);
  io::save_embedding_text(cfg.artifact(kCodesFile), io::EmbeddingMatrix(emb.vocab(), codes.codes));
  log << "encoded " << codes.codes.rows() << " rows into " << codes.codes.cols()
      << " atoms; unconverged rows: " << codes.unconverged_rows << '\n';
  return codes;
}

net::TrainResult train_filter(const PipelineConfig& cfg, const io::EmbeddingMatrix& emb,
                              const sparse::Dictionary& dict,
                              const sparse::SparseCodeMatrix* codes, int depth) {
  net::TrainConfig tc = cfg.train;
  tc.depth = depth;
  return net::train_denoiser(emb, dict, tc.mode == net::Mode::Overcomplete ? codes : nullptr, tc);
}

void save_training(const PipelineConfig& cfg, const net::TrainResult& result, std::ostream& log) {
  net::save_filter_params(cfg.artifact(kFilterFile), result.params);
  auto out = open_output(cfg.artifact(kLossFile));
  net::write_loss_trace(out, result.trace);
  const auto& last = result.trace.back();
  log << "trained " << net::to_string(result.params.mode) << " filter L=" << result.params.input_dim()
      << " M=" << result.params.output_dim() << " T=" << result.params.depth << " over "
      << result.trace.size() << " epochs; final mean delta=" << last.mean_delta
      << (result.early_stopped ? " (early stop)" : "") << '\n';
}

double evaluate_kind(const io::EmbeddingMatrix& emb, EvalKind kind,
                     const std::filesystem::path& path, bool lowercase) {
  if (kind == EvalKind::Similarity) {
    return eval::evaluate_similarity(emb, eval::load_word_pairs(path, lowercase)).value;
  }
  return eval::evaluate_multiple_choice(emb, eval::load_multiple_choice(path, lowercase)).value;
}

std::string cell_name(double lambda, double gamma) {
  return "lambda_" + io::format_number(lambda) + "_gamma_" + io::format_number(gamma);
}

int run_learn_dict(const PipelineConfig& cfg, std::ostream& log) {
  const auto emb = load_input(cfg);
  auto fit = learn(cfg, emb, cfg.lasso.lambda, cfg.atom_count(emb.dim()));
  save_dictionary(cfg, fit, cfg.out_dir, log);
  return kExitOk;
}

int run_encode(const PipelineConfig& cfg, std::ostream& log) {
  const auto emb = load_input(cfg);
  PipelineConfig c = cfg;
  if (!c.dict_path) c.dict_path = cfg.artifact(kDictFile);
  const auto dict = obtain_dictionary(c, emb, log);
  c.codes_path.reset();
  obtain_codes(c, emb, dict, log);
  return kExitOk;
}

int run_train(const PipelineConfig& cfg, std::ostream& log) {
  const auto emb = load_input(cfg);
  const auto dict = obtain_dictionary(cfg, emb, log);
  std::optional<sparse::SparseCodeMatrix> codes;
  if (cfg.train.mode == net::Mode::Overcomplete) codes = obtain_codes(cfg, emb, dict, log);
  const auto result = train_filter(cfg, emb, dict, codes ? &*codes : nullptr, cfg.train.depth);
  save_training(cfg, result, log);
  return kExitOk;
}

int run_denoise(const PipelineConfig& cfg, std::ostream& log) {
  const auto emb = load_input(cfg);
  const auto filter_path = cfg.filter_path.value_or(cfg.artifact(kFilterFile));
  if (!std::filesystem::exists(filter_path)) {
    throw DataError("filter parameters not found: " + filter_path.string());
  }
  const auto params = net::load_filter_params(filter_path);
  const auto denoised = net::apply_denoising(emb, params);
  io::save_embedding_text(cfg.artifact(kDenoisedFile), denoised, cfg.precision);
  log << "wrote " << denoised.size() << "x" << denoised.dim() << " denoised embedding to "
      << cfg.artifact(kDenoisedFile).string() << '\n';
  return kExitOk;
}

int run_eval(const PipelineConfig& cfg, std::ostream& log) {
  io::EmbeddingMatrix emb;
  if (cfg.eval_input) {
    if (!std::filesystem::exists(*cfg.eval_input)) {
      throw DataError("evaluation embedding not found: " + cfg.eval_input->string());
    }
    emb = io::load_embedding(*cfg.eval_input, cfg.eval_format, cfg.lowercase);
  } else {
    emb = load_input(cfg);
  }
  std::vector<eval::EvalReport> reports;
  for (const auto& p : cfg.similarity) {
    reports.push_back(eval::evaluate_similarity(emb, eval::load_word_pairs(p, cfg.eval_lowercase)));
  }
  for (const auto& p : cfg.multiple_choice) {
    reports.push_back(
        eval::evaluate_multiple_choice(emb, eval::load_multiple_choice(p, cfg.eval_lowercase)));
  }
  for (const auto& p : cfg.np) {
    auto grid = eval::NPGrid::defaults();
    grid.inner_folds = cfg.np_inner_folds;
    grid.seed = cfg.seed;
    reports.push_back(
        eval::evaluate_np_bracketing(emb, eval::load_noun_phrases(p, cfg.eval_lowercase), grid)
            .report);
  }
  if (reports.empty()) throw ConfigError("no evaluation datasets configured");
  auto out = open_output(cfg.artifact(kReportFile));
  eval::write_reports_csv(out, reports);
  eval::write_reports_csv(log, reports);
  return kExitOk;
}

int run_sweep(const PipelineConfig& cfg, std::ostream& log) {
  if (!cfg.dev) throw ConfigError("sweep needs a development word-pair dataset (key 'dev')");
  const auto emb = load_input(cfg);
  const auto dev = eval::load_word_pairs(*cfg.dev, cfg.eval_lowercase);
  const auto sweep_root = cfg.out_dir / "sweep";

  auto evaluate = [&](double lambda, double gamma) {
    const auto dir = sweep_root / cell_name(lambda, gamma);
    std::filesystem::create_directories(dir);
    PipelineConfig c = cfg;
    c.out_dir = dir;
    c.lasso.lambda = lambda;
    c.gamma = gamma;
    c.atoms.reset();
    c.train.mode = net::Mode::Overcomplete;
    auto fit = learn(c, emb, lambda, c.atom_count(emb.dim()));
    save_dictionary(c, fit, dir, log);
    const auto codes = sparse::encode_all(emb, fit.dictionary, c.lasso);
    const auto result = train_filter(c, emb, fit.dictionary, &codes, c.train.depth);
    net::save_filter_params(dir / kFilterFile, result.params);
    const double rho = eval::evaluate_similarity(net::apply_denoising(emb, result.params), dev).value;
    log << "cell lambda=" << io::format_number(lambda) << " gamma=" << io::format_number(gamma)
        << " dev rho=" << rho << '\n';
    return rho;
  };

  const auto table = hyperparam_sweep(cfg.sweep_lambdas, cfg.sweep_gammas, evaluate);
  auto out = open_output(cfg.artifact(kSweepFile));
  write_sweep_csv(out, table);
  if (table.best) {
    const auto& b = table.cells[*table.best];
    log << "best: lambda=" << io::format_number(b.lambda) << " gamma=" << io::format_number(b.gamma)
        << " dev rho=" << *b.metric << '\n';
  }
  return kExitOk;
}

int run_depth_sweep(const PipelineConfig& cfg, std::ostream& log) {
  std::filesystem::path dataset;
  EvalKind kind = EvalKind::MultipleChoice;
  if (cfg.depth_eval) {
    dataset = *cfg.depth_eval;
    kind = cfg.depth_eval_kind.value_or(EvalKind::MultipleChoice);
  } else if (!cfg.multiple_choice.empty()) {
    dataset = cfg.multiple_choice.front();
  } else if (!cfg.similarity.empty()) {
    dataset = cfg.similarity.front();
    kind = EvalKind::Similarity;
  } else {
    throw ConfigError("depth-sweep needs an evaluation dataset (key 'depth_eval')");
  }
  if (!std::filesystem::exists(dataset)) throw DataError("dataset not found: " + dataset.string());

  const auto emb = load_input(cfg);
  const auto dict = obtain_dictionary(cfg, emb, log);
  std::optional<sparse::SparseCodeMatrix> codes;
  if (cfg.train.mode == net::Mode::Overcomplete) codes = obtain_codes(cfg, emb, dict, log);

  auto evaluate = [&](int depth) {
    const auto result = train_filter(cfg, emb, dict, codes ? &*codes : nullptr, depth);
    const double metric =
        evaluate_kind(net::apply_denoising(emb, result.params), kind, dataset, cfg.eval_lowercase);
    log << "depth " << depth << ": metric=" << metric << '\n';
    return metric;
  };
  const auto cells = depth_sweep(cfg.depths, evaluate);
  auto out = open_output(cfg.artifact(kDepthSweepFile));
  write_depth_csv(out, cells);
  return kExitOk;
}

int run_synth(const PipelineConfig& cfg, std::ostream& log) {
  const auto bench = synth::generate_synthetic_benchmark(cfg.synth);
  io::save_embedding_text(cfg.artifact("noisy.txt"), bench.noisy);
  io::save_embedding_text(cfg.artifact("clean.txt"), bench.clean);
  {
    auto out = open_output(cfg.artifact("pairs.tsv"));
    eval::write_word_pairs(out, bench.pairs);
  }
  {
    auto out = open_output(cfg.artifact("questions.tsv"));
    eval::write_multiple_choice(out, bench.questions);
  }
  log << "synthetic benchmark: V=" << cfg.synth.vocab << " L=" << cfg.synth.dim
      << " r=" << cfg.synth.rank << " sigma=" << cfg.synth.sigma << " -> "
      << bench.pairs.records.size() << " pairs, " << bench.questions.questions.size()
      << " questions\n";
  return kExitOk;
}

}  // namespace

std::optional<Command> parse_command(std::string_view name) {
  for (const auto& [n, c] : kCommands) {
    if (n == name) return c;
  }
  return std::nullopt;
}

std::string_view to_string(Command command) {
  for (const auto& [n, c] : kCommands) {
    if (c == command) return n;
  }
  return "unknown";
}

PipelineConfig PipelineConfig::from(const Config& cfg) {
  PipelineConfig p;
  p.input = cfg.get("input", "");
  p.input_format = io::parse_format(cfg.get("input_format", "text"));
  p.lowercase = cfg.get_bool("lowercase", false);
  p.out_dir = cfg.get("out_dir", ".");
  if (cfg.has("precision")) {
    const auto digits = cfg.get_int("precision", 6);
    if (digits < 0 || digits > 17) throw ConfigError("precision must be in [0, 17]");
    p.precision = static_cast<int>(digits);
  }
  if (auto v = cfg.find("dict")) p.dict_path = *v;
  if (auto v = cfg.find("codes")) p.codes_path = *v;
  if (auto v = cfg.find("filter")) p.filter_path = *v;

  if (cfg.has("atoms")) p.atoms = checked_positive<Eigen::Index>(cfg.get_int("atoms", 1), "atoms");
  p.gamma = cfg.get_double("gamma", p.gamma);
  if (!(p.gamma > 0.0)) throw ConfigError("gamma must be > 0");
  p.lasso.lambda = cfg.get_double("lambda", p.lasso.lambda);
  p.lasso.max_iters = checked_positive<int>(cfg.get_int("lasso_max_iters", p.lasso.max_iters),
                                            "lasso_max_iters");
  p.lasso.tol = cfg.get_double("lasso_tol", p.lasso.tol);
  p.lasso.validate();
  p.dict_iters = checked_positive<int>(cfg.get_int("dict_iters", p.dict_iters), "dict_iters");
  p.seed = static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<long long>(p.seed)));

  auto& t = p.train;
  t.mode = net::parse_mode(cfg.get("mode", "complete"));
  t.depth = static_cast<int>(cfg.get_int("depth", t.depth));
  t.alpha = cfg.get_double("alpha", t.alpha);
  t.batch_size = checked_positive<int>(cfg.get_int("batch_size", t.batch_size), "batch_size");
  t.epochs = checked_positive<int>(cfg.get_int("epochs", t.epochs), "epochs");
  t.adadelta_rho = cfg.get_double("adadelta_rho", t.adadelta_rho);
  t.adadelta_eps = cfg.get_double("adadelta_eps", t.adadelta_eps);
  t.dropout_in = cfg.get_double("dropout_in", t.dropout_in);
  t.dropout_out = cfg.get_double("dropout_out", t.dropout_out);
  t.patience = static_cast<int>(cfg.get_int("patience", t.patience));
  t.min_improvement = cfg.get_double("min_improvement", t.min_improvement);
  t.spectral_safety = cfg.get_double("spectral_safety", t.spectral_safety);
  t.seed = p.seed;
  t.validate();

  if (auto v = cfg.find("eval_input")) p.eval_input = *v;
  p.eval_format = io::parse_format(cfg.get("eval_format", "text"));
  p.eval_lowercase = cfg.get_bool("eval_lowercase", true);
  p.similarity = paths(cfg, "similarity");
  p.multiple_choice = paths(cfg, "multiple_choice");
  p.np = paths(cfg, "np");
  p.np_inner_folds = static_cast<int>(cfg.get_int("np_inner_folds", p.np_inner_folds));

  p.sweep_lambdas = cfg.get_double_list("sweep_lambdas", p.sweep_lambdas);
  p.sweep_gammas = cfg.get_double_list("sweep_gammas", p.sweep_gammas);
  for (double g : p.sweep_gammas) {
    if (!(g > 0.0)) throw ConfigError("sweep_gammas must all be > 0");
  }
  if (auto v = cfg.find("dev")) p.dev = *v;
  if (cfg.has("depths")) {
    p.depths.clear();
    for (double d : cfg.get_double_list("depths", {})) {
      if (d < 0 || d != std::floor(d)) throw ConfigError("depths must be non-negative integers");
      p.depths.push_back(static_cast<int>(d));
    }
    if (p.depths.empty()) throw ConfigError("depths must not be empty");
  }
  if (auto v = cfg.find("depth_eval")) p.depth_eval = *v;
  if (auto v = cfg.find("depth_eval_kind")) {
    if (*v == "similarity") {
      p.depth_eval_kind = EvalKind::Similarity;
    } else if (*v == "multiple_choice") {
      p.depth_eval_kind = EvalKind::MultipleChoice;
    } else {
      throw ConfigError("depth_eval_kind must be similarity or multiple_choice");
    }
  }

  auto& s = p.synth;
  s.vocab = checked_positive<std::size_t>(cfg.get_int("synth_vocab", static_cast<long long>(s.vocab)),
                                          "synth_vocab");
  s.dim = checked_positive<Eigen::Index>(cfg.get_int("synth_dim", s.dim), "synth_dim");
  s.rank = checked_positive<Eigen::Index>(cfg.get_int("synth_rank", s.rank), "synth_rank");
  s.sigma = cfg.get_double("synth_sigma", s.sigma);
  s.pairs = static_cast<std::size_t>(cfg.get_int("synth_pairs", static_cast<long long>(s.pairs)));
  s.questions =
      static_cast<std::size_t>(cfg.get_int("synth_questions", static_cast<long long>(s.questions)));
  s.seed = p.seed;
  return p;
}

Eigen::Index PipelineConfig::atom_count(Eigen::Index dim) const {
  if (train.mode == net::Mode::Complete) return dim;
  if (atoms) return *atoms;
  return std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(gamma * static_cast<double>(dim))));
}

SweepTable hyperparam_sweep(std::span<const double> lambdas, std::span<const double> gammas,
                            const SweepEvaluator& evaluate) {
  SweepTable table;
  for (double gamma : gammas) {
    for (double lambda : lambdas) {
      SweepCell cell{lambda, gamma, std::nullopt, {}};
      try {
        cell.metric = evaluate(lambda, gamma);
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      table.cells.push_back(std::move(cell));
    }
  }
  table.best = select_best_cell(table.cells);
  return table;
}

std::optional<std::size_t> select_best_cell(std::span<const SweepCell> cells) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    if (!c.metric || !std::isfinite(*c.metric)) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& b = cells[*best];
    if (*c.metric > *b.metric ||
        (*c.metric == *b.metric &&
         (c.gamma < b.gamma || (c.gamma == b.gamma && c.lambda < b.lambda)))) {
      best = i;
    }
  }
  return best;
}

void write_sweep_csv(std::ostream& out, const SweepTable& table) {
  out << "lambda,gamma,dev_metric,status,best\n";
  for (std::size_t i = 0; i < table.cells.size(); ++i) {
    const auto& c = table.cells[i];
    std::string status = c.metric ? "ok" : "error: " + c.error;
    for (auto& ch : status) {
      if (ch == ',' || ch == '\n' || ch == '\r') ch = ' ';
    }
    out << io::format_number(c.lambda) << ',' << io::format_number(c.gamma) << ','
        << (c.metric ? io::format_number(*c.metric) : std::string()) << ',' << status << ','
        << (table.best == i ? 1 : 0) << '\n';
  }
}

std::vector<DepthCell> depth_sweep(std::span<const int> depths, const DepthEvaluator& evaluate) {
  std::vector<DepthCell> cells;
  for (int depth : depths) {
    DepthCell cell{depth, std::nullopt, {}};
    try {
      if (depth < 0) throw ConfigError("depth must be >= 0");
      cell.metric = evaluate(depth);
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

void write_depth_csv(std::ostream& out, std::span<const DepthCell> cells) {
  out << "depth,metric,status\n";
  for (const auto& c : cells) {
    std::string status = c.metric ? "ok" : "error: " + c.error;
    for (auto& ch : status) {
      if (ch == ',' || ch == '\n' || ch == '\r') ch = ' ';
    }
    out << c.depth << ',' << (c.metric ? io::format_number(*c.metric) : std::string()) << ','
        << status << '\n';
  }
}

int run_pipeline(Command command, const PipelineConfig& cfg, std::ostream& log) {
  try {
    std::filesystem::create_directories(cfg.out_dir);
    switch (command) {
      case Command::LearnDict:
        return run_learn_dict(cfg, log);
      case Command::Encode:
        return run_encode(cfg, log);
      case Command::Train:
        return run_train(cfg, log);
      case Command::Denoise:
        return run_denoise(cfg, log);
      case Command::Eval:
        return run_eval(cfg, log);
      case Command::Sweep:
        return run_sweep(cfg, log);
      case Command::DepthSweep:
        return run_depth_sweep(cfg, log);
      case Command::Synth:
        return run_synth(cfg, log);
    }
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    log << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace vecdenoise::pipeline
