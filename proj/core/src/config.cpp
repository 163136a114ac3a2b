#include "vecdenoise/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>

#include "vecdenoise/embed_io.hpp"
#include "vecdenoise/types.hpp"

namespace vecdenoise::pipeline {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

const std::vector<std::string>& Config::known_keys() {
  static const std::vector<std::string> keys = {
      // input / output
      "input", "input_format", "lowercase", "out_dir", "precision",
      // explicit artifact paths (default to out_dir/<fixed name>)
      "dict", "codes", "filter",
      // dictionary learning and encoding
      "atoms", "gamma", "lambda", "dict_iters", "lasso_max_iters", "lasso_tol", "seed",
      // denoiser training
      "mode", "depth", "alpha", "batch_size", "epochs", "adadelta_rho", "adadelta_eps",
      "dropout_in", "dropout_out", "patience", "min_improvement", "spectral_safety",
      // evaluation
      "eval_input", "eval_format", "eval_lowercase", "similarity", "multiple_choice", "np",
      "np_inner_folds",
      // sweeps
      "sweep_lambdas", "sweep_gammas", "dev", "depths", "depth_eval", "depth_eval_kind",
      // synthetic benchmark
      "synth_vocab", "synth_dim", "synth_rank", "synth_sigma", "synth_pairs", "synth_questions",
  };
  return keys;
}

Config Config::parse(std::istream& in, const std::string& source) {
  Config cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = source + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    try {
      cfg.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse(in, path.string());
}

void Config::set(const std::string& key, std::string value) {
  const auto& keys = known_keys();
  if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
    throw ConfigError("unknown key '" + key + "'");
  }
  values_[key] = std::move(value);
}

bool Config::has(std::string_view key) const { return values_.find(key) != values_.end(); }

std::optional<std::string> Config::find(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string Config::get(std::string_view key, std::string_view fallback) const {
  auto v = find(key);
  return v ? *v : std::string(fallback);
}

double Config::get_double(std::string_view key, double fallback) const {
  auto v = find(key);
  if (!v) return fallback;
  try {
    return io::parse_number(*v);
  } catch (const DataError&) {
    throw ConfigError("key '" + std::string(key) + "' expects a number, got '" + *v + "'");
  }
}

long long Config::get_int(std::string_view key, long long fallback) const {
  auto v = find(key);
  if (!v) return fallback;
  double d = 0.0;
  try {
    d = io::parse_number(*v);
  } catch (const DataError&) {
    d = std::nan("");
  }
  if (!std::isfinite(d) || d != std::floor(d)) {
    throw ConfigError("key '" + std::string(key) + "' expects an integer, got '" + *v + "'");
  }
  return static_cast<long long>(d);
}

bool Config::get_bool(std::string_view key, bool fallback) const {
  auto v = find(key);
  if (!v) return fallback;
  const std::string s = io::to_lower(*v);
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ConfigError("key '" + std::string(key) + "' expects a boolean, got '" + *v + "'");
}

std::vector<std::string> Config::get_list(std::string_view key) const {
  std::vector<std::string> out;
  auto v = find(key);
  if (!v) return out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = v->find(',', start);
    std::string item = trim(std::string_view(*v).substr(
        start, comma == std::string::npos ? std::string::npos : comma - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<double> Config::get_double_list(std::string_view key,
                                            std::vector<double> fallback) const {
  if (!has(key)) return fallback;
  std::vector<double> out;
  for (const auto& item : get_list(key)) {
    try {
      out.push_back(io::parse_number(item));
    } catch (const DataError&) {
      throw ConfigError("key '" + std::string(key) + "' expects numbers, got '" + item + "'");
    }
  }
  return out;
}

}  // namespace vecdenoise::pipeline
