#include "vecdenoise_cli/cli.hpp"

#include <algorithm>
#include <ostream>

#include "CLI11.hpp"
#include "vecdenoise/pipeline.hpp"
#include "vecdenoise/types.hpp"

namespace vecdenoise::cli {

namespace {

struct Override {
  std::string key;
  std::string value;
};

// "--key=value" or "--key value"; dashes in keys become underscores.
std::vector<Override> parse_overrides(const std::vector<std::string>& extras) {
  std::vector<Override> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.size() == 2) {
      throw ConfigError("unexpected argument '" + arg + "'");
    }
    std::string key = arg.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else if (i + 1 < extras.size() && extras[i + 1].rfind("--", 0) != 0) {
      value = extras[++i];
    } else {
      throw ConfigError("option '--" + key + "' needs a value");
    }
    std::replace(key.begin(), key.end(), '-', '_');
    out.push_back({std::move(key), std::move(value)});
  }
  return out;
}

constexpr const char* kCommands[] = {"learn-dict", "encode", "train", "denoise",
                                     "eval", "sweep", "depth-sweep", "synth"};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse-coding denoiser for word embeddings"};
  app.name("vecdenoise");
  app.require_subcommand(1);

  std::string config_path;
  for (const char* name : kCommands) {
    auto* sub = app.add_subcommand(name);
    sub->allow_extras();
    sub->add_option("-c,--config", config_path, "settings file (key = value per line)");
    sub->footer("Any setting may also be given as --key value or --key=value.");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return pipeline::kExitUsage;
  }

  const CLI::App* sub = app.get_subcommands().front();
  const auto command = pipeline::parse_command(sub->get_name());

  pipeline::PipelineConfig cfg;
  try {
    auto settings = config_path.empty() ? pipeline::Config{} : pipeline::Config::load(config_path);
    for (auto& o : parse_overrides(sub->remaining())) settings.set(o.key, std::move(o.value));
    cfg = pipeline::PipelineConfig::from(settings);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return pipeline::kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return pipeline::kExitData;
  }
  return pipeline::run_pipeline(*command, cfg, err);
}

}  // namespace vecdenoise::cli
