#include <CLI11.hpp>
#include <cstdio>
#include <json.hpp>
#include <string>

#include "poclab/experiments.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_given = false;
  unsigned jobs = 0;
};

int run_command(const CommonOptions& opts) {
  poclab::ExperimentConfig cfg = poclab::load_config(opts.config_path);
  if (opts.seed_given) cfg.seed = opts.seed;
  const poclab::ExperimentOutcome outcome =
      poclab::run_experiment(cfg, opts.out_dir, opts.jobs);
  for (const auto& check : outcome.checks) {
    std::printf("%-6s %s: %.6g %s %.6g\n", check.pass ? "PASS" : "FAIL",
                check.name.c_str(), check.value, check.comparison.c_str(),
                check.threshold);
  }
  std::printf("wrote %zu file(s) under %s\n", outcome.files_written.size(),
              opts.out_dir.c_str());
  return 0;
}

int derive_command(const CommonOptions& opts) {
  const poclab::ExperimentConfig cfg = poclab::load_config(opts.config_path);
  const poclab::DiffusionParams dp = cfg.effective_diffusion();
  nlohmann::json j;
  j["b"] = dp.b;
  j["m"] = dp.m;
  j["sigma"] = dp.sigma;
  j["x0"] = dp.x0;
  std::printf("%s\n", j.dump(2).c_str());
  return 0;
}

int validate_command(const CommonOptions& opts) {
  const poclab::ExperimentConfig cfg = poclab::load_config(opts.config_path);
  cfg.validate();
  std::printf("ok\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "poclab: power-of-choice load balancing queues, their rank-based "
      "diffusion limits, and the statistical harness comparing the two"};
  app.require_subcommand(1);

  CommonOptions opts;
  CLI::App* run = app.add_subcommand("run", "execute an experiment config");
  run->add_option("--config", opts.config_path, "experiment config (JSON)")
      ->required();
  CLI::Option* seed_opt =
      run->add_option("--seed", opts.seed, "override the master seed");
  run->add_option("--out", opts.out_dir, "output directory (default: out)");
  run->add_option("--jobs", opts.jobs,
                  "worker threads for replications (0 = all cores)");

  CLI::App* derive =
      app.add_subcommand("derive", "print the limit diffusion data (b, m, "
                                   "sigma, x0) for a config");
  derive->add_option("--config", opts.config_path, "experiment config (JSON)")
      ->required();

  CLI::App* validate =
      app.add_subcommand("validate", "parse and validate a config");
  validate->add_option("--config", opts.config_path,
                       "experiment config (JSON)")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  opts.seed_given = seed_opt->count() > 0;

  try {
    if (run->parsed()) return run_command(opts);
    if (derive->parsed()) return derive_command(opts);
    if (validate->parsed()) return validate_command(opts);
  } catch (const poclab::ConfigParseError& e) {
    std::fprintf(stderr, "config parse error: %s\n", e.what());
    return 2;
  } catch (const poclab::ConfigValidationError& e) {
    std::fprintf(stderr, "config validation error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
