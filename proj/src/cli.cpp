#include <cstdint>
#include <cstdio>
#include <string>

#include "CLI11.hpp"

#include "simmimo/experiment.hpp"
#include "simmimo/types.hpp"

namespace simmimo {

namespace {

struct CliOptions {
  std::string config_path;
  std::string out_dir;
  std::int64_t seed = -1;
  int threads = -1;
};

void add_common(CLI::App* sub, CliOptions& opt) {
  sub->add_option("config", opt.config_path, "JSON experiment config file")
      ->required();
  sub->add_option("--out", opt.out_dir, "output directory (overrides config)");
  sub->add_option("--seed", opt.seed, "RNG seed (overrides config)")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--threads", opt.threads,
                  "worker thread count (overrides config and SIMMIMO_THREADS)")
      ->check(CLI::PositiveNumber);
}

int execute(const CliOptions& opt, const char* forced_scenario) {
  ExperimentConfig cfg = load_config(opt.config_path);
  if (forced_scenario != nullptr) cfg.scenario = forced_scenario;
  if (!opt.out_dir.empty()) cfg.output = opt.out_dir;
  if (opt.seed >= 0) cfg.mc.seed = static_cast<std::uint64_t>(opt.seed);
  if (opt.threads > 0) cfg.threads = opt.threads;

  const RunResult res = run_experiment(cfg);
  std::printf("%s\n", res.message.c_str());
  for (const auto& f : res.outputs) std::printf("wrote %s\n", f.c_str());
  return res.exit_code;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Ergodic mutual information, outage, and diversity analysis "
               "for stacked-metasurface MIMO links"};
  app.require_subcommand(1);

  CliOptions run_opt;
  CLI::App* run = app.add_subcommand(
      "run", "execute the scenario named in the config");
  add_common(run, run_opt);

  CliOptions grad_opt;
  CLI::App* grad = app.add_subcommand(
      "check-grad", "compare analytic phase gradients against finite "
                    "differences (small instances only)");
  add_common(grad, grad_opt);

  CliOptions mc_opt;
  CLI::App* mc = app.add_subcommand(
      "mc-verify", "validate the closed forms against the Monte Carlo oracle");
  add_common(mc, mc_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) return execute(run_opt, nullptr);
    if (grad->parsed()) return execute(grad_opt, "check-grad");
    return execute(mc_opt, "mc-verify");
  } catch (const InvalidInputError& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
  }
  return 1;
}

}  // namespace simmimo
