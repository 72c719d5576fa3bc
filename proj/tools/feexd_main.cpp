#include <cstdint>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "feexd/config.hpp"
#include "feexd/orchestrator.hpp"
#include "feexd/runner.hpp"
#include "feexd/verify.hpp"

namespace {

int do_run(const std::string &config_path, const std::string &out_dir,
           bool have_seed, uint64_t seed, const std::string &strategy) {
  feexd::runner::ExperimentConfig cfg = feexd::runner::load_config(config_path);
  if (have_seed) cfg.seed = seed;
  if (!strategy.empty()) {
    feexd::fed::strategy_from_string(strategy);  // rejects unknown names early
    cfg.strategy = strategy;
  }
  const feexd::fed::StrategyRun run =
      feexd::runner::run_experiment(cfg, out_dir);
  std::printf("run complete: strategy=%s rounds=%d out=%s\n",
              cfg.strategy.c_str(), cfg.rounds, out_dir.c_str());
  if (!run.metrics.empty()) {
    const feexd::fed::RoundMetrics &last = run.metrics.back();
    for (size_t e = 0; e < last.epsilons.size(); ++e) {
      const feexd::infer::EvalReport &r = last.pooled[e];
      std::printf(
          "  final round %d  epsilon=%-4g accuracy=%.4f averaged=%.4f "
          "mean_macs=%.1f\n",
          last.round, last.epsilons[e], r.accuracy, r.averaged_accuracy,
          r.mean_macs);
    }
  }
  return 0;
}

int do_verify(const std::string &suite) {
  const auto results = feexd::verify::run_suites(suite);
  bool ok = true;
  for (const auto &r : results) {
    std::printf("suite %-7s %s  (%d checks)  %s\n", r.name.c_str(),
                r.passed ? "PASS" : "FAIL", r.checks, r.summary.c_str());
    const size_t shown = std::min<size_t>(r.failures.size(), 10);
    for (size_t i = 0; i < shown; ++i)
      std::printf("    failure: %s\n", r.failures[i].c_str());
    if (r.failures.size() > shown)
      std::printf("    ... %zu more failures\n", r.failures.size() - shown);
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"feexd: federated early-exit network simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir, strategy;
  uint64_t seed = 0;
  CLI::App *run = app.add_subcommand("run", "Train per a config, write reports");
  run->add_option("--config", config_path, "experiment config (JSON)")
      ->required();
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_option("--seed", seed, "master seed override");
  run->add_option("--strategy", strategy, "strategy override");

  std::vector<std::string> dirs;
  CLI::App *cmp =
      app.add_subcommand("compare", "Final-round metrics across run dirs");
  cmp->add_option("dirs", dirs, "run directories")->required();

  std::string pi_config;
  CLI::App *pi = app.add_subcommand("partition-inspect",
                                    "Client label histograms for a config");
  pi->add_option("--config", pi_config, "experiment config (JSON)")->required();

  std::string suite = "all";
  CLI::App *ver = app.add_subcommand("verify", "Oracle and property suites");
  ver->add_option("--suite", suite, "all, grad, qp, greedy, kd");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return do_run(config_path, out_dir, run->count("--seed") > 0, seed,
                    strategy);
    if (cmp->parsed()) {
      std::cout << feexd::runner::compare_report(dirs);
      return 0;
    }
    if (pi->parsed()) {
      std::cout << feexd::runner::partition_inspect(
          feexd::runner::load_config(pi_config));
      return 0;
    }
    if (ver->parsed()) return do_verify(suite);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
