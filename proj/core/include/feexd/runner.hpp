#pragma once

#include <string>
#include <vector>

#include "feexd/config.hpp"
#include "feexd/data.hpp"
#include "feexd/model.hpp"
#include "feexd/orchestrator.hpp"

namespace feexd::runner {

/// Dataset per the config (synthetic generation or CSV load), seeds derived
/// from cfg.seed.
data::Dataset build_dataset(const ExperimentConfig &cfg);
std::vector<data::ClientPartition> build_partitions(const ExperimentConfig &cfg,
                                                    const data::Dataset &ds);
model::ArchSpec arch_of(const ExperimentConfig &cfg, const data::Dataset &ds);
fed::FedConfig fed_config_of(const ExperimentConfig &cfg);

/// Full experiment: train per config, then write into out_dir —
/// config.json (resolved), metrics.csv (one row per round x epsilon),
/// rounds.jsonl (one JSON object per round), ckpt/client_<id>.{json,bin}.
/// Deterministic per seed. Returns the strategy trajectory.
fed::StrategyRun run_experiment(const ExperimentConfig &cfg,
                                const std::string &out_dir,
                                const fed::RunOptions &opts = {});

/// metrics.csv content for a finished run (shared by run_experiment/tests).
std::string metrics_csv(const fed::StrategyRun &run, const std::string &strategy,
                        int m);

/// Combined CSV: for each run dir, its final metrics row (the last row of
/// that dir's metrics.csv). Headers must agree across dirs.
std::string compare_report(const std::vector<std::string> &dirs);

/// Per-client label histograms and weights as a JSON document.
std::string partition_inspect(const ExperimentConfig &cfg);

}  // namespace feexd::runner
