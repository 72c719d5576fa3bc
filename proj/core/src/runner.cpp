#include "feexd/runner.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "feexd/checkpoint.hpp"
#include "feexd/rng.hpp"
#include "feexd/selection.hpp"

namespace feexd::runner {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_eps(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

data::Dataset build_dataset(const ExperimentConfig &cfg) {
  if (cfg.data.kind == "csv") return data::load_csv(cfg.data.path);
  return data::generate_synthetic(cfg.data.num_classes, cfg.data.dim,
                                  cfg.data.per_class, cfg.data.class_sep,
                                  derive_seed(cfg.seed, RngStream::synth_data));
}

std::vector<data::ClientPartition> build_partitions(const ExperimentConfig &cfg,
                                                    const data::Dataset &ds) {
  return data::dirichlet_partition(ds, cfg.n_clients, cfg.alpha,
                                   cfg.min_per_client,
                                   derive_seed(cfg.seed, RngStream::partition));
}

model::ArchSpec arch_of(const ExperimentConfig &cfg, const data::Dataset &ds) {
  model::ArchSpec arch;
  arch.input_dim = ds.dim();
  arch.hidden_dims = cfg.hidden_dims;
  arch.num_classes = ds.num_classes;
  arch.validate();
  return arch;
}

fed::FedConfig fed_config_of(const ExperimentConfig &cfg) {
  fed::FedConfig fc;
  fc.strategy = fed::strategy_from_string(cfg.strategy);
  fc.rounds = cfg.rounds;
  fc.sample_rate = cfg.sample_rate;
  fc.local_epochs = cfg.local_epochs;
  fc.batch = cfg.batch;
  fc.lr = cfg.lr;
  fc.momentum = cfg.momentum;
  fc.weight_decay = cfg.weight_decay;
  fc.lr_decay = cfg.lr_decay;
  fc.lambda = cfg.lambda;
  fc.mu = cfg.mu;
  fc.w_renormalize = cfg.w_renormalize;
  fc.p_renormalize = cfg.p_renormalize;
  return fc;
}

std::string metrics_csv(const fed::StrategyRun &run,
                        const std::string &strategy, int m) {
  std::ostringstream out;
  out << "strategy,round,epsilon,accuracy,averaged_accuracy";
  for (int j = 1; j <= m; ++j) out << ",per_exit_acc_" << j;
  out << ",mean_macs";
  for (int j = 1; j <= m; ++j) out << ",exit_hist_" << j;
  out << "\n";
  for (const auto &rm : run.metrics) {
    for (size_t e = 0; e < rm.epsilons.size(); ++e) {
      const infer::EvalReport &r = rm.pooled[e];
      out << strategy << ',' << rm.round << ',' << fmt_eps(rm.epsilons[e])
          << ',' << fmt_double(r.accuracy) << ','
          << fmt_double(r.averaged_accuracy);
      for (int j = 0; j < m; ++j) out << ',' << fmt_double(r.per_exit_accuracy[j]);
      out << ',' << fmt_double(r.mean_macs);
      for (int j = 0; j < m; ++j) out << ',' << r.exit_histogram[j];
      out << "\n";
    }
  }
  return out.str();
}

namespace {

json record_to_json(const fed::RoundRecord &rec, const fed::RoundMetrics *rm) {
  json j;
  j["round"] = rec.round;
  j["sampled"] = rec.sampled;
  j["plan"] = json::parse(selection::plan_to_json(rec.plan));
  j["k_vectors"] = json::object();
  for (const auto &[id, tw] : rec.k_vectors) {
    j["k_vectors"][std::to_string(id)] = {{"clients", tw.client_ids},
                                          {"k", tw.k},
                                          {"c", tw.c},
                                          {"mu", tw.mu}};
  }
  j["comm"] = {{"down", rec.down}, {"up", rec.up}};
  j["metrics"] = json::object();
  if (rm) {
    for (size_t e = 0; e < rm->epsilons.size(); ++e) {
      const infer::EvalReport &r = rm->pooled[e];
      j["metrics"][fmt_eps(rm->epsilons[e])] = {
          {"accuracy", r.accuracy},
          {"averaged_accuracy", r.averaged_accuracy},
          {"mean_macs", r.mean_macs}};
    }
  }
  return j;
}

void write_file(const fs::path &path, const std::string &content) {
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
  f.close();
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

fed::StrategyRun run_experiment(const ExperimentConfig &cfg,
                                const std::string &out_dir,
                                const fed::RunOptions &opts) {
  validate_config(cfg);
  const data::Dataset ds = build_dataset(cfg);
  const auto parts = build_partitions(cfg, ds);
  const model::ArchSpec arch = arch_of(cfg, ds);
  const fed::FedConfig fc = fed_config_of(cfg);

  fed::StrategyRun run = fed::run_strategy(arch, parts, fc, cfg.epsilon_grid,
                                           cfg.seed, opts);

  const fs::path dir(out_dir);
  fs::create_directories(dir / "ckpt");

  save_config((dir / "config.json").string(), cfg);
  write_file(dir / "metrics.csv", metrics_csv(run, cfg.strategy, arch.m()));

  std::ostringstream log;
  for (size_t i = 0; i < run.records.size(); ++i) {
    const fed::RoundMetrics *rm =
        i < run.metrics.size() ? &run.metrics[i] : nullptr;
    log << record_to_json(run.records[i], rm).dump() << "\n";
  }
  write_file(dir / "rounds.jsonl", log.str());

  for (const fed::ClientState &cs : run.fed.clients)
    save_params((dir / "ckpt" / ("client_" + std::to_string(cs.client_id))).string(),
                model::model_to_params(cs.mdl));
  return run;
}

std::string compare_report(const std::vector<std::string> &dirs) {
  if (dirs.empty())
    throw std::invalid_argument("compare_report: no run directories given");
  std::string header;
  std::ostringstream out;
  for (const std::string &d : dirs) {
    const fs::path csv = fs::path(d) / "metrics.csv";
    std::ifstream f(csv);
    if (!f)
      throw std::runtime_error("compare_report: missing " + csv.string());
    std::string line, this_header, last;
    if (!std::getline(f, this_header))
      throw std::runtime_error("compare_report: empty " + csv.string());
    while (std::getline(f, line))
      if (!line.empty()) last = line;
    if (last.empty())
      throw std::runtime_error("compare_report: no metrics rows in " +
                               csv.string());
    if (header.empty()) {
      header = this_header;
      out << "run_dir," << header << "\n";
    } else if (this_header != header) {
      throw std::runtime_error("compare_report: header mismatch in " +
                               csv.string());
    }
    out << d << ',' << last << "\n";
  }
  return out.str();
}

std::string partition_inspect(const ExperimentConfig &cfg) {
  validate_config(cfg);
  const data::Dataset ds = build_dataset(cfg);
  const auto parts = build_partitions(cfg, ds);

  json j;
  j["n_clients"] = cfg.n_clients;
  j["num_classes"] = ds.num_classes;
  j["total_samples"] = ds.size();
  j["alpha"] = cfg.alpha;
  j["clients"] = json::array();
  for (const auto &cp : parts) {
    json c;
    c["id"] = cp.client_id;
    c["p"] = cp.p;
    c["train_size"] = cp.train.size();
    c["test_size"] = cp.test.size();
    c["train_hist"] = cp.train.size() ? data::label_histogram(cp.train)
                                      : std::vector<int>(ds.num_classes, 0);
    c["test_hist"] = cp.test.size() ? data::label_histogram(cp.test)
                                    : std::vector<int>(ds.num_classes, 0);
    j["clients"].push_back(std::move(c));
  }
  return j.dump(2) + "\n";
}

}  // namespace feexd::runner
