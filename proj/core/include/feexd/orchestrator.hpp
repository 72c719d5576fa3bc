#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "feexd/data.hpp"
#include "feexd/distill.hpp"
#include "feexd/inference.hpp"
#include "feexd/matching.hpp"
#include "feexd/model.hpp"
#include "feexd/optim.hpp"
#include "feexd/selection.hpp"

namespace feexd::fed {

enum class StrategyKind {
  cafedistill,
  local_only,
  fedavg_ee,
  fedper_ee,
  joint_local_kd,
};

/// Throws std::invalid_argument naming the valid strategies.
StrategyKind strategy_from_string(const std::string &name);
std::string strategy_name(StrategyKind s);
std::vector<std::string> strategy_names();

struct CommLedger {
  struct Entry {
    int round = 0;
    int64_t down = 0;  // float64-parameter counts, all sampled clients
    int64_t up = 0;
  };
  std::vector<Entry> rounds;
  int64_t total_down = 0;
  int64_t total_up = 0;

  void add(int round, int64_t down, int64_t up);
};

/// Per-sampled-client traffic in float64-parameter counts.
struct StrategyTraffic {
  int64_t down = 0;
  int64_t up = 0;
};
StrategyTraffic comm_cost(const model::ArchSpec &spec, StrategyKind s);

/// Parameter count helpers shared with the ledger tests.
int64_t backbone_param_count(const model::ArchSpec &spec);
int64_t exit_param_count(const model::ArchSpec &spec, int j);

struct ServerState {
  int round = 1;  // next round to execute, 1-based
  std::vector<model::Affine> global_backbone;
  std::vector<model::Affine> global_exits;  // used by fedavg_ee only
  std::map<int, model::Affine> exit_registry;
  std::map<int, std::vector<double>> flat_registry;  // flattened mirror
  uint64_t master_seed = 0;
  CommLedger ledger;
};

struct ClientState {
  int client_id = 0;
  model::EENParams mdl;
  data::ClientPartition part;
  OptimizerState opt;
};

struct FedConfig {
  StrategyKind strategy = StrategyKind::cafedistill;
  int rounds = 0;
  double sample_rate = 0.1;
  int local_epochs = 5;
  int batch = 64;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double lr_decay = 0.99;
  double lambda = 1.0;
  double mu = 0.6;
  bool w_renormalize = true;
  bool p_renormalize = true;
};

/// Test/ablation forcings plus intra-round parallelism. threads == 0 means
/// FEEXD_THREADS if set, else hardware concurrency.
struct RunOptions {
  bool force_self_teacher = false;  // pin k to the self one-hot
  bool force_full_ratio = false;    // pin R(t) to 1 (all exits active)
  int threads = 0;
};

struct Federation {
  model::ArchSpec arch;
  ServerState server;
  std::vector<ClientState> clients;
};

/// One shared initial model for the server and every client; the exit
/// registry starts from each client's initial final exit.
Federation init_federation(const model::ArchSpec &arch,
                           const std::vector<data::ClientPartition> &parts,
                           uint64_t master_seed);

/// Uniform sample without replacement of max(1, round(rate*n)) ids, sorted.
std::vector<int> sample_clients(int n, double rate, std::mt19937_64 &eng);

struct RoundRecord {
  int round = 0;
  std::vector<int> sampled;
  selection::RoundPlan plan;
  std::map<int, matching::TeacherWeights> k_vectors;
  int64_t down = 0;
  int64_t up = 0;
};

/// Executes one full round for the configured strategy: sampling, exit
/// selection, teacher matching/assembly, local training, aggregation,
/// registry and ledger upkeep.
RoundRecord run_round(Federation &fed, const FedConfig &cfg,
                      const RunOptions &opts = {});

/// Local phase for one client: overwrite dispatched state, then E epochs of
/// minibatch SGD on the distillation objective over exits S. teacher may be
/// null (then lambda is ignored). Velocity starts fresh; the learning rate
/// is lr * lr_decay^(round-1).
void local_train(ClientState &client,
                 const std::vector<model::Affine> *global_backbone,
                 const distill::AggregatedTeacher *teacher,
                 bool overwrite_final_exit, const std::vector<int> &exit_set,
                 const FedConfig &cfg, int round, uint64_t master_seed);

/// Parameter-wise sum_i p_i * stack_i; p as given (renormalize upstream).
std::vector<model::Affine> aggregate_stacks(
    const std::map<int, std::vector<model::Affine>> &stacks,
    const std::map<int, double> &p);

struct RoundMetrics {
  int round = 0;
  std::vector<double> epsilons;
  std::vector<infer::EvalReport> pooled;  // aligned with epsilons
};

struct StrategyRun {
  Federation fed;
  std::vector<RoundRecord> records;
  std::vector<RoundMetrics> metrics;
};

/// Full trajectory: init, rounds, per-round pooled evaluation of every
/// client's current model on its local test set.
StrategyRun run_strategy(const model::ArchSpec &arch,
                         const std::vector<data::ClientPartition> &parts,
                         const FedConfig &cfg,
                         const std::vector<double> &epsilon_grid,
                         uint64_t master_seed, const RunOptions &opts = {});

}  // namespace feexd::fed
