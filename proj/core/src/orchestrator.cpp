#include "feexd/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "feexd/rng.hpp"

namespace feexd::fed {

StrategyKind strategy_from_string(const std::string &name) {
  for (const StrategyKind s :
       {StrategyKind::cafedistill, StrategyKind::local_only,
        StrategyKind::fedavg_ee, StrategyKind::fedper_ee,
        StrategyKind::joint_local_kd})
    if (name == strategy_name(s)) return s;
  std::string valid;
  for (const auto &n : strategy_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw std::invalid_argument("unknown strategy '" + name +
                              "' (valid: " + valid + ")");
}

std::string strategy_name(StrategyKind s) {
  switch (s) {
    case StrategyKind::cafedistill: return "cafedistill";
    case StrategyKind::local_only: return "local_only";
    case StrategyKind::fedavg_ee: return "fedavg_ee";
    case StrategyKind::fedper_ee: return "fedper_ee";
    case StrategyKind::joint_local_kd: return "joint_local_kd";
  }
  throw std::invalid_argument("unknown strategy kind");
}

std::vector<std::string> strategy_names() {
  return {"cafedistill", "local_only", "fedavg_ee", "fedper_ee",
          "joint_local_kd"};
}

void CommLedger::add(int round, int64_t down, int64_t up) {
  if (down < 0 || up < 0)
    throw std::invalid_argument("CommLedger: negative traffic");
  rounds.push_back({round, down, up});
  total_down += down;
  total_up += up;
}

int64_t backbone_param_count(const model::ArchSpec &spec) {
  int64_t total = 0;
  int d_prev = spec.input_dim;
  for (int d : spec.hidden_dims) {
    total += static_cast<int64_t>(d_prev) * d + d;
    d_prev = d;
  }
  return total;
}

int64_t exit_param_count(const model::ArchSpec &spec, int j) {
  if (j < 1 || j > spec.m())
    throw std::out_of_range("exit_param_count: bad exit index");
  return static_cast<int64_t>(spec.hidden_dims[j - 1]) * spec.num_classes +
         spec.num_classes;
}

StrategyTraffic comm_cost(const model::ArchSpec &spec, StrategyKind s) {
  spec.validate();
  const int64_t phi = backbone_param_count(spec);
  const int64_t head_m = exit_param_count(spec, spec.m());
  int64_t all_heads = 0;
  for (int j = 1; j <= spec.m(); ++j) all_heads += exit_param_count(spec, j);
  switch (s) {
    case StrategyKind::cafedistill:
      return {phi + head_m, phi + head_m};
    case StrategyKind::fedper_ee:
    case StrategyKind::joint_local_kd:
      return {phi, phi};
    case StrategyKind::fedavg_ee:
      return {phi + all_heads, phi + all_heads};
    case StrategyKind::local_only:
      return {0, 0};
  }
  throw std::invalid_argument("comm_cost: unknown strategy");
}

Federation init_federation(const model::ArchSpec &arch,
                           const std::vector<data::ClientPartition> &parts,
                           uint64_t master_seed) {
  arch.validate();
  if (parts.empty()) throw std::invalid_argument("init_federation: no clients");
  Federation fed;
  fed.arch = arch;
  fed.server.master_seed = master_seed;

  const model::EENParams init =
      model::init_model(arch, derive_seed(master_seed, RngStream::init));
  fed.server.global_backbone = init.blocks;
  fed.server.global_exits = init.exits;

  const int m = arch.m();
  for (size_t i = 0; i < parts.size(); ++i) {
    // Client ids double as vector positions throughout the round loop.
    if (parts[i].client_id != static_cast<int>(i))
      throw std::invalid_argument("init_federation: client ids must be 0..n-1");
    const auto &part = parts[i];
    ClientState cs;
    cs.client_id = part.client_id;
    cs.mdl = init;
    cs.part = part;
    fed.clients.push_back(std::move(cs));
    fed.server.exit_registry[part.client_id] = init.exits[m - 1];
    fed.server.flat_registry[part.client_id] =
        model::flatten_head(init.exits[m - 1].W, init.exits[m - 1].b);
  }
  return fed;
}

std::vector<int> sample_clients(int n, double rate, std::mt19937_64 &eng) {
  if (n < 1) throw std::invalid_argument("sample_clients: n must be >= 1");
  if (!(rate > 0.0) || rate > 1.0)
    throw std::invalid_argument("sample_clients: rate must be in (0, 1]");
  const int k = std::max<int>(1, static_cast<int>(std::llround(rate * n)));
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(next_index(eng, n - i));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(k);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<model::Affine> aggregate_stacks(
    const std::map<int, std::vector<model::Affine>> &stacks,
    const std::map<int, double> &p) {
  if (stacks.empty()) throw std::invalid_argument("aggregate_stacks: empty");
  std::vector<model::Affine> out;
  bool first = true;
  for (const auto &[id, stack] : stacks) {
    const auto pit = p.find(id);
    if (pit == p.end())
      throw std::invalid_argument("aggregate_stacks: missing weight for client " +
                                  std::to_string(id));
    const double w = pit->second;
    if (first) {
      for (const auto &layer : stack)
        out.push_back({Tensor(layer.W.shape), Tensor(layer.b.shape)});
      first = false;
    }
    if (stack.size() != out.size())
      throw std::invalid_argument("aggregate_stacks: depth mismatch");
    for (size_t l = 0; l < stack.size(); ++l) {
      if (!stack[l].W.same_shape(out[l].W) || !stack[l].b.same_shape(out[l].b))
        throw std::invalid_argument("aggregate_stacks: shape mismatch");
      for (size_t i = 0; i < stack[l].W.data.size(); ++i)
        out[l].W.data[i] += w * stack[l].W.data[i];
      for (size_t i = 0; i < stack[l].b.data.size(); ++i)
        out[l].b.data[i] += w * stack[l].b.data[i];
    }
  }
  return out;
}

namespace {

model::Batch gather_batch(const data::Dataset &ds, const std::vector<int> &idx,
                          int lo, int hi) {
  const int d = ds.dim();
  model::Batch b;
  b.x = Tensor({hi - lo, d});
  b.y.resize(hi - lo);
  for (int i = lo; i < hi; ++i) {
    const double *src =
        ds.features.data.data() + static_cast<size_t>(idx[i]) * d;
    std::copy(src, src + d,
              b.x.data.data() + static_cast<size_t>(i - lo) * d);
    b.y[i - lo] = ds.labels[idx[i]];
  }
  return b;
}

int thread_budget(int requested, int jobs) {
  int t = requested;
  if (t <= 0) {
    if (const char *env = std::getenv("FEEXD_THREADS")) {
      t = std::atoi(env);
    }
    if (t <= 0) t = static_cast<int>(std::thread::hardware_concurrency());
    if (t <= 0) t = 1;
  }
  return std::min(t, jobs);
}

}  // namespace

void local_train(ClientState &client,
                 const std::vector<model::Affine> *global_backbone,
                 const distill::AggregatedTeacher *teacher,
                 bool overwrite_final_exit, const std::vector<int> &exit_set,
                 const FedConfig &cfg, int round, uint64_t master_seed) {
  if (client.part.train.size() == 0)
    throw std::invalid_argument("local_train: empty train set for client " +
                                std::to_string(client.client_id));
  const int m = client.mdl.arch.m();
  model::check_exit_set(exit_set, m);

  if (global_backbone) client.mdl.blocks = *global_backbone;
  if (overwrite_final_exit) {
    if (!teacher)
      throw std::invalid_argument("local_train: exit overwrite needs a teacher");
    client.mdl.exits[m - 1] = teacher->head;
  }

  client.opt = OptimizerState{};
  client.opt.learning_rate = cfg.lr * std::pow(cfg.lr_decay, round - 1);
  client.opt.momentum = cfg.momentum;
  client.opt.weight_decay = cfg.weight_decay;
  client.opt.lr_decay = cfg.lr_decay;

  if (cfg.local_epochs == 0) return;

  const model::ExitWeights w =
      model::make_exit_weights(m, exit_set, cfg.w_renormalize);
  const double lambda = teacher ? cfg.lambda : 0.0;

  auto eng = make_engine(master_seed, RngStream::shuffle, round,
                         static_cast<uint64_t>(client.client_id));
  const int n = client.part.train.size();
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);

  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    shuffle_in_place(eng, idx);
    for (int lo = 0; lo < n; lo += cfg.batch) {
      const int hi = std::min(n, lo + cfg.batch);
      const model::Batch batch = gather_batch(client.part.train, idx, lo, hi);
      const auto og = distill::objective_grads(client.mdl, teacher, batch,
                                               exit_set, w, lambda);
      ParamSet params = model::model_to_params(client.mdl);
      sgd_step(params, og.grads, client.opt);
      client.mdl = model::params_to_model(client.mdl.arch, params);
    }
  }
}

RoundRecord run_round(Federation &fed, const FedConfig &cfg,
                      const RunOptions &opts) {
  const int t = fed.server.round;
  const int n = static_cast<int>(fed.clients.size());
  const int m = fed.arch.m();
  const StrategyKind strat = cfg.strategy;

  RoundRecord rec;
  rec.round = t;

  auto eng = make_engine(fed.server.master_seed, RngStream::client_sample, t);
  rec.sampled = sample_clients(n, cfg.sample_rate, eng);

  // Exit selection: the conflict-aware schedule applies to the full protocol
  // only; every baseline trains all exits.
  const bool scheduled =
      strat == StrategyKind::cafedistill && !opts.force_full_ratio;
  if (scheduled) {
    const auto delta =
        selection::similarity_matrix(fed.server.flat_registry, rec.sampled);
    rec.plan = selection::select_students(rec.sampled, t, cfg.rounds, m, delta);
  } else {
    rec.plan = selection::full_plan(rec.sampled, t, m);
  }

  // Teacher assembly (server side, before any client trains).
  const bool cafe_teachers =
      strat == StrategyKind::cafedistill && cfg.lambda > 0.0;
  const bool self_teachers =
      strat == StrategyKind::joint_local_kd && cfg.lambda > 0.0;
  std::map<int, distill::AggregatedTeacher> teachers;
  if (cafe_teachers) {
    for (int id : rec.sampled) {
      matching::TeacherWeights tw =
          matching::sim_vector(id, fed.server.flat_registry);
      tw.mu = cfg.mu;
      if (opts.force_self_teacher) {
        tw.k.assign(tw.client_ids.size(), 0.0);
        const auto it = std::find(tw.client_ids.begin(), tw.client_ids.end(), id);
        tw.k[it - tw.client_ids.begin()] = 1.0;
      } else {
        matching::solve_weights(tw);
      }
      teachers[id] = distill::aggregate_teacher(
          fed.server.exit_registry, tw.k, tw.client_ids,
          fed.server.global_backbone);
      rec.k_vectors[id] = std::move(tw);
    }
  } else if (self_teachers) {
    for (int id : rec.sampled) {
      distill::AggregatedTeacher at;
      at.head = fed.clients[id].mdl.exits[m - 1];
      at.backbone_ref = fed.server.global_backbone;
      teachers[id] = std::move(at);
    }
  }

  // Local phase; clients are disjoint, shared inputs are read-only.
  const auto train_one = [&](int id) {
    ClientState &cs = fed.clients[id];
    const bool receives_backbone = strat != StrategyKind::local_only;
    if (strat == StrategyKind::fedavg_ee)
      cs.mdl.exits = fed.server.global_exits;
    const auto tit = teachers.find(id);
    const distill::AggregatedTeacher *teacher =
        tit == teachers.end() ? nullptr : &tit->second;
    local_train(cs, receives_backbone ? &fed.server.global_backbone : nullptr,
                teacher, cafe_teachers, rec.plan.students.at(id), cfg, t,
                fed.server.master_seed);
  };
  const int threads = thread_budget(opts.threads,
                                    static_cast<int>(rec.sampled.size()));
  if (threads <= 1) {
    for (int id : rec.sampled) train_one(id);
  } else {
    std::exception_ptr first_error;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (size_t i = w; i < rec.sampled.size(); i += threads) {
          try {
            train_one(rec.sampled[i]);
          } catch (...) {
            std::lock_guard<std::mutex> lock(err_mu);
            if (!first_error) first_error = std::current_exception();
          }
        }
      });
    for (auto &th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  // Aggregation, sequential in client-id order.
  if (strat != StrategyKind::local_only) {
    std::map<int, double> p;
    double psum = 0.0;
    for (int id : rec.sampled) psum += fed.clients[id].part.p;
    for (int id : rec.sampled)
      p[id] = cfg.p_renormalize ? fed.clients[id].part.p / psum
                                : fed.clients[id].part.p;
    std::map<int, std::vector<model::Affine>> backbones;
    for (int id : rec.sampled) backbones[id] = fed.clients[id].mdl.blocks;
    fed.server.global_backbone = aggregate_stacks(backbones, p);

    if (strat == StrategyKind::fedavg_ee) {
      std::map<int, std::vector<model::Affine>> exits;
      for (int id : rec.sampled) exits[id] = fed.clients[id].mdl.exits;
      fed.server.global_exits = aggregate_stacks(exits, p);
      // One global model: every client deploys it.
      for (ClientState &cs : fed.clients) {
        cs.mdl.blocks = fed.server.global_backbone;
        cs.mdl.exits = fed.server.global_exits;
      }
    }
  }

  if (strat == StrategyKind::cafedistill) {
    for (int id : rec.sampled) {
      const model::Affine &head = fed.clients[id].mdl.exits[m - 1];
      fed.server.exit_registry[id] = head;
      fed.server.flat_registry[id] = model::flatten_head(head.W, head.b);
    }
  }

  const StrategyTraffic traffic = comm_cost(fed.arch, strat);
  rec.down = traffic.down * static_cast<int64_t>(rec.sampled.size());
  rec.up = traffic.up * static_cast<int64_t>(rec.sampled.size());
  fed.server.ledger.add(t, rec.down, rec.up);
  fed.server.round = t + 1;
  return rec;
}

StrategyRun run_strategy(const model::ArchSpec &arch,
                         const std::vector<data::ClientPartition> &parts,
                         const FedConfig &cfg,
                         const std::vector<double> &epsilon_grid,
                         uint64_t master_seed, const RunOptions &opts) {
  StrategyRun run;
  run.fed = init_federation(arch, parts, master_seed);
  const infer::CostModel cost = infer::cost_model(arch);

  for (int t = 1; t <= cfg.rounds; ++t) {
    run.records.push_back(run_round(run.fed, cfg, opts));

    if (epsilon_grid.empty()) continue;
    RoundMetrics rm;
    rm.round = t;
    rm.epsilons = epsilon_grid;
    std::vector<std::vector<infer::EvalReport>> by_client;
    for (const ClientState &cs : run.fed.clients) {
      if (cs.part.test.size() == 0) continue;
      by_client.push_back(
          infer::evaluate_grid(cs.mdl, cs.part.test, epsilon_grid, cost));
    }
    if (by_client.empty())
      throw std::invalid_argument("run_strategy: no client has test data");
    for (size_t e = 0; e < epsilon_grid.size(); ++e) {
      std::vector<infer::EvalReport> slice;
      slice.reserve(by_client.size());
      for (const auto &reports : by_client) slice.push_back(reports[e]);
      rm.pooled.push_back(infer::merge_reports(slice));
    }
    run.metrics.push_back(std::move(rm));
  }
  return run;
}

}  // namespace feexd::fed
