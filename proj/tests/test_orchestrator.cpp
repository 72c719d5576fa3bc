#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "feexd/data.hpp"
#include "feexd/model.hpp"
#include "feexd/orchestrator.hpp"
#include "feexd/rng.hpp"

using namespace feexd;
using namespace feexd::fed;

namespace {

struct World {
  model::ArchSpec arch;
  std::vector<data::ClientPartition> parts;
};

World make_world(int n_clients, uint64_t seed = 5) {
  data::Dataset ds = data::generate_synthetic(3, 5, 40, 3.0, seed);
  World w;
  w.parts = data::dirichlet_partition(ds, n_clients, 0.7, 6, seed + 1);
  w.arch.input_dim = 5;
  w.arch.hidden_dims = {6, 6, 6};
  w.arch.num_classes = 3;
  return w;
}

FedConfig small_cfg(StrategyKind s, int rounds) {
  FedConfig cfg;
  cfg.strategy = s;
  cfg.rounds = rounds;
  cfg.sample_rate = 0.5;
  cfg.local_epochs = 1;
  cfg.batch = 16;
  cfg.lr = 0.05;
  return cfg;
}

bool same_model(const model::EENParams &a, const model::EENParams &b) {
  const ParamSet pa = model::model_to_params(a);
  const ParamSet pb = model::model_to_params(b);
  if (pa.size() != pb.size()) return false;
  for (size_t i = 0; i < pa.size(); ++i)
    if (pa.items[i].first != pb.items[i].first ||
        pa.items[i].second.data != pb.items[i].second.data)
      return false;
  return true;
}

bool same_stack(const std::vector<model::Affine> &a,
                const std::vector<model::Affine> &b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i].W.data != b[i].W.data || a[i].b.data != b[i].b.data) return false;
  return true;
}

}  // namespace

TEST_CASE("strategy names") {
  for (const std::string &name : strategy_names())
    CHECK(strategy_name(strategy_from_string(name)) == name);
  CHECK(strategy_from_string("cafedistill") == StrategyKind::cafedistill);
  try {
    strategy_from_string("sgd");
    FAIL("expected a throw");
  } catch (const std::invalid_argument &e) {
    const std::string msg = e.what();
    for (const std::string &name : strategy_names())
      CHECK(msg.find(name) != std::string::npos);
  }
}

TEST_CASE("per-client traffic by strategy") {
  model::ArchSpec a;
  a.input_dim = 4;
  a.hidden_dims = {5, 6};
  a.num_classes = 3;
  // backbone 4*5+5 + 5*6+6 = 61; exit1 5*3+3 = 18; exit2 6*3+3 = 21
  CHECK(backbone_param_count(a) == 61);
  CHECK(exit_param_count(a, 1) == 18);
  CHECK(exit_param_count(a, 2) == 21);

  const StrategyTraffic cafe = comm_cost(a, StrategyKind::cafedistill);
  CHECK(cafe.down == 82);  // backbone + final exit
  CHECK(cafe.up == 82);
  const StrategyTraffic fedper = comm_cost(a, StrategyKind::fedper_ee);
  CHECK(fedper.down == 61);
  CHECK(fedper.up == 61);
  const StrategyTraffic joint = comm_cost(a, StrategyKind::joint_local_kd);
  CHECK(joint.down == 61);
  CHECK(joint.up == 61);
  const StrategyTraffic fedavg = comm_cost(a, StrategyKind::fedavg_ee);
  CHECK(fedavg.down == 100);  // whole model, every exit included
  CHECK(fedavg.up == 100);
  const StrategyTraffic local = comm_cost(a, StrategyKind::local_only);
  CHECK(local.down == 0);
  CHECK(local.up == 0);
}

TEST_CASE("ledger accumulates and rejects negatives") {
  CommLedger led;
  led.add(1, 10, 20);
  led.add(2, 1, 2);
  CHECK(led.rounds.size() == 2);
  CHECK(led.total_down == 11);
  CHECK(led.total_up == 22);
  CHECK_THROWS_AS(led.add(3, -1, 0), std::invalid_argument);
}

TEST_CASE("client sampling") {
  auto eng = make_engine(9, RngStream::client_sample, 1);
  const auto ids = sample_clients(10, 0.3, eng);
  CHECK(ids.size() == 3);
  for (size_t i = 1; i < ids.size(); ++i) CHECK(ids[i - 1] < ids[i]);
  for (int id : ids) CHECK((id >= 0 && id < 10));

  auto eng2 = make_engine(9, RngStream::client_sample, 1);
  CHECK(sample_clients(10, 0.3, eng2) == ids);  // same stream, same draw

  auto eng3 = make_engine(9, RngStream::client_sample, 2);
  const auto all = sample_clients(4, 1.0, eng3);
  CHECK(all == std::vector<int>{0, 1, 2, 3});

  auto eng4 = make_engine(9, RngStream::client_sample, 3);
  CHECK(sample_clients(20, 0.01, eng4).size() == 1);  // floor of one client

  CHECK_THROWS_AS(sample_clients(0, 0.5, eng4), std::invalid_argument);
  CHECK_THROWS_AS(sample_clients(5, 0.0, eng4), std::invalid_argument);
  CHECK_THROWS_AS(sample_clients(5, 1.5, eng4), std::invalid_argument);
}

TEST_CASE("initialization hands every client the same model") {
  World w = make_world(4);
  Federation fed = init_federation(w.arch, w.parts, 31);
  CHECK(fed.clients.size() == 4);
  CHECK(fed.server.round == 1);
  for (const ClientState &cs : fed.clients) {
    CHECK(same_stack(cs.mdl.blocks, fed.server.global_backbone));
    CHECK(same_stack(cs.mdl.exits, fed.server.global_exits));
  }
  CHECK(fed.server.exit_registry.size() == 4);
  for (int id = 0; id < 4; ++id) {
    const auto &flat = fed.server.flat_registry.at(id);
    CHECK(flat == model::flatten_head(fed.clients[id].mdl.exits[2].W,
                                      fed.clients[id].mdl.exits[2].b));
  }

  // same seed, same world: bit-identical init
  Federation again = init_federation(w.arch, w.parts, 31);
  CHECK(same_stack(fed.server.global_backbone, again.server.global_backbone));
  Federation other = init_federation(w.arch, w.parts, 32);
  CHECK_FALSE(same_stack(fed.server.global_backbone,
                         other.server.global_backbone));

  auto bad = w.parts;
  bad[1].client_id = 7;
  CHECK_THROWS_AS(init_federation(w.arch, bad, 31), std::invalid_argument);
}

TEST_CASE("a zero-epoch round only advances bookkeeping") {
  World w = make_world(6);
  Federation fed = init_federation(w.arch, w.parts, 8);
  const auto init_backbone = fed.server.global_backbone;
  const auto init_models = fed.clients;

  FedConfig cfg = small_cfg(StrategyKind::fedper_ee, 3);
  cfg.local_epochs = 0;
  cfg.sample_rate = 0.1;  // exactly one client -> aggregation is the identity
  RoundRecord rec = run_round(fed, cfg);
  CHECK(rec.sampled.size() == 1);
  CHECK(fed.server.round == 2);
  CHECK(fed.server.ledger.rounds.size() == 1);
  CHECK(same_stack(fed.server.global_backbone, init_backbone));
  for (size_t i = 0; i < fed.clients.size(); ++i)
    CHECK(same_model(fed.clients[i].mdl, init_models[i].mdl));
}

TEST_CASE("fedavg deploys one global model everywhere") {
  World w = make_world(5);
  Federation fed = init_federation(w.arch, w.parts, 13);
  FedConfig cfg = small_cfg(StrategyKind::fedavg_ee, 2);
  run_round(fed, cfg);
  for (const ClientState &cs : fed.clients) {
    CHECK(same_stack(cs.mdl.blocks, fed.server.global_backbone));
    CHECK(same_stack(cs.mdl.exits, fed.server.global_exits));
  }
  // training moved the global model off its initialization
  Federation fresh = init_federation(w.arch, w.parts, 13);
  CHECK_FALSE(same_stack(fed.server.global_backbone,
                         fresh.server.global_backbone));
}

TEST_CASE("strict locality keeps the server and bystanders still") {
  World w = make_world(5);
  Federation fed = init_federation(w.arch, w.parts, 21);
  const auto init_backbone = fed.server.global_backbone;
  const auto before = fed.clients;

  FedConfig cfg = small_cfg(StrategyKind::local_only, 2);
  RoundRecord rec = run_round(fed, cfg);
  CHECK(rec.down == 0);
  CHECK(rec.up == 0);
  CHECK(same_stack(fed.server.global_backbone, init_backbone));
  for (size_t i = 0; i < fed.clients.size(); ++i) {
    const bool sampled = std::find(rec.sampled.begin(), rec.sampled.end(),
                                   static_cast<int>(i)) != rec.sampled.end();
    if (sampled)
      CHECK_FALSE(same_model(fed.clients[i].mdl, before[i].mdl));
    else
      CHECK(same_model(fed.clients[i].mdl, before[i].mdl));
  }
}

TEST_CASE("personal models persist for unsampled clients") {
  World w = make_world(6);
  Federation fed = init_federation(w.arch, w.parts, 44);
  FedConfig cfg = small_cfg(StrategyKind::cafedistill, 4);
  const auto before = fed.clients;
  RoundRecord rec = run_round(fed, cfg);
  for (size_t i = 0; i < fed.clients.size(); ++i) {
    const bool sampled = std::find(rec.sampled.begin(), rec.sampled.end(),
                                   static_cast<int>(i)) != rec.sampled.end();
    if (!sampled) CHECK(same_model(fed.clients[i].mdl, before[i].mdl));
  }
}

TEST_CASE("the registry mirrors the freshest uploaded exits") {
  World w = make_world(6);
  Federation fed = init_federation(w.arch, w.parts, 17);
  const auto init_flat = fed.server.flat_registry;
  FedConfig cfg = small_cfg(StrategyKind::cafedistill, 4);
  RoundRecord rec = run_round(fed, cfg);

  for (int id = 0; id < 6; ++id) {
    const bool sampled = std::find(rec.sampled.begin(), rec.sampled.end(),
                                   id) != rec.sampled.end();
    const auto &flat = fed.server.flat_registry.at(id);
    const auto current = model::flatten_head(fed.clients[id].mdl.exits[2].W,
                                             fed.clients[id].mdl.exits[2].b);
    if (sampled) {
      CHECK(flat == current);
      CHECK(flat != init_flat.at(id));
    } else {
      CHECK(flat == init_flat.at(id));
    }
  }
  // teacher weights were solved for every sampled student over all clients
  for (int id : rec.sampled) {
    const auto &tw = rec.k_vectors.at(id);
    CHECK(tw.client_ids.size() == 6);
    double sum = 0.0;
    for (double v : tw.k) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("distillation off and full depth reduces to personalized averaging") {
  World w = make_world(5);
  FedConfig cafe = small_cfg(StrategyKind::cafedistill, 2);
  cafe.lambda = 0.0;
  FedConfig fedper = small_cfg(StrategyKind::fedper_ee, 2);
  fedper.lambda = 0.0;

  RunOptions full;
  full.force_full_ratio = true;
  full.threads = 1;
  StrategyRun a = run_strategy(w.arch, w.parts, cafe, {0.5}, 7, full);
  StrategyRun b = run_strategy(w.arch, w.parts, fedper, {0.5}, 7, {});

  for (size_t i = 0; i < a.fed.clients.size(); ++i)
    CHECK(same_model(a.fed.clients[i].mdl, b.fed.clients[i].mdl));
  CHECK(same_stack(a.fed.server.global_backbone, b.fed.server.global_backbone));
  for (size_t r = 0; r < a.metrics.size(); ++r) {
    CHECK(a.metrics[r].pooled[0].accuracy == b.metrics[r].pooled[0].accuracy);
    CHECK(a.metrics[r].pooled[0].total_macs ==
          b.metrics[r].pooled[0].total_macs);
  }
  // the ledger still reflects the protocol, not the ablation
  CHECK(a.fed.server.ledger.total_up > b.fed.server.ledger.total_up);
}

TEST_CASE("self-matched teachers reduce to local joint distillation") {
  World w = make_world(5);
  FedConfig cafe = small_cfg(StrategyKind::cafedistill, 3);
  FedConfig joint = small_cfg(StrategyKind::joint_local_kd, 3);

  RunOptions selfed;
  selfed.force_self_teacher = true;
  selfed.force_full_ratio = true;
  StrategyRun a = run_strategy(w.arch, w.parts, cafe, {0.4}, 19, selfed);
  StrategyRun b = run_strategy(w.arch, w.parts, joint, {0.4}, 19, {});

  for (size_t i = 0; i < a.fed.clients.size(); ++i)
    CHECK(same_model(a.fed.clients[i].mdl, b.fed.clients[i].mdl));
  for (size_t r = 0; r < a.metrics.size(); ++r)
    CHECK(a.metrics[r].pooled[0].accuracy == b.metrics[r].pooled[0].accuracy);
}

TEST_CASE("a single-client federation degenerates to local training") {
  World w = make_world(1, 23);
  FedConfig cafe = small_cfg(StrategyKind::cafedistill, 2);
  cafe.lambda = 0.0;
  cafe.sample_rate = 1.0;
  FedConfig local = small_cfg(StrategyKind::local_only, 2);
  local.sample_rate = 1.0;

  RunOptions full;
  full.force_full_ratio = true;
  StrategyRun a = run_strategy(w.arch, w.parts, cafe, {0.5}, 3, full);
  StrategyRun b = run_strategy(w.arch, w.parts, local, {0.5}, 3, {});
  CHECK(same_model(a.fed.clients[0].mdl, b.fed.clients[0].mdl));
}

TEST_CASE("runs are bit-reproducible and thread-count invariant") {
  World w = make_world(6);
  FedConfig cfg = small_cfg(StrategyKind::cafedistill, 3);

  RunOptions one;
  one.threads = 1;
  RunOptions four;
  four.threads = 4;
  StrategyRun a = run_strategy(w.arch, w.parts, cfg, {0.3, 0.7}, 99, one);
  StrategyRun b = run_strategy(w.arch, w.parts, cfg, {0.3, 0.7}, 99, four);
  StrategyRun c = run_strategy(w.arch, w.parts, cfg, {0.3, 0.7}, 100, one);

  for (size_t i = 0; i < a.fed.clients.size(); ++i)
    CHECK(same_model(a.fed.clients[i].mdl, b.fed.clients[i].mdl));
  for (size_t r = 0; r < a.metrics.size(); ++r)
    for (size_t e = 0; e < 2; ++e) {
      CHECK(a.metrics[r].pooled[e].accuracy == b.metrics[r].pooled[e].accuracy);
      CHECK(a.metrics[r].pooled[e].total_macs ==
            b.metrics[r].pooled[e].total_macs);
    }
  // a different seed genuinely changes the trajectory
  bool any_diff = false;
  for (size_t i = 0; i < a.fed.clients.size(); ++i)
    any_diff = any_diff || !same_model(a.fed.clients[i].mdl, c.fed.clients[i].mdl);
  CHECK(any_diff);
}

TEST_CASE("local training replays as plain minibatch SGD") {
  World w = make_world(3, 55);
  const int cid = 1, round = 3;
  const uint64_t master = 77;

  ClientState cs;
  cs.client_id = cid;
  cs.mdl = model::init_model(w.arch, 123);
  cs.part = w.parts[cid];

  FedConfig cfg = small_cfg(StrategyKind::local_only, 4);
  cfg.local_epochs = 2;
  cfg.batch = 8;
  const std::vector<int> S{1, 2, 3};

  model::EENParams expect = cs.mdl;  // replay by hand
  {
    OptimizerState opt;
    opt.learning_rate = cfg.lr * std::pow(cfg.lr_decay, round - 1);
    opt.momentum = cfg.momentum;
    opt.weight_decay = cfg.weight_decay;
    const model::ExitWeights ws = model::make_exit_weights(3, S, true);
    auto eng = make_engine(master, RngStream::shuffle, round,
                           static_cast<uint64_t>(cid));
    const data::Dataset &tr = cs.part.train;
    std::vector<int> idx(tr.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
      shuffle_in_place(eng, idx);
      for (int lo = 0; lo < tr.size(); lo += cfg.batch) {
        const int hi = std::min(tr.size(), lo + cfg.batch);
        model::Batch batch;
        batch.x = Tensor({hi - lo, tr.dim()});
        batch.y.resize(hi - lo);
        for (int i = lo; i < hi; ++i) {
          for (int d = 0; d < tr.dim(); ++d)
            batch.x.at(i - lo, d) = tr.features.at(idx[i], d);
          batch.y[i - lo] = tr.labels[idx[i]];
        }
        const auto og =
            distill::objective_grads(expect, nullptr, batch, S, ws, 0.0);
        ParamSet ps = model::model_to_params(expect);
        sgd_step(ps, og.grads, opt);
        expect = model::params_to_model(expect.arch, ps);
      }
    }
  }

  local_train(cs, nullptr, nullptr, false, S, cfg, round, master);
  CHECK(same_model(cs.mdl, expect));
  CHECK(cs.opt.learning_rate ==
        doctest::Approx(cfg.lr * std::pow(cfg.lr_decay, 2)).epsilon(1e-15));
}

TEST_CASE("round trajectory length and bookkeeping") {
  World w = make_world(4);
  FedConfig cfg = small_cfg(StrategyKind::fedper_ee, 3);
  StrategyRun run = run_strategy(w.arch, w.parts, cfg, {0.2, 0.8}, 6, {});
  CHECK(run.records.size() == 3);
  CHECK(run.metrics.size() == 3);
  CHECK(run.fed.server.round == 4);
  CHECK(run.fed.server.ledger.rounds.size() == 3);
  int64_t down = 0;
  for (const auto &rec : run.records) down += rec.down;
  CHECK(run.fed.server.ledger.total_down == down);
  for (const auto &rm : run.metrics) {
    CHECK(rm.epsilons.size() == 2);
    CHECK(rm.pooled.size() == 2);
    CHECK(rm.pooled[0].num_samples > 0);
  }

  FedConfig none = small_cfg(StrategyKind::fedper_ee, 0);
  StrategyRun empty = run_strategy(w.arch, w.parts, none, {0.5}, 6, {});
  CHECK(empty.records.empty());
  CHECK(empty.metrics.empty());
}

TEST_CASE("training throws on an empty shard") {
  World w = make_world(3);
  ClientState cs;
  cs.client_id = 0;
  cs.mdl = model::init_model(w.arch, 2);
  cs.part.client_id = 0;  // no data at all
  FedConfig cfg = small_cfg(StrategyKind::local_only, 1);
  CHECK_THROWS_AS(local_train(cs, nullptr, nullptr, false, {1, 2, 3}, cfg, 1, 4),
                  std::invalid_argument);
}
