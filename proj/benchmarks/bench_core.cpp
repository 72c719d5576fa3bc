#include <benchmark/benchmark.h>

#include <numeric>

#include "feexd/data.hpp"
#include "feexd/distill.hpp"
#include "feexd/matching.hpp"
#include "feexd/model.hpp"
#include "feexd/orchestrator.hpp"
#include "feexd/rng.hpp"
#include "feexd/selection.hpp"

using namespace feexd;

namespace {

model::ArchSpec bench_arch() {
  model::ArchSpec a;
  a.input_dim = 32;
  a.hidden_dims = {64, 64, 64};
  a.num_classes = 10;
  return a;
}

model::Batch bench_batch(int n, const model::ArchSpec &a, uint64_t seed) {
  auto eng = make_engine(seed, RngStream::test_gen, 1);
  model::Batch b;
  b.x = Tensor({n, a.input_dim});
  for (double &v : b.x.data) v = next_gaussian(eng);
  b.y.resize(n);
  for (int &y : b.y) y = static_cast<int>(next_index(eng, a.num_classes));
  return b;
}

void BM_forward_all_exits(benchmark::State &state) {
  const auto arch = bench_arch();
  const auto mdl = model::init_model(arch, 1);
  const auto batch = bench_batch(64, arch, 2);
  for (auto _ : state) {
    auto probs = model::forward_all_exits(mdl, batch.x);
    benchmark::DoNotOptimize(probs);
  }
}
BENCHMARK(BM_forward_all_exits);

void BM_objective_grads(benchmark::State &state) {
  const auto arch = bench_arch();
  const auto mdl = model::init_model(arch, 1);
  const auto batch = bench_batch(64, arch, 2);
  const std::vector<int> S{1, 2, 3};
  const auto w = model::make_exit_weights(3, S, true);
  for (auto _ : state) {
    auto og = distill::objective_grads(mdl, nullptr, batch, S, w, 0.0);
    benchmark::DoNotOptimize(og);
  }
}
BENCHMARK(BM_objective_grads);

void BM_simplex_project(benchmark::State &state) {
  auto eng = make_engine(3, RngStream::test_gen, 2);
  std::vector<double> v(16);
  for (double &x : v) x = next_gaussian(eng);
  for (auto _ : state) {
    auto k = matching::simplex_project(v);
    benchmark::DoNotOptimize(k);
  }
}
BENCHMARK(BM_simplex_project);

void BM_solve_weights(benchmark::State &state) {
  auto eng = make_engine(4, RngStream::test_gen, 3);
  std::vector<double> c(20);
  for (double &x : c) x = next_double01(eng) * 2.0 - 1.0;
  for (auto _ : state) {
    auto k = matching::solve_weights(c, 0.6);
    benchmark::DoNotOptimize(k);
  }
}
BENCHMARK(BM_solve_weights);

void BM_greedy_prune(benchmark::State &state) {
  auto eng = make_engine(5, RngStream::test_gen, 4);
  std::map<int, std::vector<double>> registry;
  std::vector<int> ids(12);
  std::iota(ids.begin(), ids.end(), 0);
  for (int id : ids) {
    std::vector<double> v(16);
    for (double &x : v) x = next_gaussian(eng);
    registry[id] = v;
  }
  const auto delta = selection::similarity_matrix(registry, ids);
  for (auto _ : state) {
    auto kept = selection::greedy_prune(ids, delta, 6);
    benchmark::DoNotOptimize(kept);
  }
}
BENCHMARK(BM_greedy_prune);

void BM_federated_round(benchmark::State &state) {
  const auto arch = bench_arch();
  const data::Dataset ds = data::generate_synthetic(10, 32, 40, 3.0, 6);
  const auto parts = data::dirichlet_partition(ds, 8, 0.3, 8, 7);
  fed::FedConfig cfg;
  cfg.rounds = 1000;
  cfg.sample_rate = 0.25;
  cfg.local_epochs = 1;
  for (auto _ : state) {
    state.PauseTiming();
    fed::Federation f = fed::init_federation(arch, parts, 8);
    state.ResumeTiming();
    auto rec = fed::run_round(f, cfg);
    benchmark::DoNotOptimize(rec);
  }
}
BENCHMARK(BM_federated_round)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
