#include "feexd/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>

#include "feexd/autodiff.hpp"
#include "feexd/distill.hpp"
#include "feexd/matching.hpp"
#include "feexd/model.hpp"
#include "feexd/ops.hpp"
#include "feexd/rng.hpp"
#include "feexd/selection.hpp"

namespace feexd::verify {

namespace {

// Suite slots for seed derivation; keeps case streams independent.
enum : int { kGrad = 1, kQp = 2, kGreedy = 3, kKd = 4 };

std::mt19937_64 case_engine(uint64_t seed, int suite, int case_idx) {
  return make_engine(seed, RngStream::test_gen, suite, case_idx);
}

double rel_err(double a, double b) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-6});
}

void check(SuiteResult &r, bool ok, const std::string &msg) {
  ++r.checks;
  if (!ok) {
    r.passed = false;
    r.failures.push_back(msg);
  }
}

std::string fmt(const char *pattern, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), pattern, a, b);
  return buf;
}

Tensor random_matrix(std::mt19937_64 &eng, int rows, int cols, double scale) {
  Tensor t({rows, cols});
  for (double &v : t.data) v = scale * next_gaussian(eng);
  return t;
}

std::vector<int> random_labels(std::mt19937_64 &eng, int n, int classes) {
  std::vector<int> y(n);
  for (int &v : y) v = static_cast<int>(next_index(eng, classes));
  return y;
}

model::ArchSpec random_arch(std::mt19937_64 &eng) {
  model::ArchSpec a;
  a.input_dim = 3 + static_cast<int>(next_index(eng, 3));
  const int m = 2 + static_cast<int>(next_index(eng, 2));
  for (int j = 0; j < m; ++j)
    a.hidden_dims.push_back(3 + static_cast<int>(next_index(eng, 3)));
  a.num_classes = 3 + static_cast<int>(next_index(eng, 3));
  return a;
}

std::vector<int> random_exit_set(std::mt19937_64 &eng, int m) {
  std::vector<int> s;
  for (int j = 1; j <= m; ++j)
    if (next_double01(eng) < 0.5) s.push_back(j);
  if (s.empty()) s.push_back(1 + static_cast<int>(next_index(eng, m)));
  return s;  // built ascending
}

// Finite differences are only valid away from ReLU kinks. Fresh models carry
// zero biases, so a fully-dead previous layer parks pre-activations exactly
// at the kink; jittering every bias moves the model to a smooth point.
void jitter_biases(model::EENParams &mdl, std::mt19937_64 &eng) {
  for (auto &blk : mdl.blocks)
    for (double &v : blk.b.data) v = 0.2 * next_gaussian(eng);
  for (auto &ex : mdl.exits)
    for (double &v : ex.b.data) v = 0.2 * next_gaussian(eng);
}

}  // namespace

SuiteResult run_grad_suite(uint64_t seed, int cases) {
  SuiteResult r{.name = "grad"};
  const double h = 1e-5, tol = 1e-4;
  double worst = 0.0;

  for (int cs = 0; cs < cases; ++cs) {
    auto eng = case_engine(seed, kGrad, cs);
    const int n = 1 + static_cast<int>(next_index(eng, 4));
    const int classes = 2 + static_cast<int>(next_index(eng, 4));

    // Cross-entropy chain: d/dz CE(softmax(z), y) by tape vs differences.
    {
      Tensor logits = random_matrix(eng, n, classes, 1.5);
      std::vector<int> y = random_labels(eng, n, classes);
      Tape tape;
      Var z = tape.leaf(logits, true);
      tape.backward(tape.cross_entropy(tape.softmax(z), y));
      const Tensor &g = tape.grad(z);
      for (size_t i = 0; i < logits.data.size(); ++i) {
        auto eval = [&](double delta) {
          Tensor t = logits;
          t.data[i] += delta;
          return cross_entropy(softmax(t), y);
        };
        const double fd = (eval(h) - eval(-h)) / (2 * h);
        const double e = rel_err(g.data[i], fd);
        worst = std::max(worst, e);
        check(r, e < tol,
              fmt("ce chain grad rel err %.3g (analytic %.6g)", e, g.data[i]));
      }
    }

    // KL chain over both operands: loss = KL(softmax(a) || softmax(b)).
    {
      Tensor la = random_matrix(eng, n, classes, 1.5);
      Tensor lb = random_matrix(eng, n, classes, 1.5);
      Tape tape;
      Var a = tape.leaf(la, true), b = tape.leaf(lb, true);
      tape.backward(tape.kl_divergence(tape.softmax(a), tape.softmax(b)));
      auto eval = [&](const Tensor &ta, const Tensor &tb) {
        return kl_divergence(softmax(ta), softmax(tb));
      };
      for (size_t i = 0; i < la.data.size(); ++i) {
        Tensor up = la, dn = la;
        up.data[i] += h;
        dn.data[i] -= h;
        const double fd = (eval(up, lb) - eval(dn, lb)) / (2 * h);
        const double e = rel_err(tape.grad(a).data[i], fd);
        worst = std::max(worst, e);
        check(r, e < tol, fmt("kl chain grad (p side) rel err %.3g", e));
      }
      for (size_t i = 0; i < lb.data.size(); ++i) {
        Tensor up = lb, dn = lb;
        up.data[i] += h;
        dn.data[i] -= h;
        const double fd = (eval(la, up) - eval(la, dn)) / (2 * h);
        const double e = rel_err(tape.grad(b).data[i], fd);
        worst = std::max(worst, e);
        check(r, e < tol, fmt("kl chain grad (q side) rel err %.3g", e));
      }
    }

    // Full local objective: joint CE across the exit set plus distillation.
    {
      const model::ArchSpec arch = random_arch(eng);
      const int m = arch.m();
      model::EENParams mdl = model::init_model(arch, splitmix64(seed + cs));
      jitter_biases(mdl, eng);
      model::Batch batch{random_matrix(eng, n, arch.input_dim, 1.0),
                         random_labels(eng, n, arch.num_classes)};
      const std::vector<int> S = random_exit_set(eng, m);
      const model::ExitWeights w = model::make_exit_weights(m, S, true);
      const double lambda = 0.25 + next_double01(eng);

      std::map<int, model::Affine> heads;
      heads[7] = {random_matrix(eng, arch.hidden_dims.back(),
                                arch.num_classes, 0.8),
                  Tensor({arch.num_classes})};
      distill::AggregatedTeacher teacher =
          distill::aggregate_teacher(heads, {1.0}, {7}, mdl.blocks);

      const distill::ObjectiveGrads og =
          distill::objective_grads(mdl, &teacher, batch, S, w, lambda);
      ParamSet ps = model::model_to_params(mdl);
      auto eval = [&](const ParamSet &p) {
        return distill::local_objective(model::params_to_model(arch, p),
                                        &teacher, batch, S, w, lambda);
      };
      const double base = eval(ps);
      check(r, rel_err(base, og.loss) < 1e-10,
            fmt("objective value mismatch %.6g vs %.6g", base, og.loss));
      for (const auto &[name, g] : og.grads.items) {
        Tensor &target = ps.at(name);
        for (size_t i = 0; i < g.data.size(); ++i) {
          const double keep = target.data[i];
          target.data[i] = keep + h;
          const double up = eval(ps);
          target.data[i] = keep - h;
          const double dn = eval(ps);
          target.data[i] = keep;
          const double fd = (up - dn) / (2 * h);
          const double e = rel_err(g.data[i], fd);
          worst = std::max(worst, e);
          check(r, e < tol,
                "objective grad " + name + " " + fmt("rel err %.3g", e));
        }
      }
    }
  }
  r.summary = std::to_string(r.checks) +
              fmt(" finite-difference checks, worst relative error %.3g",
                  worst);
  return r;
}

SuiteResult run_qp_suite(uint64_t seed, int cases) {
  SuiteResult r{.name = "qp"};
  double worst = 0.0;

  for (int cs = 0; cs < cases; ++cs) {
    auto eng = case_engine(seed, kQp, cs);
    const int n = 2 + static_cast<int>(next_index(eng, 7));
    std::vector<double> c(n);
    for (double &v : c) v = 2 * next_double01(eng) - 1;
    const double mu = 0.1 + 1.9 * next_double01(eng);

    const std::vector<double> k = matching::solve_weights(c, mu);
    const std::vector<double> kpg = matching::brute_force_qp(c, mu);

    double sum = 0.0, gap = 0.0;
    for (int i = 0; i < n; ++i) {
      sum += k[i];
      gap = std::max(gap, std::fabs(k[i] - kpg[i]));
      check(r, k[i] >= 0.0, fmt("negative weight %.3g", k[i]));
    }
    worst = std::max(worst, gap);
    check(r, std::fabs(sum - 1.0) <= 1e-12,
          fmt("weights sum to %.17g, not 1", sum));
    check(r, gap < 1e-6,
          fmt("closed form vs projected gradient gap %.3g (n=%g)", gap,
              static_cast<double>(n)));
    check(r,
          matching::qp_objective(k, c, mu) >=
              matching::qp_objective(kpg, c, mu) - 1e-9,
          "closed form scored below the iterative solver");

    // Ordering: a better-matched teacher never gets less weight.
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (c[i] >= c[j])
          check(r, k[i] >= k[j] - 1e-12, "weight order violates c order");

    // Adding a constant to every score must not move the solution.
    const double shift = 2 * next_double01(eng) - 1;
    std::vector<double> cs2 = c;
    for (double &v : cs2) v += shift;
    const std::vector<double> ks = matching::solve_weights(cs2, mu);
    double sgap = 0.0;
    for (int i = 0; i < n; ++i) sgap = std::max(sgap, std::fabs(ks[i] - k[i]));
    check(r, sgap <= 1e-12, fmt("shift invariance broken by %.3g", sgap));

    // Heavy regularization pins the weights to uniform.
    const std::vector<double> ku = matching::solve_weights(c, 1e9);
    for (int i = 0; i < n; ++i)
      check(r, std::fabs(ku[i] - 1.0 / n) < 1e-8,
            fmt("large-mu limit off uniform by %.3g", ku[i] - 1.0 / n));
  }
  r.summary = std::to_string(r.checks) +
              fmt(" checks, worst solver disagreement %.3g", worst);
  return r;
}

namespace {

// Value of removing set away from `all`: conflict mass eliminated. Always
// >= 0 because pairwise penalties are <= 0.
double removal_gain(const std::vector<int> &all,
                    const std::vector<int> &removed,
                    const selection::SimilarityMatrix &delta) {
  std::vector<int> kept;
  std::set<int> rm(removed.begin(), removed.end());
  for (int id : all)
    if (!rm.count(id)) kept.push_back(id);
  return selection::keep_objective(kept, delta) -
         selection::keep_objective(all, delta);
}

}  // namespace

SuiteResult run_greedy_suite(uint64_t seed, int cases) {
  SuiteResult r{.name = "greedy"};
  const double bound = 1.0 - std::exp(-1.0);
  double worst_ratio = 1.0;

  for (int cs = 0; cs < cases; ++cs) {
    auto eng = case_engine(seed, kGreedy, cs);
    const int n = 4 + static_cast<int>(next_index(eng, 9));
    const int dim = 4 + static_cast<int>(next_index(eng, 4));

    std::map<int, std::vector<double>> registry;
    std::vector<int> ids;
    for (int i = 0; i < n; ++i) {
      const int id = 10 + 3 * i;
      ids.push_back(id);
      std::vector<double> v(dim);
      for (double &x : v) x = next_gaussian(eng);
      registry[id] = v;
    }
    const selection::SimilarityMatrix delta =
        selection::similarity_matrix(registry, ids);

    const int K = 1 + static_cast<int>(next_index(
                          eng, std::min(6, n - 1)));  // kept count
    const std::vector<int> kept = selection::greedy_prune(ids, delta, K);
    check(r, static_cast<int>(kept.size()) == K, "greedy kept wrong count");
    check(r, std::is_sorted(kept.begin(), kept.end()) &&
                 std::includes(ids.begin(), ids.end(), kept.begin(),
                               kept.end()),
          "greedy kept ids not a sorted subset of the candidates");

    const std::vector<int> best = selection::brute_force_select(ids, delta, K);
    std::vector<int> g_removed, b_removed;
    std::set<int> gk(kept.begin(), kept.end()), bk(best.begin(), best.end());
    for (int id : ids) {
      if (!gk.count(id)) g_removed.push_back(id);
      if (!bk.count(id)) b_removed.push_back(id);
    }
    const double fg = removal_gain(ids, g_removed, delta);
    const double fo = removal_gain(ids, b_removed, delta);
    check(r, fo >= fg - 1e-12, "exhaustive optimum below greedy value");
    check(r, fg >= bound * fo - 1e-12,
          fmt("approximation ratio %.4f below 1-1/e", fo > 0 ? fg / fo : 1.0));
    if (fo > 1e-12) worst_ratio = std::min(worst_ratio, fg / fo);

    // Monotonicity along a random growth chain of removal sets.
    std::vector<int> pool = ids;
    shuffle_in_place(eng, pool);
    std::vector<int> chain;
    double prev = 0.0;
    for (size_t i = 0; i + 1 < pool.size(); ++i) {
      chain.push_back(pool[i]);
      const double cur = removal_gain(ids, chain, delta);
      check(r, cur >= prev - 1e-12, "removal gain decreased when growing");
      prev = cur;
    }

    // Diminishing returns: marginal gain of one element shrinks as the
    // base removal set grows.
    if (n >= 4) {
      shuffle_in_place(eng, pool);
      const int e = pool[0];
      std::vector<int> a(pool.begin() + 1, pool.begin() + 2);
      std::vector<int> b(pool.begin() + 1,
                         pool.begin() + 2 + static_cast<int>(next_index(
                                                 eng, pool.size() - 3)));
      auto marginal = [&](std::vector<int> base) {
        const double before = removal_gain(ids, base, delta);
        base.push_back(e);
        return removal_gain(ids, base, delta) - before;
      };
      check(r, marginal(a) >= marginal(b) - 1e-12,
            "marginal removal gain grew with a larger base set");
    }
  }
  r.summary =
      std::to_string(r.checks) +
      fmt(" checks, worst greedy/optimal ratio %.4f (bound 0.6321)",
          worst_ratio);
  return r;
}

SuiteResult run_kd_suite(uint64_t seed, int cases) {
  SuiteResult r{.name = "kd"};
  double worst_grad_gap = 0.0, worst_prob_gap = 0.0;

  for (int cs = 0; cs < cases; ++cs) {
    auto eng = case_engine(seed, kKd, cs);
    const model::ArchSpec arch = random_arch(eng);
    const int n_batch = 1 + static_cast<int>(next_index(eng, 8));
    const int n_teachers = 1 + static_cast<int>(next_index(eng, 6));

    model::EENParams mdl = model::init_model(arch, splitmix64(seed ^ cs));
    const Tensor x = random_matrix(eng, n_batch, arch.input_dim, 1.0);
    const int d_last = arch.hidden_dims.back();

    std::map<int, model::Affine> heads;
    std::vector<int> ids;
    for (int i = 0; i < n_teachers; ++i) {
      const int id = 5 * i + 2;
      ids.push_back(id);
      heads[id] = {random_matrix(eng, d_last, arch.num_classes, 0.9),
                   Tensor({arch.num_classes})};
      for (double &v : heads[id].b.data) v = 0.3 * next_gaussian(eng);
    }
    const std::vector<double> k = next_dirichlet(eng, n_teachers, 1.0);

    // Per-teacher probabilities against the shared frozen backbone.
    const Tensor feat = model::forward_features(mdl, x, arch.m());
    std::vector<Tensor> probs;
    for (int id : ids)
      probs.push_back(softmax(affine_forward(feat, heads[id].W, heads[id].b)));
    const Tensor mix =
        distill::mixture_teacher_probs(heads, k, ids, mdl.blocks, x);

    // Gradient identity: student gradients of sum_i k_i KL(p_i || q) match
    // the single-KL gradient against the mixture.
    Tensor student_logits = random_matrix(eng, n_batch, arch.num_classes, 1.2);
    Tape t1;
    Var z1 = t1.leaf(student_logits, true);
    Var q1 = t1.softmax(z1);
    Var acc{};
    for (int i = 0; i < n_teachers; ++i) {
      Var term = t1.scale(t1.kl_divergence(t1.leaf(probs[i], false), q1), k[i]);
      acc = i == 0 ? term : t1.add(acc, term);
    }
    t1.backward(acc);

    Tape t2;
    Var z2 = t2.leaf(student_logits, true);
    t2.backward(t2.kl_divergence(t2.leaf(mix, false), t2.softmax(z2)));

    double ggap = 0.0;
    for (size_t i = 0; i < student_logits.data.size(); ++i)
      ggap = std::max(ggap, std::fabs(t1.grad(z1).data[i] -
                                      t2.grad(z2).data[i]));
    worst_grad_gap = std::max(worst_grad_gap, ggap);
    check(r, ggap < 1e-9,
          fmt("weighted-KL vs mixture-KL gradient gap %.3g", ggap));

    // Identical teachers collapse: averaging equal heads changes nothing.
    std::map<int, model::Affine> same;
    for (int id : ids) same[id] = heads[ids[0]];
    const distill::AggregatedTeacher one =
        distill::aggregate_teacher(same, k, ids, mdl.blocks);
    const Tensor collapsed = distill::teacher_probs(one, x);
    const Tensor direct =
        softmax(affine_forward(feat, heads[ids[0]].W, heads[ids[0]].b));
    double cgap = 0.0;
    for (size_t i = 0; i < direct.data.size(); ++i)
      cgap = std::max(cgap, std::fabs(collapsed.data[i] - direct.data[i]));
    check(r, cgap <= 1e-12,
          fmt("identical teachers did not collapse (gap %.3g)", cgap));

    // Measured only: parameter averaging is not probability mixing.
    const distill::AggregatedTeacher avg =
        distill::aggregate_teacher(heads, k, ids, mdl.blocks);
    const Tensor avg_probs = distill::teacher_probs(avg, x);
    for (size_t i = 0; i < mix.data.size(); ++i)
      worst_prob_gap =
          std::max(worst_prob_gap, std::fabs(avg_probs.data[i] - mix.data[i]));
  }
  r.summary =
      fmt("worst mixture-gradient gap %.3g; weight-averaged vs mixture "
          "probability gap %.3g (reported, not asserted)",
          worst_grad_gap, worst_prob_gap);
  return r;
}

std::vector<SuiteResult> run_suites(const std::string &which, uint64_t seed) {
  if (which == "all")
    return {run_grad_suite(seed), run_qp_suite(seed), run_greedy_suite(seed),
            run_kd_suite(seed)};
  if (which == "grad") return {run_grad_suite(seed)};
  if (which == "qp") return {run_qp_suite(seed)};
  if (which == "greedy") return {run_greedy_suite(seed)};
  if (which == "kd") return {run_kd_suite(seed)};
  throw std::invalid_argument("unknown verify suite '" + which +
                              "' (expected all, grad, qp, greedy, kd)");
}

}  // namespace feexd::verify
