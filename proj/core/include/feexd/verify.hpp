#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace feexd::verify {

struct SuiteResult {
  std::string name;
  bool passed = true;
  int checks = 0;                     // individual assertions evaluated
  std::vector<std::string> failures;  // one message per failed assertion
  std::string summary;                // human-readable wrap-up line
};

/// Analytic gradients vs central finite differences (h = 1e-5, relative
/// error < 1e-4) over random tapes: cross-entropy chains, KL chains, and the
/// full local training objective.
SuiteResult run_grad_suite(uint64_t seed = 42, int cases = 20);

/// Closed-form teacher weights vs an independent projected-gradient solver,
/// plus simplex membership, shift invariance, monotone ordering in c, and
/// the large-mu uniform limit.
SuiteResult run_qp_suite(uint64_t seed = 42, int cases = 200);

/// Greedy frontier pruning vs exhaustive search: (1 - 1/e) approximation
/// bound on the conflict-removal objective, plus monotonicity and
/// diminishing-returns spot checks of that objective.
SuiteResult run_greedy_suite(uint64_t seed = 42, int cases = 100);

/// Distillation identities: gradient of the k-weighted sum of KL terms
/// equals the gradient against the probability mixture; identical teachers
/// collapse to a single teacher. The weight-averaged vs mixture probability
/// gap is measured and reported, not asserted.
SuiteResult run_kd_suite(uint64_t seed = 42, int cases = 50);

/// "all" or one of: grad, qp, greedy, kd.
std::vector<SuiteResult> run_suites(const std::string &which,
                                    uint64_t seed = 42);

}  // namespace feexd::verify
