#include "feexd/inference.hpp"

#include <stdexcept>

#include "feexd/ops.hpp"

namespace feexd::infer {

CostModel cost_model(const model::ArchSpec &spec) {
  spec.validate();
  CostModel cm;
  int d_prev = spec.input_dim;
  for (int d : spec.hidden_dims) {
    cm.macs_block.push_back(static_cast<int64_t>(d_prev) * d);
    cm.macs_exit.push_back(static_cast<int64_t>(d) * spec.num_classes);
    d_prev = d;
  }
  return cm;
}

int64_t mac_count(const model::ArchSpec &spec, int j) {
  if (j < 1 || j > spec.m())
    throw std::out_of_range("mac_count: exit index out of range");
  const CostModel cm = cost_model(spec);
  int64_t total = 0;
  for (int b = 0; b < j; ++b) total += cm.macs_block[b] + cm.macs_exit[b];
  return total;
}

namespace {

int argmax_row(const Tensor &probs, int row) {
  const int c = probs.cols();
  int best = 0;
  for (int j = 1; j < c; ++j)
    if (probs.at(row, j) > probs.at(row, best)) best = j;
  return best;
}

}  // namespace

Prediction predict_with_policy(const model::EENParams &mdl, const Tensor &x,
                               const ExitPolicy &policy,
                               const CostModel &cost) {
  if (x.ndim() != 2 || x.rows() != 1)
    throw std::invalid_argument("predict_with_policy: x must be [1 x d]");
  const int m = mdl.arch.m();
  Prediction pred;
  Tensor a = x;
  int64_t macs = 0;
  for (int j = 1; j <= m; ++j) {
    a = relu(affine_forward(a, mdl.blocks[j - 1].W, mdl.blocks[j - 1].b));
    const Tensor probs =
        softmax(affine_forward(a, mdl.exits[j - 1].W, mdl.exits[j - 1].b));
    macs += cost.macs_block[j - 1] + cost.macs_exit[j - 1];
    const int top = argmax_row(probs, 0);
    if (probs.at(0, top) > policy.epsilon || j == m) {
      pred.label = top;
      pred.exit_index = j;
      pred.macs = macs;
      return pred;
    }
  }
  return pred;  // unreachable
}

EvalReport evaluate(const model::EENParams &mdl, const data::Dataset &testset,
                    const ExitPolicy &policy, const CostModel &cost) {
  return evaluate_grid(mdl, testset, {policy.epsilon}, cost).front();
}

std::vector<EvalReport> evaluate_grid(const model::EENParams &mdl,
                                      const data::Dataset &testset,
                                      const std::vector<double> &epsilons,
                                      const CostModel &cost) {
  if (testset.size() == 0)
    throw std::invalid_argument("evaluate: empty test set");
  if (epsilons.empty())
    throw std::invalid_argument("evaluate: empty epsilon list");
  testset.validate();
  const int m = mdl.arch.m();
  const int n = testset.size();

  // One batched pass; rows are independent, so this matches the per-sample
  // predict_with_policy bit for bit.
  const std::vector<Tensor> probs = model::forward_all_exits(mdl, testset.features);

  std::vector<int64_t> cum_macs(m);
  int64_t acc_macs = 0;
  for (int j = 0; j < m; ++j) {
    acc_macs += cost.macs_block[j] + cost.macs_exit[j];
    cum_macs[j] = acc_macs;
  }

  std::vector<int> top_label(static_cast<size_t>(n) * m);
  std::vector<double> top_prob(static_cast<size_t>(n) * m);
  std::vector<int64_t> per_exit_correct(m, 0);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < n; ++i) {
      const int t = argmax_row(probs[j], i);
      top_label[static_cast<size_t>(i) * m + j] = t;
      top_prob[static_cast<size_t>(i) * m + j] = probs[j].at(i, t);
      if (t == testset.labels[i]) ++per_exit_correct[j];
    }

  std::vector<EvalReport> reports;
  for (const double eps : epsilons) {
    EvalReport r;
    r.num_samples = n;
    r.exit_histogram.assign(m, 0);
    r.per_exit_correct = per_exit_correct;
    for (int i = 0; i < n; ++i) {
      int taken = m - 1;
      for (int j = 0; j < m; ++j)
        if (top_prob[static_cast<size_t>(i) * m + j] > eps || j == m - 1) {
          taken = j;
          break;
        }
      ++r.exit_histogram[taken];
      r.total_macs += cum_macs[taken];
      if (top_label[static_cast<size_t>(i) * m + taken] == testset.labels[i])
        ++r.num_correct;
    }
    r.accuracy = static_cast<double>(r.num_correct) / n;
    r.mean_macs = static_cast<double>(r.total_macs) / n;
    r.per_exit_accuracy.resize(m);
    double acc_sum = 0.0;
    for (int j = 0; j < m; ++j) {
      r.per_exit_accuracy[j] = static_cast<double>(per_exit_correct[j]) / n;
      acc_sum += r.per_exit_accuracy[j];
    }
    r.averaged_accuracy = acc_sum / m;
    reports.push_back(std::move(r));
  }
  return reports;
}

EvalReport merge_reports(const std::vector<EvalReport> &reports) {
  if (reports.empty())
    throw std::invalid_argument("merge_reports: nothing to merge");
  const int m = static_cast<int>(reports.front().exit_histogram.size());
  EvalReport out;
  out.exit_histogram.assign(m, 0);
  out.per_exit_correct.assign(m, 0);
  for (const EvalReport &r : reports) {
    if (static_cast<int>(r.exit_histogram.size()) != m)
      throw std::invalid_argument("merge_reports: exit-count mismatch");
    out.num_samples += r.num_samples;
    out.num_correct += r.num_correct;
    out.total_macs += r.total_macs;
    for (int j = 0; j < m; ++j) {
      out.exit_histogram[j] += r.exit_histogram[j];
      out.per_exit_correct[j] += r.per_exit_correct[j];
    }
  }
  out.accuracy = static_cast<double>(out.num_correct) / out.num_samples;
  out.mean_macs = static_cast<double>(out.total_macs) / out.num_samples;
  out.per_exit_accuracy.resize(m);
  double acc_sum = 0.0;
  for (int j = 0; j < m; ++j) {
    out.per_exit_accuracy[j] =
        static_cast<double>(out.per_exit_correct[j]) / out.num_samples;
    acc_sum += out.per_exit_accuracy[j];
  }
  out.averaged_accuracy = acc_sum / m;
  return out;
}

}  // namespace feexd::infer
