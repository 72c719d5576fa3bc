#include "feexd/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "feexd/rng.hpp"

namespace feexd::data {

void Dataset::validate() const {
  if (labels.empty()) throw std::invalid_argument("Dataset: empty");
  if (features.ndim() != 2 ||
      features.rows() != static_cast<int>(labels.size()))
    throw std::invalid_argument("Dataset: features/labels size mismatch");
  if (num_classes <= 0) throw std::invalid_argument("Dataset: num_classes <= 0");
  for (int y : labels)
    if (y < 0 || y >= num_classes)
      throw std::invalid_argument("Dataset: label out of range");
}

Dataset generate_synthetic(int num_classes, int dim, int per_class,
                           double class_sep, uint64_t seed) {
  if (num_classes <= 0 || dim <= 0 || per_class <= 0)
    throw std::invalid_argument("generate_synthetic: sizes must be positive");
  if (class_sep < 0.0)
    throw std::invalid_argument("generate_synthetic: class_sep must be >= 0");
  std::mt19937_64 eng(seed);
  const int n = num_classes * per_class;
  Dataset ds;
  ds.num_classes = num_classes;
  ds.features = Tensor({n, dim});
  ds.labels.resize(n);
  int row = 0;
  std::vector<double> mu(dim);
  for (int c = 0; c < num_classes; ++c) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (double &v : mu) {
        v = next_gaussian(eng);
        norm += v * v;
      }
      norm = std::sqrt(norm);
    } while (norm < 1e-12);
    for (double &v : mu) v = v / norm * class_sep;
    for (int s = 0; s < per_class; ++s, ++row) {
      double *out = ds.features.data.data() + static_cast<size_t>(row) * dim;
      for (int d = 0; d < dim; ++d) out[d] = mu[d] + next_gaussian(eng);
      ds.labels[row] = c;
    }
  }
  return ds;
}

namespace {

// Largest-remainder rounding of count*props[i] to integers summing to count.
// Ties go to the lower index.
std::vector<int> apportion(const std::vector<double> &props, int count) {
  const int n = static_cast<int>(props.size());
  std::vector<int> out(n);
  std::vector<std::pair<double, int>> rem(n);
  int assigned = 0;
  for (int i = 0; i < n; ++i) {
    const double q = props[i] * count;
    out[i] = static_cast<int>(std::floor(q));
    rem[i] = {q - out[i], i};
    assigned += out[i];
  }
  std::sort(rem.begin(), rem.end(), [](const auto &a, const auto &b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (int r = 0; r < count - assigned; ++r) ++out[rem[r].second];
  return out;
}

Dataset gather(const Dataset &src, const std::vector<int> &rows) {
  Dataset out;
  out.num_classes = src.num_classes;
  const int d = src.dim();
  out.features = Tensor({static_cast<int>(rows.size()), d});
  out.labels.resize(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    const double *srcp =
        src.features.data.data() + static_cast<size_t>(rows[i]) * d;
    std::copy(srcp, srcp + d,
              out.features.data.data() + i * static_cast<size_t>(d));
    out.labels[i] = src.labels[rows[i]];
  }
  return out;
}

}  // namespace

std::vector<ClientPartition> dirichlet_partition(const Dataset &ds, int n,
                                                 double alpha,
                                                 int min_per_client,
                                                 uint64_t seed) {
  ds.validate();
  if (n < 1) throw std::invalid_argument("dirichlet_partition: n must be >= 1");
  if (!(alpha > 0.0))
    throw std::invalid_argument("dirichlet_partition: alpha must be > 0");
  if (min_per_client < 0)
    throw std::invalid_argument("dirichlet_partition: min_per_client < 0");
  if (ds.size() < n * min_per_client)
    throw std::invalid_argument(
        "dirichlet_partition: dataset too small for min_per_client");

  const int C = ds.num_classes;
  std::vector<std::vector<int>> class_rows(C);
  for (int i = 0; i < ds.size(); ++i) class_rows[ds.labels[i]].push_back(i);

  std::mt19937_64 eng(seed);

  // counts[c][i]: how many class-c samples client i receives.
  std::vector<std::vector<int>> counts;
  constexpr int kMaxAttempts = 1000;
  bool ok = false;
  for (int attempt = 0; attempt < kMaxAttempts && !ok; ++attempt) {
    counts.assign(C, {});
    std::vector<int> totals(n, 0);
    for (int c = 0; c < C; ++c) {
      const auto props = next_dirichlet(eng, n, alpha);
      counts[c] = apportion(props, static_cast<int>(class_rows[c].size()));
      for (int i = 0; i < n; ++i) totals[i] += counts[c][i];
    }
    ok = *std::min_element(totals.begin(), totals.end()) >= min_per_client;
  }
  if (!ok)
    throw std::invalid_argument(
        "dirichlet_partition: could not satisfy min_per_client after resampling");

  // Shuffle within each class, then hand out contiguous slices in id order.
  std::vector<std::vector<std::vector<int>>> slices(
      n, std::vector<std::vector<int>>(C));
  for (int c = 0; c < C; ++c) {
    shuffle_in_place(eng, class_rows[c]);
    int pos = 0;
    for (int i = 0; i < n; ++i) {
      slices[i][c].assign(class_rows[c].begin() + pos,
                          class_rows[c].begin() + pos + counts[c][i]);
      pos += counts[c][i];
    }
  }

  std::vector<ClientPartition> parts(n);
  for (int i = 0; i < n; ++i) {
    std::vector<int> train_rows, test_rows;
    for (int c = 0; c < C; ++c) {
      const auto &rows = slices[i][c];
      const int cnt = static_cast<int>(rows.size());
      const int n_test = (2 * cnt + 5) / 10;  // round(cnt/5), half up
      for (int k = 0; k < cnt - n_test; ++k) train_rows.push_back(rows[k]);
      for (int k = cnt - n_test; k < cnt; ++k) test_rows.push_back(rows[k]);
    }
    // Keep the test side nonempty whenever the client can afford it.
    if (test_rows.empty() && train_rows.size() >= 2) {
      test_rows.push_back(train_rows.back());
      train_rows.pop_back();
    }
    parts[i].client_id = i;
    parts[i].train = train_rows.empty() ? Dataset{} : gather(ds, train_rows);
    parts[i].test = test_rows.empty() ? Dataset{} : gather(ds, test_rows);
    parts[i].train.num_classes = ds.num_classes;
    parts[i].test.num_classes = ds.num_classes;
  }

  const auto p = client_weights(parts);
  for (int i = 0; i < n; ++i) parts[i].p = p[i];
  return parts;
}

std::vector<double> client_weights(const std::vector<ClientPartition> &parts) {
  if (parts.empty()) throw std::invalid_argument("client_weights: empty");
  double total = 0.0;
  for (const auto &cp : parts) total += cp.train.size();
  if (total <= 0.0)
    throw std::invalid_argument("client_weights: no training samples");
  std::vector<double> p;
  p.reserve(parts.size());
  for (const auto &cp : parts) p.push_back(cp.train.size() / total);
  return p;
}

Dataset load_csv(const std::string &path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 2 || header.back() != "label")
    throw std::runtime_error(path + ": last header column must be 'label'");
  const int d = static_cast<int>(header.size()) - 1;

  std::vector<double> feats;
  std::vector<int> labels;
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    int col = 0;
    for (; std::getline(ss, cell, ','); ++col) {
      try {
        if (col < d)
          feats.push_back(std::stod(cell));
        else if (col == d)
          labels.push_back(std::stoi(cell));
        else
          throw std::runtime_error("too many columns");
      } catch (const std::exception &) {
        throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                 ": bad cell '" + cell + "'");
      }
    }
    if (col != d + 1)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected " + std::to_string(d + 1) +
                               " columns, got " + std::to_string(col));
  }
  if (labels.empty()) throw std::runtime_error(path + ": no data rows");

  Dataset ds;
  ds.features = Tensor({static_cast<int>(labels.size()), d}, std::move(feats));
  ds.labels = std::move(labels);
  ds.num_classes = *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
  ds.validate();
  return ds;
}

std::vector<int> label_histogram(const Dataset &ds) {
  std::vector<int> h(ds.num_classes, 0);
  for (int y : ds.labels) ++h[y];
  return h;
}

}  // namespace feexd::data
