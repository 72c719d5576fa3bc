#include "feexd/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "feexd/orchestrator.hpp"

namespace feexd::runner {

namespace {

constexpr const char *kVersion = "feexd-config-1";

using nlohmann::json;

void reject_unknown_keys(const json &j, const std::set<std::string> &known,
                         const std::string &prefix,
                         std::vector<std::string> &errors) {
  for (const auto &[key, val] : j.items())
    if (!known.count(key)) errors.push_back(prefix + key + " (unknown field)");
}

template <typename T>
void read_field(const json &j, const char *key, T &out,
                std::vector<std::string> &errors) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception &) {
    errors.push_back(std::string(key) + " (wrong type)");
  }
}

}  // namespace

void validate_config(const ExperimentConfig &cfg) {
  std::vector<std::string> errors;
  auto require = [&](bool ok, const std::string &msg) {
    if (!ok) errors.push_back(msg);
  };

  require(cfg.n_clients >= 1, "n_clients (must be >= 1)");
  require(cfg.m_exits >= 2, "m_exits (must be >= 2)");
  require(static_cast<int>(cfg.hidden_dims.size()) == cfg.m_exits,
          "hidden_dims (must list exactly m_exits widths)");
  for (int d : cfg.hidden_dims)
    if (d <= 0) {
      errors.push_back("hidden_dims (widths must be positive)");
      break;
    }
  require(cfg.alpha > 0.0, "alpha (must be > 0)");
  require(cfg.sample_rate > 0.0 && cfg.sample_rate <= 1.0,
          "sample_rate (must be in (0, 1])");
  require(cfg.rounds >= 0, "rounds (must be >= 0)");
  require(cfg.local_epochs >= 0, "local_epochs (must be >= 0)");
  require(cfg.batch >= 1, "batch (must be >= 1)");
  require(cfg.lr > 0.0, "lr (must be > 0)");
  require(cfg.momentum >= 0.0 && cfg.momentum < 1.0,
          "momentum (must be in [0, 1))");
  require(cfg.weight_decay >= 0.0, "weight_decay (must be >= 0)");
  require(cfg.lr_decay > 0.0 && cfg.lr_decay <= 1.0,
          "lr_decay (must be in (0, 1])");
  require(cfg.lambda >= 0.0, "lambda (must be >= 0)");
  require(cfg.mu > 0.0, "mu (must be > 0)");
  require(!cfg.epsilon_grid.empty(), "epsilon_grid (must be nonempty)");
  for (double e : cfg.epsilon_grid)
    if (e < 0.0 || e > 1.0) {
      errors.push_back("epsilon_grid (thresholds must be in [0, 1])");
      break;
    }
  try {
    fed::strategy_from_string(cfg.strategy);
  } catch (const std::invalid_argument &ex) {
    errors.push_back("strategy (" + std::string(ex.what()) + ")");
  }
  if (cfg.data.kind == "synthetic") {
    require(cfg.data.num_classes >= 2, "data.num_classes (must be >= 2)");
    require(cfg.data.dim >= 1, "data.dim (must be >= 1)");
    require(cfg.data.per_class >= 1, "data.per_class (must be >= 1)");
    require(cfg.data.class_sep >= 0.0, "data.class_sep (must be >= 0)");
  } else if (cfg.data.kind == "csv") {
    require(!cfg.data.path.empty(), "data.path (required for csv data)");
  } else {
    errors.push_back("data.kind (must be 'synthetic' or 'csv')");
  }
  require(cfg.min_per_client >= 0, "min_per_client (must be >= 0)");

  if (!errors.empty()) {
    std::string msg = "invalid config: ";
    for (size_t i = 0; i < errors.size(); ++i)
      msg += (i ? "; " : "") + errors[i];
    throw std::invalid_argument(msg);
  }
}

ExperimentConfig config_from_json(const std::string &text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception &ex) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") +
                                ex.what());
  }
  if (!j.is_object())
    throw std::invalid_argument("config must be a JSON object");

  ExperimentConfig cfg;
  std::vector<std::string> errors;

  const std::set<std::string> known = {
      "version",      "n_clients",   "m_exits",      "alpha",
      "sample_rate",  "rounds",      "local_epochs", "batch",
      "lr",           "momentum",    "weight_decay", "lr_decay",
      "lambda",       "mu",          "epsilon_grid", "strategy",
      "hidden_dims",  "data",        "min_per_client",
      "seed",         "w_renormalize", "p_renormalize"};
  reject_unknown_keys(j, known, "", errors);

  if (j.contains("version") && j.at("version") != kVersion)
    errors.push_back(std::string("version (expected ") + kVersion + ")");

  read_field(j, "n_clients", cfg.n_clients, errors);
  read_field(j, "m_exits", cfg.m_exits, errors);
  read_field(j, "alpha", cfg.alpha, errors);
  read_field(j, "sample_rate", cfg.sample_rate, errors);
  read_field(j, "rounds", cfg.rounds, errors);
  read_field(j, "local_epochs", cfg.local_epochs, errors);
  read_field(j, "batch", cfg.batch, errors);
  read_field(j, "lr", cfg.lr, errors);
  read_field(j, "momentum", cfg.momentum, errors);
  read_field(j, "weight_decay", cfg.weight_decay, errors);
  read_field(j, "lr_decay", cfg.lr_decay, errors);
  read_field(j, "lambda", cfg.lambda, errors);
  read_field(j, "mu", cfg.mu, errors);
  read_field(j, "epsilon_grid", cfg.epsilon_grid, errors);
  read_field(j, "strategy", cfg.strategy, errors);
  read_field(j, "hidden_dims", cfg.hidden_dims, errors);
  read_field(j, "min_per_client", cfg.min_per_client, errors);
  read_field(j, "seed", cfg.seed, errors);
  read_field(j, "w_renormalize", cfg.w_renormalize, errors);
  read_field(j, "p_renormalize", cfg.p_renormalize, errors);

  if (j.contains("data")) {
    const json &d = j.at("data");
    if (!d.is_object()) {
      errors.push_back("data (must be an object)");
    } else {
      reject_unknown_keys(
          d, {"kind", "num_classes", "dim", "per_class", "class_sep", "path"},
          "data.", errors);
      read_field(d, "kind", cfg.data.kind, errors);
      read_field(d, "num_classes", cfg.data.num_classes, errors);
      read_field(d, "dim", cfg.data.dim, errors);
      read_field(d, "per_class", cfg.data.per_class, errors);
      read_field(d, "class_sep", cfg.data.class_sep, errors);
      read_field(d, "path", cfg.data.path, errors);
    }
  }

  if (!errors.empty()) {
    std::string msg = "invalid config: ";
    for (size_t i = 0; i < errors.size(); ++i)
      msg += (i ? "; " : "") + errors[i];
    throw std::invalid_argument(msg);
  }

  validate_config(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string &path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return config_from_json(buf.str());
}

std::string config_to_json(const ExperimentConfig &cfg) {
  json j;
  j["version"] = kVersion;
  j["n_clients"] = cfg.n_clients;
  j["m_exits"] = cfg.m_exits;
  j["alpha"] = cfg.alpha;
  j["sample_rate"] = cfg.sample_rate;
  j["rounds"] = cfg.rounds;
  j["local_epochs"] = cfg.local_epochs;
  j["batch"] = cfg.batch;
  j["lr"] = cfg.lr;
  j["momentum"] = cfg.momentum;
  j["weight_decay"] = cfg.weight_decay;
  j["lr_decay"] = cfg.lr_decay;
  j["lambda"] = cfg.lambda;
  j["mu"] = cfg.mu;
  j["epsilon_grid"] = cfg.epsilon_grid;
  j["strategy"] = cfg.strategy;
  j["hidden_dims"] = cfg.hidden_dims;
  j["data"]["kind"] = cfg.data.kind;
  if (cfg.data.kind == "csv") {
    j["data"]["path"] = cfg.data.path;
  } else {
    j["data"]["num_classes"] = cfg.data.num_classes;
    j["data"]["dim"] = cfg.data.dim;
    j["data"]["per_class"] = cfg.data.per_class;
    j["data"]["class_sep"] = cfg.data.class_sep;
  }
  j["min_per_client"] = cfg.min_per_client;
  j["seed"] = cfg.seed;
  j["w_renormalize"] = cfg.w_renormalize;
  j["p_renormalize"] = cfg.p_renormalize;
  return j.dump(2) + "\n";
}

void save_config(const std::string &path, const ExperimentConfig &cfg) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write config " + path);
  f << config_to_json(cfg);
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace feexd::runner
