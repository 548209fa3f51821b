#include "fedsim/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fedsim/drift.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

using nlohmann::json;

namespace {

// Disjoint stream tags so the per-purpose seeds derived from one config
// seed never collide.
constexpr uint64_t kTagData = 0xDA7A;
constexpr uint64_t kTagSplit = 0x5B17;
constexpr uint64_t kTagPartition = 0x9A27;
constexpr uint64_t kTagInit = 0x1217;
constexpr uint64_t kTagRound = 0x2070;
constexpr uint64_t kTagView = 0x7E1F;
constexpr uint64_t kTagClient = 0xC11E;

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::fedavg: return "fedavg";
    case Method::fedavgm: return "fedavgm";
    case Method::fedprox: return "fedprox";
    case Method::scaffold: return "scaffold";
    case Method::fedopt: return "fedopt";
    case Method::fedeve: return "fedeve";
  }
  throw ConfigError("config: unknown method enum value");
}

Method method_from_name(const std::string& name) {
  if (name == "fedavg") return Method::fedavg;
  if (name == "fedavgm") return Method::fedavgm;
  if (name == "fedprox") return Method::fedprox;
  if (name == "scaffold") return Method::scaffold;
  if (name == "fedopt") return Method::fedopt;
  if (name == "fedeve") return Method::fedeve;
  throw ConfigError("config: 'method' must be one of "
                    "fedavg|fedavgm|fedprox|scaffold|fedopt|fedeve, got '" +
                    name + "'");
}

namespace {

std::string mode_name(DriftIsolationMode m) {
  switch (m) {
    case DriftIsolationMode::none: return "none";
    case DriftIsolationMode::period_only: return "period_only";
    case DriftIsolationMode::client_only: return "client_only";
    case DriftIsolationMode::both: return "both";
  }
  throw ConfigError("config: unknown drift_isolation mode");
}

DriftIsolationMode mode_from_name(const std::string& s) {
  if (s == "none") return DriftIsolationMode::none;
  if (s == "period_only") return DriftIsolationMode::period_only;
  if (s == "client_only") return DriftIsolationMode::client_only;
  if (s == "both") return DriftIsolationMode::both;
  throw ConfigError("config: 'drift_isolation.mode' must be one of "
                    "none|period_only|client_only|both, got '" + s + "'");
}

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
  for (const auto& item : obj.items())
    if (!allowed.count(item.key()))
      throw ConfigError("config: unknown key '" + item.key() + "' in " +
                        where);
}

double need_number(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key))
    throw ConfigError("config: missing required key '" + std::string(key) +
                      "' in " + where);
  if (!obj[key].is_number())
    throw ConfigError("config: '" + where + "." + key + "' must be a number");
  return obj[key].get<double>();
}

double opt_number(const json& obj, const char* key, double fallback,
                  const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number())
    throw ConfigError("config: '" + where + "." + key + "' must be a number");
  return obj[key].get<double>();
}

int opt_int(const json& obj, const char* key, int fallback,
            const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer())
    throw ConfigError("config: '" + where + "." + key +
                      "' must be an integer");
  return obj[key].get<int>();
}

std::string opt_string(const json& obj, const char* key,
                       const std::string& fallback,
                       const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_string())
    throw ConfigError("config: '" + where + "." + key + "' must be a string");
  return obj[key].get<std::string>();
}

DatasetConfig parse_dataset(const json& j) {
  if (!j.is_object())
    throw ConfigError("config: 'dataset' must be an object");
  DatasetConfig d;
  const std::string type = opt_string(j, "type", "", "dataset");
  if (type == "synthetic") {
    check_keys(j,
               {"type", "n_classes", "input_dim", "per_class", "separation",
                "eval_fraction"},
               "dataset");
    d.kind = DatasetConfig::Kind::synthetic;
    d.n_classes = opt_int(j, "n_classes", d.n_classes, "dataset");
    d.input_dim = opt_int(j, "input_dim", d.input_dim, "dataset");
    d.per_class = opt_int(j, "per_class", d.per_class, "dataset");
    d.separation = opt_number(j, "separation", d.separation, "dataset");
    d.eval_fraction =
        opt_number(j, "eval_fraction", d.eval_fraction, "dataset");
    if (d.n_classes < 2)
      throw ConfigError("config: 'dataset.n_classes' must be >= 2");
    if (d.input_dim < 1)
      throw ConfigError("config: 'dataset.input_dim' must be >= 1");
    if (d.per_class < 1)
      throw ConfigError("config: 'dataset.per_class' must be >= 1");
    if (d.separation < 0.0)
      throw ConfigError("config: 'dataset.separation' must be >= 0");
  } else if (type == "idx") {
    check_keys(j,
               {"type", "images", "labels", "test_images", "test_labels",
                "eval_fraction"},
               "dataset");
    d.kind = DatasetConfig::Kind::idx;
    d.images = opt_string(j, "images", "", "dataset");
    d.labels = opt_string(j, "labels", "", "dataset");
    d.test_images = opt_string(j, "test_images", "", "dataset");
    d.test_labels = opt_string(j, "test_labels", "", "dataset");
    d.eval_fraction =
        opt_number(j, "eval_fraction", d.eval_fraction, "dataset");
    if (d.images.empty() || d.labels.empty())
      throw ConfigError("config: 'dataset.images' and 'dataset.labels' are "
                        "required for type idx");
    if (d.test_images.empty() != d.test_labels.empty())
      throw ConfigError("config: 'dataset.test_images' and "
                        "'dataset.test_labels' must be given together");
  } else {
    throw ConfigError("config: 'dataset.type' must be synthetic or idx");
  }
  if (d.eval_fraction <= 0.0 || d.eval_fraction >= 1.0)
    throw ConfigError("config: 'dataset.eval_fraction' must be in (0, 1)");
  return d;
}

PartitionConfig parse_partition(const json& j) {
  if (!j.is_object())
    throw ConfigError("config: 'partition' must be an object");
  PartitionConfig p;
  const std::string type = opt_string(j, "type", "iid", "partition");
  if (type == "iid") {
    check_keys(j, {"type"}, "partition");
    p.kind = PartitionConfig::Kind::iid;
  } else if (type == "dirichlet") {
    check_keys(j, {"type", "alpha"}, "partition");
    p.kind = PartitionConfig::Kind::dirichlet;
    p.alpha = need_number(j, "alpha", "partition");
    if (p.alpha <= 0.0)
      throw ConfigError("config: 'partition.alpha' must be positive");
  } else if (type == "external") {
    check_keys(j, {"type", "path"}, "partition");
    p.kind = PartitionConfig::Kind::external;
    p.path = opt_string(j, "path", "", "partition");
    if (p.path.empty())
      throw ConfigError("config: 'partition.path' is required for type "
                        "external");
  } else {
    throw ConfigError("config: 'partition.type' must be iid, dirichlet, or "
                      "external");
  }
  return p;
}

ModelConfig parse_model(const json& j) {
  if (!j.is_object()) throw ConfigError("config: 'model' must be an object");
  check_keys(j, {"kind", "hidden_dim", "init_scale"}, "model");
  ModelConfig m;
  const std::string kind = opt_string(j, "kind", "logistic", "model");
  if (kind == "logistic")
    m.kind = ModelKind::logistic;
  else if (kind == "mlp")
    m.kind = ModelKind::mlp;
  else
    throw ConfigError("config: 'model.kind' must be logistic or mlp");
  m.hidden_dim = opt_int(j, "hidden_dim", m.hidden_dim, "model");
  m.init_scale = opt_number(j, "init_scale", m.init_scale, "model");
  if (m.hidden_dim < 1)
    throw ConfigError("config: 'model.hidden_dim' must be >= 1");
  if (m.init_scale < 0.0)
    throw ConfigError("config: 'model.init_scale' must be >= 0");
  return m;
}

ServerHyperConfig parse_server(const json& j) {
  if (!j.is_object()) throw ConfigError("config: 'server' must be an object");
  check_keys(j,
             {"eta_g", "beta", "beta1", "beta2", "tau", "force_gain",
              "broadcast_prediction"},
             "server");
  ServerHyperConfig s;
  s.eta_g = opt_number(j, "eta_g", s.eta_g, "server");
  s.beta = opt_number(j, "beta", s.beta, "server");
  s.beta1 = opt_number(j, "beta1", s.beta1, "server");
  s.beta2 = opt_number(j, "beta2", s.beta2, "server");
  s.tau = opt_number(j, "tau", s.tau, "server");
  if (j.contains("force_gain") && !j["force_gain"].is_null()) {
    if (!j["force_gain"].is_number())
      throw ConfigError("config: 'server.force_gain' must be a number or "
                        "null");
    s.force_gain = j["force_gain"].get<double>();
    if (*s.force_gain < 0.0 || *s.force_gain > 1.0)
      throw ConfigError("config: 'server.force_gain' must be in [0, 1]");
  }
  if (j.contains("broadcast_prediction")) {
    if (!j["broadcast_prediction"].is_boolean())
      throw ConfigError("config: 'server.broadcast_prediction' must be a "
                        "boolean");
    s.broadcast_prediction = j["broadcast_prediction"].get<bool>();
  }
  if (s.eta_g <= 0.0)
    throw ConfigError("config: 'server.eta_g' must be positive");
  if (s.beta < 0.0 || s.beta >= 1.0)
    throw ConfigError("config: 'server.beta' must be in [0, 1)");
  if (s.beta1 < 0.0 || s.beta1 >= 1.0 || s.beta2 < 0.0 || s.beta2 >= 1.0)
    throw ConfigError("config: 'server.beta1'/'server.beta2' must be in "
                      "[0, 1)");
  if (s.tau <= 0.0)
    throw ConfigError("config: 'server.tau' must be positive");
  return s;
}

LocalHyper parse_local(const json& j) {
  if (!j.is_object()) throw ConfigError("config: 'local' must be an object");
  check_keys(j, {"eta_l", "epochs", "batch_size", "mu"}, "local");
  LocalHyper l;
  l.eta_l = opt_number(j, "eta_l", l.eta_l, "local");
  l.epochs = opt_int(j, "epochs", l.epochs, "local");
  l.batch_size = opt_int(j, "batch_size", l.batch_size, "local");
  l.mu = opt_number(j, "mu", l.mu, "local");
  if (l.eta_l <= 0.0)
    throw ConfigError("config: 'local.eta_l' must be positive");
  if (l.epochs < 1) throw ConfigError("config: 'local.epochs' must be >= 1");
  if (l.batch_size < 1)
    throw ConfigError("config: 'local.batch_size' must be >= 1");
  if (l.mu < 0.0) throw ConfigError("config: 'local.mu' must be >= 0");
  return l;
}

void validate_counts(const ExperimentConfig& cfg) {
  if (cfg.n_clients < 1)
    throw ConfigError("config: 'n_clients' must be >= 1");
  if (cfg.clients_per_round < 1 || cfg.clients_per_round > cfg.n_clients)
    throw ConfigError("config: 'clients_per_round' must be in "
                      "[1, n_clients]");
  if (cfg.rounds < 1) throw ConfigError("config: 'rounds' must be >= 1");
  if (cfg.eval_every < 1)
    throw ConfigError("config: 'eval_every' must be >= 1");
  if (cfg.period_drift_every < 0)
    throw ConfigError("config: 'period_drift_every' must be >= 0");
  if (cfg.client_only_alpha <= 0.0)
    throw ConfigError("config: 'drift_isolation.client_only_alpha' must be "
                      "positive");
}

std::string format_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string partition_tag(const ExperimentConfig& cfg) {
  switch (cfg.partition.kind) {
    case PartitionConfig::Kind::iid: return "iid";
    case PartitionConfig::Kind::dirichlet:
      return "dir" + format_g(cfg.partition.alpha);
    case PartitionConfig::Kind::external: return "ext";
  }
  return "unknown";
}

json config_canonical_json(const ExperimentConfig& cfg) {
  json c;
  json d;
  if (cfg.dataset.kind == DatasetConfig::Kind::synthetic) {
    d["type"] = "synthetic";
    d["n_classes"] = cfg.dataset.n_classes;
    d["input_dim"] = cfg.dataset.input_dim;
    d["per_class"] = cfg.dataset.per_class;
    d["separation"] = cfg.dataset.separation;
  } else {
    d["type"] = "idx";
    d["images"] = cfg.dataset.images;
    d["labels"] = cfg.dataset.labels;
    d["test_images"] = cfg.dataset.test_images;
    d["test_labels"] = cfg.dataset.test_labels;
  }
  d["eval_fraction"] = cfg.dataset.eval_fraction;
  c["dataset"] = d;
  json p;
  switch (cfg.partition.kind) {
    case PartitionConfig::Kind::iid: p["type"] = "iid"; break;
    case PartitionConfig::Kind::dirichlet:
      p["type"] = "dirichlet";
      p["alpha"] = cfg.partition.alpha;
      break;
    case PartitionConfig::Kind::external:
      p["type"] = "external";
      p["path"] = cfg.partition.path;
      break;
  }
  c["partition"] = p;
  c["drift_isolation"] = mode_name(cfg.drift_isolation);
  c["client_only_alpha"] = cfg.client_only_alpha;
  c["model"] = {{"kind", cfg.model.kind == ModelKind::mlp ? "mlp"
                                                          : "logistic"},
                {"hidden_dim", cfg.model.hidden_dim},
                {"init_scale", cfg.model.init_scale}};
  c["n_clients"] = cfg.n_clients;
  c["clients_per_round"] = cfg.clients_per_round;
  c["rounds"] = cfg.rounds;
  c["method"] = method_name(cfg.method);
  c["server"] = {{"eta_g", cfg.server.eta_g},
                 {"beta", cfg.server.beta},
                 {"beta1", cfg.server.beta1},
                 {"beta2", cfg.server.beta2},
                 {"tau", cfg.server.tau},
                 {"force_gain", cfg.server.force_gain
                                    ? json(*cfg.server.force_gain)
                                    : json(nullptr)},
                 {"broadcast_prediction", cfg.server.broadcast_prediction}};
  c["local"] = {{"eta_l", cfg.local.eta_l},
                {"epochs", cfg.local.epochs},
                {"batch_size", cfg.local.batch_size},
                {"mu", cfg.local.mu}};
  c["eval_every"] = cfg.eval_every;
  c["period_drift_every"] = cfg.period_drift_every;
  return c;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  check_keys(j,
             {"dataset", "partition", "drift_isolation", "model", "n_clients",
              "clients_per_round", "rounds", "method", "server", "local",
              "eval_every", "period_drift_every", "seed", "out_dir"},
             "top level");
  if (!j.contains("dataset"))
    throw ConfigError("config: missing required key 'dataset'");
  if (!j.contains("method"))
    throw ConfigError("config: missing required key 'method'");

  ExperimentConfig cfg;
  cfg.dataset = parse_dataset(j["dataset"]);
  if (j.contains("partition")) cfg.partition = parse_partition(j["partition"]);
  if (j.contains("drift_isolation")) {
    const json& di = j["drift_isolation"];
    if (di.is_string()) {
      cfg.drift_isolation = mode_from_name(di.get<std::string>());
    } else if (di.is_object()) {
      check_keys(di, {"mode", "client_only_alpha"}, "drift_isolation");
      cfg.drift_isolation = mode_from_name(
          opt_string(di, "mode", "both", "drift_isolation"));
      cfg.client_only_alpha = opt_number(di, "client_only_alpha",
                                         cfg.client_only_alpha,
                                         "drift_isolation");
    } else {
      throw ConfigError("config: 'drift_isolation' must be a mode string or "
                        "an object");
    }
  }
  if (j.contains("model")) cfg.model = parse_model(j["model"]);
  cfg.n_clients = opt_int(j, "n_clients", cfg.n_clients, "top level");
  cfg.clients_per_round =
      opt_int(j, "clients_per_round", cfg.clients_per_round, "top level");
  cfg.rounds = opt_int(j, "rounds", cfg.rounds, "top level");
  if (!j["method"].is_string())
    throw ConfigError("config: 'method' must be a string");
  cfg.method = method_from_name(j["method"].get<std::string>());
  if (j.contains("server")) cfg.server = parse_server(j["server"]);
  if (j.contains("local")) cfg.local = parse_local(j["local"]);
  cfg.eval_every = opt_int(j, "eval_every", cfg.eval_every, "top level");
  cfg.period_drift_every =
      opt_int(j, "period_drift_every", cfg.period_drift_every, "top level");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer() || j["seed"].get<int64_t>() < 0)
      throw ConfigError("config: 'seed' must be a non-negative integer");
    cfg.seed = j["seed"].get<uint64_t>();
  }
  cfg.out_dir = opt_string(j, "out_dir", "", "top level");
  validate_counts(cfg);
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_digest(const ExperimentConfig& cfg) {
  const std::string s = config_canonical_json(cfg).dump();
  uint64_t h = 1469598103934665603ULL;  // FNV-1a 64
  for (unsigned char b : s) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)h);
  return buf;
}

std::vector<int> sample_clients(int n_clients, int m, uint64_t round_seed) {
  if (n_clients < 1 || m < 1 || m > n_clients)
    throw ShapeError("sample_clients: need 1 <= m <= n_clients");
  Rng rng(round_seed);
  std::vector<int> ids(n_clients);
  std::iota(ids.begin(), ids.end(), 0);
  for (int i = 0; i < m; ++i) {
    int j = i + int(rng.below(uint64_t(n_clients - i)));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(m);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::string round_log_to_json(const RoundLog& log) {
  json j;
  j["t"] = log.t;
  j["sampled"] = log.sampled;
  j["train_loss"] = log.train_loss;
  if (log.acc) j["acc"] = *log.acc;
  if (log.eval_loss) j["eval_loss"] = *log.eval_loss;
  if (log.g_kal) j["g_kal"] = *log.g_kal;
  if (log.sigma_q2) j["sigma_q2"] = *log.sigma_q2;
  if (log.sigma_r2) j["sigma_r2"] = *log.sigma_r2;
  if (log.period_drift) j["period_drift"] = *log.period_drift;
  j["ms"] = log.ms;
  return j.dump();
}

namespace {

// Index-parallel helper. Results are written into per-index slots, so the
// outcome does not depend on the thread count; the lowest-index exception
// is rethrown to keep failure reporting deterministic too.
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 0) {
    unsigned hw = std::thread::hardware_concurrency();
    threads = int(std::min<unsigned>(hw ? hw : 1, unsigned(n)));
  }
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errs(n);
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          errs[i] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (int i = 0; i < n; ++i)
    if (errs[i]) std::rethrow_exception(errs[i]);
}

struct PreparedRun {
  LabeledDataset train;
  LabeledDataset eval_set;
  PartitionPlan plan;
  ModelSpec spec;
};

PartitionPlan load_external_plan(const LabeledDataset& train,
                                 const ExperimentConfig& cfg) {
  std::ifstream in(cfg.partition.path);
  if (!in) throw IoError("cannot open partition plan " + cfg.partition.path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw IoError("partition plan " + cfg.partition.path + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("assignments") ||
      !j["assignments"].is_array())
    throw IoError("partition plan " + cfg.partition.path +
                  ": expected {\"assignments\": [[...], ...]}");
  std::vector<std::vector<size_t>> lists;
  for (const auto& arr : j["assignments"]) {
    if (!arr.is_array())
      throw IoError("partition plan " + cfg.partition.path +
                    ": assignments entries must be arrays");
    std::vector<size_t> l;
    for (const auto& v : arr) {
      if (!v.is_number_integer() || v.get<int64_t>() < 0)
        throw IoError("partition plan " + cfg.partition.path +
                      ": indices must be non-negative integers");
      l.push_back(v.get<size_t>());
    }
    lists.push_back(std::move(l));
  }
  if (int(lists.size()) != cfg.n_clients)
    throw ConfigError("config: 'n_clients' (" +
                      std::to_string(cfg.n_clients) +
                      ") does not match the external plan (" +
                      std::to_string(lists.size()) + " clients)");
  return plan_from_assignments(train, std::move(lists));
}

PreparedRun prepare_run(const ExperimentConfig& cfg) {
  PreparedRun pr;
  if (cfg.dataset.kind == DatasetConfig::Kind::synthetic) {
    LabeledDataset full = gen_synthetic(
        cfg.dataset.n_classes, cfg.dataset.input_dim, cfg.dataset.per_class,
        cfg.dataset.separation, hash_seed(cfg.seed, kTagData));
    std::tie(pr.train, pr.eval_set) = split_train_eval(
        full, cfg.dataset.eval_fraction, hash_seed(cfg.seed, kTagSplit));
  } else {
    LabeledDataset full = load_idx(cfg.dataset.images, cfg.dataset.labels);
    if (!cfg.dataset.test_images.empty()) {
      pr.train = std::move(full);
      pr.eval_set =
          load_idx(cfg.dataset.test_images, cfg.dataset.test_labels);
      if (pr.eval_set.dim != pr.train.dim)
        throw IoError("idx: train and test dimensions disagree");
      pr.eval_set.n_classes = pr.train.n_classes =
          std::max(pr.train.n_classes, pr.eval_set.n_classes);
    } else {
      std::tie(pr.train, pr.eval_set) = split_train_eval(
          full, cfg.dataset.eval_fraction, hash_seed(cfg.seed, kTagSplit));
    }
  }
  if (pr.train.n < cfg.n_clients)
    throw ConfigError("config: 'n_clients' exceeds the training set size");

  const uint64_t part_seed = hash_seed(cfg.seed, kTagPartition);
  const bool force_iid =
      cfg.drift_isolation == DriftIsolationMode::none ||
      cfg.drift_isolation == DriftIsolationMode::client_only;
  if (force_iid) {
    pr.plan = partition_iid(pr.train, cfg.n_clients, part_seed);
  } else {
    switch (cfg.partition.kind) {
      case PartitionConfig::Kind::iid:
        pr.plan = partition_iid(pr.train, cfg.n_clients, part_seed);
        break;
      case PartitionConfig::Kind::dirichlet:
        pr.plan = partition_dirichlet(pr.train, cfg.n_clients,
                                      cfg.partition.alpha, part_seed);
        break;
      case PartitionConfig::Kind::external:
        pr.plan = load_external_plan(pr.train, cfg);
        break;
    }
  }
  pr.spec.kind = cfg.model.kind;
  pr.spec.input_dim = pr.train.dim;
  pr.spec.hidden_dim = cfg.model.hidden_dim;
  pr.spec.n_classes = pr.train.n_classes;
  pr.spec.init_scale = cfg.model.init_scale;
  return pr;
}

std::string resolve_jsonl_path(const ExperimentConfig& cfg,
                               const RunOptions& opts, bool oracle) {
  if (!opts.jsonl_path.empty()) return opts.jsonl_path;
  if (cfg.out_dir.empty()) return "";
  std::string name = oracle ? "oracle-gd" : method_name(cfg.method);
  name += "_" + partition_tag(cfg);
  if (cfg.drift_isolation != DriftIsolationMode::both)
    name += "_" + mode_name(cfg.drift_isolation);
  name += "_s" + std::to_string(cfg.seed) + ".jsonl";
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

class JsonlWriter {
 public:
  explicit JsonlWriter(const std::string& path) {
    if (path.empty()) return;
    std::filesystem::path p(path);
    if (p.has_parent_path()) {
      std::error_code ec;
      std::filesystem::create_directories(p.parent_path(), ec);
      if (ec)
        throw IoError("cannot create output directory " +
                      p.parent_path().string());
    }
    out_.open(path, std::ios::trunc);
    if (!out_) throw IoError("cannot open output file " + path);
  }

  void line(const std::string& s) {
    if (!out_.is_open()) return;
    out_ << s << '\n';
    out_.flush();  // keep partial logs on disk if the run dies mid-way
  }

 private:
  std::ofstream out_;
};

json summary_record(const ExperimentConfig& cfg, const RunResult& res,
                    const std::string& method, double total_ms) {
  json s;
  s["summary"] = true;
  s["method"] = method;
  s["partition"] = partition_tag(cfg);
  if (cfg.partition.kind == PartitionConfig::Kind::dirichlet)
    s["alpha"] = cfg.partition.alpha;
  s["drift_isolation"] = mode_name(cfg.drift_isolation);
  s["seed"] = cfg.seed;
  s["rounds"] = cfg.rounds;
  s["final_acc"] = res.final_acc;
  s["final_eval_loss"] = res.final_eval_loss;
  s["config_digest"] = config_digest(cfg);
  s["total_ms"] = total_ms;
  return s;
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  validate_counts(cfg);
  PreparedRun pr = prepare_run(cfg);
  const ModelSpec& spec = pr.spec;
  const Batch eval_batch = as_batch(pr.eval_set);
  const int S = cfg.clients_per_round;
  const Method method = cfg.method;

  ParamVec w = init_params(spec, hash_seed(cfg.seed, kTagInit));
  ParamVec momentum(w.size(), 0.0);  // fedavgm/fedeve momentum, fedopt m
  ParamVec adam_v;
  double sigma2 = 0.0;
  std::vector<ParamVec> c_local;
  ParamVec c_global;
  if (method == Method::fedopt) adam_v.assign(w.size(), 0.0);
  if (method == Method::scaffold) {
    c_local.assign(cfg.n_clients, ParamVec(w.size(), 0.0));
    c_global.assign(w.size(), 0.0);
  }

  RunResult res;
  res.jsonl_path = resolve_jsonl_path(cfg, opts, false);
  JsonlWriter writer(res.jsonl_path);
  double total_ms = 0.0;

  for (int t = 0; t < cfg.rounds; ++t) {
    const auto t0 = std::chrono::steady_clock::now();
    const uint64_t round_seed = hash_seed(cfg.seed, kTagRound, uint64_t(t));
    std::vector<int> sampled =
        sample_clients(cfg.n_clients, S, round_seed);
    std::vector<LabeledDataset> shards = drift_isolation_view(
        cfg.drift_isolation, pr.train, pr.plan, sampled, cfg.client_only_alpha,
        hash_seed(cfg.seed, kTagView, uint64_t(t)));

    ParamVec prediction;
    const bool use_prediction =
        method == Method::fedeve && cfg.server.broadcast_prediction;
    if (use_prediction) {
      FedEveState st{std::move(w), std::move(momentum), sigma2,
                     cfg.server.eta_g};
      prediction = fedeve_predict(st, 0.0).w_hat;
      w = std::move(st.w);
      momentum = std::move(st.momentum);
    }
    const ParamVec& broadcast = use_prediction ? prediction : w;

    RoundLog log;
    log.t = t;
    log.sampled = sampled;
    double loss_sum = 0.0;
    for (const auto& shard : shards)
      loss_sum += forward_loss(spec, broadcast, as_batch(shard));
    log.train_loss = loss_sum / double(shards.size());
    if (cfg.period_drift_every > 0 && t % cfg.period_drift_every == 0)
      log.period_drift =
          exact_period_drift(spec, broadcast, pr.train, pr.plan, sampled);

    std::vector<ClientUpdate> updates(S);
    std::vector<ParamVec> c_new(method == Method::scaffold ? S : 0);
    try {
      parallel_for(S, opts.threads, [&](int j) {
        const int id = sampled[j];
        const uint64_t cseed =
            hash_seed(cfg.seed, kTagClient, uint64_t(t), uint64_t(id));
        switch (method) {
          case Method::fedprox:
            updates[j] = local_train_prox(spec, broadcast, shards[j],
                                          cfg.local, id, cseed);
            break;
          case Method::scaffold: {
            ScaffoldResult r = local_train_scaffold(
                spec, broadcast, shards[j], cfg.local,
                {c_local[id], c_global}, id, cseed);
            updates[j] = std::move(r.update);
            c_new[j] = std::move(r.c_local_new);
            break;
          }
          default:
            updates[j] = local_train_sgd(spec, broadcast, shards[j],
                                         cfg.local, id, cseed);
        }
      });
    } catch (const DivergenceError& e) {
      json err;
      err["error"] = "divergence";
      err["round"] = t;
      err["message"] = e.what();
      writer.line(err.dump());
      throw DivergenceError("round " + std::to_string(t) + ": " + e.what());
    }

    ParamVec delta = aggregate(updates);
    log.innovation_c0 = delta[0] - momentum[0];

    if (method == Method::fedeve) {
      DriftEstimates est = estimate_drift_variances(momentum, updates, delta);
      FedEveState st{std::move(w), std::move(momentum), sigma2,
                     cfg.server.eta_g};
      FedEveStepInfo info =
          fedeve_observe_update(st, delta, est, cfg.server.force_gain);
      w = std::move(st.w);
      momentum = std::move(st.momentum);
      sigma2 = st.sigma2;
      log.g_kal = info.gain;
      log.sigma_q2 = est.sigma_q2;
      log.sigma_r2 = est.sigma_r2;
    } else if (method == Method::fedavgm) {
      fedavgm_step(w, momentum, delta, cfg.server.beta, cfg.server.eta_g);
    } else if (method == Method::fedopt) {
      fedopt_adam_step(w, momentum, adam_v, delta, cfg.server.beta1,
                       cfg.server.beta2, cfg.server.tau, cfg.server.eta_g);
    } else {
      w = fedavg_step(w, delta, cfg.server.eta_g);
      if (method == Method::scaffold) {
        const double inv_n = 1.0 / double(cfg.n_clients);
        for (int j = 0; j < S; ++j) {
          const int id = sampled[j];
          for (size_t i = 0; i < c_global.size(); ++i)
            c_global[i] += inv_n * (c_new[j][i] - c_local[id][i]);
          c_local[id] = std::move(c_new[j]);
        }
      }
    }

    if ((t + 1) % cfg.eval_every == 0 || t == cfg.rounds - 1) {
      EvalResult er = evaluate(spec, w, eval_batch);
      log.acc = er.accuracy;
      log.eval_loss = er.mean_loss;
      res.final_acc = er.accuracy;
      res.final_eval_loss = er.mean_loss;
    }
    log.ms = elapsed_ms(t0);
    total_ms += log.ms;
    writer.line(round_log_to_json(log));
    res.rounds.push_back(std::move(log));
    if (opts.record_trail) res.param_trail.push_back(w);
  }
  res.final_params = std::move(w);
  writer.line(
      summary_record(cfg, res, method_name(cfg.method), total_ms).dump());
  return res;
}

RunResult run_centralized_gd(const ExperimentConfig& cfg,
                             const RunOptions& opts) {
  validate_counts(cfg);
  PreparedRun pr = prepare_run(cfg);
  const ModelSpec& spec = pr.spec;
  const Batch full = as_batch(pr.train);
  const Batch eval_batch = as_batch(pr.eval_set);
  ParamVec w = init_params(spec, hash_seed(cfg.seed, kTagInit));
  const double eta = cfg.local.eta_l * cfg.server.eta_g;

  RunResult res;
  res.jsonl_path = resolve_jsonl_path(cfg, opts, true);
  JsonlWriter writer(res.jsonl_path);
  double total_ms = 0.0;
  for (int t = 0; t < cfg.rounds; ++t) {
    const auto t0 = std::chrono::steady_clock::now();
    auto [loss, grad] = backward_with_loss(spec, w, full);
    if (!std::isfinite(loss))
      throw DivergenceError("round " + std::to_string(t) +
                            ": non-finite loss in centralized descent");
    axpy(w, -eta, grad);
    RoundLog log;
    log.t = t;
    log.train_loss = loss;
    if ((t + 1) % cfg.eval_every == 0 || t == cfg.rounds - 1) {
      EvalResult er = evaluate(spec, w, eval_batch);
      log.acc = er.accuracy;
      log.eval_loss = er.mean_loss;
      res.final_acc = er.accuracy;
      res.final_eval_loss = er.mean_loss;
    }
    log.ms = elapsed_ms(t0);
    total_ms += log.ms;
    writer.line(round_log_to_json(log));
    res.rounds.push_back(std::move(log));
    if (opts.record_trail) res.param_trail.push_back(w);
  }
  res.final_params = std::move(w);
  writer.line(summary_record(cfg, res, "oracle-gd", total_ms).dump());
  return res;
}

namespace {

json read_summary_line(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  if (last.empty()) throw IoError(path + ": empty log file");
  json j;
  try {
    j = json::parse(last);
  } catch (const json::parse_error& e) {
    throw IoError(path + ": malformed JSONL: " + e.what());
  }
  if (!j.is_object() || !j.value("summary", false))
    throw IoError(path + ": no summary record (incomplete run?)");
  return j;
}

}  // namespace

std::vector<SummaryRow> summarize(std::span<const std::string> jsonl_paths) {
  if (jsonl_paths.empty())
    throw IoError("summarize: no input files");
  struct Cell {
    std::vector<double> accs;
    std::string digest;
    std::string first_path;
  };
  std::map<std::pair<std::string, std::string>, Cell> cells;
  for (const auto& path : jsonl_paths) {
    json s = read_summary_line(path);
    const std::string method = s.value("method", "");
    const std::string partition = s.value("partition", "");
    const std::string digest = s.value("config_digest", "");
    if (method.empty() || !s.contains("final_acc"))
      throw IoError(path + ": summary record is missing method/final_acc");
    auto& cell = cells[{method, partition}];
    if (cell.accs.empty()) {
      cell.digest = digest;
      cell.first_path = path;
    } else if (cell.digest != digest) {
      throw ConfigError("summarize: mixed configs in cell " + method + "/" +
                        partition + " (" + cell.first_path + " vs " + path +
                        ")");
    }
    cell.accs.push_back(s["final_acc"].get<double>() * 100.0);
  }
  std::vector<SummaryRow> rows;
  for (const auto& [key, cell] : cells) {
    SummaryRow r;
    r.method = key.first;
    r.partition = key.second;
    r.n_runs = int(cell.accs.size());
    double mean = 0.0;
    for (double a : cell.accs) mean += a;
    mean /= double(cell.accs.size());
    double sd = 0.0;
    if (cell.accs.size() > 1) {
      double ss = 0.0;
      for (double a : cell.accs) ss += (a - mean) * (a - mean);
      sd = std::sqrt(ss / double(cell.accs.size() - 1));
    }
    r.mean_acc = mean;
    r.std_acc = sd;
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_summary_csv(std::span<const SummaryRow> rows,
                       const std::string& out_path) {
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw IoError("cannot open output file " + out_path);
  out << "method,partition,n_runs,mean_acc,std_acc\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%d,%.2f,%.2f\n", r.method.c_str(),
                  r.partition.c_str(), r.n_runs, r.mean_acc, r.std_acc);
    out << buf;
  }
  if (!out) throw IoError("failed writing " + out_path);
}

void plot_series(std::span<const std::string> jsonl_paths,
                 const std::string& field, const std::string& out_svg) {
  static const std::set<std::string> kFields = {
      "train_loss", "acc",      "eval_loss",    "g_kal",
      "sigma_q2",   "sigma_r2", "period_drift", "ms"};
  if (!kFields.count(field))
    throw ConfigError("plot: unknown field '" + field + "'");
  if (jsonl_paths.empty()) throw IoError("plot: no input files");

  struct Series {
    std::string label;
    std::vector<std::pair<double, double>> pts;
  };
  std::vector<Series> series;
  for (const auto& path : jsonl_paths) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    Series s;
    s.label = std::filesystem::path(path).filename().string();
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        throw IoError(path + ": malformed JSONL: " + e.what());
      }
      if (!j.is_object() || j.value("summary", false) ||
          j.contains("error") || !j.contains("t"))
        continue;
      if (j.contains(field) && j[field].is_number())
        s.pts.emplace_back(j["t"].get<double>(), j[field].get<double>());
    }
    series.push_back(std::move(s));
  }
  size_t total = 0;
  for (const auto& s : series) total += s.pts.size();
  if (total == 0)
    throw ConfigError("plot: field '" + field +
                      "' is absent from all input logs");

  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (auto [x, y] : s.pts) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= ymin) {
    ymax = ymin + 1.0;
    ymin -= 1.0;
  }

  const double W = 800, H = 480, L = 70, R = 20, T = 30, B = 50;
  auto sx = [&](double x) {
    return L + (x - xmin) / (xmax - xmin) * (W - L - R);
  };
  auto sy = [&](double y) {
    return H - B - (y - ymin) / (ymax - ymin) * (H - T - B);
  };
  static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                   "#9467bd", "#ff7f0e", "#8c564b"};
  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
      << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H
      << "\">\n"
      << "<rect width=\"" << W << "\" height=\"" << H
      << "\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R
      << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L
      << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  char num[64];
  auto fmt = [&](double v) {
    std::snprintf(num, sizeof(num), "%g", v);
    return std::string(num);
  };
  svg << "<text x=\"" << (L + (W - L - R) / 2)
      << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"14\">round</text>\n";
  svg << "<text x=\"18\" y=\"" << (T + (H - T - B) / 2)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"14\" transform=\"rotate(-90 18 "
      << (T + (H - T - B) / 2) << ")\">" << field << "</text>\n";
  svg << "<text x=\"" << L << "\" y=\"" << H - B + 18
      << "\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(xmin)
      << "</text>\n";
  svg << "<text x=\"" << W - R << "\" y=\"" << H - B + 18
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
      << "font-size=\"11\">" << fmt(xmax) << "</text>\n";
  svg << "<text x=\"" << L - 6 << "\" y=\"" << H - B
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
      << "font-size=\"11\">" << fmt(ymin) << "</text>\n";
  svg << "<text x=\"" << L - 6 << "\" y=\"" << T + 4
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
      << "font-size=\"11\">" << fmt(ymax) << "</text>\n";
  for (size_t k = 0; k < series.size(); ++k) {
    if (series[k].pts.empty()) continue;
    svg << "<polyline fill=\"none\" stroke=\"" << kPalette[k % 6]
        << "\" stroke-width=\"1.5\" points=\"";
    for (auto [x, y] : series[k].pts)
      svg << fmt(sx(x)) << "," << fmt(sy(y)) << " ";
    svg << "\"/>\n";
    svg << "<text x=\"" << W - R - 4 << "\" y=\"" << T + 16 + 16 * double(k)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
        << "font-size=\"11\" fill=\"" << kPalette[k % 6] << "\">"
        << series[k].label << "</text>\n";
  }
  svg << "</svg>\n";

  std::filesystem::path p(out_svg);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(out_svg, std::ios::trunc);
  if (!out) throw IoError("cannot open output file " + out_svg);
  out << svg.str();
  if (!out) throw IoError("failed writing " + out_svg);
}

}  // namespace fedsim
