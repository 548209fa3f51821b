#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedsim/client.hpp"
#include "fedsim/data.hpp"
#include "fedsim/round_log.hpp"
#include "fedsim/server.hpp"

// Experiment orchestration: config parsing, the federated round loop with
// per-round JSONL telemetry, the centralized-GD reference loop, and the
// summarize/plot post-processing used by the CLI.

namespace fedsim {

enum class Method { fedavg, fedavgm, fedprox, scaffold, fedopt, fedeve };

std::string method_name(Method m);
Method method_from_name(const std::string& name);  // ConfigError on unknown

struct DatasetConfig {
  enum class Kind { synthetic, idx };
  Kind kind = Kind::synthetic;
  // synthetic blobs
  int n_classes = 10;
  int input_dim = 20;
  int per_class = 100;
  double separation = 2.0;
  double eval_fraction = 0.2;
  // idx files; when test paths are empty the eval split is carved out of
  // the training pair instead
  std::string images, labels, test_images, test_labels;
};

struct PartitionConfig {
  enum class Kind { iid, dirichlet, external };
  Kind kind = Kind::iid;
  double alpha = 0.1;
  std::string path;  // external plan: JSON {"assignments": [[...], ...]}
};

struct ModelConfig {
  ModelKind kind = ModelKind::logistic;
  int hidden_dim = 32;
  double init_scale = 0.05;
};

struct ServerHyperConfig {
  double eta_g = 1.0;
  double beta = 0.9;    // fedavgm momentum
  double beta1 = 0.9;   // fedopt
  double beta2 = 0.99;  // fedopt
  double tau = 1e-3;    // fedopt
  std::optional<double> force_gain;  // fedeve diagnostic override
  bool broadcast_prediction = true;  // fedeve: send w - eta_g*M, not w
};

struct ExperimentConfig {
  DatasetConfig dataset;
  PartitionConfig partition;
  DriftIsolationMode drift_isolation = DriftIsolationMode::both;
  double client_only_alpha = 0.01;
  ModelConfig model;
  int n_clients = 100;
  int clients_per_round = 10;
  int rounds = 100;
  Method method = Method::fedavg;
  ServerHyperConfig server;
  LocalHyper local;
  int eval_every = 10;
  int period_drift_every = 0;  // 0 disables the exact-drift telemetry
  uint64_t seed = 1;
  std::string out_dir;  // empty: no JSONL written
};

// Strict parse: unknown keys, missing required keys (dataset, method), and
// out-of-range values raise ConfigError naming the offending key.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig parse_config_file(const std::string& path);

// Stable fingerprint of everything except seed and out_dir; runs with the
// same digest are comparable cells for summarize.
std::string config_digest(const ExperimentConfig& cfg);

// Uniform sample of m distinct client ids, sorted ascending.
std::vector<int> sample_clients(int n_clients, int m, uint64_t round_seed);

struct RunOptions {
  int threads = 1;           // 0 = one per sampled client (capped by hw)
  bool record_trail = false; // keep a copy of w after every round
  std::string jsonl_path;    // overrides the out_dir-derived location
};

struct RunResult {
  std::vector<RoundLog> rounds;
  double final_acc = 0.0;        // fraction, from the last round's eval
  double final_eval_loss = 0.0;
  ParamVec final_params;
  std::vector<ParamVec> param_trail;  // filled when record_trail is set
  std::string jsonl_path;             // empty when nothing was written
};

// The federated round loop. Writes JSONL incrementally (one record per
// round plus a final summary record) when an output path is configured.
// DivergenceError carries the round and client and leaves partial logs
// plus an error record behind.
RunResult run_experiment(const ExperimentConfig& cfg,
                         const RunOptions& opts = {});

// Centralized full-batch gradient descent on the same seeded data, split,
// and init as run_experiment, stepping with eta_l * eta_g. With eta_g = 1,
// one client holding all data, batch_size >= n, and one local epoch, the
// federated loop reproduces this trajectory bit for bit.
RunResult run_centralized_gd(const ExperimentConfig& cfg,
                             const RunOptions& opts = {});

// Serialization of one round record, shared by the writer and by tests
// that compare logs. Key order is alphabetical and doubles use the
// shortest round-trip form, so equal records serialize to equal bytes.
std::string round_log_to_json(const RoundLog& log);

struct SummaryRow {
  std::string method;
  std::string partition;  // "iid", "dir<alpha>", or "ext"
  int n_runs = 0;
  double mean_acc = 0.0;  // percent
  double std_acc = 0.0;   // sample std (divisor n-1), 0 for a single run
};

// Group finished runs by (method, partition) cell and report mean and std
// of final accuracy. Mixed configs inside a cell are rejected.
std::vector<SummaryRow> summarize(std::span<const std::string> jsonl_paths);
void write_summary_csv(std::span<const SummaryRow> rows,
                       const std::string& out_path);

// Self-contained SVG with one polyline per input file for the given
// telemetry field. Unknown fields are rejected.
void plot_series(std::span<const std::string> jsonl_paths,
                 const std::string& field, const std::string& out_svg);

}  // namespace fedsim
