#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedsim/model.hpp"

// Dataset generation, IDX loading, client partitioning, and the per-round
// shard views that isolate the two drift sources (round-to-round objective
// shift vs within-round client disagreement).

namespace fedsim {

struct LabeledDataset {
  std::vector<double> features;  // n * dim, row-major
  std::vector<int> labels;       // n
  int n = 0;
  int dim = 0;
  int n_classes = 0;

  const double* row(int i) const { return features.data() + size_t(i) * dim; }
};

// Gaussian blobs: class c is centered at separation * u_c for a seeded
// random unit vector u_c, with identity covariance. per_class examples per
// class, labels 0..n_classes-1.
LabeledDataset gen_synthetic(int n_classes, int input_dim, int per_class,
                             double separation, uint64_t seed);

// IDX image/label pair (big-endian, magics 0x00000803 / 0x00000801).
// Pixel bytes are scaled to [0, 1]. Throws IoError with a distinct message
// for bad magic, truncated payload, and image/label count mismatch.
LabeledDataset load_idx(const std::string& images_path,
                        const std::string& labels_path);

struct PartitionPlan {
  std::vector<std::vector<size_t>> assignments;  // per-client sorted indices
  int n_clients = 0;
  double alpha = 0.0;  // Dirichlet concentration; 0 for iid/external plans
  // Per-client label histogram normalized to sum 1 (n_clients x n_classes).
  std::vector<std::vector<double>> class_proportions;

  std::vector<size_t> client_sizes() const;
};

// Label-skewed partition: each class's examples are split across clients by
// proportions drawn from a symmetric Dirichlet(alpha). Clients left empty
// steal one example from the largest client until all are populated.
PartitionPlan partition_dirichlet(const LabeledDataset& data, int n_clients,
                                  double alpha, uint64_t seed);

// Uniform shuffle-and-deal partition; client sizes differ by at most one.
PartitionPlan partition_iid(const LabeledDataset& data, int n_clients,
                            uint64_t seed);

// Wrap externally supplied per-client index lists, validating coverage and
// disjointness and computing class proportions.
PartitionPlan plan_from_assignments(const LabeledDataset& data,
                                    std::vector<std::vector<size_t>> lists);

enum class DriftIsolationMode { none, period_only, client_only, both };

// Per-round materialized shards for the sampled clients.
//   both:        each client trains on its own shard of the base plan.
//   none:        same, but the base plan is expected to be iid.
//   period_only: the sampled clients' shards are pooled, shuffled, and
//                redealt evenly with per-label round-robin, so the round's
//                pooled distribution is preserved while every client sees
//                an unbiased draw from it.
//   client_only: the pooled shards (iid base) are re-partitioned among the
//                sampled clients with Dirichlet(client_only_alpha),
//                injecting within-round disagreement without moving the
//                round's pooled distribution.
std::vector<LabeledDataset> drift_isolation_view(
    DriftIsolationMode mode, const LabeledDataset& data,
    const PartitionPlan& base, std::span<const int> sampled,
    double client_only_alpha, uint64_t round_seed);

// Data heterogeneity index H: mean over clients of the per-client variance
// (1/M) sum_j (p_ij - p_j)^2 between client and global label proportions.
// The expected squared proportion deviation of a sampled cohort of size S
// scales as H / S.
double heterogeneity_H(const PartitionPlan& plan);

// Global label proportions of the dataset.
std::vector<double> label_proportions(const LabeledDataset& data);

// Assemble a batch from dataset rows. Indices are copied in ascending
// order, so the reduction order inside forward/backward is canonical no
// matter how the index list was produced.
Batch make_batch(const LabeledDataset& data, std::span<const size_t> indices);
Batch as_batch(const LabeledDataset& data);

// Materialize a subset as a standalone dataset (same canonical ordering).
LabeledDataset subset(const LabeledDataset& data,
                      std::span<const size_t> indices);

// Deterministic shuffled split; eval_fraction of rows go to the second
// (held-out) part.
std::pair<LabeledDataset, LabeledDataset> split_train_eval(
    const LabeledDataset& data, double eval_fraction, uint64_t seed);

}  // namespace fedsim
