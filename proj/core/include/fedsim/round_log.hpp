#pragma once

#include <optional>
#include <vector>

namespace fedsim {

// One telemetry record per round. Optional fields are emitted only when
// scheduled (acc/eval_loss/period_drift) or when the method produces them
// (gain and noise estimates, fedeve only). ms is wall-clock time and is
// masked whenever logs are compared for determinism. innovation_c0 is an
// in-memory diagnostic (first coordinate of delta minus server momentum)
// and is not serialized.
struct RoundLog {
  int t = 0;
  std::vector<int> sampled;
  double train_loss = 0.0;
  std::optional<double> acc;
  std::optional<double> eval_loss;
  std::optional<double> g_kal;
  std::optional<double> sigma_q2;
  std::optional<double> sigma_r2;
  std::optional<double> period_drift;
  double ms = 0.0;
  double innovation_c0 = 0.0;
};

}  // namespace fedsim
