#pragma once

#include <map>
#include <string>

#include "icred/tape.hpp"

namespace icred {

/// Per-parameter Adam state with the usual bias-corrected update.
struct AdamState {
  Tensor m, v;
  long step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState create(const Tensor& param, double lr = 1e-3, double beta1 = 0.9,
                          double beta2 = 0.999, double eps = 1e-8);
};

/// In-place update of param; advances state by one step.
void adam_step(AdamState& state, Tensor& param, const Tensor& grad);

/// Adam across a whole ParamMap, one state per name.
class AdamOptimizer {
 public:
  AdamOptimizer(const ParamMap& params, double lr = 1e-3, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);

  void step(ParamMap& params, const std::map<std::string, Tensor>& grads);

  const AdamState& state(const std::string& name) const { return states_.at(name); }

  /// First/second moments flattened for checkpointing ("m:<name>", "v:<name>").
  ParamMap export_state() const;
  void import_state(const ParamMap& exported, long step_count);
  long step_count() const { return step_count_; }

 private:
  std::map<std::string, AdamState> states_;
  long step_count_ = 0;
};

}  // namespace icred
