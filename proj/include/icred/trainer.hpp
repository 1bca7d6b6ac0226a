#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "icred/adam.hpp"
#include "icred/corpus.hpp"
#include "icred/model.hpp"

namespace icred {

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t max_steps = 1000;
  double lr = 1e-3;
  std::size_t eval_every = 50;  // 0 disables dev evaluation
  std::size_t patience = 5;     // evaluations without improvement
  std::uint64_t seed = 1;
  std::string checkpoint_dir;       // empty: keep results in memory only
  double grad_clip = 0.0;           // global max-norm; 0 disables
  std::string pretrained_vectors;   // optional "word v1 v2 ..." text file

  void validate() const;
};

struct LossPoint {
  std::size_t step = 0;  // 1-based, after the update
  double train_loss = 0.0;
  double dev_nll = 0.0;
  bool has_dev = false;
};

/// Serializable trainer progress, enough to resume a run exactly.
struct TrainerState {
  std::size_t next_step = 0;  // steps already completed
  double best_dev = std::numeric_limits<double>::infinity();
  std::size_t best_step = 0;
  std::size_t evals_since_improve = 0;
  long adam_step_count = 0;
  ParamMap adam_state;   // m:/v:/t: entries
  ParamMap best_params;  // empty until the first evaluation
};

struct TrainResult {
  std::vector<LossPoint> curve;  // points produced by this call only
  double best_dev = std::numeric_limits<double>::infinity();
  std::size_t best_step = 0;
  ParamMap best_params;
  std::size_t steps_run = 0;
  bool early_stopped = false;
  TrainerState final_state;
};

/// Mini-batch Adam training with per-instance tapes fanned out across
/// threads and gradients reduced in instance order, so curves are
/// bit-identical for any thread count. Throws NumericError naming the
/// offending instance if a loss goes non-finite.
TrainResult train(Model& model, const std::vector<ContextInstance>& train_split,
                  const std::vector<ContextInstance>& dev_split, const Vocabulary& vocab,
                  const TrainConfig& cfg, const TrainerState* resume = nullptr);

/// Mean per-token NLL over a split; the L2 term is not part of reporting.
double evaluate_loss(const Model& model, const std::vector<ContextInstance>& split,
                     const Vocabulary& vocab);

/// Overwrites embedding rows for words found in a "word v1 v2 ..." file.
/// Returns the number of rows loaded.
std::size_t load_pretrained_vectors(Model& model, const Vocabulary& vocab,
                                    const std::string& path);

/// step,train_loss,dev_nll CSV (dev blank on non-eval steps).
void write_loss_curve(const std::string& path, const std::vector<LossPoint>& curve);

/// Model checkpoint + config sidecar (path + ".cfg").
void save_model_checkpoint(const std::string& path, const Model& model);
/// Loads a checkpoint and its sidecar, validating both.
Model load_model_checkpoint(const std::string& path);

/// Everything needed to resume: "<prefix>.ckpt" (+.cfg), "<prefix>.opt",
/// "<prefix>.best.ckpt" (when present) and "<prefix>.train" metadata.
void save_train_state(const std::string& prefix, const Model& model, const TrainerState& state);
TrainerState load_train_state(const std::string& prefix, const Model& model);

}  // namespace icred
