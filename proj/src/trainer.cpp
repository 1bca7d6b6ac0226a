#include "icred/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "icred/checkpoint.hpp"
#include "icred/config_io.hpp"
#include "icred/errors.hpp"
#include "icred/log.hpp"
#include "icred/rng.hpp"

namespace icred {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (lr < 0) throw ConfigError("learning rate must be nonnegative");
}

namespace {

/// Epoch permutations are a stateless function of (seed, epoch), which keeps
/// resumed runs aligned with uninterrupted ones.
std::vector<std::size_t> epoch_permutation(std::uint64_t seed, std::size_t epoch, std::size_t n) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng = Rng(seed).fork(0x5eULL + epoch);
  rng.shuffle(perm);
  return perm;
}

std::vector<std::size_t> batch_indices(std::uint64_t seed, std::size_t step, std::size_t n,
                                       std::size_t batch_size) {
  std::size_t per_epoch = (n + batch_size - 1) / batch_size;
  std::size_t epoch = step / per_epoch;
  std::size_t slot = step % per_epoch;
  auto perm = epoch_permutation(seed, epoch, n);
  std::size_t begin = slot * batch_size;
  std::size_t end = std::min(begin + batch_size, n);
  return {perm.begin() + static_cast<std::ptrdiff_t>(begin),
          perm.begin() + static_cast<std::ptrdiff_t>(end)};
}

struct InstanceResult {
  double loss = 0.0;
  std::map<std::string, Tensor> grads;
  std::string error;
};

}  // namespace

double evaluate_loss(const Model& model, const std::vector<ContextInstance>& split,
                     const Vocabulary& vocab) {
  if (split.empty()) throw DomainError("evaluate_loss: empty split");
  std::vector<double> nll(split.size());
  std::vector<std::string> errors(split.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(split.size()); ++i) {
    try {
      nll[static_cast<std::size_t>(i)] =
          model.instance_nll(split[static_cast<std::size_t>(i)], vocab);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (!errors[i].empty()) {
      throw NumericError("evaluate_loss failed on instance " + std::to_string(i) + ": " +
                         errors[i]);
    }
  }
  double total = 0.0;
  for (double v : nll) total += v;
  return total / static_cast<double>(split.size());
}

TrainResult train(Model& model, const std::vector<ContextInstance>& train_split,
                  const std::vector<ContextInstance>& dev_split, const Vocabulary& vocab,
                  const TrainConfig& cfg, const TrainerState* resume) {
  cfg.validate();
  if (train_split.empty()) throw DomainError("train: empty training split");
  if (cfg.eval_every > 0 && dev_split.empty()) {
    throw DomainError("train: dev evaluation enabled but dev split is empty");
  }

  if (!cfg.pretrained_vectors.empty() && !resume) {
    std::size_t loaded = load_pretrained_vectors(model, vocab, cfg.pretrained_vectors);
    log_info("loaded ", loaded, " pretrained word vectors");
  }

  AdamOptimizer optimizer(model.params(), cfg.lr);
  TrainResult result;
  std::size_t start_step = 0;
  if (resume) {
    optimizer.import_state(resume->adam_state, resume->adam_step_count);
    start_step = resume->next_step;
    result.best_dev = resume->best_dev;
    result.best_step = resume->best_step;
    result.best_params = resume->best_params;
    result.final_state.evals_since_improve = resume->evals_since_improve;
  }

  std::size_t evals_since_improve = resume ? resume->evals_since_improve : 0;

  for (std::size_t step = start_step; step < cfg.max_steps; ++step) {
    auto indices = batch_indices(cfg.seed, step, train_split.size(), cfg.batch_size);
    std::vector<InstanceResult> slots(indices.size());

#pragma omp parallel for schedule(dynamic)
    for (std::int64_t b = 0; b < static_cast<std::int64_t>(indices.size()); ++b) {
      auto& slot = slots[static_cast<std::size_t>(b)];
      try {
        Tape tape;
        Binder bind(tape, model.params());
        Value loss =
            model.training_loss(bind, train_split[indices[static_cast<std::size_t>(b)]], vocab);
        tape.backward(loss);
        slot.loss = loss.scalar_value();
        slot.grads = bind.grads();
      } catch (const std::exception& e) {
        slot.error = e.what();
      }
    }

    for (std::size_t b = 0; b < slots.size(); ++b) {
      if (!slots[b].error.empty()) {
        throw NumericError("training aborted at step " + std::to_string(step + 1) +
                           " on instance " + std::to_string(indices[b]) + ": " + slots[b].error);
      }
    }

    // reduce in batch order: bit-identical for any thread count
    double batch_loss = 0.0;
    std::map<std::string, Tensor> grads;
    for (const auto& [name, t] : model.params()) grads.emplace(name, Tensor::zeros(t.shape()));
    for (const auto& slot : slots) {
      batch_loss += slot.loss;
      for (const auto& [name, g] : slot.grads) {
        auto& acc = grads.at(name).data();
        const auto& gd = g.data();
        for (std::size_t i = 0; i < gd.size(); ++i) acc[i] += gd[i];
      }
    }
    double inv = 1.0 / static_cast<double>(slots.size());
    batch_loss *= inv;
    if (!std::isfinite(batch_loss)) {
      throw NumericError("training aborted: non-finite batch loss at step " +
                         std::to_string(step + 1));
    }
    for (auto& [name, g] : grads) {
      for (double& v : g.data()) v *= inv;
    }

    if (cfg.grad_clip > 0.0) {
      double sq = 0.0;
      for (const auto& [name, g] : grads) {
        for (double v : g.data()) sq += v * v;
      }
      double norm = std::sqrt(sq);
      if (norm > cfg.grad_clip) {
        double s = cfg.grad_clip / norm;
        for (auto& [name, g] : grads) {
          for (double& v : g.data()) v *= s;
        }
      }
    }

    optimizer.step(model.params(), grads);

    LossPoint point;
    point.step = step + 1;
    point.train_loss = batch_loss;

    bool stop = false;
    if (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0) {
      point.dev_nll = evaluate_loss(model, dev_split, vocab);
      point.has_dev = true;
      if (point.dev_nll < result.best_dev) {
        result.best_dev = point.dev_nll;
        result.best_step = step + 1;
        result.best_params = model.params();
        evals_since_improve = 0;
      } else {
        ++evals_since_improve;
        if (evals_since_improve >= cfg.patience) {
          stop = true;
          result.early_stopped = true;
        }
      }
      log_debug("step ", step + 1, " train ", batch_loss, " dev ", point.dev_nll);
    }

    result.curve.push_back(point);
    result.steps_run = step + 1;
    if (stop) break;
  }

  if (result.best_params.empty()) {
    // no dev evaluation happened; the final parameters are the best we have
    result.best_params = model.params();
    result.best_step = result.steps_run;
  }

  result.final_state.next_step = result.steps_run;
  result.final_state.best_dev = result.best_dev;
  result.final_state.best_step = result.best_step;
  result.final_state.evals_since_improve = evals_since_improve;
  result.final_state.adam_step_count = optimizer.step_count();
  result.final_state.adam_state = optimizer.export_state();
  result.final_state.best_params = result.best_params;

  if (!cfg.checkpoint_dir.empty()) {
    std::string prefix = cfg.checkpoint_dir + "/model";
    save_train_state(prefix, model, result.final_state);
    Model best(model.config(), result.best_params);
    save_model_checkpoint(cfg.checkpoint_dir + "/best.ckpt", best);
  }
  return result;
}

std::size_t load_pretrained_vectors(Model& model, const Vocabulary& vocab,
                                    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read pretrained vectors: " + path);
  Tensor& embed = model.params().at("embed.E");
  std::size_t dim = model.config().word_dim;
  std::size_t loaded = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    auto it = vocab.index.find(word);
    if (it == vocab.index.end()) continue;
    std::vector<double> vec;
    double v = 0.0;
    while (ls >> v) vec.push_back(v);
    if (vec.size() != dim) {
      throw ConfigError("pretrained vector for \"" + word + "\" has dimension " +
                        std::to_string(vec.size()) + ", expected " + std::to_string(dim));
    }
    std::size_t row = static_cast<std::size_t>(it->second);
    for (std::size_t i = 0; i < dim; ++i) embed.data()[row * dim + i] = vec[i];
    ++loaded;
  }
  return loaded;
}

void write_loss_curve(const std::string& path, const std::vector<LossPoint>& curve) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write loss curve: " + path);
  out << "step,train_loss,dev_nll\n";
  out.precision(17);
  for (const auto& p : curve) {
    out << p.step << "," << p.train_loss << ",";
    if (p.has_dev) out << p.dev_nll;
    out << "\n";
  }
}

void save_model_checkpoint(const std::string& path, const Model& model) {
  save_checkpoint(path, model.params());
  write_kv_file(path + ".cfg", model.config().to_kv());
}

Model load_model_checkpoint(const std::string& path) {
  ModelConfig cfg = ModelConfig::from_kv(read_kv_file(path + ".cfg"));
  return Model(cfg, load_checkpoint(path));
}

void save_train_state(const std::string& prefix, const Model& model, const TrainerState& state) {
  save_model_checkpoint(prefix + ".ckpt", model);
  save_checkpoint(prefix + ".opt", state.adam_state);
  if (!state.best_params.empty()) {
    save_checkpoint(prefix + ".best.ckpt", state.best_params);
  }
  KvMap meta;
  meta["next_step"] = std::to_string(state.next_step);
  {
    std::ostringstream os;
    os.precision(17);
    os << state.best_dev;
    meta["best_dev"] = os.str();
  }
  meta["best_step"] = std::to_string(state.best_step);
  meta["evals_since_improve"] = std::to_string(state.evals_since_improve);
  meta["adam_step_count"] = std::to_string(state.adam_step_count);
  write_kv_file(prefix + ".train", meta);
}

TrainerState load_train_state(const std::string& prefix, const Model& model) {
  TrainerState state;
  state.adam_state = load_checkpoint(prefix + ".opt");
  KvMap meta = read_kv_file(prefix + ".train");
  state.next_step = std::stoul(meta.at("next_step"));
  state.best_dev = std::stod(meta.at("best_dev"));
  state.best_step = std::stoul(meta.at("best_step"));
  state.evals_since_improve = std::stoul(meta.at("evals_since_improve"));
  state.adam_step_count = std::stol(meta.at("adam_step_count"));
  std::ifstream best(prefix + ".best.ckpt");
  if (best.good()) {
    best.close();
    state.best_params = load_checkpoint(prefix + ".best.ckpt");
  } else {
    state.best_params = model.params();
  }
  return state;
}

}  // namespace icred
