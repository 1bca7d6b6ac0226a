#include "icred/adam.hpp"

#include <cmath>

#include "icred/errors.hpp"

namespace icred {

AdamState AdamState::create(const Tensor& param, double lr, double beta1, double beta2,
                            double eps) {
  AdamState s;
  s.m = Tensor::zeros(param.shape());
  s.v = Tensor::zeros(param.shape());
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  return s;
}

void adam_step(AdamState& state, Tensor& param, const Tensor& grad) {
  if (!param.same_shape(grad) || !param.same_shape(state.m)) {
    throw DimError("adam_step: shape mismatch param " + param.shape_str() + " grad " +
                   grad.shape_str());
  }
  state.step += 1;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  auto& m = state.m.data();
  auto& v = state.v.data();
  auto& p = param.data();
  const auto& g = grad.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
    v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
    double mhat = m[i] / bc1;
    double vhat = v[i] / bc2;
    p[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

AdamOptimizer::AdamOptimizer(const ParamMap& params, double lr, double beta1, double beta2,
                             double eps) {
  for (const auto& [name, t] : params) {
    states_.emplace(name, AdamState::create(t, lr, beta1, beta2, eps));
  }
}

void AdamOptimizer::step(ParamMap& params, const std::map<std::string, Tensor>& grads) {
  step_count_ += 1;
  for (auto& [name, param] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;  // parameter unused in this graph
    adam_step(states_.at(name), param, git->second);
  }
}

ParamMap AdamOptimizer::export_state() const {
  ParamMap out;
  for (const auto& [name, s] : states_) {
    out["m:" + name] = s.m;
    out["v:" + name] = s.v;
    out["t:" + name] = Tensor::scalar(static_cast<double>(s.step));
  }
  return out;
}

void AdamOptimizer::import_state(const ParamMap& exported, long step_count) {
  step_count_ = step_count;
  for (auto& [name, s] : states_) {
    auto m = exported.find("m:" + name);
    auto v = exported.find("v:" + name);
    auto t = exported.find("t:" + name);
    if (m == exported.end() || v == exported.end() || t == exported.end()) {
      throw ConfigError("optimizer state missing entries for parameter " + name);
    }
    if (!m->second.same_shape(s.m) || !v->second.same_shape(s.v)) {
      throw DimError("optimizer state shape mismatch for parameter " + name);
    }
    s.m = m->second;
    s.v = v->second;
    s.step = static_cast<long>(t->second[0]);
  }
}

}  // namespace icred
