#pragma once

#include <string>

#include "icred/tape.hpp"

namespace icred {

/// Weights of one GRU cell. Gate convention (Cho et al. 2014):
///   z  = sigmoid(W_z x + U_z h + b_z)
///   r  = sigmoid(W_r x + U_r h + b_r)
///   h~ = tanh(W_h x + U_h (r * h) + b_h)
///   h' = (1 - z) * h + z * h~
struct GruParams {
  Tensor Wz, Wr, Wh;  // hidden x input
  Tensor Uz, Ur, Uh;  // hidden x hidden
  Tensor bz, br, bh;  // hidden

  std::size_t hidden() const { return bz.numel(); }
  std::size_t input() const { return Wz.cols(); }

  /// Matrices uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
  static GruParams init(std::size_t hidden, std::size_t input, Rng& rng);
  static GruParams zeros(std::size_t hidden, std::size_t input);

  /// Registers the nine tensors under prefix (".Wz", ".Uz", ...).
  void register_into(ParamMap& params, const std::string& prefix) const;
};

/// The nine weights bound onto a tape.
struct GruRef {
  Value Wz, Wr, Wh, Uz, Ur, Uh, bz, br, bh;
};

/// Binds a registered GRU by prefix.
GruRef bind_gru(Binder& bind, const std::string& prefix);

/// One differentiable GRU step; h' = (1-z)*h + z*h~.
Value gru_step(const GruRef& g, Value h, Value x);

}  // namespace icred
