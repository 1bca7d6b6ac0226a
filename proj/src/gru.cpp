#include "icred/gru.hpp"

#include <cmath>

namespace icred {

namespace {
Tensor init_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  return Tensor::uniform({rows, cols}, -bound, bound, rng);
}
}  // namespace

GruParams GruParams::init(std::size_t hidden, std::size_t input, Rng& rng) {
  GruParams p;
  p.Wz = init_matrix(hidden, input, rng);
  p.Wr = init_matrix(hidden, input, rng);
  p.Wh = init_matrix(hidden, input, rng);
  p.Uz = init_matrix(hidden, hidden, rng);
  p.Ur = init_matrix(hidden, hidden, rng);
  p.Uh = init_matrix(hidden, hidden, rng);
  p.bz = Tensor::zeros({hidden});
  p.br = Tensor::zeros({hidden});
  p.bh = Tensor::zeros({hidden});
  return p;
}

GruParams GruParams::zeros(std::size_t hidden, std::size_t input) {
  GruParams p;
  p.Wz = Tensor::zeros({hidden, input});
  p.Wr = Tensor::zeros({hidden, input});
  p.Wh = Tensor::zeros({hidden, input});
  p.Uz = Tensor::zeros({hidden, hidden});
  p.Ur = Tensor::zeros({hidden, hidden});
  p.Uh = Tensor::zeros({hidden, hidden});
  p.bz = Tensor::zeros({hidden});
  p.br = Tensor::zeros({hidden});
  p.bh = Tensor::zeros({hidden});
  return p;
}

void GruParams::register_into(ParamMap& params, const std::string& prefix) const {
  params[prefix + ".Wz"] = Wz;
  params[prefix + ".Wr"] = Wr;
  params[prefix + ".Wh"] = Wh;
  params[prefix + ".Uz"] = Uz;
  params[prefix + ".Ur"] = Ur;
  params[prefix + ".Uh"] = Uh;
  params[prefix + ".bz"] = bz;
  params[prefix + ".br"] = br;
  params[prefix + ".bh"] = bh;
}

GruRef bind_gru(Binder& bind, const std::string& prefix) {
  GruRef g;
  g.Wz = bind(prefix + ".Wz");
  g.Wr = bind(prefix + ".Wr");
  g.Wh = bind(prefix + ".Wh");
  g.Uz = bind(prefix + ".Uz");
  g.Ur = bind(prefix + ".Ur");
  g.Uh = bind(prefix + ".Uh");
  g.bz = bind(prefix + ".bz");
  g.br = bind(prefix + ".br");
  g.bh = bind(prefix + ".bh");
  return g;
}

Value gru_step(const GruRef& g, Value h, Value x) {
  Value z = sigmoid(add(add(matvec(g.Wz, x), matvec(g.Uz, h)), g.bz));
  Value r = sigmoid(add(add(matvec(g.Wr, x), matvec(g.Ur, h)), g.br));
  Value cand = tanh_v(add(add(matvec(g.Wh, x), matvec(g.Uh, mul(r, h))), g.bh));
  // (1-z)*h + z*cand == h + z*(cand - h)
  return add(h, mul(z, sub(cand, h)));
}

}  // namespace icred
