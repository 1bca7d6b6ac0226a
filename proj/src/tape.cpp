#include "icred/tape.hpp"

#include <algorithm>
#include <cmath>

#include "icred/errors.hpp"
#include "icred/kernels.hpp"

namespace icred {

namespace {

void require_same_tape(Value a, Value b) {
  if (a.tape() != b.tape()) throw ContractError("operands live on different tapes");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                   b.shape_str());
  }
}

void require_vector(const Tensor& t, const char* op) {
  if (t.rank() != 1) throw DimError(std::string(op) + ": expected a vector, got " + t.shape_str());
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw DimError(std::string(op) + ": expected a matrix, got " + t.shape_str());
}

}  // namespace

const Tensor& Value::val() const { return tape_->node(idx_).value; }

double Value::scalar_value() const {
  const Tensor& t = val();
  if (!t.is_scalar()) throw ContractError("scalar_value on non-scalar " + t.shape_str());
  return t[0];
}

Value Tape::emit(Node&& n) {
  n.value.check_finite("tape op output");
  nodes_.push_back(std::move(n));
  return Value(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Value Tape::leaf(const Tensor& t) {
  Node n;
  n.value = t;
  n.op = Op::kLeaf;
  return emit(std::move(n));
}

Value Tape::constant(Tensor t) {
  Node n;
  n.value = std::move(t);
  n.op = Op::kConst;
  return emit(std::move(n));
}

Value Tape::zeros_const(std::size_t n) { return constant(Tensor::zeros({n})); }

void Tape::zero_grad() {
  for (auto& n : nodes_) n.grad = Tensor();
}

Tensor Tape::grad_of(Value v) const {
  const Node& n = nodes_[v.index()];
  if (n.grad.numel() == 0) return Tensor::zeros(n.value.shape());
  return n.grad;
}

Value add(Value a, Value b) {
  require_same_tape(a, b);
  require_same_shape(a.val(), b.val(), "add");
  Tape::Node n;
  n.op = Op::kAdd;
  n.parents = {a.index(), b.index()};
  std::vector<double> out(a.val().data());
  const auto& bd = b.val().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
  n.value = Tensor(a.val().shape(), std::move(out));
  return a.tape()->emit(std::move(n));
}

Value sub(Value a, Value b) {
  require_same_tape(a, b);
  require_same_shape(a.val(), b.val(), "sub");
  Tape::Node n;
  n.op = Op::kSub;
  n.parents = {a.index(), b.index()};
  std::vector<double> out(a.val().data());
  const auto& bd = b.val().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
  n.value = Tensor(a.val().shape(), std::move(out));
  return a.tape()->emit(std::move(n));
}

Value mul(Value a, Value b) {
  require_same_tape(a, b);
  require_same_shape(a.val(), b.val(), "mul");
  Tape::Node n;
  n.op = Op::kMul;
  n.parents = {a.index(), b.index()};
  std::vector<double> out(a.val().data());
  const auto& bd = b.val().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bd[i];
  n.value = Tensor(a.val().shape(), std::move(out));
  return a.tape()->emit(std::move(n));
}

Value scale(Value a, double c) {
  Tape::Node n;
  n.op = Op::kScale;
  n.scale = c;
  n.parents = {a.index()};
  std::vector<double> out(a.val().data());
  for (double& v : out) v *= c;
  n.value = Tensor(a.val().shape(), std::move(out));
  return a.tape()->emit(std::move(n));
}

Value matvec(Value a, Value x) {
  require_same_tape(a, x);
  require_matrix(a.val(), "matvec");
  require_vector(x.val(), "matvec");
  std::size_t m = a.val().rows(), k = a.val().cols();
  if (k != x.val().numel()) {
    throw DimError("matvec: " + a.val().shape_str() + " times " + x.val().shape_str());
  }
  std::vector<double> out(m);
  kern::matvec(a.val().data().data(), x.val().data().data(), out.data(), m, k);
  Tape::Node n;
  n.op = Op::kMatVec;
  n.parents = {a.index(), x.index()};
  n.value = Tensor({m}, std::move(out));
  return a.tape()->emit(std::move(n));
}

Value matvec_t(Value a, Value x) {
  require_same_tape(a, x);
  require_matrix(a.val(), "matvec_t");
  require_vector(x.val(), "matvec_t");
  std::size_t m = a.val().rows(), k = a.val().cols();
  if (m != x.val().numel()) {
    throw DimError("matvec_t: " + a.val().shape_str() + "^T times " + x.val().shape_str());
  }
  std::vector<double> out(k);
  kern::matvec_t(a.val().data().data(), x.val().data().data(), out.data(), m, k);
  Tape::Node n;
  n.op = Op::kMatVecT;
  n.parents = {a.index(), x.index()};
  n.value = Tensor({k}, std::move(out));
  return a.tape()->emit(std::move(n));
}

Value concat(std::span<const Value> parts) {
  if (parts.empty()) throw DomainError("concat: no operands");
  Tape::Node n;
  n.op = Op::kConcat;
  std::vector<double> out;
  for (const Value& p : parts) {
    require_same_tape(parts[0], p);
    require_vector(p.val(), "concat");
    n.parents.push_back(p.index());
    const auto& d = p.val().data();
    out.insert(out.end(), d.begin(), d.end());
  }
  std::size_t total = out.size();
  n.value = Tensor({total}, std::move(out));
  return parts[0].tape()->emit(std::move(n));
}

Value sigmoid(Value a) {
  Tape::Node n;
  n.op = Op::kSigmoid;
  n.parents = {a.index()};
  std::vector<double> out(a.val().data());
  for (double& v : out) v = 1.0 / (1.0 + std::exp(-v));
  n.value = Tensor(a.val().shape(), std::move(out));
  return a.tape()->emit(std::move(n));
}

Value tanh_v(Value a) {
  Tape::Node n;
  n.op = Op::kTanh;
  n.parents = {a.index()};
  std::vector<double> out(a.val().data());
  for (double& v : out) v = std::tanh(v);
  n.value = Tensor(a.val().shape(), std::move(out));
  return a.tape()->emit(std::move(n));
}

Value softmax(Value a) {
  require_vector(a.val(), "softmax");
  Tape::Node n;
  n.op = Op::kSoftmax;
  n.parents = {a.index()};
  n.value = Tensor(a.val().shape(), softmax(a.val().data()));
  return a.tape()->emit(std::move(n));
}

Value dot(Value a, Value b) {
  require_same_tape(a, b);
  require_same_shape(a.val(), b.val(), "dot");
  double acc = 0.0;
  const auto& ad = a.val().data();
  const auto& bd = b.val().data();
  for (std::size_t i = 0; i < ad.size(); ++i) acc += ad[i] * bd[i];
  Tape::Node n;
  n.op = Op::kDot;
  n.parents = {a.index(), b.index()};
  n.value = Tensor::scalar(acc);
  return a.tape()->emit(std::move(n));
}

Value sum_squares(Value a) {
  double acc = 0.0;
  for (double v : a.val().data()) acc += v * v;
  Tape::Node n;
  n.op = Op::kSumSquares;
  n.parents = {a.index()};
  n.value = Tensor::scalar(acc);
  return a.tape()->emit(std::move(n));
}

Value cross_entropy_logits(Value logits, std::size_t target) {
  require_vector(logits.val(), "cross_entropy");
  const auto& l = logits.val().data();
  if (target >= l.size()) throw ContractError("cross_entropy: target out of range");
  double lse = log_sum_exp(l);
  Tape::Node n;
  n.op = Op::kCrossEntropy;
  n.parents = {logits.index()};
  n.index = static_cast<std::int64_t>(target);
  n.value = Tensor::scalar(lse - l[target]);
  return logits.tape()->emit(std::move(n));
}

Value embed_row(Value matrix, std::size_t row) {
  require_matrix(matrix.val(), "embed_row");
  const Tensor& m = matrix.val();
  if (row >= m.rows()) throw ContractError("embed_row: row out of range");
  std::vector<double> out(m.data().begin() + row * m.cols(),
                          m.data().begin() + (row + 1) * m.cols());
  Tape::Node n;
  n.op = Op::kEmbedRow;
  n.parents = {matrix.index()};
  n.index = static_cast<std::int64_t>(row);
  n.value = Tensor({m.cols()}, std::move(out));
  return matrix.tape()->emit(std::move(n));
}

Value col_max(std::span<const Value> cols) {
  if (cols.empty()) throw DomainError("col_max: no operands");
  std::size_t d = cols[0].val().numel();
  Tape::Node n;
  n.op = Op::kColMax;
  std::vector<double> out(cols[0].val().data());
  n.arg.assign(d, 0);
  n.parents.push_back(cols[0].index());
  for (std::size_t k = 1; k < cols.size(); ++k) {
    require_same_tape(cols[0], cols[k]);
    require_same_shape(cols[0].val(), cols[k].val(), "col_max");
    n.parents.push_back(cols[k].index());
    const auto& ck = cols[k].val().data();
    for (std::size_t i = 0; i < d; ++i) {
      if (ck[i] > out[i]) {  // strict: ties keep the earliest column
        out[i] = ck[i];
        n.arg[i] = static_cast<std::uint32_t>(k);
      }
    }
  }
  n.value = Tensor({d}, std::move(out));
  return cols[0].tape()->emit(std::move(n));
}

Value cols_to_mat(std::span<const Value> cols) {
  if (cols.empty()) throw DomainError("cols_to_mat: no columns");
  std::size_t h = cols[0].val().numel();
  std::size_t k = cols.size();
  Tape::Node n;
  n.op = Op::kColsToMat;
  std::vector<double> out(h * k);
  for (std::size_t j = 0; j < k; ++j) {
    require_same_tape(cols[0], cols[j]);
    require_same_shape(cols[0].val(), cols[j].val(), "cols_to_mat");
    n.parents.push_back(cols[j].index());
    const auto& cj = cols[j].val().data();
    for (std::size_t i = 0; i < h; ++i) out[i * k + j] = cj[i];
  }
  n.value = Tensor({h, k}, std::move(out));
  return cols[0].tape()->emit(std::move(n));
}

std::vector<double> softmax(const std::vector<double>& scores) {
  if (scores.empty()) throw DomainError("softmax: empty input");
  double mx = *std::max_element(scores.begin(), scores.end());
  std::vector<double> out(scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

double log_sum_exp(const std::vector<double>& v) {
  if (v.empty()) throw DomainError("log_sum_exp: empty input");
  double mx = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - mx);
  return mx + std::log(sum);
}

void Tape::backward(Value loss) {
  if (loss.tape() != this) throw ContractError("backward: loss from another tape");
  const Node& ln = nodes_[loss.index()];
  if (!ln.value.is_scalar()) {
    throw ContractError("backward: loss must be scalar, got " + ln.value.shape_str());
  }

  // Fresh adjoints per call; only leaf grads persist (and accumulate).
  std::vector<std::vector<double>> adj(loss.index() + 1);
  adj[loss.index()].assign(1, 1.0);

  auto touch = [&](std::uint32_t i) -> std::vector<double>& {
    if (adj[i].empty()) adj[i].assign(nodes_[i].value.numel(), 0.0);
    return adj[i];
  };

  for (std::uint32_t i = loss.index() + 1; i-- > 0;) {
    if (adj[i].empty()) continue;
    Node& n = nodes_[i];
    const std::vector<double>& g = adj[i];
    switch (n.op) {
      case Op::kLeaf: {
        if (n.grad.numel() == 0) n.grad = Tensor::zeros(n.value.shape());
        kern::axpy(n.grad.data().data(), g.data(), 1.0, g.size());
        break;
      }
      case Op::kConst:
        break;
      case Op::kAdd: {
        auto& ga = touch(n.parents[0]);
        auto& gb = touch(n.parents[1]);
        kern::axpy(ga.data(), g.data(), 1.0, g.size());
        kern::axpy(gb.data(), g.data(), 1.0, g.size());
        break;
      }
      case Op::kSub: {
        auto& ga = touch(n.parents[0]);
        auto& gb = touch(n.parents[1]);
        kern::axpy(ga.data(), g.data(), 1.0, g.size());
        kern::axpy(gb.data(), g.data(), -1.0, g.size());
        break;
      }
      case Op::kMul: {
        const auto& av = nodes_[n.parents[0]].value.data();
        const auto& bv = nodes_[n.parents[1]].value.data();
        auto& ga = touch(n.parents[0]);
        auto& gb = touch(n.parents[1]);
        for (std::size_t j = 0; j < g.size(); ++j) {
          ga[j] += g[j] * bv[j];
          gb[j] += g[j] * av[j];
        }
        break;
      }
      case Op::kScale: {
        auto& ga = touch(n.parents[0]);
        kern::axpy(ga.data(), g.data(), n.scale, g.size());
        break;
      }
      case Op::kMatVec: {
        const Tensor& A = nodes_[n.parents[0]].value;
        const auto& xv = nodes_[n.parents[1]].value.data();
        auto& gA = touch(n.parents[0]);
        auto& gx = touch(n.parents[1]);
        kern::ger(gA.data(), g.data(), xv.data(), 1.0, A.rows(), A.cols());
        std::vector<double> tmp(A.cols());
        kern::matvec_t(A.data().data(), g.data(), tmp.data(), A.rows(), A.cols());
        kern::axpy(gx.data(), tmp.data(), 1.0, tmp.size());
        break;
      }
      case Op::kMatVecT: {
        const Tensor& A = nodes_[n.parents[0]].value;
        const auto& xv = nodes_[n.parents[1]].value.data();
        auto& gA = touch(n.parents[0]);
        auto& gx = touch(n.parents[1]);
        kern::ger(gA.data(), xv.data(), g.data(), 1.0, A.rows(), A.cols());
        std::vector<double> tmp(A.rows());
        kern::matvec(A.data().data(), g.data(), tmp.data(), A.rows(), A.cols());
        kern::axpy(gx.data(), tmp.data(), 1.0, tmp.size());
        break;
      }
      case Op::kConcat: {
        std::size_t off = 0;
        for (std::uint32_t p : n.parents) {
          auto& gp = touch(p);
          kern::axpy(gp.data(), g.data() + off, 1.0, gp.size());
          off += gp.size();
        }
        break;
      }
      case Op::kSigmoid: {
        auto& ga = touch(n.parents[0]);
        const auto& s = n.value.data();
        for (std::size_t j = 0; j < g.size(); ++j) ga[j] += g[j] * s[j] * (1.0 - s[j]);
        break;
      }
      case Op::kTanh: {
        auto& ga = touch(n.parents[0]);
        const auto& t = n.value.data();
        for (std::size_t j = 0; j < g.size(); ++j) ga[j] += g[j] * (1.0 - t[j] * t[j]);
        break;
      }
      case Op::kSoftmax: {
        auto& ga = touch(n.parents[0]);
        const auto& p = n.value.data();
        double gp = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j) gp += g[j] * p[j];
        for (std::size_t j = 0; j < g.size(); ++j) ga[j] += p[j] * (g[j] - gp);
        break;
      }
      case Op::kDot: {
        const auto& av = nodes_[n.parents[0]].value.data();
        const auto& bv = nodes_[n.parents[1]].value.data();
        auto& ga = touch(n.parents[0]);
        auto& gb = touch(n.parents[1]);
        kern::axpy(ga.data(), bv.data(), g[0], ga.size());
        kern::axpy(gb.data(), av.data(), g[0], gb.size());
        break;
      }
      case Op::kSumSquares: {
        const auto& av = nodes_[n.parents[0]].value.data();
        auto& ga = touch(n.parents[0]);
        kern::axpy(ga.data(), av.data(), 2.0 * g[0], ga.size());
        break;
      }
      case Op::kCrossEntropy: {
        const auto& l = nodes_[n.parents[0]].value.data();
        auto& ga = touch(n.parents[0]);
        std::vector<double> p = softmax(l);
        for (std::size_t j = 0; j < p.size(); ++j) ga[j] += g[0] * p[j];
        ga[static_cast<std::size_t>(n.index)] -= g[0];
        break;
      }
      case Op::kEmbedRow: {
        auto& gE = touch(n.parents[0]);
        std::size_t cols = n.value.numel();
        kern::axpy(gE.data() + static_cast<std::size_t>(n.index) * cols, g.data(), 1.0, cols);
        break;
      }
      case Op::kColMax: {
        for (std::size_t j = 0; j < g.size(); ++j) {
          auto& gp = touch(n.parents[n.arg[j]]);
          gp[j] += g[j];
        }
        break;
      }
      case Op::kColsToMat: {
        std::size_t k = n.parents.size();
        std::size_t h = n.value.rows();
        for (std::size_t j = 0; j < k; ++j) {
          auto& gp = touch(n.parents[j]);
          for (std::size_t r = 0; r < h; ++r) gp[r] += g[r * k + j];
        }
        break;
      }
    }
  }
}

Value Binder::operator()(const std::string& name) {
  auto it = cache_.find(name);
  if (it != cache_.end()) return it->second;
  auto pit = params_->find(name);
  if (pit == params_->end()) throw ContractError("unknown parameter: " + name);
  Value v = tape_->leaf(pit->second);
  cache_.emplace(name, v);
  bound_.emplace_back(name, v);
  return v;
}

std::map<std::string, Tensor> Binder::grads() const {
  std::map<std::string, Tensor> out;
  for (const auto& [name, v] : bound_) out.emplace(name, tape_->grad_of(v));
  return out;
}

}  // namespace icred
