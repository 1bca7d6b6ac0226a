#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "icred/tensor.hpp"

namespace icred {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
class Value {
 public:
  Value() = default;
  Value(Tape* tape, std::uint32_t idx) : tape_(tape), idx_(idx) {}

  const Tensor& val() const;
  std::size_t numel() const { return val().numel(); }
  double scalar_value() const;

  Tape* tape() const { return tape_; }
  std::uint32_t index() const { return idx_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::uint32_t idx_ = 0;
};

enum class Op : std::uint8_t {
  kLeaf,          // trainable input
  kConst,         // non-trainable input
  kAdd,
  kSub,
  kMul,           // elementwise
  kScale,         // scalar * tensor
  kMatVec,        // A x
  kMatVecT,       // A^T x
  kConcat,        // 1-D concatenation
  kSigmoid,
  kTanh,
  kSoftmax,
  kDot,           // scalar
  kSumSquares,    // scalar
  kCrossEntropy,  // -log softmax(logits)[target], scalar
  kEmbedRow,      // row of a matrix
  kColMax,        // elementwise max over k same-length vectors
  kColsToMat,     // k vectors of dim h -> h x k matrix
};

/// Reverse-mode autodiff tape. Nodes are appended in creation order, which is
/// a topological order of the DAG; backward() sweeps it once in reverse.
/// Gradients persist only on leaves and accumulate across backward() calls
/// until zero_grad(). A tape is confined to a single thread.
class Tape {
 public:
  struct Node {
    Tensor value;
    Tensor grad;  // leaves only; empty until first backward touches it
    std::vector<std::uint32_t> parents;
    Op op = Op::kConst;
    double scale = 0.0;             // kScale factor
    std::int64_t index = -1;        // kEmbedRow row / kCrossEntropy target
    std::vector<std::uint32_t> arg;  // kColMax winner per coordinate
  };

  Value leaf(const Tensor& t);
  Value constant(Tensor t);
  Value zeros_const(std::size_t n);

  /// Backpropagate from a scalar loss; accumulates into leaf grads.
  /// Throws ContractError if loss is not scalar.
  void backward(Value loss);

  void zero_grad();

  /// Gradient accumulated on a leaf; zeros if backward never reached it.
  Tensor grad_of(Value leaf_value) const;

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::uint32_t i) const { return nodes_[i]; }

  Value emit(Node&& n);

 private:
  // deque keeps node references stable while the tape grows
  std::deque<Node> nodes_;
};

// Op builders. Operands must live on the same tape.
Value add(Value a, Value b);
Value sub(Value a, Value b);
Value mul(Value a, Value b);
Value scale(Value a, double c);
Value matvec(Value a, Value x);
Value matvec_t(Value a, Value x);
Value concat(std::span<const Value> parts);
Value sigmoid(Value a);
Value tanh_v(Value a);
Value softmax(Value a);
Value dot(Value a, Value b);
Value sum_squares(Value a);
Value cross_entropy_logits(Value logits, std::size_t target);
Value embed_row(Value matrix, std::size_t row);
Value col_max(std::span<const Value> cols);
Value cols_to_mat(std::span<const Value> cols);

/// Plain softmax on a vector; shifted by the max for stability.
std::vector<double> softmax(const std::vector<double>& scores);

/// log(sum(exp(v))) with max-shift.
double log_sum_exp(const std::vector<double>& v);

/// Named trainable parameters. Ordered map keeps every iteration
/// (checkpointing, L2, optimizer sweeps) deterministic.
using ParamMap = std::map<std::string, Tensor>;

/// Binds parameters onto a tape as leaves, memoized per name so every use of
/// a parameter in one graph shares a single node.
class Binder {
 public:
  Binder(Tape& tape, ParamMap& params) : tape_(&tape), params_(&params) {}

  Value operator()(const std::string& name);

  const std::vector<std::pair<std::string, Value>>& bound() const { return bound_; }

  /// name -> accumulated gradient for every bound parameter (post-backward).
  std::map<std::string, Tensor> grads() const;

 private:
  Tape* tape_;
  ParamMap* params_;
  std::map<std::string, Value> cache_;
  std::vector<std::pair<std::string, Value>> bound_;
};

}  // namespace icred
