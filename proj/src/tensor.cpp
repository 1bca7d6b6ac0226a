#include "icred/tensor.hpp"

#include <cmath>
#include <sstream>

namespace icred {

namespace {

std::size_t checked_numel(const std::vector<std::size_t>& shape) {
  if (shape.empty()) throw DimError("tensor shape must be nonempty");
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw DimError("tensor dimensions must be positive");
    n *= d;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (checked_numel(shape_) != data_.size()) {
    throw DimError("tensor data length " + std::to_string(data_.size()) +
                   " does not match shape " + shape_str());
  }
  check_finite("tensor construction");
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  std::size_t n = checked_numel(shape);
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_.assign(n, 0.0);
  return t;
}

Tensor Tensor::uniform(std::vector<std::size_t> shape, double lo, double hi, Rng& rng) {
  std::size_t n = checked_numel(shape);
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_.resize(n);
  for (std::size_t i = 0; i < n; ++i) t.data_[i] = rng.uniform(lo, hi);
  return t;
}

void Tensor::check_finite(const std::string& what) const {
  for (double v : data_) {
    if (!std::isfinite(v)) {
      throw NumericError("non-finite value in " + what + " (shape " + shape_str() + ")");
    }
  }
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
  os << "]";
  return os.str();
}

}  // namespace icred
