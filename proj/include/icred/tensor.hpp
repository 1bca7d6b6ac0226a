#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "icred/errors.hpp"
#include "icred/rng.hpp"

namespace icred {

/// Dense row-major tensor of 64-bit floats. Rank 1 (vector) and rank 2
/// (matrix) cover everything the model needs; scalars are shape {1}.
/// Construction rejects non-finite entries.
class Tensor {
 public:
  Tensor() = default;

  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  /// Zero-filled tensor.
  static Tensor zeros(std::vector<std::size_t> shape);

  /// All entries uniform in [lo, hi).
  static Tensor uniform(std::vector<std::size_t> shape, double lo, double hi, Rng& rng);

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  std::size_t numel() const { return data_.size(); }
  std::size_t rank() const { return shape_.size(); }

  std::size_t rows() const { return shape_.at(0); }
  std::size_t cols() const { return rank() >= 2 ? shape_[1] : 1; }

  bool is_scalar() const { return data_.size() == 1; }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }

  /// Throws NumericError if any entry is NaN or Inf.
  void check_finite(const std::string& what) const;

  std::string shape_str() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

}  // namespace icred
