#pragma once

#include <functional>
#include <string>
#include <vector>

#include "icred/tape.hpp"

namespace icred {

struct GradCheckFlag {
  std::string param;
  std::size_t coord = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_coord = 0;
  std::size_t coords_checked = 0;
  std::vector<GradCheckFlag> flagged;
  bool ok() const { return flagged.empty(); }
};

/// Compares analytic gradients of build_loss against central finite
/// differences over every coordinate of every parameter.
///
/// build_loss must be a deterministic function of params; it is evaluated
/// twice up front and a ContractError is thrown if the two losses differ.
/// Relative error uses a denominator floor so coordinates whose true
/// gradient sits below the finite-difference noise floor do not flag.
GradCheckReport grad_check(ParamMap& params,
                           const std::function<Value(Tape&, Binder&)>& build_loss,
                           double tolerance, double fd_step = 1e-5,
                           double denom_floor = 1e-5);

}  // namespace icred
