#include "icred/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "icred/errors.hpp"

namespace icred {

namespace {
double eval_loss(ParamMap& params, const std::function<Value(Tape&, Binder&)>& build_loss) {
  Tape tape;
  Binder bind(tape, params);
  return build_loss(tape, bind).scalar_value();
}
}  // namespace

GradCheckReport grad_check(ParamMap& params,
                           const std::function<Value(Tape&, Binder&)>& build_loss,
                           double tolerance, double fd_step, double denom_floor) {
  double l0 = eval_loss(params, build_loss);
  double l1 = eval_loss(params, build_loss);
  if (l0 != l1) {
    throw ContractError("grad_check: loss function is not deterministic (" +
                        std::to_string(l0) + " vs " + std::to_string(l1) + ")");
  }

  std::map<std::string, Tensor> analytic;
  {
    Tape tape;
    Binder bind(tape, params);
    Value loss = build_loss(tape, bind);
    tape.backward(loss);
    analytic = bind.grads();
  }

  GradCheckReport report;
  for (auto& [name, tensor] : params) {
    auto ait = analytic.find(name);
    for (std::size_t i = 0; i < tensor.numel(); ++i) {
      double saved = tensor[i];
      tensor[i] = saved + fd_step;
      double fplus = eval_loss(params, build_loss);
      tensor[i] = saved - fd_step;
      double fminus = eval_loss(params, build_loss);
      tensor[i] = saved;

      double numeric = (fplus - fminus) / (2.0 * fd_step);
      // params never bound in this graph have zero gradient by definition
      double a = ait == analytic.end() ? 0.0 : ait->second[i];
      double denom = std::max({std::abs(a), std::abs(numeric), denom_floor});
      double rel = std::abs(a - numeric) / denom;

      report.coords_checked += 1;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = name;
        report.worst_coord = i;
      }
      if (rel > tolerance) {
        report.flagged.push_back({name, i, a, numeric, rel});
      }
    }
  }
  return report;
}

}  // namespace icred
