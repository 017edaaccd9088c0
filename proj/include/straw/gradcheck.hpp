#pragma once

#include <functional>
#include <string>
#include <vector>

#include "straw/tensor.hpp"

namespace straw {

struct FdParam {
  std::string name;
  Tensor64* value;
  Tensor64* grad;
};

struct FdReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Central-difference check. `loss` must be a deterministic function of the
// parameter values; `compute_grads` fills the analytic gradients for the
// current values. Relative error uses max(1, |numeric|) in the denominator.
inline FdReport finite_difference_check(const std::function<double()>& loss,
                                        const std::function<void()>& compute_grads,
                                        const std::vector<FdParam>& params, double eps = 1e-5) {
  compute_grads();
  std::vector<Tensor64> saved_grads;
  saved_grads.reserve(params.size());
  for (const auto& p : params) saved_grads.push_back(*p.grad);

  FdReport rep;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor64& v = *params[pi].value;
    for (size_t i = 0; i < v.numel(); ++i) {
      double orig = v.data[i];
      v.data[i] = orig + eps;
      double lp = loss();
      v.data[i] = orig - eps;
      double lm = loss();
      v.data[i] = orig;
      double numeric = (lp - lm) / (2.0 * eps);
      double analytic = saved_grads[pi].data[i];
      double rel = std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
      if (rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst_param = params[pi].name;
        rep.worst_index = i;
        rep.analytic = analytic;
        rep.numeric = numeric;
      }
    }
  }
  return rep;
}

}  // namespace straw
