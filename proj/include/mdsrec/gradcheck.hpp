#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mdsrec/tape.hpp"

// Central-difference gradient verification. The caller supplies a pure
// forward evaluation (loss at the current parameter values) and a routine
// that fills Parameter::grad analytically; every parameter entry is then
// perturbed both ways and compared. Any stochastic input (noise draws) must
// be frozen inside the closures.

namespace mdsrec::ad {

struct TensorCheck {
  std::string name;
  double max_rel_err = 0.0;
  std::int64_t worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  std::int64_t n_checked = 0;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;
  double max_rel_err = 0.0;
  std::string worst_param;

  bool ok(double tol) const { return !tensors.empty() && max_rel_err < tol; }
};

inline double rel_err(double a, double b) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-8});
}

// forward: loss at current parameter values (no side effects on params).
// fill_grads: zero all grads, run one backward, leave grads populated.
// stride: check every stride-th entry of each parameter (1 = all).
inline GradCheckReport gradcheck(const std::vector<Parameter*>& params,
                                 const std::function<double()>& forward,
                                 const std::function<void()>& fill_grads,
                                 double step = 1e-5, int stride = 1) {
  require(step > 0.0 && stride >= 1, "gradcheck: bad step/stride");
  {
    const double a = forward();
    const double b = forward();
    require(a == b, "gradcheck: closure is not deterministic (", a, " vs ", b,
            "); freeze all noise before checking");
  }
  fill_grads();

  GradCheckReport rep;
  for (Parameter* p : params) {
    Tensor analytic = p->grad;  // snapshot; FD perturbs values below
    TensorCheck tc;
    tc.name = p->name;
    for (std::int64_t i = 0; i < p->value.size(); i += stride) {
      const double orig = p->value[i];
      p->value[i] = orig + step;
      const double fp = forward();
      p->value[i] = orig - step;
      const double fm = forward();
      p->value[i] = orig;

      const double fd = (fp - fm) / (2.0 * step);
      const double an = analytic[i];
      const double re = rel_err(an, fd);
      ++tc.n_checked;
      if (re > tc.max_rel_err || tc.worst_index < 0) {
        tc.max_rel_err = re;
        tc.worst_index = i;
        tc.analytic = an;
        tc.numeric = fd;
      }
    }
    if (tc.max_rel_err > rep.max_rel_err || rep.tensors.empty()) {
      rep.max_rel_err = tc.max_rel_err;
      rep.worst_param = tc.name;
    }
    rep.tensors.push_back(std::move(tc));
  }
  return rep;
}

}  // namespace mdsrec::ad
