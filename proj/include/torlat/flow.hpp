#pragma once

#include "torlat/system.hpp"
#include "torlat/types.hpp"

#include <optional>

namespace torlat {

struct FlowResult {
  Vec endpoint;
  std::optional<Mat> jacobian;  // d Phi^t / d p, via the variational equations
  Mat t_jacobian;               // d Phi^t / d t, columns X_i at the endpoint
  double est_error = 0;         // accumulated local error estimates
  long steps = 0;
};

// Endpoint of the composed flow Phi^{(t_1,...,t_n)}(p).  The commuting fields
// are integrated as the single field sum_i t_i X_i rescaled to unit time;
// commutativity makes this equal to the sequential composition (verified in
// the tests, not assumed here).
FlowResult flow(const IntegrableSystem& sys, const Vec& p, const Vec& t,
                const Tolerances& tol = {}, bool want_jacobian = false);

// Gauss-Newton transfer of a fiber point to a nearby fiber: minimal-norm
// updates p -= DF(p)^+ (F(p) - target).
Vec track_fiber_point(const IntegrableSystem& sys, const Vec& p, const Vec& target,
                      const Tolerances& tol = {}, double trust_radius = 1.0);

}  // namespace torlat
