#include "torlat/flow.hpp"

#include <algorithm>
#include <cmath>

namespace torlat {

namespace {

// Dormand-Prince 5(4) coefficients.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// difference between the 5th and the embedded 4th order weights
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

struct AugmentedField {
  const IntegrableSystem& sys;
  const Vec& t;
  int d;
  bool with_jacobian;

  int size() const { return with_jacobian ? d + d * d : d; }

  // y = [x; vec(Y)], dy = [v(x); Dv(x) * Y]
  Vec operator()(const Vec& y) const {
    const Vec x = y.head(d);
    Vec dy(size());
    dy.head(d) = sys.combined_field(t, x);
    if (with_jacobian) {
      const Mat Dv = sys.combined_jacobian(t, x);
      Eigen::Map<const Mat> Y(y.data() + d, d, d);
      Eigen::Map<Mat>(dy.data() + d, d, d) = Dv * Y;
    }
    return dy;
  }
};

}  // namespace

FlowResult flow(const IntegrableSystem& sys, const Vec& p, const Vec& t, const Tolerances& tol,
                bool want_jacobian) {
  tol.validate();
  const int d = sys.ambient_dim();
  if (p.size() != d || t.size() != sys.n()) fail(errc::bad_argument, "flow: dimension mismatch");
  if (!sys.in_regular_domain(p)) fail(errc::left_regular_domain, "flow: start not regular");

  FlowResult res;
  res.t_jacobian = Mat(d, sys.n());
  if (t.norm() == 0.0) {
    res.endpoint = p;
    if (want_jacobian) res.jacobian = Mat::Identity(d, d);
    res.t_jacobian = sys.generator_matrix(p);
    return res;
  }

  AugmentedField f{sys, t, d, want_jacobian};
  Vec y(f.size());
  y.head(d) = p;
  if (want_jacobian) Eigen::Map<Mat>(y.data() + d, d, d) = Mat::Identity(d, d);

  double s = 0.0;
  Vec k1 = f(y);
  double h = 0.1;
  {
    const double fn = k1.head(d).norm() / (1.0 + p.norm());
    if (fn > 0) h = std::min(0.1, 0.01 / fn);
    h = std::max(h, 1e-8);
  }

  const long max_steps = 2'000'000;
  Vec k2, k3, k4, k5, k6, k7, ynew;
  while (s < 1.0) {
    if (res.steps++ > max_steps) fail(errc::step_failure, "flow: step budget exhausted");
    if (h < 1e-14) fail(errc::step_failure, "flow: step size underflow");
    bool last = false;
    if (s + h >= 1.0) {
      h = 1.0 - s;
      last = true;
    }

    k2 = f(y + h * (a21 * k1));
    k3 = f(y + h * (a31 * k1 + a32 * k2));
    k4 = f(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    k5 = f(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    k6 = f(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    k7 = f(ynew);
    const Vec err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double sum = 0.0;
    for (int i = 0; i < err.size(); ++i) {
      const double w = tol.abs_tol + tol.rel_tol * std::max(std::abs(y(i)), std::abs(ynew(i)));
      const double q = err(i) / w;
      sum += q * q;
    }
    const double err_norm = std::sqrt(sum / err.size());

    if (err_norm <= 1.0) {
      s += h;
      y = ynew;
      k1 = k7;  // FSAL
      res.est_error += err.head(d).norm();
      if (!sys.in_regular_domain(y.head(d)))
        fail(errc::left_regular_domain, "flow: trajectory left the regular domain");
      if (last && s >= 1.0) break;
    }
    const double fac = std::clamp(0.9 * std::pow(std::max(err_norm, 1e-10), -0.2), 0.2, 5.0);
    h *= fac;
  }

  res.endpoint = y.head(d);
  if (want_jacobian) res.jacobian = Mat(Eigen::Map<const Mat>(y.data() + d, d, d));
  res.t_jacobian = sys.generator_matrix(res.endpoint);
  return res;
}

Vec track_fiber_point(const IntegrableSystem& sys, const Vec& p, const Vec& target,
                      const Tolerances& tol, double trust_radius) {
  tol.validate();
  if (target.size() != sys.k()) fail(errc::bad_argument, "track_fiber_point: bad target size");
  if (sys.critical_value_distance(target) <= sys.critical_exclusion())
    fail(errc::near_critical_value, "target value inside the critical exclusion zone");
  if ((sys.integral_map(p) - target).norm() > trust_radius)
    fail(errc::bad_argument, "target outside the trust radius");

  Vec x = p;
  double best = std::numeric_limits<double>::infinity();
  for (int it = 0; it < tol.max_newton_iters; ++it) {
    const Vec r = sys.integral_map(x) - target;
    const double rn = r.norm();
    if (rn < tol.newton_tol) return x;
    if (rn > 10.0 * best + 1.0) break;
    best = std::min(best, rn);
    const Mat DF = sys.integral_jacobian(x);
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(DF);
    x -= cod.solve(r);
    if (!x.allFinite()) break;
  }
  fail(errc::newton_diverged, "track_fiber_point: no convergence");
}

}  // namespace torlat
