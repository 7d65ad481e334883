#include "torlat/verify.hpp"

#include "torlat/flow.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace torlat {

FreeActionReport free_circle_action(const SystemCatalogEntry& entry, const LatticeBasis& basis,
                                    const CircleActionSection& section, const Tolerances& tol,
                                    int points_per_fiber, std::uint64_t seed,
                                    double closure_tol) {
  const IntegrableSystem& sys = entry.system;
  const int n = sys.n();
  if (section.vector.size() != n) fail(errc::bad_argument, "section dimension mismatch");
  if (section.vector.isZero()) fail(errc::zero_section, "section vanishes");
  std::int64_t g = 0;
  for (int i = 0; i < n; ++i) g = gcd64(g, section.vector(i));
  if (!section.primitive || g != 1)
    fail(errc::not_primitive, "section must be primitive (gcd of entries 1)");

  const Vec t_sigma = basis.basis * section.vector.cast<double>();

  FreeActionReport rep;
  rep.min_freeness_separation = std::numeric_limits<double>::infinity();
  for (int r = 2; r <= 5; ++r)
    for (int q = 1; q < r; ++q)
      if (gcd64(q, r) == 1) rep.fractions_tested.emplace_back(q, r);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int s = 0; s < std::max(points_per_fiber, 1); ++s) {
    Vec u(n);
    for (int i = 0; i < n; ++i) u(i) = uni(rng);
    const Vec p = s == 0 ? basis.anchor : flow(sys, basis.anchor, Vec(basis.basis * u), tol).endpoint;
    ++rep.points;

    const double closure = (flow(sys, p, t_sigma, tol).endpoint - p).norm();
    rep.max_closure_residual = std::max(rep.max_closure_residual, closure);
    if (closure > closure_tol)
      fail(errc::closure_failed, "circle action does not close: residual " +
                                     std::to_string(closure));

    for (const auto& [q, r] : rep.fractions_tested) {
      const Vec frac_t = (static_cast<double>(q) / r) * t_sigma;
      const double sep = (flow(sys, p, frac_t, tol).endpoint - p).norm();
      rep.min_freeness_separation = std::min(rep.min_freeness_separation, sep);
      if (sep <= 100.0 * closure_tol)
        fail(errc::not_free, "fraction " + std::to_string(q) + "/" + std::to_string(r) +
                                 " returns within the margin");
    }
  }
  rep.pass = true;
  return rep;
}

MappingTorusReport mapping_torus_check(const MonodromyMatrix& M, const BasisTrajectory& traj,
                                       int samples, std::uint64_t seed) {
  if (traj.bases.size() < 2) fail(errc::bad_argument, "trajectory too short");
  const Mat& B0 = traj.bases.front().basis;
  const Mat& B1 = traj.bases.back().basis;
  const int n = static_cast<int>(B0.cols());
  const Mat Minv = unimodular_inverse(M.entries).cast<double>();
  const Mat Md = M.entries.cast<double>();
  const auto B0lu = B0.fullPivLu();

  auto frac = [](double x) { return x - std::floor(x); };
  auto circle_dist = [&](double a, double b) {
    const double d = frac(a - b);
    return std::min(d, 1.0 - d);
  };

  MappingTorusReport rep;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-2.0, 2.0);
  for (int s = 0; s < samples; ++s) {
    Vec t(n);
    do {
      for (int i = 0; i < n; ++i) t(i) = uni(rng);
    } while (t.norm() < 0.3);
    ++rep.samples;

    // boundary identification up to a lattice translation
    const Vec lhs = B0 * t;
    const Vec rhs = B1 * (Minv * t);
    Vec diff = lhs - rhs;
    const Vec z = B0lu.solve(diff);
    for (int i = 0; i < n; ++i) diff -= std::round(z(i)) * B0.col(i);
    const double resid = diff.norm() / lhs.norm();
    rep.max_identification_residual = std::max(rep.max_identification_residual, resid);
    if (resid >= 1e-6)
      fail(errc::identification_mismatch,
           "mapping-torus identification residual " + std::to_string(resid));

    // gluing commutes with reduction mod Z^n
    const Vec a = Md * t;
    Vec tf(n);
    for (int i = 0; i < n; ++i) tf(i) = frac(t(i));
    const Vec b = Md * tf;
    for (int i = 0; i < n; ++i)
      rep.max_torus_commutation_residual =
          std::max(rep.max_torus_commutation_residual, circle_dist(a(i), b(i)));
  }
  if (rep.max_torus_commutation_residual >= 1e-9)
    fail(errc::identification_mismatch, "torus gluing does not commute with reduction");
  rep.pass = true;
  return rep;
}

}  // namespace torlat
