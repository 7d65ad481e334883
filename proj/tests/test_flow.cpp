#include "torlat/flow.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace torlat;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

Vec champagne_point() {
  Vec p(4);
  p << 1.09284, 0.0, 0.0, 0.732035;  // on the (0.5, 0.8) fiber
  return p;
}

}  // namespace

TEST_CASE("flow at t = 0 is the exact identity") {
  auto cb = builtin_system("champagne-bottle");
  const Vec p = champagne_point();
  const FlowResult fr = flow(cb.system, p, Vec::Zero(2), {}, true);
  CHECK(fr.endpoint == p);
  REQUIRE(fr.jacobian.has_value());
  CHECK(*fr.jacobian == Mat::Identity(4, 4));
  CHECK(fr.est_error == 0.0);
}

TEST_CASE("iso-oscillator: 2 pi rotation returns") {
  auto iso = builtin_system("iso-oscillator");
  Vec p(4);
  p << 1, 0.5, 0, 0;
  Vec t(2);
  t << kTwoPi, 0;
  const FlowResult fr = flow(iso.system, p, t);
  CHECK((fr.endpoint - p).norm() < 1e-9);
}

TEST_CASE("group law: flow(flow(p,a),b) = flow(p,a+b)") {
  auto cb = builtin_system("champagne-bottle");
  const Vec p = champagne_point();
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Vec a(2), b(2);
    a << uni(rng), uni(rng);
    b << uni(rng), uni(rng);
    const Vec via = flow(cb.system, flow(cb.system, p, a).endpoint, b).endpoint;
    const Vec direct = flow(cb.system, p, Vec(a + b)).endpoint;
    CHECK((via - direct).norm() < 1e-8);
  }
}

TEST_CASE("composed flow is order-independent") {
  auto cb = builtin_system("champagne-bottle");
  Tolerances tol;
  const Vec p = champagne_point();
  Vec ta(2), tb(2);
  ta << 0.9, 0.0;
  tb << 0.0, 1.7;
  const Vec ab = flow(cb.system, flow(cb.system, p, ta, tol).endpoint, tb, tol).endpoint;
  const Vec ba = flow(cb.system, flow(cb.system, p, tb, tol).endpoint, ta, tol).endpoint;
  CHECK((ab - ba).norm() < 10 * tol.abs_tol + 1e-12);
}

TEST_CASE("integral map is invariant along flows") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  {
    auto cb = builtin_system("champagne-bottle");
    const Vec p = champagne_point();
    const Vec f0 = cb.system.integral_map(p);
    for (int trial = 0; trial < 5; ++trial) {
      Vec t(2);
      t << 7.0 * uni(rng), 7.0 * uni(rng);
      const Vec f1 = cb.system.integral_map(flow(cb.system, p, t).endpoint);
      CHECK((f1 - f0).norm() < 1e-7);
    }
  }
  {
    auto tw = builtin_system("synthetic-twist", {{"m", {2.0}}});
    Vec c(2);
    c << 1.6, 1.2;
    const Vec p = tw.fiber_seed(c);
    const Vec f0 = tw.system.integral_map(p);
    for (int trial = 0; trial < 5; ++trial) {
      Vec t(2);
      t << 7.0 * uni(rng), 7.0 * uni(rng);
      const Vec f1 = tw.system.integral_map(flow(tw.system, p, t).endpoint);
      CHECK((f1 - f0).norm() < 1e-7);
    }
  }
}

TEST_CASE("variational jacobian matches central finite differences") {
  struct Case {
    SystemCatalogEntry entry;
    Vec p;
    Vec t;
  };
  std::vector<Case> cases;
  {
    auto cb = builtin_system("champagne-bottle");
    Vec t(2);
    t << 0.8, 1.3;
    cases.push_back({cb, champagne_point(), t});
  }
  {
    auto iso = builtin_system("iso-oscillator");
    Vec p(4);
    p << 0.9, 0.4, 0.2, -0.3;
    Vec t(2);
    t << 1.1, -0.7;
    cases.push_back({iso, p, t});
  }
  {
    auto tw = builtin_system("synthetic-twist", {{"m", {2.0}}});
    Vec c(2);
    c << 1.7, 1.4;  // clear of the branch cut
    Vec t(2);
    t << 0.9, 1.2;
    cases.push_back({tw, tw.fiber_seed(c), t});
  }
  for (auto& [entry, p, t] : cases) {
    INFO("system ", entry.name);
    const FlowResult fr = flow(entry.system, p, t, {}, true);
    REQUIRE(fr.jacobian.has_value());
    const int d = entry.system.ambient_dim();
    Mat fd(d, d);
    for (int j = 0; j < d; ++j) {
      const double h = 1e-5 * (1.0 + std::abs(p(j)));
      Vec pp = p, pm = p;
      pp(j) += h;
      pm(j) -= h;
      fd.col(j) =
          (flow(entry.system, pp, t).endpoint - flow(entry.system, pm, t).endpoint) / (2 * h);
    }
    CHECK((*fr.jacobian - fd).norm() / fr.jacobian->norm() < 1e-5);
  }
}

TEST_CASE("t_jacobian columns are the generators at the endpoint") {
  auto cb = builtin_system("champagne-bottle");
  const Vec p = champagne_point();
  Vec t(2);
  t << 0.6, 0.9;
  const FlowResult fr = flow(cb.system, p, t);
  CHECK((fr.t_jacobian - cb.system.generator_matrix(fr.endpoint)).norm() < 1e-12);
}

TEST_CASE("est_error dominates the defect under 10x tolerance tightening") {
  auto cb = builtin_system("champagne-bottle");
  const Vec p = champagne_point();
  Vec t(2);
  t << 3.0, 2.0;
  Tolerances loose;
  loose.abs_tol = loose.rel_tol = 1e-8;
  Tolerances tight;
  tight.abs_tol = tight.rel_tol = 1e-9;
  const FlowResult a = flow(cb.system, p, t, loose);
  const FlowResult b = flow(cb.system, p, t, tight);
  const double defect = (a.endpoint - b.endpoint).norm();
  CHECK(a.est_error >= defect);
}

TEST_CASE("flow refuses to start outside the regular domain") {
  auto iso = builtin_system("iso-oscillator");
  Vec p(4);
  p << 1, 0, 0, 0;  // z2 = 0: DF has rank 1
  Vec t(2);
  t << 1, 0;
  CHECK_THROWS_AS(flow(iso.system, p, t), Error);
  try {
    flow(iso.system, p, t);
  } catch (const Error& e) {
    CHECK(e.code() == errc::left_regular_domain);
  }
}

TEST_CASE("track_fiber_point: fixed point, contract check, critical exclusion") {
  auto iso = builtin_system("iso-oscillator");
  {
    Vec p(4);
    p << 1, 0.5, 0, 0;
    const Vec target = iso.system.integral_map(p);
    CHECK(track_fiber_point(iso.system, p, target) == p);
  }
  {
    Vec p(4);
    p << 1, 0, 0, 0;  // degenerate second circle; minimal-norm GN still converges
    Vec target(2);
    target << 0.5 + 1e-3, 0.0;
    const Vec q = track_fiber_point(iso.system, p, target);
    CHECK((iso.system.integral_map(q) - target).norm() < 1e-10);
  }
  {
    auto cb = builtin_system("champagne-bottle");
    Vec p = champagne_point();
    Vec target(2);
    target << 5e-4, 0.0;  // inside the exclusion ball around (0,0)
    CHECK_THROWS_AS(track_fiber_point(cb.system, p, target), Error);
    try {
      track_fiber_point(cb.system, p, target);
    } catch (const Error& e) {
      CHECK(e.code() == errc::near_critical_value);
    }
  }
  {
    auto cb = builtin_system("champagne-bottle");
    Vec target(2);
    target << 0.52, 0.81;
    const Vec q = track_fiber_point(cb.system, champagne_point(), target);
    CHECK((cb.system.integral_map(q) - target).norm() < 1e-9);
  }
}

TEST_CASE("flows agree with the closed-form oscillator solution") {
  auto an = builtin_system("aniso-oscillator", {{"omega", {1.0, 2.0}}});
  Vec w(2);
  w << 1.0, 2.0;
  Vec p(4);
  p << 0.7, 0.4, 0.2, -0.5;
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> uni(-3.0, 3.0);
  for (int trial = 0; trial < 8; ++trial) {
    Vec t(2);
    t << uni(rng), uni(rng);
    const Vec numeric = flow(an.system, p, t).endpoint;
    const Vec exact = oracle::oscillator_flow(w, p, t);
    CHECK((numeric - exact).norm() < 1e-9);
  }
}
