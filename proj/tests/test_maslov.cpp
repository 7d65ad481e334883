#include "torlat/maslov.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace torlat;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

oracle::FlowFn champagne_flow_fn() {
  return [](const Vec& x, const Vec& t) { return oracle::champagne_flow(x, t(0), t(1)); };
}

oracle::GeneratorsFn champagne_gens_fn() {
  return [](const Vec& x) { return oracle::champagne_generators(x); };
}

}  // namespace

TEST_CASE("symplectic structure: J, metric, reference plane") {
  auto S = SymplecticStructure::standard(2);
  const Mat J = S.complex_structure();
  CHECK((J * J + Mat::Identity(4, 4)).norm() == 0.0);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> uni(-1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    Vec u(4), v(4);
    for (int i = 0; i < 4; ++i) {
      u(i) = uni(rng);
      v(i) = uni(rng);
    }
    CHECK(S.metric(u, v) == doctest::Approx(u.dot(v)));  // compatible metric is Euclidean
    CHECK(S.omega(u, v) == doctest::Approx(-S.omega(v, u)));
    if (u.norm() > 0.1) CHECK(S.metric(u, u) > 0);
  }
  // reference plane is unitary (vertical distribution by default)
  CHECK((S.reference().adjoint() * S.reference() - CMat::Identity(2, 2)).norm() < 1e-14);
}

TEST_CASE("lagrangian frame: 1-DOF horizontal and vertical planes") {
  auto osc = oracle::oscillator_1dof();
  auto S = SymplecticStructure::standard(1);
  {
    Vec p(2);
    p << 0.0, 1.0;  // X = (p, -q) = (1, 0): horizontal plane, Z = +-1
    const CMat Z = lagrangian_frame(osc.system, p, S);
    CHECK(std::abs(Z(0, 0).imag()) < 1e-12);
    CHECK(std::abs(std::abs(Z(0, 0)) - 1.0) < 1e-12);
  }
  {
    Vec p(2);
    p << 1.0, 0.0;  // X = (0, -1): vertical plane, Z = +-i
    const CMat Z = lagrangian_frame(osc.system, p, S);
    CHECK(std::abs(Z(0, 0).real()) < 1e-12);
    CHECK(std::abs(std::abs(Z(0, 0)) - 1.0) < 1e-12);
  }
}

TEST_CASE("lagrangian frame is unitary on champagne tori") {
  auto cb = builtin_system("champagne-bottle");
  auto S = SymplecticStructure::standard(2);
  const Vec p0 = oracle::champagne_seed(0.5, 0.8);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uni(0, 5);
  for (int trial = 0; trial < 10; ++trial) {
    Vec t(2);
    t << uni(rng), uni(rng);
    const Vec x = oracle::champagne_flow(p0, t(0), t(1));
    const CMat Z = lagrangian_frame(cb.system, x, S);
    CHECK((Z.adjoint() * Z - CMat::Identity(2, 2)).norm() < 1e-8);
  }
}

TEST_CASE("lagrangian frame rejects dependent generators") {
  // synthetic system whose second field is a multiple of the first
  auto iso = builtin_system("iso-oscillator");
  auto bad_f = [&](const Vec& x) { return iso.system.integral_map(x); };
  auto bad_df = [&](const Vec& x) { return iso.system.integral_jacobian(x); };
  std::vector<VectorField> gens(2);
  gens[0].value = [&iso](const Vec& x) -> Vec { return iso.system.generator(0, x); };
  gens[1].value = [&iso](const Vec& x) -> Vec { return 2.0 * iso.system.generator(0, x); };
  SystemCatalogEntry degenerate{
      "degenerate", {}, IntegrableSystem(2, 2, bad_f, bad_df, gens), true, {}, {}, {}};
  Vec p(4);
  p << 1, 1, 0.2, -0.3;
  auto S = SymplecticStructure::standard(2);
  CHECK_THROWS_AS(lagrangian_frame(degenerate.system, p, S), Error);
}

TEST_CASE("lagrangian frame rejects a non-Lagrangian span") {
  // constant fields along q1 and p1: omega = 1 on the span
  auto f = [](const Vec& x) {
    Vec v(2);
    v << x(0), x(1);
    return v;
  };
  std::vector<VectorField> gens(2);
  gens[0].value = [](const Vec&) -> Vec {
    Vec v(4);
    v << 1, 0, 0, 0;
    return v;
  };
  gens[1].value = [](const Vec&) -> Vec {
    Vec v(4);
    v << 0, 0, 1, 0;
    return v;
  };
  IntegrableSystem sys(2, 2, f, {}, gens);
  auto S = SymplecticStructure::standard(2);
  Vec p = Vec::Ones(4);
  CHECK_THROWS_AS(lagrangian_frame(sys, p, S), Error);
  try {
    lagrangian_frame(sys, p, S);
  } catch (const Error& e) {
    CHECK(e.code() == errc::not_lagrangian);
  }
}

TEST_CASE("maslov index: degenerate cycle and 1-DOF circle") {
  auto osc = oracle::oscillator_1dof();
  auto S = SymplecticStructure::standard(1);
  Vec c(1);
  c << 0.5;
  const Vec p = osc.fiber_seed(c);
  {
    const auto r = maslov_index(osc, p, Vec::Zero(1), S);
    CHECK(r.index == 0);
  }
  {
    Vec T(1);
    T << kTwoPi;
    const auto r = maslov_index(osc, p, T, S);
    CHECK(r.index == 2);
    CHECK(r.winding_residual < 0.05);
    // unwrapped phase gain is 4 pi
    CHECK(std::abs(r.phase_trace.back().second - r.phase_trace.front().second - 2 * kTwoPi) <
          1e-3);
    // tangency-counting oracle agrees
    Vec w(1);
    w << 1.0;
    auto flow_fn = [w](const Vec& x, const Vec& t) { return oracle::oscillator_flow(w, x, t); };
    auto gens_fn = [&osc](const Vec& x) { return Mat(osc.system.generator_matrix(x)); };
    CHECK(oracle::maslov_tangency_index(flow_fn, gens_fn, p, T) == 2);
  }
}

TEST_CASE("maslov index: cycle closure is enforced") {
  auto osc = oracle::oscillator_1dof();
  auto S = SymplecticStructure::standard(1);
  Vec c(1);
  c << 0.5;
  Vec T(1);
  T << 0.8 * kTwoPi;  // not a period
  CHECK_THROWS_AS(maslov_index(osc, osc.fiber_seed(c), T, S), Error);
}

TEST_CASE("maslov vector: iso-oscillator basis 2 pi I gives (2,2)") {
  auto iso = builtin_system("iso-oscillator");
  Vec c(2);
  c << 0.5, 0.5;
  const auto B = detect_lattice_basis(iso, iso.fiber_seed(c));
  auto S = SymplecticStructure::standard(2);
  const auto mv = maslov_vector(iso, B, S);
  CHECK(mv.indices(0) == 2);
  CHECK(mv.indices(1) == 2);
  CHECK(mv.winding_residuals.maxCoeff() < 0.05);
}

TEST_CASE("maslov vector: champagne bottle, gcd 2 and the tangency oracle") {
  auto cb = builtin_system("champagne-bottle");
  const Vec p = oracle::champagne_seed(0.5, 0.8);
  const auto B = detect_lattice_basis(cb, p);
  auto S = SymplecticStructure::standard(2);
  const auto mv = maslov_vector(cb, B, S);

  CHECK(gcd64(mv.indices(0), mv.indices(1)) == 2);  // minimal Maslov number on R^4
  CHECK(mv.winding_residuals.maxCoeff() < 0.05);

  for (int i = 0; i < 2; ++i) {
    const long oracle_index = oracle::maslov_tangency_index(
        champagne_flow_fn(), champagne_gens_fn(), p, B.basis.col(i));
    CHECK(mv.indices(i) == oracle_index);
  }
}

TEST_CASE("maslov index of the champagne L-rotation cycle") {
  auto cb = builtin_system("champagne-bottle");
  // generic torus point: along the pure L-rotation the frame plane rotates
  // rigidly, so a degenerate start would stay degenerate for the oracle
  const Vec p = oracle::champagne_flow(oracle::champagne_seed(0.5, 0.8), 1.3, 0.6);
  auto S = SymplecticStructure::standard(2);
  Vec T(2);
  T << 0.0, kTwoPi;  // the 2 pi rotation generated by L
  const auto r = maslov_index(cb, p, T, S);
  const long oracle_index =
      oracle::maslov_tangency_index(champagne_flow_fn(), champagne_gens_fn(), p, T);
  CHECK(r.index == oracle_index);
  CHECK(r.index == 0);  // rigid rotations have unit complex determinant factor
  CHECK(r.winding_residual < 0.05);
}

TEST_CASE("maslov index: sampling-density and base-point robustness") {
  auto cb = builtin_system("champagne-bottle");
  const Vec p = oracle::champagne_seed(0.5, 0.8);
  const auto B = detect_lattice_basis(cb, p);
  auto S = SymplecticStructure::standard(2);

  const Vec T = B.basis.col(1);
  const auto base = maslov_index(cb, p, T, S);

  MaslovSampling dense;
  dense.initial_samples = 128;
  CHECK(maslov_index(cb, p, T, S, dense).index == base.index);

  Vec shift(2);
  shift << 0.37, 1.21;
  const Vec p2 = oracle::champagne_flow(p, shift(0), shift(1));
  CHECK(maslov_index(cb, p2, T, S).index == base.index);
}

TEST_CASE("maslov is linear on the lattice") {
  auto S = SymplecticStructure::standard(2);
  {
    auto iso = builtin_system("iso-oscillator");
    Vec c(2);
    c << 0.5, 0.5;
    const auto B = detect_lattice_basis(iso, iso.fiber_seed(c));
    const auto mv = maslov_vector(iso, B, S);
    for (int a = -2; a <= 2; ++a)
      for (int b = -2; b <= 2; ++b) {
        if (a == 0 && b == 0) continue;
        const Vec T = a * B.basis.col(0) + b * B.basis.col(1);
        const auto r = maslov_index(iso, B.anchor, T, S);
        CHECK(r.index == a * mv.indices(0) + b * mv.indices(1));
      }
  }
  {
    auto cb = builtin_system("champagne-bottle");
    const Vec p = oracle::champagne_seed(0.5, 0.8);
    const auto B = detect_lattice_basis(cb, p);
    const auto mv = maslov_vector(cb, B, S);
    for (int a = -2; a <= 2; ++a)
      for (int b = -2; b <= 2; ++b) {
        if (a == 0 && b == 0) continue;
        const Vec T = a * B.basis.col(0) + b * B.basis.col(1);
        const auto r = maslov_index(cb, B.anchor, T, S);
        CHECK(r.index == a * mv.indices(0) + b * mv.indices(1));
      }
  }
}

TEST_CASE("eigenvector identity and transport invariance around the loop") {
  auto cb = builtin_system("champagne-bottle");
  const Vec p = oracle::champagne_seed(0.8, 0.0);
  const auto B = detect_lattice_basis(cb, p);
  Vec cen(2);
  cen << 0.3, 0.0;
  const auto path = LoopPath::circle(cen, 0.5, 64);
  BasisTrajectory traj;
  const auto M = monodromy(cb, path, B, {}, &traj);

  auto S = SymplecticStructure::standard(2);
  const auto k = maslov_vector(cb, B, S);

  // k . M = k in exact integer arithmetic
  IMat row(1, 2);
  row << k.indices(0), k.indices(1);
  CHECK(imat_mul(row, M.entries) == row);

  // the maslov vector of the transported end basis is k . M
  const auto k_end = maslov_vector(cb, traj.bases.back(), S);
  const IMat expected = imat_mul(row, M.entries);
  CHECK(k_end.indices(0) == expected(0, 0));
  CHECK(k_end.indices(1) == expected(0, 1));
}
