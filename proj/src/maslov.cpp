#include "torlat/maslov.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <future>
#include <list>

namespace torlat {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

}

SymplecticStructure::SymplecticStructure(int n) : n_(n) {
  reference_ = std::complex<double>(0.0, -1.0) * CMat::Identity(n, n);  // vertical plane
}

SymplecticStructure SymplecticStructure::standard(int n) { return SymplecticStructure(n); }

double SymplecticStructure::omega(const Vec& u, const Vec& v) const {
  return u.head(n_).dot(v.tail(n_)) - u.tail(n_).dot(v.head(n_));
}

double SymplecticStructure::metric(const Vec& u, const Vec& v) const {
  Vec Ju(2 * n_);
  Ju.head(n_) = u.tail(n_);
  Ju.tail(n_) = -u.head(n_);
  return omega(Ju, v);
}

Mat SymplecticStructure::complex_structure() const {
  Mat J = Mat::Zero(2 * n_, 2 * n_);
  J.topRightCorner(n_, n_) = Mat::Identity(n_, n_);
  J.bottomLeftCorner(n_, n_) = -Mat::Identity(n_, n_);
  return J;
}

void SymplecticStructure::set_reference(CMat E) {
  if (E.rows() != n_ || E.cols() != n_) fail(errc::bad_argument, "reference plane must be n x n");
  if ((E.adjoint() * E - CMat::Identity(n_, n_)).norm() > 1e-10)
    fail(errc::not_lagrangian, "reference representative must be unitary");
  reference_ = std::move(E);
}

CMat lagrangian_frame(const IntegrableSystem& sys, const Vec& p, const SymplecticStructure& S) {
  const int n = S.dof();
  if (sys.ambient_dim() != 2 * n)
    fail(errc::bad_argument, "lagrangian_frame: system is not 2n-dimensional");
  Mat G = sys.generator_matrix(p);

  // Gram-Schmidt with the compatible metric (the Euclidean one here)
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < i; ++j) G.col(i) -= G.col(j).dot(G.col(i)) * G.col(j);
    const double norm = G.col(i).norm();
    if (norm < 1e-10 * (1.0 + sys.generator(i, p).norm()))
      fail(errc::dependent_generators, "generators are dependent at the frame point");
    G.col(i) /= norm;
  }

  CMat Z(n, n);
  for (int i = 0; i < n; ++i)
    Z.col(i) = G.col(i).head(n) - std::complex<double>(0, 1) * G.col(i).tail(n);

  const CMat gram = Z.adjoint() * Z;
  if (gram.imag().cwiseAbs().maxCoeff() > 1e-8)
    fail(errc::not_lagrangian, "generator span is not Lagrangian");
  if ((gram - CMat::Identity(n, n)).norm() > 1e-8)
    fail(errc::not_lagrangian, "frame is not unitary");
  return Z;
}

namespace {

std::complex<double> squared_det_map(const SystemCatalogEntry& entry, const Vec& x,
                                     const SymplecticStructure& S) {
  const CMat Z = lagrangian_frame(entry.system, x, S);
  const CMat W = Z * S.reference().adjoint();  // E^{-1} = E* for unitary E
  std::complex<double> det = W.determinant();
  det *= det;
  const double mag = std::abs(det);
  if (mag < 0.5) fail(errc::not_lagrangian, "degenerate frame determinant");
  return det / mag;
}

struct CycleNode {
  double s;
  Vec x;
  std::complex<double> delta;
};

}  // namespace

MaslovIndexResult maslov_index(const SystemCatalogEntry& entry, const Vec& start, const Vec& T,
                               const SymplecticStructure& S, const MaslovSampling& sampling,
                               const Tolerances& tol) {
  const IntegrableSystem& sys = entry.system;
  MaslovIndexResult res;
  if (T.norm() == 0.0) {
    res.phase_trace = {{0.0, 0.0}, {1.0, 0.0}};
    res.samples_used = 2;
    return res;  // empty winding by convention
  }

  // cycle closure: T must be a lattice vector of the orbit through start
  {
    const Vec back = flow(sys, start, T, tol).endpoint;
    if ((back - start).norm() > sampling.closure_tol * (1.0 + start.norm()))
      fail(errc::cycle_not_closed, "T is not a period of the orbit within the closure tolerance");
  }

  std::list<CycleNode> nodes;
  const int N = std::max(sampling.initial_samples, 8);
  Vec x = start;
  for (int j = 0; j <= N; ++j) {
    const double s = static_cast<double>(j) / N;
    if (j > 0) x = flow(sys, x, Vec((1.0 / N) * T), tol).endpoint;
    nodes.push_back({s, x, squared_det_map(entry, x, S)});
  }

  // adaptive refinement: keep adjacent phase increments below max_phase_step
  auto it = nodes.begin();
  std::vector<int> depth_stack;
  int guard = 0;
  while (std::next(it) != nodes.end()) {
    if (++guard > 2'000'000) fail(errc::phase_step_too_large, "refinement runaway");
    auto nx = std::next(it);
    const double dphi = std::arg(nx->delta / it->delta);
    if (std::abs(dphi) <= sampling.max_phase_step) {
      ++it;
      continue;
    }
    const double span = nx->s - it->s;
    if (span < std::ldexp(1.0, -sampling.max_depth) / N)
      fail(errc::phase_step_too_large, "phase step refinement exhausted");
    const double sm = 0.5 * (it->s + nx->s);
    const Vec xm = flow(sys, it->x, Vec((sm - it->s) * T), tol).endpoint;
    nodes.insert(nx, {sm, xm, squared_det_map(entry, xm, S)});
  }

  double phase = 0.0;
  res.phase_trace.reserve(nodes.size());
  res.phase_trace.emplace_back(0.0, 0.0);
  for (auto a = nodes.begin(); std::next(a) != nodes.end(); ++a) {
    auto b = std::next(a);
    phase += std::arg(b->delta / a->delta);
    res.phase_trace.emplace_back(b->s, phase);
  }
  res.samples_used = static_cast<int>(nodes.size());
  const double winding = phase / kTwoPi;
  res.index = std::lround(winding);
  res.winding_residual = std::abs(winding - static_cast<double>(res.index));
  if (res.winding_residual >= 0.05)
    fail(errc::winding_residual,
         "winding " + std::to_string(winding) + " is not close to an integer");
  return res;
}

MaslovVector maslov_vector(const SystemCatalogEntry& entry, const LatticeBasis& basis,
                           const SymplecticStructure& S, const MaslovSampling& sampling,
                           const Tolerances& tol) {
  const int n = static_cast<int>(basis.basis.cols());
  MaslovVector mv;
  mv.indices = IVec(n);
  mv.winding_residuals = Vec(n);
  mv.basis_ref = basis;
  mv.per_cycle.resize(n);

  std::vector<std::future<MaslovIndexResult>> jobs;
  for (int i = 0; i < n; ++i)
    jobs.push_back(std::async(std::launch::async, [&, i]() {
      return maslov_index(entry, basis.anchor, basis.basis.col(i), S, sampling, tol);
    }));
  for (int i = 0; i < n; ++i) {
    mv.per_cycle[i] = jobs[i].get();
    mv.indices(i) = mv.per_cycle[i].index;
    mv.winding_residuals(i) = mv.per_cycle[i].winding_residual;
  }
  return mv;
}

}  // namespace torlat
