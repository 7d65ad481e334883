#include "torlat/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace torlat {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Lattice-vector refinement needs flows noticeably more accurate than the
// Newton tolerance it converges to; otherwise the integrator error floor for
// long time vectors blocks convergence.
Tolerances working_tol(const Tolerances& tol) {
  Tolerances w = tol;
  w.abs_tol = std::max(std::min(tol.abs_tol, 1e-3 * tol.newton_tol), 3e-14);
  w.rel_tol = std::max(std::min(tol.rel_tol, 1e-3 * tol.newton_tol), 3e-14);
  return w;
}

int first_nonzero(const Vec& v) {
  const double thresh = 1e-12 * (1.0 + v.norm());
  for (int i = 0; i < v.size(); ++i)
    if (std::abs(v(i)) > thresh) return i;
  return -1;
}

void apply_orientation_convention(Mat& B) {
  const int n = static_cast<int>(B.cols());
  const int fz = first_nonzero(B.col(0));
  if (fz >= 0 && B(fz, 0) < 0) B.col(0) = -B.col(0);
  if (n >= 2 && B.determinant() < 0) B.col(n - 1) = -B.col(n - 1);
}

// LLL with delta = 0.99 on the columns of B (real arithmetic).
Mat lll_reduce(Mat B) {
  const int n = static_cast<int>(B.cols());
  auto gram_schmidt = [&](Mat& Q, Mat& mu) {
    Q = B;
    mu = Mat::Identity(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < i; ++j) {
        mu(i, j) = B.col(i).dot(Q.col(j)) / Q.col(j).squaredNorm();
        Q.col(i) -= mu(i, j) * Q.col(j);
      }
    }
  };
  Mat Q, mu;
  gram_schmidt(Q, mu);
  int k = 1;
  int guard = 0;
  while (k < n && ++guard < 10000) {
    for (int j = k - 1; j >= 0; --j) {
      const double m = std::round(mu(k, j));
      if (m != 0) {
        B.col(k) -= m * B.col(j);
        gram_schmidt(Q, mu);
      }
    }
    const double lhs = Q.col(k).squaredNorm();
    const double rhs = (0.99 - mu(k, k - 1) * mu(k, k - 1)) * Q.col(k - 1).squaredNorm();
    if (lhs >= rhs) {
      ++k;
    } else {
      B.col(k).swap(B.col(k - 1));
      gram_schmidt(Q, mu);
      k = std::max(k - 1, 1);
    }
  }
  return B;
}

}  // namespace

Mat reduce_basis(Mat B) {
  const int n = static_cast<int>(B.cols());
  if (n == 2) {
    Vec t1 = B.col(0), t2 = B.col(1);
    if (t2.squaredNorm() < t1.squaredNorm()) std::swap(t1, t2);
    for (int guard = 0; guard < 64; ++guard) {
      const double m = std::round(t1.dot(t2) / t1.squaredNorm());
      t2 -= m * t1;
      if (t2.squaredNorm() >= t1.squaredNorm()) break;
      std::swap(t1, t2);
    }
    B.col(0) = t1;
    B.col(1) = t2;
  } else if (n > 2) {
    B = lll_reduce(B);
    // shortest first
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return B.col(a).norm() < B.col(b).norm(); });
    Mat sorted(B.rows(), n);
    for (int i = 0; i < n; ++i) sorted.col(i) = B.col(order[i]);
    B = sorted;
  }
  apply_orientation_convention(B);
  return B;
}

double lattice_gap(const Mat& basis) {
  const Mat R = reduce_basis(basis);
  double g = std::numeric_limits<double>::infinity();
  for (int i = 0; i < R.cols(); ++i) g = std::min(g, R.col(i).norm());
  return g;
}

LoopPath LoopPath::circle(const Vec& center, double radius, int n_samples) {
  if (n_samples < 4) fail(errc::bad_loop_path, "circle needs at least 4 samples");
  LoopPath path;
  path.samples.reserve(n_samples + 1);
  for (int j = 0; j < n_samples; ++j) {
    const double th = kTwoPi * j / n_samples;
    Vec c = center;
    c(0) += radius * std::cos(th);
    c(1) += radius * std::sin(th);
    path.samples.push_back(c);
  }
  path.samples.push_back(path.samples.front());
  path.min_critical_distance = 0.0;
  return path;
}

LoopPath LoopPath::reversed() const {
  LoopPath out = *this;
  std::reverse(out.samples.begin(), out.samples.end());
  return out;
}

LoopPath LoopPath::repeated(int times) const {
  LoopPath out;
  out.min_critical_distance = min_critical_distance;
  for (int r = 0; r < times; ++r)
    for (std::size_t j = (r == 0 ? 0 : 1); j < samples.size(); ++j)
      out.samples.push_back(samples[j]);
  return out;
}

void LoopPath::validate(const IntegrableSystem& sys, double max_step) const {
  if (samples.size() < 2) fail(errc::bad_loop_path, "path needs at least 2 samples");
  if (samples.front() != samples.back()) fail(errc::bad_loop_path, "path must close exactly");
  const double excl = std::max(min_critical_distance, sys.critical_exclusion());
  for (std::size_t j = 0; j < samples.size(); ++j) {
    if (samples[j].size() != sys.k()) fail(errc::bad_loop_path, "sample dimension != k");
    if (!samples[j].allFinite()) fail(errc::bad_loop_path, "non-finite sample");
    if (sys.critical_value_distance(samples[j]) <= excl)
      fail(errc::bad_loop_path, "sample inside a critical exclusion zone");
    if (j > 0 && (samples[j] - samples[j - 1]).norm() >= max_step)
      fail(errc::bad_loop_path, "consecutive samples too far apart");
  }
}

Vec refine_lattice_vector(const SystemCatalogEntry& entry, const Vec& anchor, Vec t,
                          const Tolerances& tol) {
  const IntegrableSystem& sys = entry.system;
  const Tolerances wtol = working_tol(tol);
  const double t0_norm = t.norm();
  double drift = 0.0;
  for (int it = 0; it < tol.max_newton_iters; ++it) {
    const FlowResult fr = flow(sys, anchor, t, wtol);
    const Vec G = fr.endpoint - anchor;
    if (G.norm() < tol.newton_tol) return t;
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(fr.t_jacobian);
    const Vec dt = cod.solve(G);
    t -= dt;
    drift += dt.norm();
    if (drift > 2.0 * (1.0 + t0_norm))
      fail(errc::newton_diverged, "lattice vector refinement drifted away");
  }
  fail(errc::newton_diverged, "lattice vector refinement did not converge");
}

std::vector<Vec> near_return_scan(const SystemCatalogEntry& entry, const Vec& p,
                                  const DetectOptions& opt, const Tolerances& tol) {
  const IntegrableSystem& sys = entry.system;
  const int n = sys.n();
  const int steps = static_cast<int>(std::floor(opt.t_max / opt.grid_step));
  const int side = steps + 1;
  double total = 1;
  for (int i = 0; i < n; ++i) {
    total *= side;
    if (total > 2e6) fail(errc::bad_argument, "scan grid too large; supply hints");
  }
  const long npts = static_cast<long>(total);

  Tolerances scan_tol = tol;
  scan_tol.abs_tol = std::max(tol.abs_tol, 1e-8);
  scan_tol.rel_tol = std::max(tol.rel_tol, 1e-8);

  // odometer sweep: one short flow per grid node
  std::vector<double> d(npts);
  std::vector<int> idx(n, 0);
  std::vector<Vec> prefix(n + 1, p);  // prefix[a] = point at (idx_0..idx_{a-1}, 0..0)
  Vec step_vec = Vec::Zero(n);
  long flat = 0;
  d[flat] = 0.0;
  while (true) {
    // advance the odometer: find the deepest axis that can move
    int axis = n - 1;
    while (axis >= 0 && idx[axis] == steps) --axis;
    if (axis < 0) break;
    ++idx[axis];
    for (int a = axis + 1; a < n; ++a) idx[a] = 0;
    step_vec.setZero();
    step_vec(axis) = opt.grid_step;
    prefix[axis + 1] = flow(sys, prefix[axis + 1], step_vec, scan_tol).endpoint;
    for (int a = axis + 1; a < n; ++a) prefix[a + 1] = prefix[a];  // reset deeper axes
    flat = 0;
    for (int a = 0; a < n; ++a) flat = flat * side + idx[a];
    d[flat] = (prefix[n] - p).norm();
  }

  // local minima below the threshold, compared against all 3^n - 1 neighbors;
  // ranked by |T| so the cap keeps the short lattice vectors
  std::vector<std::pair<double, long>> minima;
  std::vector<int> coord(n), neigh(n);
  for (long f = 0; f < npts; ++f) {
    if (d[f] >= opt.near_return_threshold) continue;
    long rem = f;
    for (int a = n - 1; a >= 0; --a) {
      coord[a] = static_cast<int>(rem % side);
      rem /= side;
    }
    double tnorm2 = 0;
    for (int a = 0; a < n; ++a) {
      const double ta = coord[a] * opt.grid_step;
      tnorm2 += ta * ta;
    }
    if (tnorm2 < 2.25 * opt.grid_step * opt.grid_step) continue;  // trivial return at T = 0
    bool is_min = true;
    // enumerate neighbor offsets in {-1,0,1}^n
    const int npow = static_cast<int>(std::pow(3, n));
    for (int m = 0; m < npow && is_min; ++m) {
      int mm = m;
      bool self = true, valid = true;
      long nf = 0;
      for (int a = 0; a < n; ++a) {
        const int off = mm % 3 - 1;
        mm /= 3;
        neigh[a] = coord[a] + off;
        if (off != 0) self = false;
        if (neigh[a] < 0 || neigh[a] > steps) valid = false;
      }
      if (self || !valid) continue;
      nf = 0;
      for (int a = 0; a < n; ++a) nf = nf * side + neigh[a];
      if (d[nf] < d[f]) is_min = false;
    }
    if (is_min) minima.emplace_back(tnorm2, f);
  }
  std::sort(minima.begin(), minima.end());
  if (static_cast<int>(minima.size()) > opt.max_candidates) minima.resize(opt.max_candidates);

  std::vector<Vec> out;
  for (const auto& [tnorm2, f] : minima) {
    long rem = f;
    Vec t(n);
    for (int a = n - 1; a >= 0; --a) {
      t(a) = (rem % side) * opt.grid_step;
      rem /= side;
    }
    out.push_back(t);
  }
  return out;
}

namespace {

bool adds_rank(const std::vector<Vec>& basis, const Vec& t) {
  if (basis.empty()) return t.norm() > 0;
  Mat B(t.size(), basis.size());
  for (std::size_t i = 0; i < basis.size(); ++i) B.col(i) = basis[i];
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(B);
  const Vec res = t - B * cod.solve(t);
  return res.norm() > 1e-7 * (1.0 + t.norm());
}

void dedupe(std::vector<Vec>& v) {
  std::vector<Vec> out;
  for (const Vec& t : v) {
    bool dup = false;
    for (const Vec& u : out)
      if ((t - u).norm() < 1e-6 * (1.0 + t.norm())) dup = true;
    if (!dup) out.push_back(t);
  }
  v = std::move(out);
}

}  // namespace

LatticeBasis detect_lattice_basis(const SystemCatalogEntry& entry, const Vec& p,
                                  const DetectOptions& opt, const Tolerances& tol) {
  const IntegrableSystem& sys = entry.system;
  const int n = sys.n();
  if (!sys.in_regular_domain(p)) fail(errc::bad_argument, "anchor not in the regular domain");

  std::vector<Vec> cands;
  auto polish_into = [&](const Vec& seed) {
    try {
      Vec t = refine_lattice_vector(entry, p, seed, tol);
      if (t.norm() > 1e-6) cands.push_back(t);
    } catch (const Error&) {
      // dropped candidate; the sieve works with whatever converged
    }
  };

  for (const Vec& hint : opt.hints) polish_into(hint);
  if (opt.use_analytic && entry.analytic_lattice) {
    const Mat B = entry.analytic_lattice(sys.integral_map(p));
    for (int i = 0; i < B.cols(); ++i) polish_into(B.col(i));
  }
  dedupe(cands);

  auto count_rank = [&]() {
    std::vector<Vec> picked;
    for (const Vec& t : cands)
      if (adds_rank(picked, t)) picked.push_back(t);
    return static_cast<int>(picked.size());
  };

  bool scanned = false;
  if (count_rank() < n) {
    if (!opt.allow_scan)
      fail(errc::no_return_found, "hints span less than the full lattice and scanning is off");
    scanned = true;
    for (const Vec& t : near_return_scan(entry, p, opt, tol)) polish_into(t);
    dedupe(cands);
  }

  std::sort(cands.begin(), cands.end(),
            [](const Vec& a, const Vec& b) { return a.norm() < b.norm(); });
  std::vector<Vec> picked;
  for (const Vec& t : cands)
    if (static_cast<int>(picked.size()) < n && adds_rank(picked, t)) picked.push_back(t);
  if (static_cast<int>(picked.size()) < n) {
    if (scanned)
      fail(errc::no_return_found,
           "scan found fewer than n independent return vectors; enlarge t_max");
    fail(errc::degenerate_candidates, "candidates do not span the lattice");
  }

  Mat B(n, n);
  for (int i = 0; i < n; ++i) B.col(i) = picked[i];

  // sieve: every candidate must be an integer combination; otherwise the
  // fractional part is a shorter lattice vector and the basis is rebuilt
  for (int refit = 0; refit < 64; ++refit) {
    bool changed = false;
    for (const Vec& t : cands) {
      const Vec x = B.fullPivLu().solve(t);
      Vec frac = x;
      for (int i = 0; i < n; ++i) frac(i) -= std::round(x(i));
      const Vec r = B * frac;
      if (r.norm() > std::max(1e-7, 1e-6 * t.norm())) {
        try {
          Vec v = refine_lattice_vector(entry, p, Vec(t - B * (x - frac)), tol);
          if (v.norm() < 1e-6) continue;
          cands.push_back(v);
        } catch (const Error&) {
          continue;
        }
        std::sort(cands.begin(), cands.end(),
                  [](const Vec& a, const Vec& b) { return a.norm() < b.norm(); });
        dedupe(cands);
        picked.clear();
        for (const Vec& u : cands)
          if (static_cast<int>(picked.size()) < n && adds_rank(picked, u)) picked.push_back(u);
        if (static_cast<int>(picked.size()) < n)
          fail(errc::degenerate_candidates, "lattice refinement degenerated");
        for (int i = 0; i < n; ++i) B.col(i) = picked[i];
        changed = true;
        break;
      }
    }
    if (!changed) break;
  }

  B = reduce_basis(B);
  // final polish of the reduced representatives
  for (int i = 0; i < n; ++i) B.col(i) = refine_lattice_vector(entry, p, B.col(i), tol);

  LatticeBasis out;
  out.anchor = p;
  out.value = sys.integral_map(p);
  out.basis = B;
  out.residuals = Vec(n);
  const Tolerances wtol = working_tol(tol);
  for (int i = 0; i < n; ++i)
    out.residuals(i) = (flow(sys, p, B.col(i), wtol).endpoint - p).norm();
  const double scale = std::pow(B.colwise().norm().maxCoeff(), n);
  if (std::abs(B.determinant()) < 1e-8 * scale)
    fail(errc::degenerate_candidates, "detected basis is numerically singular");
  return out;
}

LatticeBasis make_lattice_basis(const SystemCatalogEntry& entry, const Vec& anchor, Mat basis,
                                const Tolerances& tol) {
  const IntegrableSystem& sys = entry.system;
  LatticeBasis out;
  out.anchor = anchor;
  out.value = sys.integral_map(anchor);
  for (int i = 0; i < basis.cols(); ++i)
    basis.col(i) = refine_lattice_vector(entry, anchor, basis.col(i), tol);
  out.basis = basis;
  out.residuals = Vec(basis.cols());
  const Tolerances wtol = working_tol(tol);
  for (int i = 0; i < basis.cols(); ++i)
    out.residuals(i) = (flow(sys, anchor, basis.col(i), wtol).endpoint - anchor).norm();
  return out;
}

namespace {

struct ContinuationState {
  BasisTrajectory traj;
  LatticeBasis cur;
};

// One predictor-corrector step from the current basis to the fiber over
// c_to; recursive bisection when a corrected vector moves too far.
void advance_segment(const SystemCatalogEntry& entry, ContinuationState& st, const Vec& c_from,
                     const Vec& c_to, double s_from, double s_to, const Tolerances& tol,
                     int depth) {
  const IntegrableSystem& sys = entry.system;
  const int n = sys.n();
  auto split = [&]() {
    if (depth >= 12)
      fail(errc::step_bisection_exhausted,
           "continuation bisection exhausted near s = " + std::to_string(s_from));
    const Vec mid = 0.5 * (c_from + c_to);
    if (sys.critical_value_distance(mid) <= sys.critical_exclusion())
      fail(errc::near_critical_value, "refined path touches a critical exclusion zone");
    advance_segment(entry, st, c_from, mid, s_from, 0.5 * (s_from + s_to), tol, depth + 1);
    advance_segment(entry, st, mid, c_to, 0.5 * (s_from + s_to), s_to, tol, depth + 1);
  };

  const double gap = lattice_gap(st.cur.basis);
  LatticeBasis next;
  try {
    next.anchor = track_fiber_point(sys, st.cur.anchor, c_to, tol);
    next.value = sys.integral_map(next.anchor);
    next.basis = Mat(n, n);
    next.residuals = Vec(n);
    for (int i = 0; i < n; ++i) {
      const Vec ti = refine_lattice_vector(entry, next.anchor, st.cur.basis.col(i), tol);
      if ((ti - st.cur.basis.col(i)).norm() > 0.4 * gap) {
        split();
        return;
      }
      next.basis.col(i) = ti;
      next.residuals(i) =
          (flow(sys, next.anchor, ti, working_tol(tol)).endpoint - next.anchor).norm();
    }
  } catch (const Error& e) {
    if (e.code() == errc::newton_diverged || e.code() == errc::left_regular_domain) {
      split();
      return;
    }
    throw;
  }
  if (next.basis.determinant() * st.cur.basis.determinant() <= 0) {
    split();
    return;
  }
  st.cur = next;
  st.traj.s.push_back(s_to);
  st.traj.bases.push_back(next);
}

}  // namespace

BasisTrajectory continue_basis(const SystemCatalogEntry& entry, const LoopPath& path,
                               const LatticeBasis& start, const Tolerances& tol) {
  const IntegrableSystem& sys = entry.system;
  path.validate(sys);
  if ((start.value - path.samples.front()).norm() > 1e-6 * (1.0 + start.value.norm()))
    fail(errc::bad_argument, "start basis is not anchored over the first path sample");

  ContinuationState st;
  st.cur = start;
  st.traj.s.push_back(0.0);
  st.traj.bases.push_back(start);
  st.traj.sample_nodes.push_back(0);

  const std::size_t N = path.samples.size() - 1;
  for (std::size_t j = 1; j <= N; ++j) {
    const double s_from = static_cast<double>(j - 1) / N;
    const double s_to = static_cast<double>(j) / N;
    advance_segment(entry, st, path.samples[j - 1], path.samples[j], s_from, s_to, tol, 0);
    st.traj.sample_nodes.push_back(st.traj.bases.size() - 1);
  }
  return st.traj;
}

MonodromyMatrix monodromy_from_trajectory(const BasisTrajectory& traj) {
  if (traj.bases.size() < 2) fail(errc::bad_argument, "trajectory too short");
  const Mat& B0 = traj.bases.front().basis;
  const Mat& B1 = traj.bases.back().basis;
  const Mat Mreal = B0.fullPivLu().solve(B1);
  const int n = static_cast<int>(B0.cols());

  MonodromyMatrix out;
  out.entries = IMat(n, n);
  out.pre_round_residual = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double r = std::round(Mreal(i, j));
      out.pre_round_residual = std::max(out.pre_round_residual, std::abs(Mreal(i, j) - r));
      out.entries(i, j) = static_cast<std::int64_t>(r);
    }
  if (out.pre_round_residual >= 0.01)
    fail(errc::non_integer_monodromy,
         "pre-round residual " + std::to_string(out.pre_round_residual));
  const Mat Md = out.entries.cast<double>();
  if ((B0 * Md - B1).norm() > 1e-6 * B1.norm())
    fail(errc::non_integer_monodromy, "rounded matrix does not map start basis to end basis");
  if (int_det(out.entries) != 1) fail(errc::non_unimodular, "monodromy determinant is not +1");
  out.basis_ref = traj.bases.front();
  return out;
}

MonodromyMatrix monodromy(const SystemCatalogEntry& entry, const LoopPath& path,
                          const LatticeBasis& start, const Tolerances& tol,
                          BasisTrajectory* out_traj) {
  BasisTrajectory traj = continue_basis(entry, path, start, tol);
  MonodromyMatrix M = monodromy_from_trajectory(traj);
  if (out_traj) *out_traj = std::move(traj);
  return M;
}

}  // namespace torlat
