#include "torlat/system.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace torlat {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double rank_ratio(const Mat& A) {
  Eigen::SelfAdjointEigenSolver<Mat> es(A * A.transpose());
  const Vec ev = es.eigenvalues();
  double lo = std::max(ev.minCoeff(), 0.0);
  double hi = std::max(ev.maxCoeff(), 0.0);
  if (hi <= 0) return 0.0;
  return std::sqrt(lo / hi);
}

}  // namespace

Mat fd_jacobian(const MapFn& f, const Vec& p) {
  const double h = 1e-6 * (1.0 + p.norm());
  const int m = static_cast<int>(p.size());
  Vec fp = f(p);
  Mat J(fp.size(), m);
  Vec q = p;
  for (int j = 0; j < m; ++j) {
    q(j) = p(j) + h;
    Vec fplus = f(q);
    q(j) = p(j) - h;
    Vec fminus = f(q);
    q(j) = p(j);
    J.col(j) = (fplus - fminus) / (2.0 * h);
  }
  return J;
}

IntegrableSystem::IntegrableSystem(int k, int n, MapFn integral_map, JacFn integral_jacobian,
                                   std::vector<VectorField> generators, DomainFn regular,
                                   std::vector<Vec> critical_values, double critical_exclusion)
    : k_(k),
      n_(n),
      f_(std::move(integral_map)),
      df_(std::move(integral_jacobian)),
      generators_(std::move(generators)),
      regular_(std::move(regular)),
      critical_values_(std::move(critical_values)),
      critical_exclusion_(critical_exclusion) {
  if (k_ < 0 || n_ < 1) fail(errc::bad_argument, "system needs k >= 0, n >= 1");
  if (static_cast<int>(generators_.size()) != n_)
    fail(errc::bad_argument, "expected n generator fields");
  if (!f_) fail(errc::bad_argument, "integral map required");
}

Vec IntegrableSystem::integral_map(const Vec& p) const { return f_(p); }

Mat IntegrableSystem::integral_jacobian(const Vec& p) const {
  if (df_) return df_(p);
  return fd_jacobian(f_, p);
}

Vec IntegrableSystem::generator(int i, const Vec& p) const { return generators_[i].value(p); }

Mat IntegrableSystem::generator_jacobian(int i, const Vec& p) const {
  if (generators_[i].jacobian) return generators_[i].jacobian(p);
  return fd_jacobian(generators_[i].value, p);
}

Mat IntegrableSystem::generator_matrix(const Vec& p) const {
  Mat G(ambient_dim(), n_);
  for (int i = 0; i < n_; ++i) G.col(i) = generators_[i].value(p);
  return G;
}

Vec IntegrableSystem::combined_field(const Vec& t, const Vec& p) const {
  Vec v = Vec::Zero(ambient_dim());
  for (int i = 0; i < n_; ++i)
    if (t(i) != 0.0) v += t(i) * generators_[i].value(p);
  return v;
}

Mat IntegrableSystem::combined_jacobian(const Vec& t, const Vec& p) const {
  Mat J = Mat::Zero(ambient_dim(), ambient_dim());
  for (int i = 0; i < n_; ++i)
    if (t(i) != 0.0) J += t(i) * generator_jacobian(i, p);
  return J;
}

bool IntegrableSystem::in_regular_domain(const Vec& p) const {
  if (p.size() != ambient_dim() || !p.allFinite()) return false;
  if (!critical_values_.empty() &&
      critical_value_distance(f_(p)) <= critical_exclusion_)
    return false;
  if (regular_ && !regular_(p)) return false;
  return rank_ratio(integral_jacobian(p)) > 1e-8;
}

double IntegrableSystem::critical_value_distance(const Vec& value) const {
  double d = std::numeric_limits<double>::infinity();
  for (const Vec& c : critical_values_) d = std::min(d, (value - c).norm());
  return d;
}

namespace {

void reject_unknown_params(const ParamMap& params, std::initializer_list<const char*> known) {
  for (const auto& [key, _] : params) {
    bool ok = false;
    for (const char* k : known)
      if (key == k) ok = true;
    if (!ok) fail(errc::invalid_params, "unknown parameter '" + key + "'");
  }
}

std::vector<double> param_or(const ParamMap& params, const std::string& key,
                             std::vector<double> fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

// --- decoupled oscillators -------------------------------------------------
// Coordinates (q1,...,qn, p1,...,pn); f_i = (p_i^2 + w_i^2 q_i^2)/2.

SystemCatalogEntry make_oscillator(const std::string& name, const Vec& omega) {
  const int n = static_cast<int>(omega.size());
  for (int i = 0; i < n; ++i)
    if (!(omega(i) > 0)) fail(errc::invalid_params, "oscillator frequencies must be positive");

  auto f = [omega, n](const Vec& x) {
    Vec v(n);
    for (int i = 0; i < n; ++i)
      v(i) = 0.5 * (x(n + i) * x(n + i) + omega(i) * omega(i) * x(i) * x(i));
    return v;
  };
  auto df = [omega, n](const Vec& x) {
    Mat J = Mat::Zero(n, 2 * n);
    for (int i = 0; i < n; ++i) {
      J(i, i) = omega(i) * omega(i) * x(i);
      J(i, n + i) = x(n + i);
    }
    return J;
  };
  std::vector<VectorField> gens;
  for (int i = 0; i < n; ++i) {
    const double w2 = omega(i) * omega(i);
    Mat S = Mat::Zero(2 * n, 2 * n);
    S(i, n + i) = 1.0;
    S(n + i, i) = -w2;
    gens.push_back({[S](const Vec& x) -> Vec { return S * x; },
                    [S](const Vec&) -> Mat { return S; }});
  }

  SystemCatalogEntry entry{
      name,
      {},
      IntegrableSystem(n, n, f, df, std::move(gens)),
      true,
      {},
      std::nullopt,
      {}};
  Mat lattice = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) lattice(i, i) = kTwoPi / omega(i);
  entry.analytic_lattice = [lattice](const Vec&) { return lattice; };
  entry.fiber_seed = [omega, n](const Vec& c) {
    for (int i = 0; i < n; ++i)
      if (!(c(i) > 0)) fail(errc::bad_argument, "oscillator values must be positive");
    Vec x = Vec::Zero(2 * n);
    for (int i = 0; i < n; ++i) x(i) = std::sqrt(2.0 * c(i)) / omega(i);
    return x;
  };
  return entry;
}

// --- champagne bottle ------------------------------------------------------
// Coordinates (x, y, px, py); H = (px^2+py^2)/2 + (x^2+y^2)^2 - (x^2+y^2),
// L = x py - y px.  Isolated critical value (0,0).

Vec champagne_F(const Vec& z) {
  const double x = z(0), y = z(1), px = z(2), py = z(3);
  const double u = x * x + y * y;
  Vec v(2);
  v(0) = 0.5 * (px * px + py * py) + u * u - u;
  v(1) = x * py - y * px;
  return v;
}

Mat champagne_DF(const Vec& z) {
  const double x = z(0), y = z(1), px = z(2), py = z(3);
  const double u = x * x + y * y;
  Mat J(2, 4);
  J << 2 * x * (2 * u - 1), 2 * y * (2 * u - 1), px, py,
       py, -px, -y, x;
  return J;
}

// Outer radial root of l^2/(2 r^2) + r^4 - r^2 = h; used for fiber seeds.
double champagne_radial_root(double h, double l) {
  auto g = [&](double r) { return l * l / (2 * r * r) + r * r * r * r - r * r - h; };
  // locate the effective-potential minimum by a coarse scan
  double rmin = 0.05, best = g(rmin);
  for (double r = 0.05; r <= 3.0; r += 1e-3) {
    double v = g(r);
    if (v < best) {
      best = v;
      rmin = r;
    }
  }
  if (best > 0) fail(errc::bad_argument, "value outside the image of the champagne bottle map");
  double lo = rmin, hi = 5.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (g(mid) > 0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

SystemCatalogEntry make_champagne() {
  std::vector<VectorField> gens(2);
  gens[0].value = [](const Vec& z) -> Vec {
    const double x = z(0), y = z(1), px = z(2), py = z(3);
    const double u = x * x + y * y;
    Vec v(4);
    v << px, py, -2 * x * (2 * u - 1), -2 * y * (2 * u - 1);
    return v;
  };
  gens[0].jacobian = [](const Vec& z) -> Mat {
    const double x = z(0), y = z(1);
    const double u = x * x + y * y;
    Mat J = Mat::Zero(4, 4);
    J(0, 2) = 1;
    J(1, 3) = 1;
    J(2, 0) = -2 * (2 * u - 1) - 8 * x * x;
    J(2, 1) = -8 * x * y;
    J(3, 0) = -8 * x * y;
    J(3, 1) = -2 * (2 * u - 1) - 8 * y * y;
    return J;
  };
  gens[1].value = [](const Vec& z) -> Vec {
    Vec v(4);
    v << -z(1), z(0), -z(3), z(2);
    return v;
  };
  Mat JL = Mat::Zero(4, 4);
  JL(0, 1) = -1;
  JL(1, 0) = 1;
  JL(2, 3) = -1;
  JL(3, 2) = 1;
  gens[1].jacobian = [JL](const Vec&) { return JL; };

  std::vector<Vec> crit{Vec::Zero(2)};
  SystemCatalogEntry entry{
      "champagne-bottle",
      {},
      IntegrableSystem(2, 2, champagne_F, champagne_DF, std::move(gens), {}, crit, 1e-3),
      true,
      {},
      std::nullopt,
      {}};
  entry.fiber_seed = [](const Vec& c) {
    const double h = c(0), l = c(1);
    Vec z = Vec::Zero(4);
    if (std::abs(l) > 1e-12) {
      const double r = champagne_radial_root(h, l);
      z << r, 0.0, 0.0, l / r;
    } else {
      const double r = std::sqrt(0.5);  // potential minimum, V = -1/4
      if (h < -0.25) fail(errc::bad_argument, "value below the minimum energy");
      z << r, 0.0, std::sqrt(2.0 * (h + 0.25)), 0.0;
    }
    return z;
  };
  return entry;
}

// --- synthetic twist -------------------------------------------------------
// Rotation flows on the product tori |z1|, |z2| = const in R^4.  The second
// generator mixes in a value-dependent multiple of the first rotation so that
// the period lattice over c is spanned by (2pi, 0) and (m*phi(c), 2pi), with
// phi the angle about the twist center.  The lattice is single-valued even
// though phi has an atan2 branch cut on the ray left of the center; values
// are constants of motion, so no orbit ever crosses the cut.

SystemCatalogEntry make_twist(double m_real, const Vec& center) {
  if (std::abs(m_real - std::round(m_real)) > 1e-9)
    fail(errc::invalid_params, "twist parameter m must be an integer");
  const double m = std::round(m_real);

  auto F = [](const Vec& x) {
    Vec v(2);
    v(0) = 0.5 * (x(0) * x(0) + x(2) * x(2));
    v(1) = 0.5 * (x(1) * x(1) + x(3) * x(3));
    return v;
  };
  auto DF = [](const Vec& x) {
    Mat J(2, 4);
    J << x(0), 0, x(2), 0,
         0, x(1), 0, x(3);
    return J;
  };

  Mat M1 = Mat::Zero(4, 4), M2 = Mat::Zero(4, 4);
  M1(0, 2) = 1;
  M1(2, 0) = -1;
  M2(1, 3) = 1;
  M2(3, 1) = -1;

  auto phi = [center](const Vec& c) { return std::atan2(c(1) - center(1), c(0) - center(0)); };

  std::vector<VectorField> gens(2);
  gens[0].value = [M1](const Vec& x) -> Vec { return M1 * x; };
  gens[0].jacobian = [M1](const Vec&) -> Mat { return M1; };
  gens[1].value = [=](const Vec& x) -> Vec {
    const double a = -m * phi(F(x)) / kTwoPi;
    return a * (M1 * x) + M2 * x;
  };
  gens[1].jacobian = [=](const Vec& x) -> Mat {
    const Vec c = F(x);
    const double a = -m * phi(c) / kTwoPi;
    const Vec s = c - center;
    const double rho2 = s.squaredNorm();
    Vec grad_phi_c(2);
    grad_phi_c << -s(1) / rho2, s(0) / rho2;
    const Vec grad_a = (-m / kTwoPi) * (DF(x).transpose() * grad_phi_c);
    return a * M1 + M2 + (M1 * x) * grad_a.transpose();
  };

  // Flows on fibers within the strip would evaluate the generator mixing on
  // both atan2 branches; keep them out of the regular domain.
  DomainFn off_cut = [center, F](const Vec& x) {
    const Vec c = F(x);
    return !(c(0) <= center(0) && std::abs(c(1) - center(1)) < 2e-3);
  };
  std::vector<Vec> crit{center};
  SystemCatalogEntry entry{
      "synthetic-twist",
      {},
      IntegrableSystem(2, 2, F, DF, std::move(gens), off_cut, crit, 1e-3),
      false,
      {},
      std::nullopt,
      {}};
  entry.analytic_lattice = [m, phi](const Vec& c) {
    Mat B(2, 2);
    B << kTwoPi, m * phi(c),
         0.0, kTwoPi;
    return B;
  };
  IMat mono(2, 2);
  mono << 1, static_cast<std::int64_t>(m), 0, 1;
  entry.prescribed_monodromy = mono;
  entry.fiber_seed = [](const Vec& c) {
    if (!(c(0) > 0) || !(c(1) > 0)) fail(errc::bad_argument, "twist values must be positive");
    Vec x = Vec::Zero(4);
    x(0) = std::sqrt(2.0 * c(0));
    x(1) = std::sqrt(2.0 * c(1));
    return x;
  };
  return entry;
}

}  // namespace

std::vector<std::string> builtin_names() {
  return {"iso-oscillator", "aniso-oscillator", "champagne-bottle", "synthetic-twist"};
}

SystemCatalogEntry builtin_system(const std::string& name, const ParamMap& params) {
  SystemCatalogEntry entry = [&]() {
    if (name == "iso-oscillator") {
      reject_unknown_params(params, {"omega"});
      auto w = param_or(params, "omega", {1.0});
      if (w.size() == 1) w = {w[0], w[0]};
      if (w.size() != 2 || w[0] != w[1])
        fail(errc::invalid_params, "iso-oscillator needs one frequency (or two equal ones)");
      return make_oscillator(name, Eigen::Map<const Vec>(w.data(), 2));
    }
    if (name == "aniso-oscillator") {
      reject_unknown_params(params, {"omega"});
      auto w = param_or(params, "omega", {1.0, 2.0});
      if (w.size() != 2) fail(errc::invalid_params, "aniso-oscillator needs omega = [w1, w2]");
      return make_oscillator(name, Eigen::Map<const Vec>(w.data(), 2));
    }
    if (name == "champagne-bottle") {
      reject_unknown_params(params, {});
      return make_champagne();
    }
    if (name == "synthetic-twist") {
      reject_unknown_params(params, {"m", "center"});
      auto m = param_or(params, "m", {1.0});
      auto cen = param_or(params, "center", {1.0, 1.0});
      if (m.size() != 1 || cen.size() != 2)
        fail(errc::invalid_params, "synthetic-twist needs scalar m and 2-vector center");
      return make_twist(m[0], Eigen::Map<const Vec>(cen.data(), 2));
    }
    std::ostringstream os;
    os << "'" << name << "' not in catalog (";
    for (const auto& b : builtin_names()) os << b << " ";
    os << ")";
    fail(errc::unknown_system, os.str());
  }();
  entry.params = params;
  return entry;
}

SystemCheckReport check_system(const SystemCatalogEntry& entry, const Vec& base_point,
                               int samples, std::uint64_t seed, double box) {
  const IntegrableSystem& sys = entry.system;
  const int d = sys.ambient_dim();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-box, box);

  SystemCheckReport rep;
  rep.min_df_rank_ratio = rep.min_generator_rank_ratio = std::numeric_limits<double>::infinity();
  int found = 0, attempts = 0;
  while (found < samples && attempts < 100 * samples) {
    ++attempts;
    Vec p = base_point;
    for (int j = 0; j < d; ++j) p(j) += uni(rng);
    if (!sys.in_regular_domain(p)) continue;
    ++found;

    const Mat DF = sys.integral_jacobian(p);
    const Mat G = sys.generator_matrix(p);
    rep.min_df_rank_ratio = std::min(rep.min_df_rank_ratio, rank_ratio(DF));
    rep.min_generator_rank_ratio =
        std::min(rep.min_generator_rank_ratio, rank_ratio(Mat(G.transpose())));

    for (int i = 0; i < sys.n(); ++i) {
      const Vec Xi = G.col(i);
      const double scale = 1.0 + DF.norm() * Xi.norm();
      rep.max_tangency = std::max(rep.max_tangency, (DF * Xi).norm() / scale);
    }

    // central-difference Lie brackets [X_i, X_j] = DX_j X_i - DX_i X_j
    auto dir_deriv = [&](int field, const Vec& u) {
      const double h = 1e-6 * (1.0 + p.norm()) / (1.0 + u.norm());
      return Vec(((sys.generator(field, p + h * u) - sys.generator(field, p - h * u)) / (2 * h)));
    };
    for (int i = 0; i < sys.n(); ++i)
      for (int j = i + 1; j < sys.n(); ++j) {
        const Vec bracket = dir_deriv(j, G.col(i)) - dir_deriv(i, G.col(j));
        rep.max_commutator = std::max(rep.max_commutator, bracket.norm());
      }
  }
  rep.samples = found;
  rep.pass = found == samples && rep.min_df_rank_ratio > 1e-8 &&
             rep.min_generator_rank_ratio > 1e-8 && rep.max_commutator < 1e-6 &&
             rep.max_tangency < 1e-10;
  return rep;
}

}  // namespace torlat
