#pragma once

#include "torlat/types.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace torlat {

using MapFn = std::function<Vec(const Vec&)>;
using JacFn = std::function<Mat(const Vec&)>;
using DomainFn = std::function<bool(const Vec&)>;

// Central-difference Jacobian with step 1e-6*(1+|p|), fallback for user
// systems that do not supply analytic Jacobians.
Mat fd_jacobian(const MapFn& f, const Vec& p);

struct VectorField {
  MapFn value;
  JacFn jacobian;  // empty -> finite-difference fallback
};

// An integral map F : R^{k+n} -> R^k (a submersion on the regular domain)
// together with n commuting generator fields tangent to the fibers of F.
// Immutable after construction; evaluation is pure and thread-safe.
class IntegrableSystem {
 public:
  IntegrableSystem(int k, int n, MapFn integral_map, JacFn integral_jacobian,
                   std::vector<VectorField> generators, DomainFn regular = {},
                   std::vector<Vec> critical_values = {}, double critical_exclusion = 1e-3);

  int k() const { return k_; }
  int n() const { return n_; }
  int ambient_dim() const { return k_ + n_; }

  Vec integral_map(const Vec& p) const;
  Mat integral_jacobian(const Vec& p) const;  // k x (k+n)

  Vec generator(int i, const Vec& p) const;
  Mat generator_jacobian(int i, const Vec& p) const;
  Mat generator_matrix(const Vec& p) const;  // (k+n) x n, columns X_i(p)

  // sum_i t_i X_i and its Jacobian; the field integrated by flow().
  Vec combined_field(const Vec& t, const Vec& p) const;
  Mat combined_jacobian(const Vec& t, const Vec& p) const;

  bool in_regular_domain(const Vec& p) const;
  double critical_value_distance(const Vec& value) const;  // +inf when no critical values
  double critical_exclusion() const { return critical_exclusion_; }
  const std::vector<Vec>& critical_values() const { return critical_values_; }

 private:
  int k_, n_;
  MapFn f_;
  JacFn df_;
  std::vector<VectorField> generators_;
  DomainFn regular_;
  std::vector<Vec> critical_values_;
  double critical_exclusion_;
};

using ParamMap = std::map<std::string, std::vector<double>>;

struct SystemCatalogEntry {
  std::string name;
  ParamMap params;
  IntegrableSystem system;
  bool hamiltonian = false;
  // Closed-form lattice basis as a function of the regular value; null when
  // the system has no analytic lattice.
  std::function<Mat(const Vec&)> analytic_lattice;
  std::optional<IMat> prescribed_monodromy;
  // Analytic point on the fiber over a given regular value.
  std::function<Vec(const Vec&)> fiber_seed;
};

// Catalog: iso-oscillator, aniso-oscillator, champagne-bottle, synthetic-twist.
SystemCatalogEntry builtin_system(const std::string& name, const ParamMap& params = {});
std::vector<std::string> builtin_names();

// Sampled health checks of the system axioms near a base point: rank of DF,
// pointwise generator independence, finite-difference commutators, fiber
// tangency DF*X_i = 0.
struct SystemCheckReport {
  int samples = 0;
  double min_df_rank_ratio = 0;         // smallest/largest singular value of DF
  double min_generator_rank_ratio = 0;  // same for the generator matrix
  double max_commutator = 0;            // max |[X_i,X_j]| by central differences
  double max_tangency = 0;              // max |DF*X_i| (scaled)
  bool pass = false;
};
SystemCheckReport check_system(const SystemCatalogEntry& entry, const Vec& base_point,
                               int samples, std::uint64_t seed, double box = 0.25);

}  // namespace torlat
