#pragma once

#include "torlat/flow.hpp"
#include "torlat/latalg.hpp"
#include "torlat/system.hpp"
#include "torlat/types.hpp"

#include <cstddef>
#include <vector>

namespace torlat {

// An anchored fiber of the period-lattice bundle: a point on the orbit plus
// n time vectors spanning the isotropy lattice of the R^n action there.
struct LatticeBasis {
  Vec anchor;     // point on the orbit
  Vec value;      // F(anchor)
  Mat basis;      // n x n, columns T_1..T_n
  Vec residuals;  // |Phi^{T_i}(anchor) - anchor|
};

// Closed polyline in regular-value space.
struct LoopPath {
  std::vector<Vec> samples;  // c(s_0)..c(s_N), s_j = j/N, c(0) = c(1)
  double min_critical_distance = 0.0;

  static LoopPath circle(const Vec& center, double radius, int n_samples);
  LoopPath reversed() const;
  LoopPath repeated(int times) const;
  void validate(const IntegrableSystem& sys, double max_step = 0.75) const;
};

struct MonodromyMatrix {
  IMat entries;
  double pre_round_residual = 0;
  LatticeBasis basis_ref;  // start basis (row convention: B_end = B_start * M)
};

struct BasisTrajectory {
  std::vector<double> s;
  std::vector<LatticeBasis> bases;
  std::vector<std::size_t> sample_nodes;  // node index of each original path sample
};

// Lagrange-Gauss (n = 2) or LLL (n > 2) reduction, then the deterministic
// orientation convention: det > 0 and first nonzero component of T_1 > 0.
Mat reduce_basis(Mat basis);
double lattice_gap(const Mat& basis);  // shortest column after reduction

// Gauss-Newton polish of a near-return time vector: zeros of
// G(T) = Phi^T(p) - p with Jacobian columns X_i(Phi^T(p)).
Vec refine_lattice_vector(const SystemCatalogEntry& entry, const Vec& anchor, Vec t,
                          const Tolerances& tol = {});

struct DetectOptions {
  std::vector<Vec> hints;
  bool use_analytic = true;   // seed from the catalog's analytic lattice if present
  bool allow_scan = true;
  double t_max = 25.0;        // near-return scan box [0, t_max]^n
  double grid_step = 0.25;
  double near_return_threshold = 1.0;
  int max_candidates = 64;
};

// Near-return minima of |Phi^T(p) - p| over the scan grid, coarsest first.
std::vector<Vec> near_return_scan(const SystemCatalogEntry& entry, const Vec& p,
                                  const DetectOptions& opt, const Tolerances& tol = {});

LatticeBasis detect_lattice_basis(const SystemCatalogEntry& entry, const Vec& p,
                                  const DetectOptions& opt = {}, const Tolerances& tol = {});

// Builds a LatticeBasis from explicit column vectors (polished, residuals
// recomputed, no reduction).
LatticeBasis make_lattice_basis(const SystemCatalogEntry& entry, const Vec& anchor, Mat basis,
                                const Tolerances& tol = {});

// Predictor-corrector transport of an anchored basis along the path; steps
// are bisected whenever a corrected vector moves by more than 0.4x the local
// lattice gap.
BasisTrajectory continue_basis(const SystemCatalogEntry& entry, const LoopPath& path,
                               const LatticeBasis& start, const Tolerances& tol = {});

MonodromyMatrix monodromy_from_trajectory(const BasisTrajectory& traj);
MonodromyMatrix monodromy(const SystemCatalogEntry& entry, const LoopPath& path,
                          const LatticeBasis& start, const Tolerances& tol = {},
                          BasisTrajectory* out_traj = nullptr);

}  // namespace torlat
