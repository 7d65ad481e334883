#pragma once

#include "torlat/latalg.hpp"
#include "torlat/lattice.hpp"
#include "torlat/types.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace torlat {

// Integer cycle functionals rho = (rho_1,...,rho_l) expressed on a fixed
// fiber basis (rows act on lattice coordinates in that basis).
struct RhoFunctional {
  IMat rows;  // l x n
  LatticeBasis basis_ref;
};

struct FreeActionReport {
  int points = 0;
  double max_closure_residual = 0;
  double min_freeness_separation = 0;
  std::vector<std::pair<int, int>> fractions_tested;  // (q, r) in lowest terms
  bool pass = false;
};

// Materializes the circle action generated by T_sigma = basis * section and
// verifies closure Phi^{T_sigma}(p) = p within closure_tol plus freeness: no
// proper fraction (q/r) T_sigma with 2 <= r <= 5 returns, with margin
// 100 x closure_tol, at sample points spread over the fiber.
FreeActionReport free_circle_action(const SystemCatalogEntry& entry, const LatticeBasis& basis,
                                    const CircleActionSection& section, const Tolerances& tol = {},
                                    int points_per_fiber = 10, std::uint64_t seed = 0,
                                    double closure_tol = 1e-8);

struct MappingTorusReport {
  int samples = 0;
  double max_identification_residual = 0;  // lattice-coset mismatch, relative
  double max_torus_commutation_residual = 0;
  bool pass = false;
};

// Checks the boundary identification of the mapping-torus model against the
// continued bases: B(0) t and B(1) M^{-1} t lie in the same lattice coset,
// and the induced torus gluing commutes with reduction mod Z^n.
MappingTorusReport mapping_torus_check(const MonodromyMatrix& M, const BasisTrajectory& traj,
                                       int samples, std::uint64_t seed = 0);

}  // namespace torlat
