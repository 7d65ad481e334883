#pragma once

#include "torlat/lattice.hpp"
#include "torlat/system.hpp"
#include "torlat/types.hpp"

#include <utility>
#include <vector>

namespace torlat {

// Standard symplectic linear algebra of R^{2n} in block coordinates
// (q_1..q_n, p_1..p_n): omega(u,v) = u_q . v_p - u_p . v_q, complex structure
// J(q,p) = (p,-q) so that g = omega(J., .) is the Euclidean metric, and the
// identification R^{2n} ~ C^n sends (a,b) to a - i b.  The reference plane
// defaults to the vertical distribution (the p-directions).
class SymplecticStructure {
 public:
  static SymplecticStructure standard(int n);

  int dof() const { return n_; }
  double omega(const Vec& u, const Vec& v) const;
  double metric(const Vec& u, const Vec& v) const;
  Mat complex_structure() const;       // 2n x 2n matrix of J
  const CMat& reference() const { return reference_; }  // unitary representative of E
  void set_reference(CMat E);

 private:
  explicit SymplecticStructure(int n);
  int n_;
  CMat reference_;
};

// Unitary matrix representing span{X_1(p),...,X_n(p)} on the Lagrangian
// Grassmannian: Gram-Schmidt of the generators, columns q-part - i p-part.
CMat lagrangian_frame(const IntegrableSystem& sys, const Vec& p, const SymplecticStructure& S);

struct MaslovSampling {
  int initial_samples = 64;
  int max_depth = 12;
  double max_phase_step = 0.7853981633974483;  // pi/4
  double closure_tol = 1e-7;
};

struct MaslovIndexResult {
  long index = 0;
  double winding_residual = 0;
  int samples_used = 0;
  std::vector<std::pair<double, double>> phase_trace;  // (s, unwrapped phase)
};

// Degree of s -> det(Z(s) E^{-1})^2 along the cycle s -> Phi^{sT}(start).
MaslovIndexResult maslov_index(const SystemCatalogEntry& entry, const Vec& start, const Vec& T,
                               const SymplecticStructure& S, const MaslovSampling& sampling = {},
                               const Tolerances& tol = {});

struct MaslovVector {
  IVec indices;
  Vec winding_residuals;
  LatticeBasis basis_ref;
  std::vector<MaslovIndexResult> per_cycle;
};

// Maslov index of each basis cycle; the resulting integer row vector is the
// cycle functional on this fiber basis.
MaslovVector maslov_vector(const SystemCatalogEntry& entry, const LatticeBasis& basis,
                           const SymplecticStructure& S, const MaslovSampling& sampling = {},
                           const Tolerances& tol = {});

}  // namespace torlat
