#pragma once

#include "torlat/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace torlat {

// Exact integer arithmetic; every product/sum is overflow-checked and throws
// instead of wrapping.

std::int64_t gcd64(std::int64_t a, std::int64_t b);
std::int64_t checked_mul(std::int64_t a, std::int64_t b);
std::int64_t checked_add(std::int64_t a, std::int64_t b);
IMat imat_mul(const IMat& A, const IMat& B);

std::int64_t int_det(const IMat& A);
// Inverse of a matrix with det = +-1 (exact); throws NonUnimodular otherwise.
IMat unimodular_inverse(const IMat& U);

// D = U * A * V with U, V unimodular, D diagonal, d_1 | d_2 | ..., d_i >= 0.
// Deterministic: pivot = smallest nonzero |entry| of the trailing block,
// ties broken lexicographically.
struct SmithNormalForm {
  IMat U, D, V;
};
SmithNormalForm smith_normal_form(const IMat& A);

// Integer kernel basis of A (columns), saturated: the columns of the result
// generate ker(A) as a direct summand of Z^n.
IMat integer_kernel(const IMat& A);

// Kernel chain of the row functionals rho = (rho_1,...,rho_l): bases K^(i) of
// ker(rho_1..rho_i) with rank exactly n-i, plus complement generators v^(i)
// such that [K^(i) | v^(i)] is a basis of K^(i-1) (with K^(0) = Z^n).  The
// splitting determinants, expressed in K^(i-1)-coordinates, are +-1.
struct SublatticeChain {
  std::vector<IMat> kernels;            // K^(1) ... K^(l), sizes n x (n-i)
  std::vector<IVec> complements;        // v^(1) ... v^(l) in Z^n
  std::vector<std::int64_t> splitting_dets;
};
SublatticeChain kernel_chain(const IMat& rho_rows);

struct RhoInvarianceReport {
  bool pass = false;
  std::vector<int> violated_rows;
  IMat transformed;  // rows * M
};
// Checks rows * M = rows exactly (row convention: transported basis =
// start basis * M).
RhoInvarianceReport verify_rho_invariance(const IMat& rho_rows, const IMat& M);

struct CircleActionSection {
  IVec vector;
  bool primitive = false;
  bool minimal_period_checked = false;
};
// v / gcd(entries), sign-normalized so the first nonzero entry is positive.
CircleActionSection primitive_section(const IVec& v);

// Trace classification of a 2x2 integer matrix with det = 1.  For the
// unipotent classes, k = gcd of the entries of M -+ I, invariant under
// GL(2,Z) conjugation.
struct Gl2zClass {
  std::string cls;
  std::int64_t k = 0;
};
Gl2zClass gl2z_conjugacy_invariant(const IMat& M);

}  // namespace torlat
