#include "torlat/latalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace torlat {

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_mul_overflow(a, b, &r)) fail(errc::integer_overflow, "multiplication overflow");
  return r;
}

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_add_overflow(a, b, &r)) fail(errc::integer_overflow, "addition overflow");
  return r;
}

std::int64_t gcd64(std::int64_t a, std::int64_t b) {
  a = std::abs(a);
  b = std::abs(b);
  while (b != 0) {
    std::int64_t t = a % b;
    a = b;
    b = t;
  }
  return a;
}

IMat imat_mul(const IMat& A, const IMat& B) {
  if (A.cols() != B.rows()) fail(errc::bad_argument, "imat_mul: shape mismatch");
  IMat C = IMat::Zero(A.rows(), B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < B.cols(); ++j) {
      std::int64_t s = 0;
      for (Eigen::Index k = 0; k < A.cols(); ++k)
        s = checked_add(s, checked_mul(A(i, k), B(k, j)));
      C(i, j) = s;
    }
  return C;
}

// Fraction-free Gaussian elimination (Bareiss); all divisions are exact.
std::int64_t int_det(const IMat& A) {
  if (A.rows() != A.cols()) fail(errc::bad_argument, "int_det: square matrix required");
  const Eigen::Index n = A.rows();
  if (n == 0) return 1;
  IMat M = A;
  std::int64_t sign = 1, prev = 1;
  for (Eigen::Index i = 0; i < n - 1; ++i) {
    if (M(i, i) == 0) {
      Eigen::Index piv = -1;
      for (Eigen::Index r = i + 1; r < n; ++r)
        if (M(r, i) != 0) {
          piv = r;
          break;
        }
      if (piv < 0) return 0;
      M.row(i).swap(M.row(piv));
      sign = -sign;
    }
    for (Eigen::Index r = i + 1; r < n; ++r)
      for (Eigen::Index c = i + 1; c < n; ++c) {
        const std::int64_t num =
            checked_add(checked_mul(M(i, i), M(r, c)), -checked_mul(M(r, i), M(i, c)));
        M(r, c) = num / prev;
      }
    prev = M(i, i);
  }
  return checked_mul(sign, M(n - 1, n - 1));
}

SmithNormalForm smith_normal_form(const IMat& A) {
  const Eigen::Index m = A.rows(), n = A.cols();
  SmithNormalForm s;
  s.U = IMat::Identity(m, m);
  s.V = IMat::Identity(n, n);
  s.D = A;
  IMat& D = s.D;

  auto add_row = [&](Eigen::Index dst, Eigen::Index src, std::int64_t q) {
    for (Eigen::Index c = 0; c < n; ++c)
      D(dst, c) = checked_add(D(dst, c), checked_mul(q, D(src, c)));
    for (Eigen::Index c = 0; c < m; ++c)
      s.U(dst, c) = checked_add(s.U(dst, c), checked_mul(q, s.U(src, c)));
  };
  auto add_col = [&](Eigen::Index dst, Eigen::Index src, std::int64_t q) {
    for (Eigen::Index r = 0; r < m; ++r)
      D(r, dst) = checked_add(D(r, dst), checked_mul(q, D(r, src)));
    for (Eigen::Index r = 0; r < n; ++r)
      s.V(r, dst) = checked_add(s.V(r, dst), checked_mul(q, s.V(r, src)));
  };

  const Eigen::Index nmin = std::min(m, n);
  for (Eigen::Index i = 0; i < nmin; ++i) {
    for (;;) {
      // smallest nonzero |entry| in the trailing block
      Eigen::Index pr = -1, pc = -1;
      std::int64_t best = std::numeric_limits<std::int64_t>::max();
      for (Eigen::Index r = i; r < m; ++r)
        for (Eigen::Index c = i; c < n; ++c)
          if (D(r, c) != 0 && std::abs(D(r, c)) < best) {
            best = std::abs(D(r, c));
            pr = r;
            pc = c;
          }
      if (pr < 0) break;  // trailing block is zero
      if (pr != i) {
        D.row(i).swap(D.row(pr));
        s.U.row(i).swap(s.U.row(pr));
      }
      if (pc != i) {
        D.col(i).swap(D.col(pc));
        s.V.col(i).swap(s.V.col(pc));
      }
      if (D(i, i) < 0) {
        D.row(i) = -D.row(i);
        s.U.row(i) = -s.U.row(i);
      }

      bool clean = true;
      for (Eigen::Index r = i + 1; r < m; ++r)
        if (D(r, i) != 0) {
          add_row(r, i, -(D(r, i) / D(i, i)));
          if (D(r, i) != 0) clean = false;
        }
      for (Eigen::Index c = i + 1; c < n; ++c)
        if (D(i, c) != 0) {
          add_col(c, i, -(D(i, c) / D(i, i)));
          if (D(i, c) != 0) clean = false;
        }
      if (!clean) continue;  // remainders left; re-pivot on a smaller entry

      // enforce divisibility of the trailing block by the pivot
      Eigen::Index br = -1;
      for (Eigen::Index r = i + 1; r < m && br < 0; ++r)
        for (Eigen::Index c = i + 1; c < n; ++c)
          if (D(r, c) % D(i, i) != 0) {
            br = r;
            break;
          }
      if (br < 0) break;
      add_row(i, br, 1);
    }
  }
  return s;
}

IMat integer_kernel(const IMat& A) {
  const Eigen::Index n = A.cols();
  SmithNormalForm s = smith_normal_form(A);
  Eigen::Index rank = 0;
  const Eigen::Index nmin = std::min(A.rows(), n);
  for (Eigen::Index i = 0; i < nmin; ++i)
    if (s.D(i, i) != 0) ++rank;
  return s.V.rightCols(n - rank);
}

namespace {

// Exact solve B * X = C where the columns of C lie in the integer span of the
// saturated full-column-rank basis B.
IMat span_coordinates(const IMat& B, const IMat& C) {
  SmithNormalForm s = smith_normal_form(B);
  const Eigen::Index r = B.cols();
  for (Eigen::Index i = 0; i < r; ++i)
    if (s.D(i, i) != 1) fail(errc::bad_argument, "span_coordinates: basis not saturated");
  // B = U^-1 [I;0] V^-1  =>  X = V * top_r(U * C); bottom rows must vanish.
  IMat UC = imat_mul(s.U, C);
  if (B.rows() > r && !UC.bottomRows(B.rows() - r).isZero())
    fail(errc::bad_argument, "span_coordinates: column outside the span");
  return imat_mul(s.V, IMat(UC.topRows(r)));
}

// Completes a saturated d x (d-1) integer matrix C to a unimodular [C | w].
IVec unimodular_completion(const IMat& C, std::int64_t* det_out) {
  const Eigen::Index d = C.rows();
  if (d == 1) {
    IVec w(1);
    w << 1;
    if (det_out) *det_out = 1;
    return w;
  }
  SmithNormalForm s = smith_normal_form(C);
  for (Eigen::Index i = 0; i < C.cols(); ++i)
    if (s.D(i, i) != 1) fail(errc::bad_argument, "completion: matrix not saturated");
  IMat Uinv = unimodular_inverse(s.U);
  IVec w = Uinv.col(d - 1);
  IMat full(d, d);
  full.leftCols(d - 1) = C;
  full.col(d - 1) = w;
  const std::int64_t det = int_det(full);
  if (std::abs(det) != 1) fail(errc::bad_argument, "completion failed");
  if (det_out) *det_out = det;
  return w;
}

}  // namespace

IMat unimodular_inverse(const IMat& U) {
  if (U.rows() != U.cols()) fail(errc::bad_argument, "unimodular_inverse: square required");
  const std::int64_t det = int_det(U);
  if (std::abs(det) != 1) fail(errc::non_unimodular, "matrix has |det| != 1");
  const Eigen::Index n = U.rows();
  // adjugate via cofactors; n is small here
  IMat inv(n, n);
  IMat minor(n - 1, n - 1);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      Eigen::Index rr = 0;
      for (Eigen::Index r = 0; r < n; ++r) {
        if (r == i) continue;
        Eigen::Index cc = 0;
        for (Eigen::Index c = 0; c < n; ++c) {
          if (c == j) continue;
          minor(rr, cc++) = U(r, c);
        }
        ++rr;
      }
      const std::int64_t cof = ((i + j) % 2 == 0 ? 1 : -1) * (n > 1 ? int_det(minor) : 1);
      inv(j, i) = checked_mul(det, cof);  // det = 1/det for |det| = 1
    }
  return inv;
}

SublatticeChain kernel_chain(const IMat& rho_rows) {
  const Eigen::Index l = rho_rows.rows(), n = rho_rows.cols();
  if (l < 1 || n < 1) fail(errc::bad_argument, "kernel_chain: empty functional");

  SublatticeChain chain;
  IMat prev = IMat::Identity(n, n);  // K^(0) = Z^n
  for (Eigen::Index i = 1; i <= l; ++i) {
    const IMat prefix = rho_rows.topRows(i);
    SmithNormalForm s = smith_normal_form(prefix);
    Eigen::Index rank = 0;
    for (Eigen::Index j = 0; j < std::min(i, n); ++j)
      if (s.D(j, j) != 0) ++rank;
    if (rank != i)
      fail(errc::rank_deficient_rho,
           "rho rows are rationally dependent at prefix " + std::to_string(i));
    const IMat K = s.V.rightCols(n - i);

    // complement: express K^(i) in K^(i-1)-coordinates and complete
    const IMat coords = span_coordinates(prev, K);
    std::int64_t det = 0;
    const IVec w = unimodular_completion(coords, &det);
    IVec v = IVec::Zero(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      std::int64_t acc = 0;
      for (Eigen::Index c = 0; c < prev.cols(); ++c)
        acc = checked_add(acc, checked_mul(prev(r, c), w(c)));
      v(r) = acc;
    }
    chain.kernels.push_back(K);
    chain.complements.push_back(v);
    chain.splitting_dets.push_back(det);
    prev = K;
  }
  return chain;
}

RhoInvarianceReport verify_rho_invariance(const IMat& rho_rows, const IMat& M) {
  RhoInvarianceReport rep;
  rep.transformed = imat_mul(rho_rows, M);
  rep.pass = true;
  for (Eigen::Index r = 0; r < rho_rows.rows(); ++r)
    if (rep.transformed.row(r) != rho_rows.row(r)) {
      rep.pass = false;
      rep.violated_rows.push_back(static_cast<int>(r));
    }
  return rep;
}

CircleActionSection primitive_section(const IVec& v) {
  if (v.size() == 0 || v.isZero()) fail(errc::zero_section, "zero section has no direction");
  std::int64_t g = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) g = gcd64(g, v(i));
  IVec w = v / g;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w(i) == 0) continue;
    if (w(i) < 0) w = -w;
    break;
  }
  return {w, true, false};
}

Gl2zClass gl2z_conjugacy_invariant(const IMat& M) {
  if (M.rows() != 2 || M.cols() != 2) fail(errc::bad_argument, "gl2z: 2x2 matrix required");
  if (int_det(M) != 1) fail(errc::non_unimodular, "gl2z: det must be 1");
  const std::int64_t tr = checked_add(M(0, 0), M(1, 1));
  const IMat I = IMat::Identity(2, 2);
  auto gcd_entries = [](const IMat& A) {
    std::int64_t g = 0;
    for (Eigen::Index i = 0; i < 2; ++i)
      for (Eigen::Index j = 0; j < 2; ++j) g = gcd64(g, A(i, j));
    return g;
  };
  if (M == I) return {"identity", 0};
  if (M == IMat(-I)) return {"minus-identity", 0};
  if (tr == 2) return {"parabolic", gcd_entries(IMat(M - I))};
  if (tr == -2) return {"negative-parabolic", gcd_entries(IMat(M + I))};
  if (std::abs(tr) < 2) return {"elliptic", tr};
  return {"hyperbolic", tr};
}

}  // namespace torlat
