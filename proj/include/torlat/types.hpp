#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace torlat {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using IVec = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;
using IMat = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

enum class errc {
  unknown_system,
  invalid_params,
  bad_argument,
  step_failure,
  left_regular_domain,
  newton_diverged,
  near_critical_value,
  no_return_found,
  degenerate_candidates,
  step_bisection_exhausted,
  non_integer_monodromy,
  non_unimodular,
  rank_deficient_rho,
  zero_section,
  not_primitive,
  closure_failed,
  not_free,
  identification_mismatch,
  not_lagrangian,
  dependent_generators,
  phase_step_too_large,
  cycle_not_closed,
  winding_residual,
  bad_loop_path,
  config_invalid,
  io_failure,
  integer_overflow,
};

const char* errc_name(errc c);

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw Error(code, what); }

struct Tolerances {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  double newton_tol = 1e-9;
  int max_newton_iters = 30;

  void validate() const;
};

}  // namespace torlat
