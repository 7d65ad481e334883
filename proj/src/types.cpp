#include "torlat/types.hpp"

namespace torlat {

const char* errc_name(errc c) {
  switch (c) {
    case errc::unknown_system: return "UnknownSystem";
    case errc::invalid_params: return "InvalidParams";
    case errc::bad_argument: return "BadArgument";
    case errc::step_failure: return "StepFailure";
    case errc::left_regular_domain: return "LeftRegularDomain";
    case errc::newton_diverged: return "NewtonDiverged";
    case errc::near_critical_value: return "NearCriticalValue";
    case errc::no_return_found: return "NoReturnFound";
    case errc::degenerate_candidates: return "DegenerateCandidates";
    case errc::step_bisection_exhausted: return "StepBisectionExhausted";
    case errc::non_integer_monodromy: return "NonIntegerMonodromy";
    case errc::non_unimodular: return "NonUnimodular";
    case errc::rank_deficient_rho: return "RankDeficientRho";
    case errc::zero_section: return "ZeroSection";
    case errc::not_primitive: return "NotPrimitive";
    case errc::closure_failed: return "ClosureFailed";
    case errc::not_free: return "NotFree";
    case errc::identification_mismatch: return "IdentificationMismatch";
    case errc::not_lagrangian: return "NotLagrangian";
    case errc::dependent_generators: return "DependentGenerators";
    case errc::phase_step_too_large: return "PhaseStepTooLarge";
    case errc::cycle_not_closed: return "CycleNotClosed";
    case errc::winding_residual: return "WindingResidual";
    case errc::bad_loop_path: return "BadLoopPath";
    case errc::config_invalid: return "ConfigInvalid";
    case errc::io_failure: return "IoFailure";
    case errc::integer_overflow: return "IntegerOverflow";
  }
  return "Error";
}

void Tolerances::validate() const {
  if (!(abs_tol > 0) || !(rel_tol > 0) || !(newton_tol > 0))
    fail(errc::bad_argument, "tolerances must be positive");
  if (max_newton_iters < 1) fail(errc::bad_argument, "max_newton_iters must be >= 1");
}

}  // namespace torlat
