#pragma once

namespace edrvfl::tol {

// Single source of truth for numerical tolerances used across modules/tests.
inline constexpr double kEquivalence = 1e-8;   // incremental state vs offline solve
inline constexpr double kRateAgreement = 1e-9; // eta vs direct inversion; primal vs dual
inline constexpr double kSmw = 1e-10;          // SMW result vs dense inversion (rel. Frobenius)
inline constexpr double kSymmetry = 1e-12;     // symmetry defect of eta
inline constexpr double kRcondWarn = 1e-12;    // rcond below this warns, never fails
inline constexpr double kProbRowSum = 1e-12;   // ensemble probability rows sum to one
inline constexpr double kIdentity = 1e-8;      // regret telescoping identity check
inline constexpr double kDerivative = 1e-6;    // analytic vs central-difference (relative)
inline constexpr double kBoundRatio = 1e-12;   // ridge/forward single-log bound ratio vs 4

}  // namespace edrvfl::tol
