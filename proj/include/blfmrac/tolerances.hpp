#pragma once

// Numerical tolerances shared across the library.

namespace blfmrac::tol {

/// Max |S(i,j) - S(j,i)| accepted as symmetric, relative to max(1, max|S|).
inline constexpr double kSymmetry = 1e-12;

/// Smallest admissible eigenvalue of BᵀB for a left pseudo-inverse.
inline constexpr double kRankFloor = 1e-12;

/// Lyapunov residual target ‖AᵀP + PA + Q‖ / ‖Q‖.
inline constexpr double kLyapunovResidual = 1e-10;

/// Relative pivot floor for the dense LU factorisation.
inline constexpr double kPivotFloor = 1e-14;

/// Jacobi stops once the off-diagonal mass is below this fraction of ‖S‖_F².
inline constexpr double kJacobiOffDiagonal = 1e-30;
inline constexpr int kJacobiMaxSweeps = 100;

/// Shifted-QR iterations allowed per eigenvalue before giving up.
inline constexpr int kQrMaxIterationsPerEigenvalue = 60;

/// Matching residual above which gains are flagged unmatched.
inline constexpr double kMatchingResidual = 1e-8;

/// Barrier denominators below kBarrierGuard * bound² abort the evaluation.
inline constexpr double kBarrierGuard = 1e-9;

/// Projection boundary-layer thickness.
inline constexpr double kProjectionLayer = 0.1;

/// Per-sample allowance for V_θ increase, scaled by (1 + |V_θ|).
inline constexpr double kThetaIncrease = 1e-8;

/// Absolute allowance on the V_φ ultimate bound.
inline constexpr double kPhiBound = 1e-6;

/// Allowance on ‖K̂_x‖ above K̄_x.
inline constexpr double kProjectionOvershoot = 1e-9;

/// Gradient-check pass threshold (relative error).
inline constexpr double kGradcheck = 1e-6;

}  // namespace blfmrac::tol
