#pragma once

#include <complex>
#include <vector>

#include "blfmrac/matrix.hpp"

namespace blfmrac {

struct EigExtremes {
    double lambda_min = 0.0;
    double lambda_max = 0.0;
};

/// Induced 2-norm: square root of the largest eigenvalue of AᵀA.
double spectral_norm(const Matrix& a);

/// All eigenvalues of a symmetric matrix, ascending (cyclic Jacobi).
std::vector<double> symmetric_eigenvalues(const Matrix& s);

EigExtremes symmetric_eig_extremes(const Matrix& s);

/// Full (complex) spectrum of a general square matrix via Householder
/// Hessenberg reduction followed by Francis double-shift QR.
std::vector<std::complex<double>> eigenvalues(const Matrix& a);

/// Largest real part over the spectrum of `a`.
double max_real_eigenpart(const Matrix& a);

bool is_symmetric(const Matrix& s);
bool is_hurwitz(const Matrix& a);

/// Solves Arᵀ P + P Ar + Q = 0 for symmetric positive definite P.
///
/// The n² unknowns are solved as one Kronecker-vectorised linear system with
/// partial-pivot LU and a single refinement step. Throws InfeasibleModel when
/// Ar is not Hurwitz, InvalidInput when Q is not SPD, NumericalFailure when the
/// system is singular.
Matrix solve_lyapunov(const Matrix& ar, const Matrix& q);

/// ‖Arᵀ P + P Ar + Q‖_2
double lyapunov_residual(const Matrix& ar, const Matrix& p, const Matrix& q);

/// (BᵀB)⁻¹Bᵀ; B must have full column rank.
Matrix left_pseudo_inverse(const Matrix& b);

/// Solves A X = B with partial-pivot LU.
Matrix solve(const Matrix& a, const Matrix& b);
Matrix inverse(const Matrix& a);

}  // namespace blfmrac
