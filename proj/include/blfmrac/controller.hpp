#pragma once

#include "blfmrac/matrix.hpp"
#include "blfmrac/tolerances.hpp"

// Two-layer barrier-Lyapunov adaptive controller.
//
// The input u and its rate u̇ are controller states driven by
//
//     ü + u̇ + α u = K_u v,   v = K̂_x x + K_r r,
//     α = (Ū₂′² − u̇ᵀMu̇) / (Ū₁′² − uᵀMu),
//
// with K̂_x and K_u adapted under log-barrier scaling. Nothing in this header
// takes the plant matrix A; the true gain K_x only enters the simulator-side
// V_φ monitor.

namespace blfmrac {

/// User bounds and the primed (M- and P-weighted) radii derived from them.
/// Build through `make` so the derived fields are consistent.
struct ConstraintSpec {
    double x_bar = 0.0;    // X̄
    double u1_bar = 0.0;   // Ū₁
    double u2_bar = 0.0;   // Ū₂
    Matrix m;              // M, symmetric PD
    double x_bar_r = 0.0;  // X̄_r
    double ed_bar = 0.0;   // Ē_d

    double lambda_min_m = 0.0;
    double lambda_min_p = 0.0;
    double u1_primed = 0.0;  // Ū₁√λ_min{M}
    double u2_primed = 0.0;  // Ū₂√λ_min{M}
    double e_bar = 0.0;      // X̄ − X̄_r
    double ed_primed = 0.0;  // Ē_d√λ_min{P}

    static ConstraintSpec make(double x_bar, double u1_bar, double u2_bar, Matrix m, double x_bar_r,
                               double ed_bar, const Matrix& p);
};

struct AdaptiveGains {
    Matrix gamma_x;  // m×m
    Matrix gamma_u;  // m×m
    double sigma_x = 0.0;
    double kx_bar = 0.0;
    double kr_bar = 0.0;

    void validate(std::size_t input_dim) const;

    friend bool operator==(const AdaptiveGains&, const AdaptiveGains&) = default;
};

struct ControllerState {
    Vector u;
    Vector u_dot;
    Matrix khat_x;  // m×n
    Matrix ku;      // m×m
};

/// b − zᵀWz, throwing BarrierBreach once it drops to the guard band
/// kBarrierGuard · b.
double barrier_denominator(const Vector& z, const Matrix& w, double bound_sq, const char* barrier);

/// ½ log(b / (b − zᵀWz)); zero at the origin, unbounded at the boundary.
double barrier_value(const Vector& z, const Matrix& w, double bound_sq, const char* barrier);

/// ∇_z of `barrier_value` for symmetric W: W z / (b − zᵀWz).
Vector barrier_gradient(const Vector& z, const Matrix& w, double bound_sq, const char* barrier);

Vector auxiliary_input(const Matrix& khat_x, const Matrix& kr, const Vector& x, const Vector& r);

double alpha_coupling(const Vector& u, const Vector& u_dot, const ConstraintSpec& spec);

/// ü = K_u v − u̇ − α u
Vector controller_accel(const ControllerState& state, const Vector& v, const ConstraintSpec& spec);

/// Smooth projection of a raw gain rate onto ‖K‖_F ≤ K̄.
///
/// With f(K) = (‖K‖² − (1−ε)K̄²)/(εK̄²), the raw rate passes unchanged when
/// f ≤ 0 or when it points inward. Otherwise the component along ∇f is
/// scaled by (1 − f), which removes it entirely on ‖K‖ = K̄ and reverses it
/// beyond.
Matrix project_gain_rate(const Matrix& khat, const Matrix& raw, double k_bar,
                         double layer = tol::kProjectionLayer);

/// K̂̇_x = proj[−Γ_x Bᵀ P e_d xᵀ / (Ē_d′² − e_dᵀPe_d) − σ_x Γ_x K̂_x]
Matrix khat_x_derivative(const Matrix& khat_x, const Vector& ed, const Vector& x, const Matrix& b,
                         const Matrix& p, const AdaptiveGains& gains, const ConstraintSpec& spec);

/// K̇_u = −Γ_u M u̇ vᵀ / (Ū₂′² − u̇ᵀMu̇)
Matrix ku_derivative(const Vector& u_dot, const Vector& v, const AdaptiveGains& gains,
                     const ConstraintSpec& spec);

struct BlfValues {
    double v1 = 0.0;  // difference error
    double v2 = 0.0;  // input magnitude
    double v3 = 0.0;  // input rate
};

BlfValues blf_values(const Vector& ed, const Vector& u, const Vector& u_dot, const Matrix& p,
                     const ConstraintSpec& spec);

/// V_θ = V₂ + V₃ + ½ tr(K_uᵀ Γ_u⁻¹ K_u)
double composite_lyapunov_theta(const ControllerState& state, const AdaptiveGains& gains,
                                const ConstraintSpec& spec);

/// V_φ = V₁ + ½ tr(K̃_xᵀ Γ_x⁻¹ K̃_x). Needs the true K_x, so simulator-side only.
double composite_lyapunov_phi(const Vector& ed, const Matrix& ktilde_x, const Matrix& p,
                              const AdaptiveGains& gains, const ConstraintSpec& spec);

/// dV_θ/dt assembled term by term from the barrier gradients, the input
/// dynamics and the K_u law.
double theta_rate_assembled(const ControllerState& state, const Vector& v, const AdaptiveGains& gains,
                            const ConstraintSpec& spec);

/// −u̇ᵀMu̇ / (Ū₂′² − u̇ᵀMu̇): what the assembled rate must reduce to.
double theta_rate_closed_form(const Vector& u_dot, const ConstraintSpec& spec);

struct RobustMracStep {
    Vector u;
    Matrix khat_x_dot;
};

/// Classical σ-modification MRAC: u = K̂_x x + K_r r,
/// K̂̇_x = −Γ_x Bᵀ P e xᵀ − σ_x Γ_x K̂_x.
RobustMracStep robust_mrac_step(const Matrix& khat_x, const Vector& x, const Vector& r, const Vector& e,
                                const Matrix& b, const Matrix& p, const Matrix& kr,
                                const AdaptiveGains& gains);

}  // namespace blfmrac
