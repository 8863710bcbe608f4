#include "blfmrac/controller.hpp"

#include <cmath>
#include <string>

#include "blfmrac/errors.hpp"
#include "blfmrac/linalg.hpp"

namespace blfmrac {

namespace {

constexpr const char* kInputBarrier = "input";
constexpr const char* kRateBarrier = "input-rate";
constexpr const char* kErrorBarrier = "difference-error";

void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorKind::InvalidInput, std::string(what) + " must be > 0");
}

void require_spd(const Matrix& m, const char* what) {
    if (m.empty() || !is_symmetric(m) || symmetric_eig_extremes(m).lambda_min <= 0.0) {
        fail(ErrorKind::InvalidInput, std::string(what) + " must be symmetric positive definite");
    }
}

}  // namespace

ConstraintSpec ConstraintSpec::make(double x_bar, double u1_bar, double u2_bar, Matrix m, double x_bar_r,
                                    double ed_bar, const Matrix& p) {
    require_positive(x_bar, "constraints.x_bar");
    require_positive(u1_bar, "constraints.u1_bar");
    require_positive(u2_bar, "constraints.u2_bar");
    require_positive(x_bar_r, "constraints.x_bar_r");
    require_positive(ed_bar, "constraints.ed_bar");
    if (!(x_bar > x_bar_r)) fail(ErrorKind::InvalidInput, "constraints.x_bar must exceed constraints.x_bar_r");
    require_spd(m, "constraints.M");
    require_spd(p, "reference P");

    ConstraintSpec s;
    s.x_bar = x_bar;
    s.u1_bar = u1_bar;
    s.u2_bar = u2_bar;
    s.m = std::move(m);
    s.x_bar_r = x_bar_r;
    s.ed_bar = ed_bar;
    s.lambda_min_m = symmetric_eig_extremes(s.m).lambda_min;
    s.lambda_min_p = symmetric_eig_extremes(p).lambda_min;
    s.u1_primed = u1_bar * std::sqrt(s.lambda_min_m);
    s.u2_primed = u2_bar * std::sqrt(s.lambda_min_m);
    s.e_bar = x_bar - x_bar_r;
    s.ed_primed = ed_bar * std::sqrt(s.lambda_min_p);
    return s;
}

void AdaptiveGains::validate(std::size_t input_dim) const {
    if (gamma_x.rows() != input_dim || gamma_u.rows() != input_dim) {
        fail(ErrorKind::InvalidInput, "gains.Gamma_x and gains.Gamma_u must be " + std::to_string(input_dim) +
                                          "x" + std::to_string(input_dim));
    }
    require_spd(gamma_x, "gains.Gamma_x");
    require_spd(gamma_u, "gains.Gamma_u");
    require_positive(sigma_x, "gains.sigma_x");
    require_positive(kx_bar, "gains.kx_bar");
    require_positive(kr_bar, "gains.kr_bar");
}

double barrier_denominator(const Vector& z, const Matrix& w, double bound_sq, const char* barrier) {
    const double q = quad_form(z, w);
    const double den = bound_sq - q;
    if (!(den > tol::kBarrierGuard * bound_sq)) throw BarrierBreach(barrier, q, bound_sq);
    return den;
}

double barrier_value(const Vector& z, const Matrix& w, double bound_sq, const char* barrier) {
    barrier_denominator(z, w, bound_sq, barrier);
    // -½ log(1 − q/b) stays accurate both near the origin and near the boundary.
    return -0.5 * std::log1p(-quad_form(z, w) / bound_sq);
}

Vector barrier_gradient(const Vector& z, const Matrix& w, double bound_sq, const char* barrier) {
    const double den = barrier_denominator(z, w, bound_sq, barrier);
    return (1.0 / den) * (w * z);
}

Vector auxiliary_input(const Matrix& khat_x, const Matrix& kr, const Vector& x, const Vector& r) {
    return khat_x * x + kr * r;
}

double alpha_coupling(const Vector& u, const Vector& u_dot, const ConstraintSpec& spec) {
    const double b1 = spec.u1_primed * spec.u1_primed;
    const double b2 = spec.u2_primed * spec.u2_primed;
    const double den_u = barrier_denominator(u, spec.m, b1, kInputBarrier);
    const double den_rate = barrier_denominator(u_dot, spec.m, b2, kRateBarrier);
    return den_rate / den_u;
}

Vector controller_accel(const ControllerState& state, const Vector& v, const ConstraintSpec& spec) {
    const double alpha = alpha_coupling(state.u, state.u_dot, spec);
    Vector acc = state.ku * v;
    acc -= state.u_dot;
    acc -= alpha * state.u;
    return acc;
}

Matrix project_gain_rate(const Matrix& khat, const Matrix& raw, double k_bar, double layer) {
    const double k2 = k_bar * k_bar;
    const double f = (frobenius_inner(khat, khat) - (1.0 - layer) * k2) / (layer * k2);
    if (f <= 0.0) return raw;
    // ∇f ∝ K̂; only the direction matters.
    const double outward = frobenius_inner(khat, raw);
    if (outward <= 0.0) return raw;
    const double scale = f * outward / frobenius_inner(khat, khat);
    Matrix out = raw;
    out -= scale * khat;
    return out;
}

Matrix khat_x_derivative(const Matrix& khat_x, const Vector& ed, const Vector& x, const Matrix& b,
                         const Matrix& p, const AdaptiveGains& gains, const ConstraintSpec& spec) {
    const double bound_sq = spec.ed_primed * spec.ed_primed;
    const double den = barrier_denominator(ed, p, bound_sq, kErrorBarrier);
    const Vector bt_p_ed = b.transpose() * (p * ed);
    Matrix raw = (-1.0 / den) * (gains.gamma_x * outer(bt_p_ed, x));
    raw -= gains.sigma_x * (gains.gamma_x * khat_x);
    return project_gain_rate(khat_x, raw, gains.kx_bar);
}

Matrix ku_derivative(const Vector& u_dot, const Vector& v, const AdaptiveGains& gains,
                     const ConstraintSpec& spec) {
    const double bound_sq = spec.u2_primed * spec.u2_primed;
    const double den = barrier_denominator(u_dot, spec.m, bound_sq, kRateBarrier);
    return (-1.0 / den) * (gains.gamma_u * outer(spec.m * u_dot, v));
}

BlfValues blf_values(const Vector& ed, const Vector& u, const Vector& u_dot, const Matrix& p,
                     const ConstraintSpec& spec) {
    return {barrier_value(ed, p, spec.ed_primed * spec.ed_primed, kErrorBarrier),
            barrier_value(u, spec.m, spec.u1_primed * spec.u1_primed, kInputBarrier),
            barrier_value(u_dot, spec.m, spec.u2_primed * spec.u2_primed, kRateBarrier)};
}

double composite_lyapunov_theta(const ControllerState& state, const AdaptiveGains& gains,
                                const ConstraintSpec& spec) {
    const double v2 = barrier_value(state.u, spec.m, spec.u1_primed * spec.u1_primed, kInputBarrier);
    const double v3 = barrier_value(state.u_dot, spec.m, spec.u2_primed * spec.u2_primed, kRateBarrier);
    const Matrix weighted = solve(gains.gamma_u, state.ku);
    return v2 + v3 + 0.5 * frobenius_inner(state.ku, weighted);
}

double composite_lyapunov_phi(const Vector& ed, const Matrix& ktilde_x, const Matrix& p,
                              const AdaptiveGains& gains, const ConstraintSpec& spec) {
    const double v1 = barrier_value(ed, p, spec.ed_primed * spec.ed_primed, kErrorBarrier);
    const Matrix weighted = solve(gains.gamma_x, ktilde_x);
    return v1 + 0.5 * frobenius_inner(ktilde_x, weighted);
}

double theta_rate_assembled(const ControllerState& state, const Vector& v, const AdaptiveGains& gains,
                            const ConstraintSpec& spec) {
    const Vector grad_u = barrier_gradient(state.u, spec.m, spec.u1_primed * spec.u1_primed, kInputBarrier);
    const Vector grad_rate =
        barrier_gradient(state.u_dot, spec.m, spec.u2_primed * spec.u2_primed, kRateBarrier);
    const Vector accel = controller_accel(state, v, spec);
    const Matrix ku_dot = ku_derivative(state.u_dot, v, gains, spec);
    return grad_u.dot(state.u_dot) + grad_rate.dot(accel) +
           frobenius_inner(state.ku, solve(gains.gamma_u, ku_dot));
}

double theta_rate_closed_form(const Vector& u_dot, const ConstraintSpec& spec) {
    const double bound_sq = spec.u2_primed * spec.u2_primed;
    const double den = barrier_denominator(u_dot, spec.m, bound_sq, kRateBarrier);
    return -quad_form(u_dot, spec.m) / den;
}

RobustMracStep robust_mrac_step(const Matrix& khat_x, const Vector& x, const Vector& r, const Vector& e,
                                const Matrix& b, const Matrix& p, const Matrix& kr,
                                const AdaptiveGains& gains) {
    RobustMracStep step;
    step.u = auxiliary_input(khat_x, kr, x, r);
    const Vector bt_p_e = b.transpose() * (p * e);
    step.khat_x_dot = -1.0 * (gains.gamma_x * outer(bt_p_e, x));
    step.khat_x_dot -= gains.sigma_x * (gains.gamma_x * khat_x);
    return step;
}

}  // namespace blfmrac
