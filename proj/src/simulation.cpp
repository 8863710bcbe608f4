#include "blfmrac/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <sstream>

#include "blfmrac/errors.hpp"
#include "blfmrac/linalg.hpp"
#include "blfmrac/tolerances.hpp"

namespace blfmrac {

namespace {

void append(std::vector<double>& out, std::span<const double> values) {
    out.insert(out.end(), values.begin(), values.end());
}

Vector take_vector(std::span<const double>& flat, std::size_t n) {
    Vector v(std::vector<double>(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(n)));
    flat = flat.subspan(n);
    return v;
}

Matrix take_matrix(std::span<const double>& flat, std::size_t rows, std::size_t cols) {
    Matrix m = Matrix::from_row_major(
        rows, cols, std::vector<double>(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(rows * cols)));
    flat = flat.subspan(rows * cols);
    return m;
}

std::vector<double> axpy(const std::vector<double>& x, double h, const std::vector<double>& k) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + h * k[i];
    return out;
}

ControllerState controller_view(const AugmentedState& s) { return {s.u, s.u_dot, s.khat_x, s.ku}; }

// Baseline input rate along the flow: u̇ = K̂̇ x + K̂ ẋ + K_r ṙ.
Vector baseline_input_rate(const AugmentedState& s, const AugmentedState& rate, const ClosedLoopModel& model) {
    Vector ud = rate.khat_x * s.x;
    ud += s.khat_x * rate.x;
    ud += model.kr * model.reference_signal.derivative(s.t);
    return ud;
}

AugmentedState single_rk4(const AugmentedState& s, double dt, const ClosedLoopModel& model) {
    const std::size_t n = model.state_dim();
    const std::size_t m = model.input_dim();
    const std::vector<double> y0 = s.pack();
    auto f = [&](double t, const std::vector<double>& y) {
        return augmented_derivative(AugmentedState::unpack(y, n, m, t), model).pack();
    };
    const auto k1 = f(s.t, y0);
    const auto k2 = f(s.t + 0.5 * dt, axpy(y0, 0.5 * dt, k1));
    const auto k3 = f(s.t + 0.5 * dt, axpy(y0, 0.5 * dt, k2));
    const auto k4 = f(s.t + dt, axpy(y0, dt, k3));
    std::vector<double> y1(y0.size());
    for (std::size_t i = 0; i < y0.size(); ++i) {
        y1[i] = y0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    AugmentedState out = AugmentedState::unpack(y1, n, m, s.t + dt);
    check_admissible(out, model);
    return out;
}

}  // namespace

std::string to_string(ControllerKind kind) {
    return kind == ControllerKind::Proposed ? "proposed" : "robust-mrac";
}

ControllerKind parse_controller_kind(const std::string& name) {
    if (name == "proposed") return ControllerKind::Proposed;
    if (name == "robust-mrac") return ControllerKind::RobustMrac;
    fail(ErrorKind::Validation, "unknown controller '" + name + "' (proposed, robust-mrac)");
}

AugmentedState AugmentedState::zero(std::size_t n, std::size_t m) {
    return {0.0, Vector(n), Vector(n), Vector(n), Vector(m), Vector(m), Matrix(m, n), Matrix(m, m)};
}

std::vector<double> AugmentedState::pack() const {
    std::vector<double> out;
    out.reserve(3 * x.size() + 2 * u.size() + khat_x.size() + ku.size());
    append(out, x.values());
    append(out, xr.values());
    append(out, e1.values());
    append(out, u.values());
    append(out, u_dot.values());
    append(out, khat_x.values());
    append(out, ku.values());
    return out;
}

AugmentedState AugmentedState::unpack(std::span<const double> flat, std::size_t n, std::size_t m, double t) {
    if (flat.size() != 3 * n + 2 * m + m * n + m * m) {
        fail(ErrorKind::InvalidInput, "AugmentedState::unpack: wrong flat size");
    }
    AugmentedState s;
    s.t = t;
    s.x = take_vector(flat, n);
    s.xr = take_vector(flat, n);
    s.e1 = take_vector(flat, n);
    s.u = take_vector(flat, m);
    s.u_dot = take_vector(flat, m);
    s.khat_x = take_matrix(flat, m, n);
    s.ku = take_matrix(flat, m, m);
    return s;
}

AugmentedState augmented_derivative(const AugmentedState& s, const ClosedLoopModel& model) {
    const std::size_t n = model.state_dim();
    const std::size_t m = model.input_dim();
    const Vector r = model.reference_signal.value(s.t);
    const Vector d = model.disturbance.value(s.t);
    const Matrix& b = model.plant.b;
    const Matrix& p = model.reference.p;

    AugmentedState rate = AugmentedState::zero(n, m);
    rate.t = 1.0;
    rate.xr = reference_derivative(model.reference, s.xr, r);

    if (model.controller == ControllerKind::RobustMrac) {
        const RobustMracStep step =
            robust_mrac_step(s.khat_x, s.x, r, s.tracking_error(), b, p, model.kr, model.gains);
        rate.x = plant_derivative(model.plant, s.x, step.u, d);
        rate.khat_x = step.khat_x_dot;
        return rate;
    }

    const Vector v = auxiliary_input(s.khat_x, model.kr, s.x, r);
    rate.x = plant_derivative(model.plant, s.x, s.u, d);
    rate.e1 = model.reference.ar * s.e1 + b * (s.u - v);
    rate.u = s.u_dot;
    rate.u_dot = controller_accel(controller_view(s), v, model.spec);
    rate.khat_x = khat_x_derivative(s.khat_x, s.difference_error(), s.x, b, p, model.gains, model.spec);
    rate.ku = ku_derivative(s.u_dot, v, model.gains, model.spec);
    return rate;
}

void check_admissible(const AugmentedState& s, const ClosedLoopModel& model) {
    if (model.controller == ControllerKind::RobustMrac) return;
    const ConstraintSpec& spec = model.spec;
    barrier_denominator(s.u, spec.m, spec.u1_primed * spec.u1_primed, "input");
    barrier_denominator(s.u_dot, spec.m, spec.u2_primed * spec.u2_primed, "input-rate");
    barrier_denominator(s.difference_error(), model.reference.p, spec.ed_primed * spec.ed_primed,
                        "difference-error");
}

AugmentedState rk4_step(const AugmentedState& s, double dt, const ClosedLoopModel& model, double dt_min) {
    if (!(dt > 0.0)) fail(ErrorKind::InvalidInput, "rk4_step: dt must be > 0");
    try {
        return single_rk4(s, dt, model);
    } catch (const BarrierBreach& breach) {
        const double half = 0.5 * dt;
        if (half < dt_min) throw StepFailure(breach.barrier(), s.t, dt);
        const AugmentedState mid = rk4_step(s, half, model, dt_min);
        AugmentedState out = rk4_step(mid, half, model, dt_min);
        out.t = s.t + dt;
        return out;
    }
}

TrajectorySample make_sample(const AugmentedState& s, const ClosedLoopModel& model) {
    const ConstraintSpec& spec = model.spec;
    const Matrix& p = model.reference.p;
    TrajectorySample out;
    out.state = s;

    if (model.controller == ControllerKind::RobustMrac) {
        const Vector r = model.reference_signal.value(s.t);
        const RobustMracStep step =
            robust_mrac_step(s.khat_x, s.x, r, s.tracking_error(), model.plant.b, p, model.kr, model.gains);
        AugmentedState rate = augmented_derivative(s, model);
        out.state.u = step.u;
        out.state.u_dot = baseline_input_rate(s, rate, model);
    }

    const Vector e = out.state.tracking_error();
    const Vector ed = out.state.difference_error();
    out.norm_x = s.x.norm();
    out.norm_u = out.state.u.norm();
    out.norm_u_dot = out.state.u_dot.norm();
    out.norm_e = e.norm();
    out.norm_ed = ed.norm();
    out.norm_khat = s.khat_x.frobenius_norm();
    out.margin_x = spec.x_bar - out.norm_x;
    out.margin_u = spec.u1_bar - out.norm_u;
    out.margin_u_dot = spec.u2_bar - out.norm_u_dot;
    out.margin_ed = spec.ed_bar - out.norm_ed;
    out.ratio_u = quad_form(out.state.u, spec.m) / (spec.u1_primed * spec.u1_primed);
    out.ratio_u_dot = quad_form(out.state.u_dot, spec.m) / (spec.u2_primed * spec.u2_primed);
    out.ratio_ed = quad_form(ed, p) / (spec.ed_primed * spec.ed_primed);

    if (model.controller == ControllerKind::Proposed) {
        out.v_theta = composite_lyapunov_theta(controller_view(s), model.gains, spec);
        out.v_phi = composite_lyapunov_phi(ed, s.khat_x - model.kx_true, p, model.gains, spec);
        out.alpha = alpha_coupling(s.u, s.u_dot, spec);
    }
    return out;
}

double phi_ultimate_offset(const ClosedLoopModel& model) {
    const double lmin_q = symmetric_eig_extremes(model.reference.q).lambda_min;
    const double rate = std::min(lmin_q, model.gains.sigma_x);
    const double kx = spectral_norm(model.kx_true);
    const double c = 0.5 * model.gains.sigma_x * kx * kx;
    return c / rate;
}

MonitorReport evaluate_monitors(const Trajectory& traj, const ClosedLoopModel& model) {
    MonitorReport rep;
    rep.controller = traj.controller;
    rep.samples = traj.samples.size();
    rep.lyapunov_applicable = traj.controller == ControllerKind::Proposed;
    if (traj.samples.empty()) fail(ErrorKind::InvalidInput, "evaluate_monitors: empty trajectory");

    const double inf = std::numeric_limits<double>::infinity();
    rep.min_margin_x = rep.min_margin_u = rep.min_margin_u_dot = rep.min_margin_ed = inf;
    for (const auto& s : traj.samples) {
        rep.max_norm_x = std::max(rep.max_norm_x, s.norm_x);
        rep.max_norm_u = std::max(rep.max_norm_u, s.norm_u);
        rep.max_norm_u_dot = std::max(rep.max_norm_u_dot, s.norm_u_dot);
        rep.max_norm_e = std::max(rep.max_norm_e, s.norm_e);
        rep.max_norm_ed = std::max(rep.max_norm_ed, s.norm_ed);
        rep.max_norm_khat = std::max(rep.max_norm_khat, s.norm_khat);
        rep.min_margin_x = std::min(rep.min_margin_x, s.margin_x);
        rep.min_margin_u = std::min(rep.min_margin_u, s.margin_u);
        rep.min_margin_u_dot = std::min(rep.min_margin_u_dot, s.margin_u_dot);
        rep.min_margin_ed = std::min(rep.min_margin_ed, s.margin_ed);
        rep.max_ratio_u = std::max(rep.max_ratio_u, s.ratio_u);
        rep.max_ratio_u_dot = std::max(rep.max_ratio_u_dot, s.ratio_u_dot);
        rep.max_ratio_ed = std::max(rep.max_ratio_ed, s.ratio_ed);
    }
    const ConstraintSpec& spec = model.spec;
    rep.state_ok = rep.max_norm_x < spec.x_bar;
    rep.input_ok = rep.max_norm_u < spec.u1_bar;
    rep.rate_ok = rep.max_norm_u_dot < spec.u2_bar;
    rep.ed_ok = rep.max_norm_ed < spec.ed_bar;

    const std::size_t count = traj.samples.size();
    const std::size_t tenth = std::max<std::size_t>(1, count / 10);
    for (std::size_t k = 0; k < tenth; ++k) {
        rep.u_dot_early += traj.samples[k].norm_u_dot / static_cast<double>(tenth);
        rep.u_dot_late += traj.samples[count - 1 - k].norm_u_dot / static_cast<double>(tenth);
    }

    if (!rep.lyapunov_applicable) {
        rep.theta_ok = rep.phi_ok = rep.projection_ok = true;
        return rep;
    }

    rep.projection_ok = rep.max_norm_khat <= model.gains.kx_bar + tol::kProjectionOvershoot;

    rep.max_theta_increase = -inf;
    for (std::size_t k = 1; k < count; ++k) {
        const double prev = traj.samples[k - 1].v_theta;
        const double inc = traj.samples[k].v_theta - prev;
        rep.max_theta_increase = std::max(rep.max_theta_increase, inc / (1.0 + std::abs(prev)));
        if (!rep.theta_violation && inc > tol::kThetaIncrease * (1.0 + std::abs(prev))) rep.theta_violation = k;
    }
    if (count < 2) rep.max_theta_increase = 0.0;
    rep.theta_ok = !rep.theta_violation.has_value();

    rep.phi_bound = traj.samples.front().v_phi + phi_ultimate_offset(model);
    rep.max_phi_excess = -inf;
    for (std::size_t k = 0; k < count; ++k) {
        const double excess = traj.samples[k].v_phi - rep.phi_bound;
        rep.max_phi_excess = std::max(rep.max_phi_excess, excess);
        if (!rep.phi_violation && !(excess < tol::kPhiBound)) rep.phi_violation = k;
    }
    rep.phi_ok = !rep.phi_violation.has_value();
    return rep;
}

std::string format_monitor_report(const MonitorReport& r) {
    std::ostringstream os;
    auto line = [&](const char* key, double v) { os << fmt::format("{:<20} = {:.17g}\n", key, v); };
    auto flag = [&](const char* key, bool v) { os << fmt::format("{:<20} = {}\n", key, v); };
    os << fmt::format("{:<20} = {}\n", "controller", to_string(r.controller));
    os << fmt::format("{:<20} = {}\n", "samples", r.samples);
    line("max_norm_x", r.max_norm_x);
    line("max_norm_u", r.max_norm_u);
    line("max_norm_u_dot", r.max_norm_u_dot);
    line("max_norm_e", r.max_norm_e);
    line("max_norm_ed", r.max_norm_ed);
    line("max_norm_khat", r.max_norm_khat);
    line("min_margin_x", r.min_margin_x);
    line("min_margin_u", r.min_margin_u);
    line("min_margin_u_dot", r.min_margin_u_dot);
    line("min_margin_ed", r.min_margin_ed);
    line("max_ratio_u", r.max_ratio_u);
    line("max_ratio_u_dot", r.max_ratio_u_dot);
    line("max_ratio_ed", r.max_ratio_ed);
    flag("lyapunov_applicable", r.lyapunov_applicable);
    if (r.lyapunov_applicable) {
        line("max_theta_increase", r.max_theta_increase);
        os << fmt::format("{:<20} = {}\n", "theta_violation",
                          r.theta_violation ? std::to_string(*r.theta_violation) : "none");
        line("phi_bound", r.phi_bound);
        line("max_phi_excess", r.max_phi_excess);
        os << fmt::format("{:<20} = {}\n", "phi_violation",
                          r.phi_violation ? std::to_string(*r.phi_violation) : "none");
    }
    line("u_dot_early", r.u_dot_early);
    line("u_dot_late", r.u_dot_late);
    flag("state_ok", r.state_ok);
    flag("input_ok", r.input_ok);
    flag("rate_ok", r.rate_ok);
    flag("ed_ok", r.ed_ok);
    flag("theta_ok", r.theta_ok);
    flag("phi_ok", r.phi_ok);
    flag("projection_ok", r.projection_ok);
    flag("constraints_ok", r.constraints_ok());
    return os.str();
}

void validate_initial_state(const AugmentedState& s0, const ClosedLoopModel& model) {
    const std::size_t n = model.state_dim();
    const std::size_t m = model.input_dim();
    std::vector<std::string> problems;
    if (s0.x.size() != n || s0.xr.size() != n || s0.e1.size() != n || s0.u.size() != m ||
        s0.u_dot.size() != m || s0.khat_x.rows() != m || s0.khat_x.cols() != n || s0.ku.rows() != m ||
        s0.ku.cols() != m) {
        fail(ErrorKind::InvalidScenario, "initial state dimensions do not match the plant");
    }
    if (s0.e1.norm() != 0.0) problems.emplace_back("e1(0) must be zero");
    if (model.controller == ControllerKind::Proposed) {
        const ConstraintSpec& spec = model.spec;
        const double b1 = spec.u1_primed * spec.u1_primed;
        const double b2 = spec.u2_primed * spec.u2_primed;
        const double be = spec.ed_primed * spec.ed_primed;
        if (!(quad_form(s0.u, spec.m) < b1 * (1.0 - tol::kBarrierGuard))) {
            problems.emplace_back("u(0) is outside the input set uᵀMu < U1'²");
        }
        if (!(quad_form(s0.u_dot, spec.m) < b2 * (1.0 - tol::kBarrierGuard))) {
            problems.emplace_back("u_dot(0) is outside the input-rate set u̇ᵀMu̇ < U2'²");
        }
        if (!(quad_form(s0.difference_error(), model.reference.p) < be * (1.0 - tol::kBarrierGuard))) {
            problems.emplace_back("e_d(0) is outside the difference-error set e_dᵀPe_d < Ed'²");
        }
        if (s0.khat_x.frobenius_norm() > model.gains.kx_bar) {
            problems.emplace_back("Khat_x(0) is outside the projection set ‖K̂_x‖ ≤ kx_bar");
        }
    }
    if (!problems.empty()) {
        std::string msg = "inadmissible initial state:";
        for (const auto& p : problems) msg += "\n  - " + p;
        fail(ErrorKind::InvalidScenario, msg);
    }
}

SimulationResult simulate(const ClosedLoopModel& model, const AugmentedState& initial,
                          const SimulationOptions& options) {
    if (!(options.dt > 0.0) || !(options.horizon > 0.0) || options.decimation == 0 || !(options.dt_min > 0.0)) {
        fail(ErrorKind::InvalidScenario, "integrator settings must be positive");
    }
    validate_initial_state(initial, model);

    SimulationResult result;
    result.trajectory.controller = model.controller;
    result.trajectory.state_dim = model.state_dim();
    result.trajectory.input_dim = model.input_dim();

    const auto steps = static_cast<std::size_t>(std::llround(options.horizon / options.dt));
    result.trajectory.samples.reserve(steps / options.decimation + 2);

    AugmentedState s = initial;
    result.trajectory.samples.push_back(make_sample(s, model));
    for (std::size_t k = 1; k <= steps; ++k) {
        s = rk4_step(s, options.dt, model, options.dt_min);
        // Re-anchor time to the grid so long runs do not accumulate drift.
        s.t = initial.t + static_cast<double>(k) * options.dt;
        if (k % options.decimation == 0 || k == steps) {
            result.trajectory.samples.push_back(make_sample(s, model));
        }
    }
    result.final_state = s;
    result.report = evaluate_monitors(result.trajectory, model);
    return result;
}

}  // namespace blfmrac
