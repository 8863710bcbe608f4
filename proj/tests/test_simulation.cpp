#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "blfmrac/errors.hpp"
#include "blfmrac/linalg.hpp"
#include "blfmrac/scenario.hpp"
#include "blfmrac/simulation.hpp"
#include "test_helpers.hpp"

using namespace blfmrac;
using namespace testing;

namespace {

Scenario quiet_preset() {
    Scenario s = aircraft_preset();
    s.reference = ReferenceSignal::zero(2);
    s.disturbance = DisturbanceConfig{};
    s.init.ku0 = Matrix(2, 2);
    return s;
}

const SimulationResult& aircraft_run(double dt) {
    static std::map<double, SimulationResult> cache;
    auto it = cache.find(dt);
    if (it == cache.end()) {
        Scenario s = aircraft_preset();
        s.integrator.dt = dt;
        s.integrator.decimation = static_cast<std::size_t>(std::lround(1e-2 / dt));
        const PreparedRun run = prepare(s);
        it = cache.emplace(dt, simulate(*run.model, run.initial, s.integrator)).first;
    }
    return it->second;
}

// Scalar loop where the input stays identically zero, leaving ẋ = −x.
ClosedLoopModel scalar_decay_model() {
    ClosedLoopModel m;
    m.plant = PlantModel{Matrix{{-1.0}}, Matrix{{1.0}}, 0.0};
    m.reference = ReferenceModel::make(Matrix{{-1.0}}, Matrix{{1.0}}, Matrix{{1.0}});
    m.reference_signal = ReferenceSignal::zero(1);
    m.disturbance = DisturbanceSignal::zero(1);
    m.spec = ConstraintSpec::make(100.0, 1.0, 1.0, Matrix{{1.0}}, 1.0, 50.0, m.reference.p);
    m.gains.gamma_x = Matrix{{1.0}};
    m.gains.gamma_u = Matrix{{1.0}};
    m.gains.sigma_x = 1.0;
    m.gains.kx_bar = 1.0;
    m.gains.kr_bar = 1.0;
    m.kr = Matrix{{1.0}};
    m.kx_true = Matrix{{0.0}};
    return m;
}

AugmentedState random_interior_state(Rng& rng, const ClosedLoopModel& model, double scale) {
    const std::size_t n = model.state_dim();
    const std::size_t m = model.input_dim();
    AugmentedState s = AugmentedState::zero(n, m);
    s.t = rng.uniform(0.0, 20.0);
    s.x = rng.vector(n);
    s.x *= scale;
    s.xr = rng.vector(n);
    s.xr *= scale;
    s.e1 = rng.vector(n);
    s.e1 *= 0.2 * scale;
    // Keep e_d well inside its ellipsoid.
    const Vector ed = s.difference_error();
    const double qe = quad_form(ed, model.reference.p);
    const double be = model.spec.ed_primed * model.spec.ed_primed;
    if (qe > 0.25 * be) s.e1 += (1.0 - 0.5 * std::sqrt(be / qe)) * ed;
    s.u = rng.vector(m);
    s.u *= rng.uniform(0.1, 0.9) * model.spec.u1_primed / std::sqrt(quad_form(s.u, model.spec.m));
    s.u_dot = rng.vector(m);
    s.u_dot *= rng.uniform(0.1, 0.9) * model.spec.u2_primed / std::sqrt(quad_form(s.u_dot, model.spec.m));
    s.khat_x = rng.matrix(m, n);
    s.khat_x *= 0.5 * model.gains.kx_bar / s.khat_x.frobenius_norm();
    s.ku = rng.matrix(m, m);
    return s;
}

std::string invalid_message(const AugmentedState& s, const ClosedLoopModel& m) {
    try {
        validate_initial_state(s, m);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::InvalidScenario) return e.what();
        return "wrong kind";
    }
    return "";
}

}  // namespace

TEST_CASE("pack and unpack are inverse") {
    Rng rng(51);
    const PreparedRun run = prepare(aircraft_preset());
    const AugmentedState s = random_interior_state(rng, *run.model, 0.3);
    const std::vector<double> flat = s.pack();
    CHECK(flat.size() == 3 * 4 + 2 * 2 + 2 * 4 + 2 * 2);
    const AugmentedState back = AugmentedState::unpack(flat, 4, 2, s.t);
    CHECK(back.pack() == flat);
    CHECK(back.t == s.t);
}

TEST_CASE("equilibrium derivative is zero and RK4 leaves it unchanged") {
    const PreparedRun run = prepare(quiet_preset());
    const ClosedLoopModel& model = *run.model;
    const AugmentedState zero = AugmentedState::zero(4, 2);
    const AugmentedState rate = augmented_derivative(zero, model);
    for (double v : rate.pack()) CHECK(v == 0.0);
    const AugmentedState next = rk4_step(zero, 1e-3, model);
    for (double v : next.pack()) CHECK(v == 0.0);
    CHECK(next.t == doctest::Approx(1e-3));
}

TEST_CASE("auxiliary error rate vanishes when u equals v") {
    const PreparedRun run = prepare(aircraft_preset());
    const ClosedLoopModel& model = *run.model;
    Rng rng(52);
    for (int k = 0; k < 50; ++k) {
        AugmentedState s = random_interior_state(rng, model, 0.1);
        s.e1 = Vector(4);
        const Vector r = model.reference_signal.value(s.t);
        s.u = naive_mul(s.khat_x, s.x) + naive_mul(model.kr, r);
        if (quad_form(s.u, model.spec.m) >= 0.8 * model.spec.u1_primed * model.spec.u1_primed) continue;
        const AugmentedState rate = augmented_derivative(s, model);
        CHECK(rate.e1.norm() < 1e-15);
    }
}

TEST_CASE("augmented derivative matches a per-equation oracle") {
    const PreparedRun run = prepare(aircraft_preset());
    const ClosedLoopModel& model = *run.model;
    Rng rng(53);
    for (int trial = 0; trial < 20; ++trial) {
        AugmentedState s = random_interior_state(rng, model, 0.4);
        if (trial == 0) {
            s = run.initial;
            s.x = Vector{0.02, -0.04, 0.01, 0.06};
        }
        const AugmentedState rate = augmented_derivative(s, model);

        const Vector r = model.reference_signal.value(s.t);
        const Vector d = model.disturbance.value(s.t);
        const Matrix a = plant_a();
        const Matrix b = plant_b();
        const Matrix p = run.reference.p;
        const ConstraintSpec& spec = model.spec;

        const Vector xdot = naive_mul(a, s.x) + naive_mul(b, s.u) + d;
        CHECK(vec_diff(rate.x, xdot) < 1e-13);
        const Vector xrdot = naive_mul(ref_ar(), s.xr) + naive_mul(ref_br(), r);
        CHECK(vec_diff(rate.xr, xrdot) < 1e-13);

        const Vector v = naive_mul(s.khat_x, s.x) + naive_mul(model.kr, r);
        const Vector e1dot = naive_mul(ref_ar(), s.e1) + naive_mul(b, s.u - v);
        CHECK(vec_diff(rate.e1, e1dot) < 1e-13);
        CHECK(vec_diff(rate.u, s.u_dot) == 0.0);

        const long double b1 = static_cast<long double>(spec.u1_primed) * spec.u1_primed;
        const long double b2 = static_cast<long double>(spec.u2_primed) * spec.u2_primed;
        const long double alpha = (b2 - naive_quad(s.u_dot, spec.m)) / (b1 - naive_quad(s.u, spec.m));
        const Vector kv = naive_mul(s.ku, v);
        Vector udd(2);
        for (std::size_t i = 0; i < 2; ++i) udd[i] = static_cast<double>(kv[i] - s.u_dot[i] - alpha * s.u[i]);
        CHECK(vec_diff(rate.u_dot, udd) < 1e-12);

        // K̂ sits at half the projection radius, so the raw law applies.
        const Vector ed = (s.x - s.xr) - s.e1;
        const double den_e = spec.ed_primed * spec.ed_primed - naive_quad(ed, p);
        const Vector btpe = naive_mul(b.transpose(), naive_mul(p, ed));
        Matrix khat_dot = naive_mul(model.gains.gamma_x, outer(btpe, s.x));
        khat_dot *= -1.0 / den_e;
        khat_dot -= model.gains.sigma_x * naive_mul(model.gains.gamma_x, s.khat_x);
        CHECK(mat_diff(rate.khat_x, khat_dot) < 1e-12);

        const double den_u = spec.u2_primed * spec.u2_primed - naive_quad(s.u_dot, spec.m);
        Matrix ku_dot = naive_mul(model.gains.gamma_u, outer(naive_mul(spec.m, s.u_dot), v));
        ku_dot *= -1.0 / den_u;
        CHECK(mat_diff(rate.ku, ku_dot) < 1e-12);
    }
}

TEST_CASE("RK4 on a scalar decay has fifth-order local error") {
    const ClosedLoopModel model = scalar_decay_model();
    AugmentedState s = AugmentedState::zero(1, 1);
    s.x[0] = 1.0;
    double prev_err = 0.0;
    for (double dt : {0.1, 0.05, 0.025}) {
        const AugmentedState next = rk4_step(s, dt, model);
        CHECK(next.u[0] == 0.0);
        const double err = std::abs(next.x[0] - std::exp(-dt));
        CHECK(err <= dt * dt * dt * dt * dt / 100.0);
        if (prev_err > 0.0) {
            CHECK(prev_err / err > 28.0);
            CHECK(prev_err / err < 36.0);
        }
        prev_err = err;
    }
}

TEST_CASE("aircraft run stays inside every constraint") {
    const SimulationResult& res = aircraft_run(1e-3);
    const MonitorReport& rep = res.report;
    CHECK(rep.max_norm_x < 6.0);
    CHECK(rep.max_norm_u < 1.0);
    CHECK(rep.max_norm_u_dot < 0.6);
    CHECK(rep.max_norm_ed < 0.9);
    CHECK(rep.theta_ok);
    CHECK(rep.max_theta_increase <= 1e-8);
    CHECK(rep.phi_ok);
    CHECK(rep.projection_ok);
    CHECK(rep.all_ok());
    CHECK(rep.samples == 6001);
    CHECK(res.final_state.t == doctest::Approx(60.0).epsilon(1e-12));

    const auto& samples = res.trajectory.samples;
    for (std::size_t k = 1; k < samples.size(); ++k) CHECK(samples[k].state.t > samples[k - 1].state.t);
    for (const auto& s : samples) {
        for (double v : s.state.pack()) CHECK(std::isfinite(v));
        CHECK(s.ratio_u < 1.0);
        CHECK(s.ratio_u_dot < 1.0);
        CHECK(s.ratio_ed < 1.0);
        CHECK(s.norm_khat <= 5.0 + 1e-9);
    }
}

TEST_CASE("verdicts agree with the stored maxima") {
    const SimulationResult& res = aircraft_run(1e-3);
    const MonitorReport& rep = res.report;
    double mx = 0, mu = 0, mud = 0, med = 0;
    for (const auto& s : res.trajectory.samples) {
        mx = std::max(mx, s.state.x.norm());
        mu = std::max(mu, s.state.u.norm());
        mud = std::max(mud, s.state.u_dot.norm());
        med = std::max(med, s.state.difference_error().norm());
    }
    CHECK(rep.max_norm_x == mx);
    CHECK(rep.max_norm_u == mu);
    CHECK(rep.max_norm_u_dot == mud);
    CHECK(rep.max_norm_ed == med);
    CHECK(rep.state_ok == (mx < 6.0));
    CHECK(rep.min_margin_x == doctest::Approx(6.0 - mx));
}

TEST_CASE("halving dt barely moves the final state") {
    const double a = aircraft_run(1e-3).final_state.x.norm();
    const double b = aircraft_run(5e-4).final_state.x.norm();
    CHECK(std::abs(a - b) < 1e-6);
}

TEST_CASE("error decomposition holds at every sample") {
    for (const auto& s : aircraft_run(1e-3).trajectory.samples) {
        const Vector e = s.state.tracking_error();
        const Vector sum = s.state.difference_error() + s.state.e1;
        CHECK(vec_diff(e, sum) <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + e.norm()));
    }
}

TEST_CASE("zero scenario gives a zero trajectory") {
    Scenario s = quiet_preset();
    s.integrator.horizon = 5.0;
    const PreparedRun run = prepare(s);
    const SimulationResult res = simulate(*run.model, run.initial, s.integrator);
    for (const auto& sample : res.trajectory.samples) {
        for (double v : sample.state.pack()) CHECK(v == 0.0);
        CHECK(sample.v_theta == 0.0);
        CHECK(sample.v_phi == doctest::Approx(composite_lyapunov_phi(Vector(4), -1.0 * run.model->kx_true,
                                                                     run.reference.p, run.model->gains,
                                                                     run.model->spec)));
    }
    CHECK(res.report.all_ok());
    CHECK(res.report.max_theta_increase == 0.0);
}

TEST_CASE("monitors flag corrupted samples at the exact index") {
    Scenario s = aircraft_preset();
    s.integrator.horizon = 3.0;
    const PreparedRun run = prepare(s);
    const SimulationResult res = simulate(*run.model, run.initial, s.integrator);
    REQUIRE(res.report.all_ok());

    Trajectory t = res.trajectory;
    t.samples[123].v_theta += 1e-3;
    MonitorReport rep = evaluate_monitors(t, *run.model);
    CHECK_FALSE(rep.theta_ok);
    CHECK(rep.theta_violation == std::optional<std::size_t>(123));

    t = res.trajectory;
    t.samples[77].v_phi = 1e6;
    rep = evaluate_monitors(t, *run.model);
    CHECK_FALSE(rep.phi_ok);
    CHECK(rep.phi_violation == std::optional<std::size_t>(77));

    t = res.trajectory;
    t.samples[200].norm_x = 6.5;
    rep = evaluate_monitors(t, *run.model);
    CHECK_FALSE(rep.state_ok);
    CHECK(rep.input_ok);

    t = res.trajectory;
    t.samples[10].norm_khat = 5.0 + 1e-6;
    CHECK_FALSE(evaluate_monitors(t, *run.model).projection_ok);

    t.samples.clear();
    CHECK_THROWS_AS(evaluate_monitors(t, *run.model), Error);
}

TEST_CASE("inadmissible initial states are listed individually") {
    const PreparedRun run = prepare(aircraft_preset());
    const ClosedLoopModel& model = *run.model;
    CHECK(invalid_message(run.initial, model).empty());

    AugmentedState s = run.initial;
    s.u = Vector{1.0, 0.0};
    s.u_dot = Vector{0.0, 0.7};
    s.x = Vector{3.0, 0.0, 0.0, 0.0};
    s.khat_x = Matrix(2, 4);
    s.khat_x(0, 0) = 6.0;
    std::string msg = invalid_message(s, model);
    CHECK(msg.find("u(0)") != std::string::npos);
    CHECK(msg.find("u_dot(0)") != std::string::npos);
    CHECK(msg.find("e_d(0)") != std::string::npos);
    CHECK(msg.find("Khat_x(0)") != std::string::npos);
    CHECK(msg.find("e1(0)") == std::string::npos);

    s = run.initial;
    s.e1 = Vector{0.0, 0.01, 0.0, 0.0};
    msg = invalid_message(s, model);
    CHECK(msg.find("e1(0)") != std::string::npos);
    CHECK(msg.find("u(0)") == std::string::npos);

    s = run.initial;
    s.u = Vector{1.0, 0.0};
    CHECK_THROWS_AS(simulate(model, s, SimulationOptions{}), Error);
}

TEST_CASE("step failure names the barrier") {
    const PreparedRun run = prepare(aircraft_preset());
    AugmentedState s = run.initial;
    s.u = Vector{0.9999 * run.model->spec.u1_primed, 0.0};
    s.u_dot = Vector{0.5, 0.0};
    try {
        rk4_step(s, 0.05, *run.model, 0.02);
        FAIL("expected a step failure");
    } catch (const StepFailure& e) {
        CHECK(e.barrier() == "input");
        CHECK(std::string(e.what()).find("input") != std::string::npos);
    }
    // With a small enough floor the halving recovers.
    CHECK_NOTHROW(rk4_step(s, 0.05, *run.model, 1e-9));
}

TEST_CASE("barrier invariance on randomised feasible scenarios") {
    Rng rng(54);
    int runs = 0;
    while (runs < 6) {
        Scenario s = aircraft_preset();
        s.integrator.horizon = 8.0;
        s.gains.gamma_x = rng.uniform(0.5, 20.0) * Matrix::identity(2);
        s.gains.gamma_u = rng.uniform(0.5, 10.0) * Matrix::identity(2);
        s.gains.sigma_x = rng.uniform(0.2, 3.0);
        s.x_bar = rng.uniform(6.0, 12.0);
        s.u1_bar = rng.uniform(0.5, 1.0);
        s.u2_bar = rng.uniform(0.3, 1.0);
        s.disturbance.peak = rng.uniform(0.0, 0.99);
        const PreparedRun run = prepare(s);
        if (!run.feasibility.feasible() || !run.model) continue;
        const ClosedLoopModel& model = *run.model;
        AugmentedState init = run.initial;
        init.u = Vector{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
        init.u *= s.u1_bar;
        init.u_dot = Vector{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
        init.u_dot *= s.u2_bar;
        init.ku = rng.matrix(2, 2);
        const SimulationResult res = simulate(model, init, s.integrator);
        CHECK(res.report.max_ratio_u < 1.0);
        CHECK(res.report.max_ratio_u_dot < 1.0);
        CHECK(res.report.max_ratio_ed < 1.0);
        CHECK(res.report.state_ok);
        CHECK(res.report.theta_ok);
        CHECK(res.report.projection_ok);
        for (const auto& sample : res.trajectory.samples) {
            CHECK(vec_diff(sample.state.tracking_error(), sample.state.difference_error() + sample.state.e1) < 1e-14);
        }
        ++runs;
    }
}

TEST_CASE("robust MRAC baseline breaks a constraint") {
    Scenario s = aircraft_baseline_preset();
    const PreparedRun run = prepare(s);
    const ClosedLoopModel model = with_controller(run, ControllerKind::RobustMrac);
    const SimulationResult res = simulate(model, run.initial, s.integrator);
    CHECK_FALSE(res.report.constraints_ok());
    CHECK_FALSE(res.report.lyapunov_applicable);
    for (const auto& sample : res.trajectory.samples) {
        CHECK(sample.v_theta == 0.0);
        CHECK(sample.v_phi == 0.0);
    }
}

TEST_CASE("repeated runs are bit-identical") {
    Scenario s = aircraft_preset();
    s.integrator.horizon = 4.0;
    s.disturbance.kind = DisturbanceKind::RandomSmooth;
    s.disturbance.channels.clear();
    s.disturbance.components = 4;
    s.disturbance.max_omega = 3.0;
    s.seed = 7;
    const PreparedRun a = prepare(s);
    const PreparedRun b = prepare(s);
    const SimulationResult ra = simulate(*a.model, a.initial, s.integrator);
    const SimulationResult rb = simulate(*b.model, b.initial, s.integrator);
    REQUIRE(ra.trajectory.samples.size() == rb.trajectory.samples.size());
    for (std::size_t k = 0; k < ra.trajectory.samples.size(); ++k) {
        CHECK(ra.trajectory.samples[k].state.pack() == rb.trajectory.samples[k].state.pack());
    }
    s.seed = 8;
    const PreparedRun c = prepare(s);
    const SimulationResult rc = simulate(*c.model, c.initial, s.integrator);
    CHECK(rc.final_state.pack() != ra.final_state.pack());
}
