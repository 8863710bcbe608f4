#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "blfmrac/controller.hpp"
#include "blfmrac/errors.hpp"
#include "blfmrac/gradcheck.hpp"
#include "blfmrac/linalg.hpp"
#include "blfmrac/scenario.hpp"
#include "test_helpers.hpp"

using namespace blfmrac;
using namespace testing;

namespace {

ConstraintSpec aircraft_spec(const Matrix& p, double ed_bar = 0.9) {
    return ConstraintSpec::make(6.0, 1.0, 0.6, Matrix::identity(2), 2.0, ed_bar, p);
}

Matrix aircraft_p() { return solve_lyapunov(ref_ar(), Matrix::identity(4)); }

AdaptiveGains aircraft_gains() {
    AdaptiveGains g;
    g.gamma_x = 5.0 * Matrix::identity(2);
    g.gamma_u = 2.0 * Matrix::identity(2);
    g.sigma_x = 1.0;
    g.kx_bar = 5.0;
    g.kr_bar = 10.0;
    return g;
}

template <typename F>
std::optional<std::string> breach_name(F&& fn) {
    try {
        fn();
    } catch (const BarrierBreach& e) {
        return e.barrier();
    }
    return std::nullopt;
}

// State a few seconds into the aircraft run, for oracle re-evaluation.
struct Snapshot {
    PreparedRun run;
    AugmentedState state;
};

const Snapshot& snapshot() {
    static const Snapshot snap = [] {
        Scenario s = aircraft_preset();
        s.integrator.horizon = 7.3;
        Snapshot out{prepare(s), {}};
        out.state = simulate(*out.run.model, out.run.initial, s.integrator).final_state;
        return out;
    }();
    return snap;
}

}  // namespace

TEST_CASE("ConstraintSpec derives the primed bounds") {
    const Matrix m{{2, 0}, {0, 0.5}};
    const Matrix p = aircraft_p();
    const ConstraintSpec s = ConstraintSpec::make(6.0, 1.0, 0.6, m, 2.0, 0.9, p);
    CHECK(s.lambda_min_m == doctest::Approx(0.5));
    CHECK(s.u1_primed == doctest::Approx(std::sqrt(0.5)));
    CHECK(s.u2_primed == doctest::Approx(0.6 * std::sqrt(0.5)));
    CHECK(s.e_bar == doctest::Approx(4.0));
    CHECK(s.ed_primed == doctest::Approx(0.9 * std::sqrt(symmetric_eig_extremes(p).lambda_min)));

    CHECK_THROWS_AS(ConstraintSpec::make(2.0, 1.0, 0.6, m, 2.0, 0.9, p), Error);
    CHECK_THROWS_AS(ConstraintSpec::make(6.0, 0.0, 0.6, m, 2.0, 0.9, p), Error);
    CHECK_THROWS_AS(ConstraintSpec::make(6.0, 1.0, 0.6, Matrix{{1, 0}, {0, -1}}, 2.0, 0.9, p), Error);
    CHECK_THROWS_AS(ConstraintSpec::make(6.0, 1.0, 0.6, m, 2.0, -0.9, p), Error);
}

TEST_CASE("AdaptiveGains validation") {
    AdaptiveGains g = aircraft_gains();
    CHECK_NOTHROW(g.validate(2));
    CHECK_THROWS_AS(g.validate(3), Error);
    g.sigma_x = 0.0;
    CHECK_THROWS_AS(g.validate(2), Error);
    g = aircraft_gains();
    g.gamma_u = Matrix{{1, 2}, {0, 1}};
    CHECK_THROWS_AS(g.validate(2), Error);
}

TEST_CASE("auxiliary_input") {
    CHECK(auxiliary_input(Matrix(2, 4), Matrix::identity(2), Vector(4), Vector(2)).squared_norm() == 0.0);
    const Vector v = auxiliary_input(Matrix(2, 4), Matrix::identity(2), Vector(4), Vector{1, 2});
    CHECK(v[0] == 1.0);
    CHECK(v[1] == 2.0);
    CHECK_THROWS_AS(auxiliary_input(Matrix(2, 3), Matrix::identity(2), Vector(4), Vector(2)), Error);

    const auto& snap = snapshot();
    const Vector r = snap.run.model->reference_signal.value(snap.state.t);
    const Vector got = auxiliary_input(snap.state.khat_x, snap.run.model->kr, snap.state.x, r);
    const Vector expected = naive_mul(snap.state.khat_x, snap.state.x) + naive_mul(snap.run.model->kr, r);
    CHECK(vec_diff(got, expected) < 1e-14);
}

TEST_CASE("alpha_coupling examples") {
    const ConstraintSpec spec = aircraft_spec(aircraft_p());
    CHECK(alpha_coupling(Vector(2), Vector(2), spec) == doctest::Approx(0.36));
    CHECK(alpha_coupling(Vector{std::sqrt(0.5), 0.0}, Vector(2), spec) == doctest::Approx(0.72));
    CHECK(alpha_coupling(Vector{0.8, 0.0}, Vector{0.0, std::sqrt(0.18)}, spec) == doctest::Approx(0.5));

    CHECK(breach_name([&] { alpha_coupling(Vector{1.0, 0.0}, Vector(2), spec); }) == "input");
    CHECK(breach_name([&] { alpha_coupling(Vector(2), Vector{0.0, 0.6}, spec); }) == "input-rate");
    CHECK(breach_name([&] { alpha_coupling(Vector{0.0, 1.0 - 1e-12}, Vector(2), spec); }) == "input");
}

TEST_CASE("alpha_coupling is positive in the open admissible region") {
    Rng rng(31);
    const ConstraintSpec spec = aircraft_spec(aircraft_p());
    for (int k = 0; k < 1000; ++k) {
        const Vector u = std::sqrt(rng.uniform(0, 0.999)) * spec.u1_primed * (1.0 / std::sqrt(2.0)) * Vector{1, 1};
        Vector ud = rng.vector(2);
        ud *= rng.uniform(0, 0.999) * spec.u2_primed / ud.norm();
        CHECK(alpha_coupling(u, ud, spec) > 0.0);
    }
}

TEST_CASE("controller_accel") {
    const ConstraintSpec spec = aircraft_spec(aircraft_p());
    const ControllerState zero{Vector(2), Vector(2), Matrix(2, 4), Matrix(2, 2)};
    CHECK(controller_accel(zero, Vector(2), spec).squared_norm() == 0.0);
    const ControllerState unit{Vector(2), Vector(2), Matrix(2, 4), Matrix::identity(2)};
    const Vector a = controller_accel(unit, Vector{1, 0}, spec);
    CHECK(a[0] == 1.0);
    CHECK(a[1] == 0.0);

    const auto& snap = snapshot();
    const auto& st = snap.state;
    const ConstraintSpec& sspec = snap.run.model->spec;
    const Vector v = auxiliary_input(st.khat_x, snap.run.model->kr, st.x, snap.run.model->reference_signal.value(st.t));
    const ControllerState cs{st.u, st.u_dot, st.khat_x, st.ku};
    const long double b1 = static_cast<long double>(sspec.u1_primed) * sspec.u1_primed;
    const long double b2 = static_cast<long double>(sspec.u2_primed) * sspec.u2_primed;
    const long double alpha = (b2 - naive_quad(st.u_dot, sspec.m)) / (b1 - naive_quad(st.u, sspec.m));
    const Vector kv = naive_mul(st.ku, v);
    Vector expected(2);
    for (std::size_t i = 0; i < 2; ++i) {
        expected[i] = static_cast<double>(kv[i] - st.u_dot[i] - alpha * st.u[i]);
    }
    CHECK(vec_diff(controller_accel(cs, v, sspec), expected) < 1e-13);
}

TEST_CASE("khat_x_derivative examples") {
    const Matrix p = aircraft_p();
    const ConstraintSpec spec = aircraft_spec(p);
    const AdaptiveGains gains = aircraft_gains();
    const Matrix b = plant_b();
    CHECK(khat_x_derivative(Matrix(2, 4), Vector(4), Vector{1, 2, 3, 4}, b, p, gains, spec).max_abs() == 0.0);

    // σ_x = 0 and a small estimate: projection must leave the raw term untouched.
    AdaptiveGains g0 = gains;
    g0.sigma_x = 0.0;
    const Vector ed{0.1, -0.05, 0.02, 0.03};
    const Vector x{0.3, -0.2, 0.1, 0.4};
    Matrix khat(2, 4);
    khat(0, 1) = 0.1;
    const double den = spec.ed_primed * spec.ed_primed - naive_quad(ed, p);
    const Vector btpe = naive_mul(b.transpose(), naive_mul(p, ed));
    Matrix raw = naive_mul(g0.gamma_x, outer(btpe, x));
    raw *= -1.0 / den;
    CHECK(mat_diff(khat_x_derivative(khat, ed, x, b, p, g0, spec), raw) < 1e-14);

    CHECK(breach_name([&] {
              khat_x_derivative(khat, 10.0 * Vector{1, 1, 1, 1}, x, b, p, gains, spec);
          }) == "difference-error");
}

TEST_CASE("khat_x_derivative on the projection boundary does not grow the norm") {
    const Matrix p = aircraft_p();
    const ConstraintSpec spec = aircraft_spec(p);
    AdaptiveGains gains = aircraft_gains();
    gains.sigma_x = 0.0;
    Rng rng(32);
    int outward = 0;
    for (int k = 0; k < 300; ++k) {
        Matrix khat = rng.matrix(2, 4);
        khat *= gains.kx_bar / khat.frobenius_norm();
        Vector ed = rng.vector(4);
        ed *= 0.5 * spec.ed_primed / std::sqrt(quad_form(ed, p));
        const Vector x = rng.vector(4);
        const Matrix b = plant_b();
        const Vector btpe = naive_mul(b.transpose(), naive_mul(p, ed));
        const Matrix raw_dir = outer(btpe, x);
        if (frobenius_inner(-1.0 * raw_dir, khat) > 0.0) ++outward;
        const Matrix d = khat_x_derivative(khat, ed, x, b, p, gains, spec);
        CHECK(frobenius_inner(d, khat) <= 1e-12);
    }
    CHECK(outward > 50);
}

TEST_CASE("projection radial property and layer attenuation") {
    Rng rng(33);
    const double kbar = 2.0;
    for (int k = 0; k < 500; ++k) {
        Matrix khat = rng.matrix(2, 3);
        khat *= kbar / khat.frobenius_norm();
        Matrix d = rng.matrix(2, 3);
        if (frobenius_inner(d, khat) <= 0.0) d *= -1.0;
        const Matrix out = project_gain_rate(khat, d, kbar);
        CHECK(frobenius_inner(out, khat) <= 1e-12);

        // Inward rates pass unchanged.
        CHECK(mat_diff(project_gain_rate(khat, -1.0 * d, kbar), -1.0 * d) == 0.0);
    }
    // Halfway through the layer the outward component is halved.
    Matrix khat(1, 1);
    khat(0, 0) = std::sqrt(0.95) * kbar;
    Matrix d(1, 1);
    d(0, 0) = 1.0;
    CHECK(project_gain_rate(khat, d, kbar)(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    // Strictly inside the layer nothing changes.
    khat(0, 0) = 0.5 * kbar;
    CHECK(project_gain_rate(khat, d, kbar)(0, 0) == 1.0);
}

TEST_CASE("ku_derivative") {
    const ConstraintSpec spec = aircraft_spec(aircraft_p());
    const AdaptiveGains gains = aircraft_gains();
    CHECK(ku_derivative(Vector(2), Vector{1, 2}, gains, spec).max_abs() == 0.0);
    CHECK(ku_derivative(Vector{0.1, 0.2}, Vector(2), gains, spec).max_abs() == 0.0);
    CHECK(breach_name([&] { ku_derivative(Vector{0.6, 0.0}, Vector{1, 1}, gains, spec); }) == "input-rate");

    const auto& snap = snapshot();
    const auto& st = snap.state;
    const ConstraintSpec& sspec = snap.run.model->spec;
    const Vector v = auxiliary_input(st.khat_x, snap.run.model->kr, st.x, snap.run.model->reference_signal.value(st.t));
    const double den = sspec.u2_primed * sspec.u2_primed - naive_quad(st.u_dot, sspec.m);
    Matrix expected = naive_mul(snap.run.model->gains.gamma_u, outer(naive_mul(sspec.m, st.u_dot), v));
    expected *= -1.0 / den;
    CHECK(mat_diff(ku_derivative(st.u_dot, v, snap.run.model->gains, sspec), expected) < 1e-13);
}

TEST_CASE("blf_values") {
    const Matrix p = aircraft_p();
    const ConstraintSpec spec = aircraft_spec(p);
    const BlfValues zero = blf_values(Vector(4), Vector(2), Vector(2), p, spec);
    CHECK(zero.v1 == 0.0);
    CHECK(zero.v2 == 0.0);
    CHECK(zero.v3 == 0.0);

    const double r = spec.u1_primed * std::sqrt(1.0 - std::exp(-2.0));
    CHECK(blf_values(Vector(4), Vector{r, 0.0}, Vector(2), p, spec).v2 == doctest::Approx(1.0).epsilon(1e-12));

    // Near the boundary: compare against an extended-precision evaluation.
    const double b3 = spec.u2_primed * spec.u2_primed;
    const Vector ud{0.0, std::sqrt(0.999999 * b3)};
    const double v3 = blf_values(Vector(4), Vector(2), ud, p, spec).v3;
    const long double q = static_cast<long double>(ud[1]) * ud[1];
    const long double expected = oracle::barrier_value(q, static_cast<long double>(b3));
    CHECK(std::isfinite(v3));
    CHECK(v3 > 6.0);
    CHECK(v3 == doctest::Approx(static_cast<double>(expected)).epsilon(1e-9));

    CHECK(breach_name([&] { blf_values(Vector(4), Vector{1.0, 0.0}, Vector(2), p, spec); }) == "input");
    CHECK(breach_name([&] { blf_values(Vector(4), Vector{2.0, 0.0}, Vector(2), p, spec); }) == "input");
}

TEST_CASE("barrier values are monotone along rays and match long double") {
    Rng rng(34);
    for (int k = 0; k < 100; ++k) {
        const std::size_t n = rng.index(1, 5);
        const Matrix w = rng.spd(n);
        const double b = rng.uniform(0.1, 3.0);
        Vector dir = rng.vector(n);
        dir *= 1.0 / std::sqrt(quad_form(dir, w));
        double prev = -1.0;
        for (int s = 0; s <= 50; ++s) {
            const double scale = std::sqrt(b) * 0.999 * s / 50.0;
            const Vector z = scale * dir;
            const double v = barrier_value(z, w, b, "ray");
            CHECK(v >= 0.0);
            CHECK(v > prev);
            prev = v;
            const long double q = static_cast<long double>(scale) * scale;
            CHECK(v == doctest::Approx(static_cast<double>(oracle::barrier_value(q, b))).epsilon(1e-10));
        }
    }
}

TEST_CASE("composite Lyapunov functions") {
    const Matrix p = aircraft_p();
    const ConstraintSpec spec = aircraft_spec(p);
    const AdaptiveGains gains = aircraft_gains();
    const ControllerState zero{Vector(2), Vector(2), Matrix(2, 4), Matrix(2, 2)};
    CHECK(composite_lyapunov_theta(zero, gains, spec) == 0.0);
    const ControllerState unit{Vector(2), Vector(2), Matrix(2, 4), Matrix::identity(2)};
    CHECK(composite_lyapunov_theta(unit, gains, spec) == doctest::Approx(0.5));

    CHECK(composite_lyapunov_phi(Vector(4), Matrix(2, 4), p, gains, spec) == 0.0);
    AdaptiveGains g2 = gains;
    g2.gamma_x = 2.0 * Matrix::identity(2);
    Matrix ktilde(2, 4);
    ktilde(0, 0) = 1.0;
    ktilde(1, 1) = 1.0;
    CHECK(composite_lyapunov_phi(Vector(4), ktilde, p, g2, spec) == doctest::Approx(0.5));

    const auto& snap = snapshot();
    const auto& st = snap.state;
    const ConstraintSpec& sspec = snap.run.model->spec;
    const AdaptiveGains& sg = snap.run.model->gains;
    // Γ_u = 2I and Γ_x = 5I, so the trace terms reduce to scaled Frobenius sums.
    long double ku2 = 0, kt2 = 0;
    const Matrix kt = st.khat_x - snap.run.model->kx_true;
    for (std::size_t i = 0; i < st.ku.size(); ++i) ku2 += static_cast<long double>(st.ku.values()[i]) * st.ku.values()[i];
    for (std::size_t i = 0; i < kt.size(); ++i) kt2 += static_cast<long double>(kt.values()[i]) * kt.values()[i];
    const long double theta =
        oracle::barrier_value(naive_quad(st.u, sspec.m), static_cast<long double>(sspec.u1_primed) * sspec.u1_primed) +
        oracle::barrier_value(naive_quad(st.u_dot, sspec.m),
                              static_cast<long double>(sspec.u2_primed) * sspec.u2_primed) +
        0.5L * ku2 / 2.0L;
    CHECK(composite_lyapunov_theta({st.u, st.u_dot, st.khat_x, st.ku}, sg, sspec) ==
          doctest::Approx(static_cast<double>(theta)).epsilon(1e-12));
    const Vector ed = st.difference_error();
    const long double phi =
        oracle::barrier_value(naive_quad(ed, snap.run.reference.p),
                              static_cast<long double>(sspec.ed_primed) * sspec.ed_primed) +
        0.5L * kt2 / 5.0L;
    CHECK(composite_lyapunov_phi(ed, kt, snap.run.reference.p, sg, sspec) ==
          doctest::Approx(static_cast<double>(phi)).epsilon(1e-12));
}

TEST_CASE("assembled V_theta rate equals the closed form at 100 random interior points") {
    Rng rng(35);
    for (int k = 0; k < 100; ++k) {
        const std::size_t m = rng.index(1, 4);
        const ConstraintSpec spec =
            ConstraintSpec::make(6.0, rng.uniform(0.3, 2.0), rng.uniform(0.3, 2.0), rng.spd(m), 2.0, 1.0, aircraft_p());
        AdaptiveGains g;
        g.gamma_x = rng.spd(m);
        g.gamma_u = rng.spd(m);
        g.sigma_x = 1.0;
        g.kx_bar = 1.0;
        g.kr_bar = 1.0;
        Vector u = rng.vector(m);
        u *= std::sqrt(rng.uniform(0.01, 0.95)) * spec.u1_primed / std::sqrt(quad_form(u, spec.m));
        Vector ud = rng.vector(m);
        ud *= std::sqrt(rng.uniform(0.01, 0.95)) * spec.u2_primed / std::sqrt(quad_form(ud, spec.m));
        const ControllerState st{u, ud, rng.matrix(m, 3), rng.matrix(m, m)};
        const Vector v = rng.vector(m);
        const double assembled = theta_rate_assembled(st, v, g, spec);
        const double closed = theta_rate_closed_form(ud, spec);
        CHECK(closed < 0.0);
        CHECK(std::abs(assembled - closed) <= 1e-9 * std::max(1.0, std::abs(closed)));
    }
}

TEST_CASE("robust_mrac_step") {
    const Matrix p = aircraft_p();
    const AdaptiveGains gains = aircraft_gains();
    Rng rng(36);
    const Matrix khat = rng.matrix(2, 4);
    const auto s0 = robust_mrac_step(khat, Vector(4), Vector(2), rng.vector(4), plant_b(), p, 5.0 * Matrix::identity(2),
                                     gains);
    CHECK(s0.u.squared_norm() == 0.0);
    CHECK(mat_diff(s0.khat_x_dot, -1.0 * naive_mul(gains.gamma_x, khat)) < 1e-14);

    const auto s1 =
        robust_mrac_step(Matrix(2, 4), rng.vector(4), rng.vector(2), Vector(4), plant_b(), p, Matrix::identity(2), gains);
    CHECK(s1.khat_x_dot.max_abs() == 0.0);
}

TEST_CASE("gradcheck diagnostic") {
    const GradcheckReport report = run_gradcheck({});
    CHECK(report.pass());
    REQUIRE(report.terms.size() == 5);
    for (const auto& t : report.terms) {
        CHECK(t.points == 100);
        CHECK(t.max_rel_error <= 1e-6);
    }
    for (auto [fault, name] : {std::pair{FaultInjection::V1, "V1"}, std::pair{FaultInjection::V2, "V2"},
                               std::pair{FaultInjection::V3, "V3"}, std::pair{FaultInjection::ThetaRate, "ThetaRate"}}) {
        GradcheckOptions opt;
        opt.inject = fault;
        const GradcheckReport bad = run_gradcheck(opt);
        CHECK_FALSE(bad.pass());
        bool named = false;
        for (const auto& t : bad.terms) {
            if (t.name == name) named = !t.pass;
        }
        CHECK(named);
        CHECK(format_gradcheck(bad).find(std::string(name) + " ") != std::string::npos);
    }
    CHECK(format_gradcheck(run_gradcheck({})) == format_gradcheck(run_gradcheck({})));
}
