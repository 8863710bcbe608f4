#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "blfmrac/errors.hpp"
#include "blfmrac/linalg.hpp"
#include "blfmrac/system_model.hpp"
#include "test_helpers.hpp"

using namespace blfmrac;
using namespace testing;

namespace {

ReferenceSignal aircraft_reference(double scale = 1.0) {
    ReferenceSignal r;
    r.kind = ReferenceKind::Sinusoid;
    r.dim = 2;
    r.channels = {{Waveform::Sin, 0.4 * scale, 0.1, 0.0}, {Waveform::Cos, 0.2 * scale, 0.05, 0.0}};
    return r;
}

std::vector<SinusoidChannel> aircraft_disturbance_channels() {
    return {{Waveform::Sin, 1, 2, 0}, {Waveform::Cos, 1, 3, 0}, {Waveform::Sin, 1, 1, 0}, {Waveform::Cos, 1, 2, 0}};
}

bool throws_kind(auto&& fn, ErrorKind kind) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind() == kind;
    }
    return false;
}

}  // namespace

TEST_CASE("plant validation") {
    PlantModel ok{plant_a(), plant_b(), 1.0};
    CHECK(ok.validate().empty());

    PlantModel unstable{Matrix{{1, 0}, {0, -1}}, Matrix::identity(2), 0.0};
    const auto warnings = unstable.validate();
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("Hurwitz") != std::string::npos);

    CHECK(throws_kind([] { PlantModel{Matrix::identity(2), Matrix::identity(2), -1.0}.validate(); },
                      ErrorKind::InvalidInput));
    CHECK(throws_kind([] { PlantModel{-1.0 * Matrix::identity(3), Matrix{{1, 2}, {2, 4}, {0, 0}}, 0.0}.validate(); },
                      ErrorKind::InvalidInput));
    CHECK(throws_kind([] { PlantModel{-1.0 * Matrix::identity(3), Matrix(2, 1), 0.0}.validate(); },
                      ErrorKind::InvalidInput));
}

TEST_CASE("reference model caches the Lyapunov solution") {
    const ReferenceModel ref = ReferenceModel::make(ref_ar(), ref_br(), Matrix::identity(4));
    CHECK(lyapunov_residual(ref.ar, ref.p, ref.q) < 1e-10);
    CHECK(throws_kind([] { ReferenceModel::make(Matrix{{1, 0}, {0, -1}}, Matrix::identity(2), Matrix::identity(2)); },
                      ErrorKind::InfeasibleModel));
}

TEST_CASE("matched_gains trivial case") {
    const PlantModel plant{-1.0 * Matrix::identity(2), Matrix::identity(2), 0.0};
    const ReferenceModel ref = ReferenceModel::make(-1.0 * Matrix::identity(2), Matrix::identity(2), Matrix::identity(2));
    const MatchedGains g = matched_gains(plant, ref);
    CHECK(mat_diff(g.kx, Matrix(2, 2)) == 0.0);
    CHECK(mat_diff(g.kr, Matrix::identity(2)) < 1e-15);
    CHECK(g.matched);
}

TEST_CASE("matched_gains on the aircraft example") {
    const PlantModel plant{plant_a(), plant_b(), 1.0};
    const ReferenceModel ref = ReferenceModel::make(ref_ar(), ref_br(), Matrix::identity(4));
    const MatchedGains g = matched_gains(plant, ref);
    CHECK(g.matched);
    CHECK(g.residual_a < 1e-8);
    CHECK(g.residual_b < 1e-8);
    CHECK(spectral_norm(g.kx) < 11.5);

    // Second implementation: B† = 25·Bᵀ for this B.
    Matrix pinv = plant_b().transpose();
    pinv *= 25.0;
    CHECK(mat_diff(g.kx, naive_mul(pinv, ref_ar() - plant_a())) < 1e-12);
    CHECK(mat_diff(g.kr, naive_mul(pinv, ref_br())) < 1e-12);
    CHECK(g.kr(0, 0) == doctest::Approx(5.0));
    CHECK(g.kr(1, 1) == doctest::Approx(10.0));
}

TEST_CASE("matched_gains flags a perturbation outside range(B)") {
    // range(B) is spanned by e₂ and e₄, so row 1 (e₁) is orthogonal to it.
    Matrix ar = ref_ar();
    ar(0, 0) -= 0.3;
    const PlantModel plant{plant_a(), plant_b(), 1.0};
    const ReferenceModel ref = ReferenceModel::make(ar, ref_br(), Matrix::identity(4));
    const MatchedGains g = matched_gains(plant, ref);
    CHECK_FALSE(g.matched);
    CHECK(g.residual_a == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(g.residual_b < 1e-8);
}

TEST_CASE("matched_gains reconstruction holds whenever matched") {
    Rng rng(21);
    for (int k = 0; k < 30; ++k) {
        const std::size_t n = rng.index(2, 6);
        const std::size_t m = rng.index(1, n);
        const Matrix b = rng.matrix(n, m);
        const Matrix kx = rng.matrix(m, n);
        const Matrix a = rng.hurwitz(n);
        const Matrix ar = a + b * kx;
        if (!is_hurwitz(ar)) continue;
        const PlantModel plant{a, b, 0.0};
        const ReferenceModel ref = ReferenceModel::make(ar, b * rng.matrix(m, m), Matrix::identity(n));
        const MatchedGains g = matched_gains(plant, ref);
        CHECK(g.matched);
        CHECK(spectral_norm(a + b * g.kx - ar) <= 1e-8);
    }
}

TEST_CASE("plant_derivative") {
    const PlantModel zero{plant_a(), plant_b(), 1.0};
    CHECK(plant_derivative(zero, Vector(4), Vector(2), Vector(4)).squared_norm() == 0.0);

    const PlantModel simple{Matrix::identity(2), Matrix::identity(2), 1.0};
    const Vector f = plant_derivative(simple, Vector{1, 0}, Vector{0, 1}, Vector{0.1, 0.1});
    CHECK(f[0] == doctest::Approx(1.1));
    CHECK(f[1] == doctest::Approx(1.1));

    CHECK(throws_kind([&] { plant_derivative(simple, Vector(3), Vector(2), Vector(2)); }, ErrorKind::InvalidInput));
    CHECK(throws_kind([&] { plant_derivative(simple, Vector(2), Vector(1), Vector(2)); }, ErrorKind::InvalidInput));
    CHECK(throws_kind([&] { plant_derivative(simple, Vector(2), Vector(2), Vector(5)); }, ErrorKind::InvalidInput));
}

TEST_CASE("plant_derivative matches a second implementation and is linear") {
    Rng rng(22);
    const PlantModel plant{plant_a(), plant_b(), 1.0};
    for (int k = 0; k < 50; ++k) {
        const Vector x1 = rng.vector(4), x2 = rng.vector(4), u = rng.vector(2), d = rng.vector(4);
        const Vector f = plant_derivative(plant, x1, u, d);
        const Vector oracle_f = naive_mul(plant_a(), x1) + naive_mul(plant_b(), u) + d;
        CHECK(vec_diff(f, oracle_f) < 1e-13);
        const Vector lhs = plant_derivative(plant, x1 + x2, u, d);
        const Vector rhs = plant_derivative(plant, x1, u, d) + plant_derivative(plant, x2, Vector(2), Vector(4));
        CHECK(vec_diff(lhs, rhs) < 1e-12);
    }
}

TEST_CASE("reference_derivative") {
    const ReferenceModel ref = ReferenceModel::make(ref_ar(), ref_br(), Matrix::identity(4));
    CHECK(reference_derivative(ref, Vector(4), Vector(2)).squared_norm() == 0.0);

    const ReferenceModel simple = ReferenceModel::make(-1.0 * Matrix::identity(2), Matrix::identity(2),
                                                       Matrix::identity(2));
    const Vector f = reference_derivative(simple, Vector{1, 1}, Vector{1, 0});
    CHECK(f[0] == doctest::Approx(0.0));
    CHECK(f[1] == doctest::Approx(-1.0));

    // From rest at t = 0 the rate is B_r r(0) with r(0) = [0, 0.2].
    const Vector r0 = aircraft_reference().value(0.0);
    CHECK(r0[0] == 0.0);
    CHECK(r0[1] == doctest::Approx(0.2));
    const Vector f0 = reference_derivative(ref, Vector(4), r0);
    CHECK(vec_diff(f0, Vector{0, 0, 0, 0.4}) < 1e-15);
}

TEST_CASE("reference signal values, derivatives and bound") {
    const ReferenceSignal r = aircraft_reference();
    CHECK(r.bound() == doctest::Approx(std::sqrt(0.2)).epsilon(1e-15));
    Rng rng(23);
    for (int k = 0; k < 100; ++k) {
        const double t = rng.uniform(0, 200);
        const Vector v = r.value(t);
        CHECK(v[0] == doctest::Approx(0.4 * std::sin(t / 10)));
        CHECK(v[1] == doctest::Approx(0.2 * std::cos(t / 20)));
        CHECK(v.norm() <= r.bound());
        const Vector dv = r.derivative(t);
        CHECK(dv[0] == doctest::Approx(0.04 * std::cos(t / 10)));
        CHECK(dv[1] == doctest::Approx(-0.01 * std::sin(t / 20)));
    }
    CHECK(ReferenceSignal::zero(3).value(1.0).squared_norm() == 0.0);
    CHECK(ReferenceSignal::zero(3).bound() == 0.0);
}

TEST_CASE("verify_reference_bound") {
    const ReferenceModel ref = ReferenceModel::make(ref_ar(), ref_br(), Matrix::identity(4));
    const auto zero = verify_reference_bound(ref, ReferenceSignal::zero(2), 10.0, 0.5);
    CHECK(zero.sup_norm == 0.0);
    CHECK(zero.pass);

    const auto nominal = verify_reference_bound(ref, aircraft_reference(), 60.0, 2.0);
    CHECK(nominal.pass);
    CHECK(nominal.sup_norm < 2.0);

    const auto scaled = verify_reference_bound(ref, aircraft_reference(100.0), 60.0, 2.0);
    CHECK_FALSE(scaled.pass);
    CHECK(scaled.sup_norm == doctest::Approx(100.0 * nominal.sup_norm).epsilon(1e-9));
}

TEST_CASE("sinusoid peak estimate matches a brute-force scan") {
    const auto chans = aircraft_disturbance_channels();
    const double est = sinusoid_vector_peak(chans);
    long double brute = 0;
    const std::size_t grid = 2000000;
    const long double period = 2 * 3.14159265358979323846L;  // all frequencies are integers
    for (std::size_t k = 0; k <= grid; ++k) {
        const long double t = period * k / grid;
        const long double w[4] = {std::sin(2 * t), std::cos(3 * t), std::sin(t), std::cos(2 * t)};
        brute = std::max(brute, std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2] + w[3] * w[3]));
    }
    CHECK(est == doctest::Approx(static_cast<double>(brute)).epsilon(1e-9));
}

TEST_CASE("disturbance never exceeds its bound at 1e5 random times") {
    Rng rng(24);
    const DisturbanceSignal sin_d = DisturbanceSignal::sinusoid(aircraft_disturbance_channels(), 0.99);
    const DisturbanceSignal rnd_d = DisturbanceSignal::random_smooth(4, 3, 5.0, 0.99, 7);
    double worst_sin = 0;
    double worst_rnd = 0;
    for (int k = 0; k < 100000; ++k) {
        const double t = rng.uniform(0, 1000);
        worst_sin = std::max(worst_sin, sin_d.value(t).norm());
        worst_rnd = std::max(worst_rnd, rnd_d.value(t).norm());
    }
    CHECK(worst_sin < 1.0);
    CHECK(worst_sin <= 0.99 * (1 + 1e-9));
    CHECK(worst_sin > 0.98);
    CHECK(worst_rnd <= 0.99);
    CHECK(DisturbanceSignal::zero(4).value(3.0).squared_norm() == 0.0);
}

TEST_CASE("random-smooth disturbance is seed deterministic") {
    const auto a = DisturbanceSignal::random_smooth(4, 3, 5.0, 0.5, 42);
    const auto b = DisturbanceSignal::random_smooth(4, 3, 5.0, 0.5, 42);
    const auto c = DisturbanceSignal::random_smooth(4, 3, 5.0, 0.5, 43);
    CHECK(a == b);
    CHECK(vec_diff(a.value(1.7), b.value(1.7)) == 0.0);
    CHECK(vec_diff(a.value(1.7), c.value(1.7)) > 0.0);
    CHECK(throws_kind([] { DisturbanceSignal::random_smooth(4, 0, 5.0, 0.5, 1); }, ErrorKind::InvalidInput));
    CHECK(throws_kind([] { DisturbanceSignal::sinusoid({}, -1.0); }, ErrorKind::InvalidInput));
}
