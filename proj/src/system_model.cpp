#include "blfmrac/system_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "blfmrac/errors.hpp"
#include "blfmrac/linalg.hpp"
#include "blfmrac/tolerances.hpp"

namespace blfmrac {

namespace {

void require_dim(std::size_t got, std::size_t want, const char* what) {
    if (got != want) {
        fail(ErrorKind::InvalidInput, std::string(what) + ": expected dimension " + std::to_string(want) +
                                          ", got " + std::to_string(got));
    }
}

Vector rk4_linear(const Matrix& a, const Matrix& b, const Vector& x, const ReferenceSignal& sig,
                  double t, double dt) {
    auto f = [&](double tt, const Vector& s) { return a * s + b * sig.value(tt); };
    const Vector k1 = f(t, x);
    const Vector k2 = f(t + 0.5 * dt, x + (0.5 * dt) * k1);
    const Vector k3 = f(t + 0.5 * dt, x + (0.5 * dt) * k2);
    const Vector k4 = f(t + dt, x + dt * k3);
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

std::vector<std::string> PlantModel::validate() const {
    if (a.empty() || !a.is_square()) fail(ErrorKind::InvalidInput, "plant.A must be a nonempty square matrix");
    if (b.rows() != a.rows() || b.cols() == 0) {
        fail(ErrorKind::InvalidInput, "plant.B must have as many rows as plant.A");
    }
    if (!a.all_finite() || !b.all_finite()) fail(ErrorKind::InvalidInput, "plant matrices must be finite");
    if (!(d_bar >= 0.0) || !std::isfinite(d_bar)) fail(ErrorKind::InvalidInput, "plant.d_bar must be >= 0");
    left_pseudo_inverse(b);  // rank check

    std::vector<std::string> warnings;
    if (!is_hurwitz(a)) {
        warnings.emplace_back("plant.A is not Hurwitz; feasibility guarantees assume a stable plant");
    }
    return warnings;
}

ReferenceModel ReferenceModel::make(Matrix ar, Matrix br, Matrix q) {
    if (ar.empty() || !ar.is_square()) fail(ErrorKind::InvalidInput, "reference.Ar must be square");
    if (br.rows() != ar.rows()) fail(ErrorKind::InvalidInput, "reference.Br must have as many rows as Ar");
    if (q.rows() != ar.rows() || !q.is_square()) fail(ErrorKind::InvalidInput, "reference.Q must match Ar");
    Matrix p = solve_lyapunov(ar, q);
    return {std::move(ar), std::move(br), std::move(q), std::move(p)};
}

double SinusoidChannel::value(double t) const {
    const double arg = omega * t + phase;
    return amplitude * (wave == Waveform::Sin ? std::sin(arg) : std::cos(arg));
}

double SinusoidChannel::derivative(double t) const {
    const double arg = omega * t + phase;
    return amplitude * omega * (wave == Waveform::Sin ? std::cos(arg) : -std::sin(arg));
}

Vector ReferenceSignal::value(double t) const {
    switch (kind) {
        case ReferenceKind::Zero: return Vector(dim);
        case ReferenceKind::Constant: return constant;
        case ReferenceKind::Sinusoid: {
            Vector r(channels.size());
            for (std::size_t i = 0; i < channels.size(); ++i) r[i] = channels[i].value(t);
            return r;
        }
    }
    return Vector(dim);
}

Vector ReferenceSignal::derivative(double t) const {
    if (kind != ReferenceKind::Sinusoid) return Vector(dim);
    Vector r(channels.size());
    for (std::size_t i = 0; i < channels.size(); ++i) r[i] = channels[i].derivative(t);
    return r;
}

double ReferenceSignal::bound() const {
    switch (kind) {
        case ReferenceKind::Zero: return 0.0;
        case ReferenceKind::Constant: return constant.norm();
        case ReferenceKind::Sinusoid: {
            double s = 0.0;
            for (const auto& c : channels) s += c.amplitude * c.amplitude;
            return std::sqrt(s);
        }
    }
    return 0.0;
}

ReferenceSignal ReferenceSignal::zero(std::size_t dim) {
    ReferenceSignal r;
    r.dim = dim;
    return r;
}

double sinusoid_vector_peak(const std::vector<SinusoidChannel>& channels) {
    double omega_min = std::numeric_limits<double>::infinity();
    double omega_max = 0.0;
    for (const auto& c : channels) {
        if (c.amplitude == 0.0) continue;
        const double w = std::abs(c.omega);
        if (w > 0.0) omega_min = std::min(omega_min, w);
        omega_max = std::max(omega_max, w);
    }
    auto norm_at = [&](double t) {
        double s = 0.0;
        for (const auto& c : channels) {
            const double v = c.value(t);
            s += v * v;
        }
        return std::sqrt(s);
    };
    if (!std::isfinite(omega_min)) return norm_at(0.0);

    const double period = 2.0 * std::numbers::pi / omega_min;
    const double per_fast = omega_max * period / (2.0 * std::numbers::pi);
    const auto samples = static_cast<std::size_t>(std::clamp(per_fast * 400.0, 20000.0, 2.0e6));
    const double h = period / static_cast<double>(samples);
    double best = -1.0;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i <= samples; ++i) {
        const double v = norm_at(h * static_cast<double>(i));
        if (v > best) {
            best = v;
            best_i = i;
        }
    }
    // Golden-section refinement on the bracketing cell pair.
    double lo = h * (static_cast<double>(best_i) - 1.0);
    double hi = h * (static_cast<double>(best_i) + 1.0);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = hi - g * (hi - lo);
    double d = lo + g * (hi - lo);
    double fc = norm_at(c);
    double fd = norm_at(d);
    for (int it = 0; it < 100 && hi - lo > 1e-14 * (1.0 + std::abs(hi)); ++it) {
        if (fc > fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = norm_at(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = norm_at(d);
        }
    }
    return std::max({best, fc, fd});
}

DisturbanceSignal DisturbanceSignal::zero(std::size_t dim) {
    DisturbanceSignal d;
    d.dim_ = dim;
    return d;
}

DisturbanceSignal DisturbanceSignal::sinusoid(std::vector<SinusoidChannel> channels, double peak) {
    if (!(peak >= 0.0)) fail(ErrorKind::InvalidInput, "disturbance peak must be >= 0");
    DisturbanceSignal d;
    d.kind_ = DisturbanceKind::Sinusoid;
    d.dim_ = channels.size();
    d.peak_ = peak;
    d.normaliser_ = sinusoid_vector_peak(channels);
    d.channels_ = std::move(channels);
    if (d.normaliser_ <= 0.0) d.normaliser_ = 1.0;
    return d;
}

DisturbanceSignal DisturbanceSignal::random_smooth(std::size_t dim, std::size_t components,
                                                   double max_omega, double peak, std::uint64_t seed) {
    if (!(peak >= 0.0)) fail(ErrorKind::InvalidInput, "disturbance peak must be >= 0");
    if (components == 0 || !(max_omega > 0.0)) {
        fail(ErrorKind::InvalidInput, "random-smooth disturbance needs components >= 1 and max_omega > 0");
    }
    DisturbanceSignal d;
    d.kind_ = DisturbanceKind::RandomSmooth;
    d.dim_ = dim;
    d.peak_ = peak;
    d.components_ = components;
    d.max_omega_ = max_omega;
    d.seed_ = seed;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> amp(0.5, 1.0);
    std::uniform_real_distribution<double> freq(0.05 * max_omega, max_omega);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    double rss = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        double channel_sum = 0.0;
        for (std::size_t k = 0; k < components; ++k) {
            SinusoidChannel term{Waveform::Sin, amp(rng), 0.0, 0.0};
            term.omega = freq(rng);
            term.phase = phase(rng);
            channel_sum += term.amplitude;
            d.terms_.push_back(term);
        }
        rss += channel_sum * channel_sum;
    }
    d.normaliser_ = rss > 0.0 ? std::sqrt(rss) : 1.0;
    return d;
}

Vector DisturbanceSignal::raw(double t) const {
    Vector w(dim_);
    switch (kind_) {
        case DisturbanceKind::Zero: break;
        case DisturbanceKind::Sinusoid:
            for (std::size_t i = 0; i < dim_; ++i) w[i] = channels_[i].value(t);
            break;
        case DisturbanceKind::RandomSmooth:
            for (std::size_t i = 0; i < dim_; ++i) {
                double s = 0.0;
                for (std::size_t k = 0; k < components_; ++k) s += terms_[i * components_ + k].value(t);
                w[i] = s;
            }
            break;
    }
    return w;
}

Vector DisturbanceSignal::value(double t) const {
    if (kind_ == DisturbanceKind::Zero) return Vector(dim_);
    return (peak_ / normaliser_) * raw(t);
}

MatchedGains matched_gains(const PlantModel& plant, const ReferenceModel& ref) {
    const Matrix bpinv = left_pseudo_inverse(plant.b);
    MatchedGains g;
    g.kx = bpinv * (ref.ar - plant.a);
    g.kr = bpinv * ref.br;
    g.residual_a = spectral_norm(plant.a + plant.b * g.kx - ref.ar);
    g.residual_b = spectral_norm(plant.b * g.kr - ref.br);
    g.matched = g.residual_a <= tol::kMatchingResidual && g.residual_b <= tol::kMatchingResidual;
    return g;
}

Vector plant_derivative(const PlantModel& plant, const Vector& x, const Vector& u, const Vector& d) {
    require_dim(x.size(), plant.a.cols(), "plant_derivative x");
    require_dim(u.size(), plant.b.cols(), "plant_derivative u");
    require_dim(d.size(), plant.a.rows(), "plant_derivative d");
    Vector dx = plant.a * x;
    dx += plant.b * u;
    dx += d;
    return dx;
}

Vector reference_derivative(const ReferenceModel& ref, const Vector& xr, const Vector& r) {
    require_dim(xr.size(), ref.ar.cols(), "reference_derivative x_r");
    require_dim(r.size(), ref.br.cols(), "reference_derivative r");
    Vector dx = ref.ar * xr;
    dx += ref.br * r;
    return dx;
}

ReferenceBoundReport verify_reference_bound(const ReferenceModel& ref, const ReferenceSignal& sig,
                                            double horizon, double x_bar_r, double dt) {
    if (!(horizon > 0.0) || !(dt > 0.0)) fail(ErrorKind::InvalidInput, "verify_reference_bound: horizon and dt must be > 0");
    Vector xr(ref.ar.rows());
    double sup = 0.0;
    const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt));
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        xr = rk4_linear(ref.ar, ref.br, xr, sig, t, std::min(dt, horizon - t));
        sup = std::max(sup, xr.norm());
    }
    return {sup, x_bar_r, sup < x_bar_r};
}

}  // namespace blfmrac
