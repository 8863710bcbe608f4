#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blfmrac/matrix.hpp"

namespace blfmrac {

/// Plant ẋ = Ax + Bu + d. `a` is known to the simulator only.
struct PlantModel {
    Matrix a;
    Matrix b;
    double d_bar = 0.0;

    std::size_t state_dim() const { return b.rows(); }
    std::size_t input_dim() const { return b.cols(); }

    /// Throws on hard errors (shape, rank, negative d̄); returns warnings
    /// for soft ones such as a non-Hurwitz A.
    std::vector<std::string> validate() const;

    friend bool operator==(const PlantModel&, const PlantModel&) = default;
};

/// Reference model ẋ_r = A_r x_r + B_r r with its Lyapunov pair (Q, P).
struct ReferenceModel {
    Matrix ar;
    Matrix br;
    Matrix q;
    Matrix p;

    /// Validates A_r Hurwitz and Q SPD, and solves for P.
    static ReferenceModel make(Matrix ar, Matrix br, Matrix q);

    friend bool operator==(const ReferenceModel&, const ReferenceModel&) = default;
};

enum class Waveform { Sin, Cos };

/// amplitude · wave(omega·t + phase)
struct SinusoidChannel {
    Waveform wave = Waveform::Sin;
    double amplitude = 0.0;
    double omega = 0.0;
    double phase = 0.0;

    double value(double t) const;
    double derivative(double t) const;

    friend bool operator==(const SinusoidChannel&, const SinusoidChannel&) = default;
};

enum class ReferenceKind { Zero, Constant, Sinusoid };

struct ReferenceSignal {
    ReferenceKind kind = ReferenceKind::Zero;
    std::size_t dim = 0;
    std::vector<SinusoidChannel> channels;  // Sinusoid: one per input channel
    Vector constant;                        // Constant

    Vector value(double t) const;
    Vector derivative(double t) const;
    /// r̄: root-sum-square of amplitudes for sinusoids, ‖r‖ for constants.
    double bound() const;

    static ReferenceSignal zero(std::size_t dim);

    friend bool operator==(const ReferenceSignal&, const ReferenceSignal&) = default;
};

enum class DisturbanceKind { Zero, Sinusoid, RandomSmooth };

/// d(t) = peak · w(t) / sup‖w‖, where w is a vector of sinusoids.
///
/// For `Sinusoid` the channels are user given and sup‖w‖ is estimated by a
/// dense scan over the longest channel period followed by golden-section
/// refinement. For `RandomSmooth` every channel is a sum of `components`
/// sinusoids with seeded random frequency (up to `max_omega`), amplitude and
/// phase; the normaliser is the root-sum-square amplitude, which bounds
/// ‖w‖ for all t.
class DisturbanceSignal {
public:
    DisturbanceSignal() = default;

    static DisturbanceSignal zero(std::size_t dim);
    static DisturbanceSignal sinusoid(std::vector<SinusoidChannel> channels, double peak);
    static DisturbanceSignal random_smooth(std::size_t dim, std::size_t components, double max_omega,
                                           double peak, std::uint64_t seed);

    DisturbanceKind kind() const { return kind_; }
    std::size_t dim() const { return dim_; }
    double peak() const { return peak_; }
    const std::vector<SinusoidChannel>& channels() const { return channels_; }
    std::size_t components() const { return components_; }
    double max_omega() const { return max_omega_; }
    std::uint64_t seed() const { return seed_; }

    Vector value(double t) const;

    friend bool operator==(const DisturbanceSignal& a, const DisturbanceSignal& b) {
        return a.kind_ == b.kind_ && a.dim_ == b.dim_ && a.peak_ == b.peak_ &&
               a.channels_ == b.channels_ && a.components_ == b.components_ &&
               a.max_omega_ == b.max_omega_ && a.seed_ == b.seed_;
    }

private:
    Vector raw(double t) const;

    DisturbanceKind kind_ = DisturbanceKind::Zero;
    std::size_t dim_ = 0;
    double peak_ = 0.0;
    std::vector<SinusoidChannel> channels_;
    std::size_t components_ = 0;
    double max_omega_ = 0.0;
    std::uint64_t seed_ = 0;
    // Random-smooth expansion: channel i owns terms [i*components, (i+1)*components).
    std::vector<SinusoidChannel> terms_;
    double normaliser_ = 1.0;
};

/// Estimate of sup_t ‖w(t)‖ for a vector of sinusoids.
double sinusoid_vector_peak(const std::vector<SinusoidChannel>& channels);

struct MatchedGains {
    Matrix kx;
    Matrix kr;
    double residual_a = 0.0;  // ‖A + B Kx − Ar‖
    double residual_b = 0.0;  // ‖B Kr − Br‖
    bool matched = false;
};

MatchedGains matched_gains(const PlantModel& plant, const ReferenceModel& ref);

Vector plant_derivative(const PlantModel& plant, const Vector& x, const Vector& u, const Vector& d);
Vector reference_derivative(const ReferenceModel& ref, const Vector& xr, const Vector& r);

struct ReferenceBoundReport {
    double sup_norm = 0.0;
    double x_bar_r = 0.0;
    bool pass = false;
};

/// Integrates the reference model from rest with a fine fixed step and
/// reports sup ‖x_r(t)‖ over the horizon against x̄_r.
ReferenceBoundReport verify_reference_bound(const ReferenceModel& ref, const ReferenceSignal& sig,
                                            double horizon, double x_bar_r, double dt = 1e-3);

}  // namespace blfmrac
