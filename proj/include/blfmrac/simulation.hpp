#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blfmrac/controller.hpp"
#include "blfmrac/matrix.hpp"
#include "blfmrac/system_model.hpp"

namespace blfmrac {

enum class ControllerKind { Proposed, RobustMrac };

std::string to_string(ControllerKind kind);
ControllerKind parse_controller_kind(const std::string& name);

/// Everything the closed loop needs. `plant.a` and `kx_true` are simulator
/// truth; the controller laws only ever see B, P, K_r, the gains and the bounds.
struct ClosedLoopModel {
    PlantModel plant;
    ReferenceModel reference;
    ReferenceSignal reference_signal;
    DisturbanceSignal disturbance;
    ConstraintSpec spec;
    AdaptiveGains gains;
    Matrix kr;       // B† B_r
    Matrix kx_true;  // B† (A_r − A), for the V_φ monitor
    ControllerKind controller = ControllerKind::Proposed;

    std::size_t state_dim() const { return plant.b.rows(); }
    std::size_t input_dim() const { return plant.b.cols(); }
};

/// Plant, reference, auxiliary error and controller states at time t.
/// The same layout doubles as a time derivative (with `t` unused).
struct AugmentedState {
    double t = 0.0;
    Vector x;
    Vector xr;
    Vector e1;
    Vector u;
    Vector u_dot;
    Matrix khat_x;
    Matrix ku;

    static AugmentedState zero(std::size_t n, std::size_t m);

    Vector tracking_error() const { return x - xr; }
    /// e_d = (x − x_r) − e₁; never integrated on its own.
    Vector difference_error() const { return (x - xr) - e1; }

    std::vector<double> pack() const;
    static AugmentedState unpack(std::span<const double> flat, std::size_t n, std::size_t m, double t);
};

AugmentedState augmented_derivative(const AugmentedState& s, const ClosedLoopModel& model);

/// Throws BarrierBreach if `s` is outside (or within the guard band of) any
/// barrier set. No-op for the robust MRAC baseline.
void check_admissible(const AugmentedState& s, const ClosedLoopModel& model);

/// Classical RK4 over [t, t+dt]. A barrier breach in any stage (or at the end
/// point) splits the interval in two and retries, recursively, until the
/// sub-step would fall below `dt_min`; then StepFailure is thrown.
AugmentedState rk4_step(const AugmentedState& s, double dt, const ClosedLoopModel& model,
                        double dt_min = 1e-6);

struct TrajectorySample {
    AugmentedState state;  // for the baseline, u and u_dot hold the algebraic input and its rate
    double norm_x = 0.0;
    double norm_u = 0.0;
    double norm_u_dot = 0.0;
    double norm_e = 0.0;
    double norm_ed = 0.0;
    double norm_khat = 0.0;  // Frobenius
    double v_theta = 0.0;
    double v_phi = 0.0;
    double alpha = 0.0;
    double margin_x = 0.0;      // X̄ − ‖x‖
    double margin_u = 0.0;      // Ū₁ − ‖u‖
    double margin_u_dot = 0.0;  // Ū₂ − ‖u̇‖
    double margin_ed = 0.0;     // Ē_d − ‖e_d‖
    double ratio_u = 0.0;       // uᵀMu / Ū₁′²
    double ratio_u_dot = 0.0;   // u̇ᵀMu̇ / Ū₂′²
    double ratio_ed = 0.0;      // e_dᵀPe_d / Ē_d′²
};

TrajectorySample make_sample(const AugmentedState& s, const ClosedLoopModel& model);

struct Trajectory {
    ControllerKind controller = ControllerKind::Proposed;
    std::size_t state_dim = 0;
    std::size_t input_dim = 0;
    std::vector<TrajectorySample> samples;
};

struct MonitorReport {
    ControllerKind controller = ControllerKind::Proposed;
    std::size_t samples = 0;

    double max_norm_x = 0.0;
    double max_norm_u = 0.0;
    double max_norm_u_dot = 0.0;
    double max_norm_e = 0.0;
    double max_norm_ed = 0.0;
    double max_norm_khat = 0.0;

    double min_margin_x = 0.0;
    double min_margin_u = 0.0;
    double min_margin_u_dot = 0.0;
    double min_margin_ed = 0.0;

    double max_ratio_u = 0.0;
    double max_ratio_u_dot = 0.0;
    double max_ratio_ed = 0.0;

    bool lyapunov_applicable = true;
    double max_theta_increase = 0.0;  // max (V_θ[k] − V_θ[k−1]) / (1 + |V_θ[k−1]|)
    std::optional<std::size_t> theta_violation;
    double phi_bound = 0.0;       // V_φ(0) + c/α
    double max_phi_excess = 0.0;  // max V_φ(t) − phi_bound
    std::optional<std::size_t> phi_violation;

    double u_dot_early = 0.0;  // mean ‖u̇‖ over the first tenth of the run
    double u_dot_late = 0.0;   // mean ‖u̇‖ over the last tenth

    bool state_ok = false;
    bool input_ok = false;
    bool rate_ok = false;
    bool ed_ok = false;
    bool theta_ok = false;
    bool phi_ok = false;
    bool projection_ok = false;

    bool constraints_ok() const { return state_ok && input_ok && rate_ok && ed_ok; }
    bool all_ok() const { return constraints_ok() && theta_ok && phi_ok && projection_ok; }
};

/// c/α with α = min(λ_min{Q}, σ_x) and c = σ_x‖K_x‖²/2.
double phi_ultimate_offset(const ClosedLoopModel& model);

MonitorReport evaluate_monitors(const Trajectory& traj, const ClosedLoopModel& model);

std::string format_monitor_report(const MonitorReport& report);

struct SimulationOptions {
    double dt = 1e-3;
    double horizon = 60.0;
    std::size_t decimation = 10;
    double dt_min = 1e-6;

    friend bool operator==(const SimulationOptions&, const SimulationOptions&) = default;
};

struct SimulationResult {
    Trajectory trajectory;
    MonitorReport report;
    AugmentedState final_state;
};

/// Throws InvalidScenario listing every violated initial set.
void validate_initial_state(const AugmentedState& s0, const ClosedLoopModel& model);

SimulationResult simulate(const ClosedLoopModel& model, const AugmentedState& initial,
                          const SimulationOptions& options);

}  // namespace blfmrac
