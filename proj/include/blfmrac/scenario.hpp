#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "blfmrac/controller.hpp"
#include "blfmrac/feasibility.hpp"
#include "blfmrac/simulation.hpp"
#include "blfmrac/system_model.hpp"

namespace blfmrac {

struct DisturbanceConfig {
    DisturbanceKind kind = DisturbanceKind::Zero;
    double peak = 0.0;
    std::vector<SinusoidChannel> channels;  // Sinusoid
    std::size_t components = 0;             // RandomSmooth
    double max_omega = 0.0;                 // RandomSmooth

    friend bool operator==(const DisturbanceConfig&, const DisturbanceConfig&) = default;
};

struct InitialConditions {
    Vector x0;
    Vector xr0;
    Vector u0;
    Vector udot0;
    Matrix khat_x0;
    Matrix ku0;

    friend bool operator==(const InitialConditions&, const InitialConditions&) = default;
};

/// One run, as read from a scenario file.
///
/// Text layout: `[section]` headers, `key = value` lines, `#` comments.
/// Matrices leave the value empty and list one indented row per line;
/// vectors are inline. Channel rows read `sin|cos amplitude omega phase`.
struct Scenario {
    std::string name = "scenario";

    // [plant]
    Matrix a;
    Matrix b;
    double d_bar = 0.0;

    // [reference]
    Matrix ar;
    Matrix br;
    Matrix q;

    // [constraints]
    double x_bar = 0.0;
    double u1_bar = 0.0;
    double u2_bar = 0.0;
    Matrix m;
    double x_bar_r = 0.0;
    std::optional<double> ed_bar;  // computed from the feasibility pipeline when absent
    std::optional<double> rho;     // 0.95·|max Re λ(A_r)| when absent

    // [gains]
    AdaptiveGains gains;
    std::optional<Matrix> baseline_gamma_x;  // robust MRAC overrides
    std::optional<double> baseline_sigma_x;

    // [signals]
    ReferenceSignal reference;
    DisturbanceConfig disturbance;

    // [init]
    InitialConditions init;

    // [integrator]
    SimulationOptions integrator;

    // [run]
    ControllerKind controller = ControllerKind::Proposed;
    std::uint64_t seed = 0;

    std::size_t state_dim() const { return a.rows(); }
    std::size_t input_dim() const { return b.cols(); }

    /// Throws Validation when dimensions disagree, naming both fields.
    void validate() const;

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

Scenario parse_scenario(const std::string& text);
std::string serialize_scenario(const Scenario& scenario);
Scenario load_scenario(const std::string& path);

/// Applies `section.key=value` assignments on top of a scenario. Matrix
/// values separate rows with ';'. The result is re-parsed and validated.
Scenario apply_overrides(const Scenario& scenario, const std::vector<std::string>& assignments);

Scenario aircraft_preset();
Scenario aircraft_baseline_preset();

/// Looks up a preset by its CLI name (aircraft, aircraft-baseline).
Scenario preset_by_name(const std::string& name);

/// Everything derived from a scenario before a run.
struct PreparedRun {
    Scenario scenario;
    PlantModel plant;
    ReferenceModel reference;
    MatchedGains matched;
    double rho = 0.0;
    FeasibilityInputs feasibility_inputs;
    FeasibilityReport feasibility;
    ReferenceBoundReport reference_bound;
    double ed_bar = 0.0;                  // in use (override or computed)
    std::optional<ClosedLoopModel> model; // absent when no positive Ē_d is available
    AugmentedState initial;
    std::vector<std::string> warnings;
};

/// Runs the model and feasibility pipeline. Throws on invalid input;
/// infeasibility is reported in `feasibility`, not thrown.
PreparedRun prepare(const Scenario& scenario);

/// Same model with the controller switched, using the baseline gain
/// overrides for robust MRAC when present.
ClosedLoopModel with_controller(const PreparedRun& run, ControllerKind kind);

}  // namespace blfmrac
