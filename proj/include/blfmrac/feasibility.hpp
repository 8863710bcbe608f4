#pragma once

#include <string>
#include <vector>

#include "blfmrac/matrix.hpp"

namespace blfmrac {

struct FeasibilityInputs {
    double rho = 0.0;     // ρ, strictly below |max Re λ(A_r)|
    double kx_bar = 0.0;  // K̄_x
    double kr_bar = 0.0;  // K̄_r
    double r_bar = 0.0;   // r̄
    double x_bar_r = 0.0; // X̄_r
    double norm_b = 0.0;  // ‖B‖
    double d_bar = 0.0;   // d̄
    double x_bar = 0.0;   // X̄
    double u1_bar = 0.0;  // Ū₁
    Matrix p;
    Matrix q;
};

struct C1Result {
    bool ok = false;
    double threshold = 0.0;  // ρ / ‖B‖
};

struct DerivedConstants {
    double gamma = 0.0;  // 1 − ‖B‖K̄_x/ρ
    double kappa = 0.0;  // (‖B‖/ρ)(K̄_x X̄_r + K̄_r r̄)
};

struct FeasibilityReport {
    double rho = 0.0;
    double c1_threshold = 0.0;
    double gamma = 0.0;
    double kappa = 0.0;
    double ed_bar = 0.0;            // γĒ − κ − (‖B‖/ρ)Ū₁
    double disturbance_floor = 0.0; // 2λ_max{P}d̄ / λ_min{Q}
    double x_bar_min = 0.0;         // C2 right-hand side
    bool c1_ok = false;
    bool c2_ok = false;
    bool eq33_ok = false;
    double c1_margin = 0.0;   // threshold − K̄_x
    double c2_margin = 0.0;   // X̄ − x_bar_min
    double eq33_margin = 0.0; // Ē_d − disturbance_floor

    bool feasible() const { return c1_ok && c2_ok && eq33_ok; }
};

/// Default ρ: 95% of the stability margin |max Re λ(A_r)|.
double default_rho(const Matrix& ar);

/// Throws InvalidInput when ρ is outside (0, |max Re λ(A_r)|).
void validate_rho(double rho, const Matrix& ar);

C1Result check_c1(const FeasibilityInputs& in);

/// Throws InfeasibleC1 when γ ≤ 0.
DerivedConstants derived_constants(const FeasibilityInputs& in);

/// (1/γ)(κ + (‖B‖/ρ)Ū₁ + 2λ_max{P}d̄/λ_min{Q}) + X̄_r
double minimal_state_bound(const FeasibilityInputs& in);

/// Ē_d = γ(X̄ − X̄_r) − κ − (‖B‖/ρ)Ū₁. Throws InfeasibleC2 when Ē_d ≤ 0 and
/// DisturbanceMargin when Ē_d does not exceed 2λ_max{P}d̄/λ_min{Q}.
double ed_bar_selection(const FeasibilityInputs& in);

/// Evaluates every condition without throwing.
FeasibilityReport assess(const FeasibilityInputs& in);

std::string format_report(const FeasibilityReport& report);

enum class SweepAxis { U1Bar, XBar, DBar, KxBar };

std::string to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(const std::string& name);

struct GridAxis {
    SweepAxis axis = SweepAxis::U1Bar;
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;

    std::vector<double> values() const;
};

struct FeasibilityMap {
    SweepAxis column_axis = SweepAxis::U1Bar;
    SweepAxis row_axis = SweepAxis::XBar;
    std::vector<double> columns;
    std::vector<double> rows;
    std::vector<std::vector<bool>> cells;  // cells[row][col]
};

/// Marks each grid cell feasible when C1, C2 and the disturbance condition
/// all hold with that cell's pair of values substituted into `base`.
FeasibilityMap region_sweep(const FeasibilityInputs& base, const GridAxis& columns, const GridAxis& rows);

/// Delimited text: first line is the row/column axis names followed by the
/// column values; every further line is a row value followed by 0/1 cells.
std::string serialize_map(const FeasibilityMap& map);
FeasibilityMap parse_map(const std::string& text);

}  // namespace blfmrac
