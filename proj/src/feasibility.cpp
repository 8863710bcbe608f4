#include "blfmrac/feasibility.hpp"

#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <sstream>

#include "blfmrac/errors.hpp"
#include "blfmrac/linalg.hpp"

namespace blfmrac {

namespace {

double disturbance_floor(const FeasibilityInputs& in) {
    const double lmax_p = symmetric_eig_extremes(in.p).lambda_max;
    const double lmin_q = symmetric_eig_extremes(in.q).lambda_min;
    return 2.0 * lmax_p * in.d_bar / lmin_q;
}

double& axis_field(FeasibilityInputs& in, SweepAxis axis) {
    switch (axis) {
        case SweepAxis::U1Bar: return in.u1_bar;
        case SweepAxis::XBar: return in.x_bar;
        case SweepAxis::DBar: return in.d_bar;
        case SweepAxis::KxBar: return in.kx_bar;
    }
    return in.x_bar;
}

}  // namespace

double default_rho(const Matrix& ar) { return 0.95 * std::abs(max_real_eigenpart(ar)); }

void validate_rho(double rho, const Matrix& ar) {
    const double margin = -max_real_eigenpart(ar);
    if (!(rho > 0.0) || !(rho < margin)) {
        fail(ErrorKind::InvalidInput,
             fmt::format("rho = {} must lie in (0, {}) = (0, |max Re eig(Ar)|)", rho, margin));
    }
}

C1Result check_c1(const FeasibilityInputs& in) {
    if (!(in.norm_b > 0.0)) fail(ErrorKind::InvalidInput, "check_c1: ||B|| must be > 0");
    const double threshold = in.rho / in.norm_b;
    return {in.kx_bar < threshold, threshold};
}

DerivedConstants derived_constants(const FeasibilityInputs& in) {
    const double ratio = in.norm_b / in.rho;
    DerivedConstants c;
    c.gamma = 1.0 - ratio * in.kx_bar;
    c.kappa = ratio * (in.kx_bar * in.x_bar_r + in.kr_bar * in.r_bar);
    if (!(c.gamma > 0.0)) {
        fail(ErrorKind::InfeasibleC1, fmt::format("gamma = {} is not positive (C1 violated)", c.gamma));
    }
    return c;
}

double minimal_state_bound(const FeasibilityInputs& in) {
    const DerivedConstants c = derived_constants(in);
    const double ratio = in.norm_b / in.rho;
    return (c.kappa + ratio * in.u1_bar + disturbance_floor(in)) / c.gamma + in.x_bar_r;
}

double ed_bar_selection(const FeasibilityInputs& in) {
    const DerivedConstants c = derived_constants(in);
    const double ratio = in.norm_b / in.rho;
    const double ed_bar = c.gamma * (in.x_bar - in.x_bar_r) - (c.kappa + ratio * in.u1_bar);
    if (!(ed_bar > 0.0)) {
        fail(ErrorKind::InfeasibleC2, fmt::format("E_d = {} is not positive (C2 violated)", ed_bar));
    }
    const double floor = disturbance_floor(in);
    if (!(ed_bar > floor)) {
        fail(ErrorKind::DisturbanceMargin,
             fmt::format("E_d = {} does not exceed 2 lmax(P) d_bar / lmin(Q) = {}", ed_bar, floor));
    }
    return ed_bar;
}

FeasibilityReport assess(const FeasibilityInputs& in) {
    FeasibilityReport r;
    r.rho = in.rho;
    const C1Result c1 = check_c1(in);
    r.c1_threshold = c1.threshold;
    r.c1_ok = c1.ok;
    r.c1_margin = c1.threshold - in.kx_bar;

    const double ratio = in.norm_b / in.rho;
    r.gamma = 1.0 - ratio * in.kx_bar;
    r.kappa = ratio * (in.kx_bar * in.x_bar_r + in.kr_bar * in.r_bar);
    r.disturbance_floor = disturbance_floor(in);
    r.ed_bar = r.gamma * (in.x_bar - in.x_bar_r) - (r.kappa + ratio * in.u1_bar);
    r.eq33_margin = r.ed_bar - r.disturbance_floor;

    if (r.gamma > 0.0) {
        r.x_bar_min = minimal_state_bound(in);
        r.c2_ok = in.x_bar > r.x_bar_min;
        r.eq33_ok = r.ed_bar > r.disturbance_floor;
    } else {
        r.x_bar_min = std::numeric_limits<double>::infinity();
        r.c2_ok = false;
        r.eq33_ok = false;
    }
    r.c2_margin = in.x_bar - r.x_bar_min;
    return r;
}

std::string format_report(const FeasibilityReport& r) {
    std::ostringstream os;
    os << fmt::format("rho               = {:.17g}\n", r.rho);
    os << fmt::format("c1_threshold      = {:.17g}\n", r.c1_threshold);
    os << fmt::format("gamma             = {:.17g}\n", r.gamma);
    os << fmt::format("kappa             = {:.17g}\n", r.kappa);
    os << fmt::format("ed_bar            = {:.17g}\n", r.ed_bar);
    os << fmt::format("disturbance_floor = {:.17g}\n", r.disturbance_floor);
    os << fmt::format("x_bar_min         = {:.17g}\n", r.x_bar_min);
    os << fmt::format("c1_ok             = {}\n", r.c1_ok);
    os << fmt::format("c2_ok             = {}\n", r.c2_ok);
    os << fmt::format("eq33_ok           = {}\n", r.eq33_ok);
    os << fmt::format("c1_margin         = {:.17g}\n", r.c1_margin);
    os << fmt::format("c2_margin         = {:.17g}\n", r.c2_margin);
    os << fmt::format("eq33_margin       = {:.17g}\n", r.eq33_margin);
    os << fmt::format("feasible          = {}\n", r.feasible());
    return os.str();
}

std::string to_string(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::U1Bar: return "u1_bar";
        case SweepAxis::XBar: return "x_bar";
        case SweepAxis::DBar: return "d_bar";
        case SweepAxis::KxBar: return "kx_bar";
    }
    return "?";
}

SweepAxis parse_sweep_axis(const std::string& name) {
    if (name == "u1_bar") return SweepAxis::U1Bar;
    if (name == "x_bar") return SweepAxis::XBar;
    if (name == "d_bar") return SweepAxis::DBar;
    if (name == "kx_bar") return SweepAxis::KxBar;
    fail(ErrorKind::Validation, "unknown sweep axis '" + name + "' (u1_bar, x_bar, d_bar, kx_bar)");
}

std::vector<double> GridAxis::values() const {
    if (count == 0 || !(lo > 0.0) || !(hi >= lo) || (count > 1 && !(hi > lo))) {
        fail(ErrorKind::Validation,
             fmt::format("degenerate grid for {}: [{}, {}] with {} points", to_string(axis), lo, hi, count));
    }
    std::vector<double> v(count);
    for (std::size_t i = 0; i < count; ++i) {
        v[i] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    }
    return v;
}

FeasibilityMap region_sweep(const FeasibilityInputs& base, const GridAxis& columns, const GridAxis& rows) {
    if (columns.axis == rows.axis) fail(ErrorKind::Validation, "sweep axes must differ");
    FeasibilityMap map;
    map.column_axis = columns.axis;
    map.row_axis = rows.axis;
    map.columns = columns.values();
    map.rows = rows.values();
    map.cells.assign(map.rows.size(), std::vector<bool>(map.columns.size(), false));
    for (std::size_t i = 0; i < map.rows.size(); ++i) {
        for (std::size_t j = 0; j < map.columns.size(); ++j) {
            FeasibilityInputs cell = base;
            axis_field(cell, rows.axis) = map.rows[i];
            axis_field(cell, columns.axis) = map.columns[j];
            map.cells[i][j] = assess(cell).feasible();
        }
    }
    return map;
}

std::string serialize_map(const FeasibilityMap& map) {
    std::ostringstream os;
    os << to_string(map.row_axis) << '\\' << to_string(map.column_axis);
    for (double c : map.columns) os << fmt::format(",{:.17g}", c);
    os << '\n';
    for (std::size_t i = 0; i < map.rows.size(); ++i) {
        os << fmt::format("{:.17g}", map.rows[i]);
        for (bool cell : map.cells[i]) os << ',' << (cell ? '1' : '0');
        os << '\n';
    }
    return os.str();
}

FeasibilityMap parse_map(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    FeasibilityMap map;
    if (!std::getline(is, line)) fail(ErrorKind::Parse, "feasibility map: empty input");
    {
        std::istringstream hs(line);
        std::string head;
        std::getline(hs, head, ',');
        const auto slash = head.find('\\');
        if (slash == std::string::npos) fail(ErrorKind::Parse, "feasibility map: malformed header");
        map.row_axis = parse_sweep_axis(head.substr(0, slash));
        map.column_axis = parse_sweep_axis(head.substr(slash + 1));
        std::string tok;
        while (std::getline(hs, tok, ',')) map.columns.push_back(std::stod(tok));
    }
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tok;
        std::getline(ls, tok, ',');
        map.rows.push_back(std::stod(tok));
        std::vector<bool> row;
        while (std::getline(ls, tok, ',')) row.push_back(tok == "1");
        if (row.size() != map.columns.size()) fail(ErrorKind::Parse, "feasibility map: ragged row");
        map.cells.push_back(std::move(row));
    }
    return map;
}

}  // namespace blfmrac
