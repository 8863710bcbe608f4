#include "blfmrac/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fmt/format.h>
#include <future>
#include <optional>
#include <ostream>

#include "blfmrac/errors.hpp"
#include "blfmrac/gradcheck.hpp"
#include "blfmrac/io.hpp"
#include "blfmrac/scenario.hpp"

namespace blfmrac {

namespace {

struct CommonOptions {
    std::string scenario_path;
    std::string preset = "aircraft";
    std::optional<double> dt;
    std::optional<double> horizon;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;
    std::string out_dir = "out";
    bool force = false;
};

struct SweepOptions {
    std::string column_axis = "u1_bar";
    std::string columns = "0.1:3:30";
    std::string row_axis = "x_bar";
    std::string rows = "2.5:12:39";
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_force) {
    cmd->add_option("--scenario", o.scenario_path, "Scenario file");
    cmd->add_option("--preset", o.preset, "Embedded preset (aircraft, aircraft-baseline)");
    cmd->add_option("--dt", o.dt, "Integrator step [s]");
    cmd->add_option("--horizon", o.horizon, "Simulation horizon [s]");
    cmd->add_option("--seed", o.seed, "Random seed");
    cmd->add_option("--set", o.overrides, "Override a scenario value: section.key=value");
    cmd->add_option("--out", o.out_dir, "Output directory");
    if (with_force) cmd->add_flag("--force", o.force, "Run even when the feasibility check fails");
}

Scenario load(const CommonOptions& o) {
    Scenario s = o.scenario_path.empty() ? preset_by_name(o.preset) : load_scenario(o.scenario_path);
    s = apply_overrides(s, o.overrides);
    if (o.dt) s.integrator.dt = *o.dt;
    if (o.horizon) s.integrator.horizon = *o.horizon;
    if (o.seed) s.seed = *o.seed;
    s.integrator.dt_min = std::min(s.integrator.dt_min, s.integrator.dt);
    s.validate();
    return s;
}

std::filesystem::path out_path(const CommonOptions& o, const std::string& file) {
    std::filesystem::create_directories(o.out_dir);
    return std::filesystem::path(o.out_dir) / file;
}

void emit(const CommonOptions& o, const std::string& file, const std::string& content, std::ostream& out) {
    const auto path = out_path(o, file);
    write_text_file(path.string(), content);
    out << "wrote " << path.string() << '\n';
}

void print_warnings(const PreparedRun& run, std::ostream& err) {
    for (const auto& w : run.warnings) err << "warning: " << w << '\n';
}

std::vector<double> times(const Trajectory& traj) {
    std::vector<double> t;
    for (const auto& s : traj.samples) t.push_back(s.state.t);
    return t;
}

template <typename F>
std::vector<double> series(const Trajectory& traj, F field) {
    std::vector<double> y;
    for (const auto& s : traj.samples) y.push_back(field(s));
    return y;
}

struct NormPlot {
    const char* file;
    const char* title;
    const char* y_label;
    const char* bound_label;
    double bound;
    double (*field)(const TrajectorySample&);
};

std::vector<NormPlot> norm_plots(const ConstraintSpec& spec) {
    return {
        {"norm_x", "State norm", "||x||", "X bar", spec.x_bar, [](const TrajectorySample& s) { return s.norm_x; }},
        {"norm_u", "Input magnitude", "||u||", "U1 bar", spec.u1_bar,
         [](const TrajectorySample& s) { return s.norm_u; }},
        {"norm_udot", "Input rate", "||u dot||", "U2 bar", spec.u2_bar,
         [](const TrajectorySample& s) { return s.norm_u_dot; }},
        {"norm_ed", "Difference error", "||e_d||", "Ed bar", spec.ed_bar,
         [](const TrajectorySample& s) { return s.norm_ed; }},
    };
}

bool feasibility_gate(const PreparedRun& run, const CommonOptions& o, std::ostream& out, std::ostream& err) {
    emit(o, "feasibility.txt", format_report(run.feasibility), out);
    if (!run.feasibility.feasible() && !o.force) {
        err << "feasibility check failed; rerun with --force to simulate anyway\n" << format_report(run.feasibility);
        return false;
    }
    if (!run.model) {
        err << "no closed-loop model can be built: Ed is not positive (set constraints.ed_bar to override)\n";
        return false;
    }
    return true;
}

int cmd_check(const CommonOptions& o, std::ostream& out, std::ostream& err) {
    const PreparedRun run = prepare(load(o));
    print_warnings(run, err);
    out << format_report(run.feasibility);
    emit(o, "feasibility.txt", format_report(run.feasibility), out);
    return run.feasibility.feasible() ? kExitPass : kExitViolated;
}

int cmd_simulate(const CommonOptions& o, std::ostream& out, std::ostream& err) {
    const Scenario scenario = load(o);
    const PreparedRun run = prepare(scenario);
    print_warnings(run, err);
    if (!feasibility_gate(run, o, out, err)) return kExitViolated;

    const SimulationResult result = simulate(*run.model, run.initial, scenario.integrator);
    out << format_monitor_report(result.report);
    emit(o, "trajectory.csv", trajectory_csv(result.trajectory), out);
    emit(o, "monitor.txt", format_monitor_report(result.report), out);
    const auto t = times(result.trajectory);
    for (const auto& p : norm_plots(run.model->spec)) {
        LinePlot plot{p.title, "t [s]", p.y_label, t, {{to_string(scenario.controller), series(result.trajectory, p.field)}},
                      {{p.bound_label, p.bound}}};
        emit(o, std::string(p.file) + ".svg", render_line_plot(plot), out);
    }
    return result.report.all_ok() ? kExitPass : kExitViolated;
}

int cmd_compare(const CommonOptions& o, const std::string& against, std::ostream& out, std::ostream& err) {
    const ControllerKind other = parse_controller_kind(against);
    const Scenario scenario = load(o);
    const PreparedRun run = prepare(scenario);
    print_warnings(run, err);
    if (!feasibility_gate(run, o, out, err)) return kExitViolated;

    const ClosedLoopModel proposed = with_controller(run, ControllerKind::Proposed);
    const ClosedLoopModel baseline = with_controller(run, other);
    const bool twin = other == ControllerKind::Proposed;
    const std::string tag = twin ? "proposed_b" : "robust_mrac";
    const std::string label = twin ? "proposed (second run)" : "robust MRAC";
    auto fut_p = std::async(std::launch::async, [&] { return simulate(proposed, run.initial, scenario.integrator); });
    auto fut_b = std::async(std::launch::async, [&] { return simulate(baseline, run.initial, scenario.integrator); });
    const SimulationResult rp = fut_p.get();
    const SimulationResult rb = fut_b.get();

    out << format_monitor_report(rp.report) << '\n' << format_monitor_report(rb.report);
    emit(o, "trajectory_proposed.csv", trajectory_csv(rp.trajectory), out);
    emit(o, "trajectory_" + tag + ".csv", trajectory_csv(rb.trajectory), out);
    emit(o, "monitor_proposed.txt", format_monitor_report(rp.report), out);
    emit(o, "monitor_" + tag + ".txt", format_monitor_report(rb.report), out);

    const auto t = times(rp.trajectory);
    const auto plots = norm_plots(proposed.spec);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& p = plots[i];
        LinePlot plot{p.title, "t [s]", p.y_label, t,
                      {{"proposed", series(rp.trajectory, p.field), "#1f77b4"},
                       {label, series(rb.trajectory, p.field), "#ff7f0e"}},
                      {{p.bound_label, p.bound}}};
        emit(o, std::string("compare_") + p.file + ".svg", render_line_plot(plot), out);
    }
    out << fmt::format("proposed: {}  {}: {}\n", rp.report.all_ok() ? "pass" : "violated", label,
                       rb.report.constraints_ok() ? "pass" : "violated");
    return rp.report.all_ok() ? kExitPass : kExitViolated;
}

GridAxis parse_grid(const std::string& axis, const std::string& spec) {
    GridAxis g;
    g.axis = parse_sweep_axis(axis);
    const auto a = spec.find(':');
    const auto b = spec.find(':', a == std::string::npos ? a : a + 1);
    if (a == std::string::npos || b == std::string::npos) {
        fail(ErrorKind::Validation, fmt::format("grid '{}' is not lo:hi:count", spec));
    }
    try {
        g.lo = std::stod(spec.substr(0, a));
        g.hi = std::stod(spec.substr(a + 1, b - a - 1));
        const long count = std::stol(spec.substr(b + 1));
        if (count <= 0) fail(ErrorKind::Validation, fmt::format("grid '{}' needs a positive count", spec));
        g.count = static_cast<std::size_t>(count);
    } catch (const std::logic_error&) {
        fail(ErrorKind::Validation, fmt::format("grid '{}' is not lo:hi:count", spec));
    }
    return g;
}

int cmd_sweep(const CommonOptions& o, const SweepOptions& so, std::ostream& out, std::ostream& err) {
    const PreparedRun run = prepare(load(o));
    print_warnings(run, err);
    const GridAxis cols = parse_grid(so.column_axis, so.columns);
    const GridAxis rows = parse_grid(so.row_axis, so.rows);
    const FeasibilityMap map = region_sweep(run.feasibility_inputs, cols, rows);
    std::size_t feasible = 0;
    for (const auto& r : map.cells) feasible += static_cast<std::size_t>(std::count(r.begin(), r.end(), true));
    out << fmt::format("{} of {} cells feasible\n", feasible, map.rows.size() * map.columns.size());
    emit(o, "feasibility_map.csv", serialize_map(map), out);
    emit(o, "feasibility_map.svg", render_heatmap(map, "Feasibility region"), out);
    return kExitPass;
}

FaultInjection parse_fault(const std::string& name) {
    if (name.empty() || name == "none") return FaultInjection::None;
    if (name == "V1") return FaultInjection::V1;
    if (name == "V2") return FaultInjection::V2;
    if (name == "V3") return FaultInjection::V3;
    if (name == "ThetaRate") return FaultInjection::ThetaRate;
    fail(ErrorKind::Validation, "unknown fault '" + name + "'");
}

int cmd_gradcheck(const GradcheckOptions& g, const std::string& fault, std::ostream& out) {
    GradcheckOptions opt = g;
    opt.inject = parse_fault(fault);
    const GradcheckReport report = run_gradcheck(opt);
    out << format_gradcheck(report);
    return report.pass() ? kExitPass : kExitViolated;
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InfeasibleModel:
        case ErrorKind::InfeasibleC1:
        case ErrorKind::InfeasibleC2:
        case ErrorKind::DisturbanceMargin:
        case ErrorKind::BarrierBreach:
        case ErrorKind::StepFailure: return kExitViolated;
        default: return kExitInternal;
    }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Constrained adaptive control: feasibility checks, closed-loop runs and plots", "blfmrac"};
    app.require_subcommand(1);

    CommonOptions check_o, sim_o, cmp_o, sweep_o;
    SweepOptions sweep;
    GradcheckOptions grad;
    std::string fault;

    auto* check = app.add_subcommand("check", "Evaluate the feasibility conditions");
    add_common(check, check_o, false);
    auto* sim = app.add_subcommand("simulate", "Run the closed loop and write CSV, monitor report and plots");
    add_common(sim, sim_o, true);
    auto* cmp = app.add_subcommand("compare", "Run the proposed controller and robust MRAC side by side");
    add_common(cmp, cmp_o, true);
    std::string against = "robust-mrac";
    cmp->add_option("--against", against, "Second controller (robust-mrac, proposed)");
    auto* sw = app.add_subcommand("sweep", "Grid sweep of the feasibility region");
    add_common(sw, sweep_o, false);
    sw->add_option("--cols-axis", sweep.column_axis, "Column axis (u1_bar, x_bar, d_bar, kx_bar)");
    sw->add_option("--cols", sweep.columns, "Column grid lo:hi:count");
    sw->add_option("--rows-axis", sweep.row_axis, "Row axis");
    sw->add_option("--rows", sweep.rows, "Row grid lo:hi:count");
    auto* gc = app.add_subcommand("gradcheck", "Check barrier gradients and the V_theta rate identity");
    gc->add_option("--seed", grad.seed, "Random seed");
    gc->add_option("--points", grad.points, "Random interior points per term")->check(CLI::PositiveNumber);
    gc->add_option("--inject-fault", fault)->group("");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitPass : kExitInternal;
    }

    try {
        if (*check) return cmd_check(check_o, out, err);
        if (*sim) return cmd_simulate(sim_o, out, err);
        if (*cmp) return cmd_compare(cmp_o, against, out, err);
        if (*sw) return cmd_sweep(sweep_o, sweep, out, err);
        if (*gc) return cmd_gradcheck(grad, fault, out);
    } catch (const StepFailure& e) {
        err << "error: " << e.what() << '\n';
        return kExitViolated;
    } catch (const Error& e) {
        err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
    return kExitInternal;
}

}  // namespace blfmrac
