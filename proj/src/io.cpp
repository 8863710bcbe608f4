#include "blfmrac/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fmt/format.h>
#include <fstream>
#include <sstream>

#include "blfmrac/errors.hpp"

namespace blfmrac {

namespace {

constexpr double kWidth = 820.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 170.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 55.0;

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

// Roughly five "nice" ticks (1, 2, 5 × 10^k) covering [lo, hi].
std::vector<double> nice_ticks(double lo, double hi) {
    const double span = hi - lo;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double f : {1.0, 2.0, 5.0, 10.0}) {
        step = f * mag;
        if (step >= raw) break;
    }
    std::vector<double> ticks;
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) {
        ticks.push_back(std::abs(t) < 1e-12 * span ? 0.0 : t);
    }
    return ticks;
}

struct Frame {
    double x0, x1, y0, y1;
    double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
    double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void axes(std::ostringstream& os, const Frame& f, const std::string& title, const std::string& xl,
          const std::string& yl) {
    const double right = kWidth - kRight;
    const double bottom = kHeight - kBottom;
    os << fmt::format(R"(<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#444"/>)", kLeft, kTop,
                      right - kLeft, bottom - kTop)
       << '\n';
    for (double t : nice_ticks(f.x0, f.x1)) {
        const double x = f.px(t);
        os << fmt::format(R"(<line x1="{:.2f}" y1="{}" x2="{:.2f}" y2="{}" stroke="#ddd"/>)", x, kTop, x, bottom)
           << '\n';
        os << fmt::format(R"(<text x="{:.2f}" y="{}" font-size="11" text-anchor="middle">{:g}</text>)", x,
                          bottom + 16, t)
           << '\n';
    }
    for (double t : nice_ticks(f.y0, f.y1)) {
        const double y = f.py(t);
        os << fmt::format(R"(<line x1="{}" y1="{:.2f}" x2="{}" y2="{:.2f}" stroke="#ddd"/>)", kLeft, y, right, y)
           << '\n';
        os << fmt::format(R"(<text x="{}" y="{:.2f}" font-size="11" text-anchor="end">{:g}</text>)", kLeft - 6,
                          y + 4, t)
           << '\n';
    }
    os << fmt::format(R"(<text x="{}" y="24" font-size="15" text-anchor="middle">{}</text>)",
                      (kLeft + right) / 2, escape(title))
       << '\n';
    os << fmt::format(R"(<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>)", (kLeft + right) / 2,
                      kHeight - 14, escape(xl))
       << '\n';
    os << fmt::format(R"svg(<text x="18" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>)svg",
                      (kTop + bottom) / 2, (kTop + bottom) / 2, escape(yl))
       << '\n';
}

std::string svg_open() {
    return fmt::format(
        R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif">)"
        "\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        kWidth, kHeight, kWidth, kHeight);
}

}  // namespace

std::vector<std::string> trajectory_columns(std::size_t n, std::size_t m) {
    std::vector<std::string> cols{"t"};
    for (std::size_t i = 1; i <= n; ++i) cols.push_back(fmt::format("x{}", i));
    for (std::size_t i = 1; i <= n; ++i) cols.push_back(fmt::format("xr{}", i));
    for (std::size_t i = 1; i <= m; ++i) cols.push_back(fmt::format("u{}", i));
    for (std::size_t i = 1; i <= m; ++i) cols.push_back(fmt::format("udot{}", i));
    for (const char* c : {"norm_x", "norm_u", "norm_udot", "norm_e", "norm_ed", "V_theta", "V_phi", "alpha",
                          "margin_x", "margin_u", "margin_udot", "margin_ed"}) {
        cols.emplace_back(c);
    }
    return cols;
}

std::string trajectory_csv(const Trajectory& traj) {
    std::string out;
    const auto cols = trajectory_columns(traj.state_dim, traj.input_dim);
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (i) out += ',';
        out += cols[i];
    }
    out += '\n';
    auto put = [&out](double v) { fmt::format_to(std::back_inserter(out), ",{:.17g}", v); };
    for (const auto& s : traj.samples) {
        fmt::format_to(std::back_inserter(out), "{:.17g}", s.state.t);
        for (double v : s.state.x.values()) put(v);
        for (double v : s.state.xr.values()) put(v);
        for (double v : s.state.u.values()) put(v);
        for (double v : s.state.u_dot.values()) put(v);
        for (double v : {s.norm_x, s.norm_u, s.norm_u_dot, s.norm_e, s.norm_ed, s.v_theta, s.v_phi, s.alpha,
                         s.margin_x, s.margin_u, s.margin_u_dot, s.margin_ed}) {
            put(v);
        }
        out += '\n';
    }
    return out;
}

std::vector<double> CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) fail(ErrorKind::InvalidInput, "csv: no column '" + name + "'");
    const auto idx = static_cast<std::size_t>(it - header.begin());
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[idx]);
    return out;
}

CsvTable parse_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    CsvTable table;
    if (!std::getline(is, line)) fail(ErrorKind::Parse, "csv: empty input");
    {
        std::istringstream hs(line);
        std::string tok;
        while (std::getline(hs, tok, ',')) table.header.push_back(tok);
    }
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        std::string tok;
        while (std::getline(ls, tok, ',')) {
            char* end = nullptr;
            const double v = std::strtod(tok.c_str(), &end);
            if (end != tok.c_str() + tok.size()) fail(ErrorKind::Parse, fmt::format("csv line {}: bad number", lineno));
            row.push_back(v);
        }
        if (row.size() != table.header.size()) fail(ErrorKind::Parse, fmt::format("csv line {}: ragged row", lineno));
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::InvalidInput, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::InvalidInput, "cannot write " + path);
    out << content;
    if (!out) fail(ErrorKind::InvalidInput, "write failed for " + path);
}

std::string render_line_plot(const LinePlot& plot) {
    if (plot.x.empty()) fail(ErrorKind::InvalidInput, "render_line_plot: no samples");
    Frame f{plot.x.front(), plot.x.back(), 0.0, 0.0};
    if (!(f.x1 > f.x0)) f.x1 = f.x0 + 1.0;
    double ymax = 0.0;
    double ymin = 0.0;
    for (const auto& s : plot.series) {
        for (double v : s.y) {
            if (std::isfinite(v)) {
                ymax = std::max(ymax, v);
                ymin = std::min(ymin, v);
            }
        }
    }
    for (const auto& b : plot.bounds) ymax = std::max(ymax, b.value);
    if (!(ymax > ymin)) ymax = ymin + 1.0;
    f.y0 = ymin;
    f.y1 = ymax + 0.08 * (ymax - ymin);

    std::ostringstream os;
    os << svg_open();
    axes(os, f, plot.title, plot.x_label, plot.y_label);

    double legend_y = kTop + 10;
    const double legend_x = kWidth - kRight + 12;
    for (const auto& s : plot.series) {
        os << "<polyline fill=\"none\" stroke-width=\"1.4\" stroke=\"" << s.color << "\" points=\"";
        const std::size_t count = std::min(s.y.size(), plot.x.size());
        for (std::size_t i = 0; i < count; ++i) {
            if (!std::isfinite(s.y[i])) continue;
            os << fmt::format("{:.2f},{:.2f} ", f.px(plot.x[i]), f.py(s.y[i]));
        }
        os << "\"/>\n";
        os << fmt::format(R"(<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="2"/>)", legend_x,
                          legend_y, legend_x + 22, legend_y, s.color)
           << '\n';
        os << fmt::format(R"(<text x="{}" y="{}" font-size="11">{}</text>)", legend_x + 28, legend_y + 4,
                          escape(s.label))
           << '\n';
        legend_y += 18;
    }
    for (const auto& b : plot.bounds) {
        const double y = f.py(b.value);
        os << fmt::format(
                  R"(<line x1="{}" y1="{:.2f}" x2="{}" y2="{:.2f}" stroke="{}" stroke-width="1.4" stroke-dasharray="7,5"/>)",
                  kLeft, y, kWidth - kRight, y, b.color)
           << '\n';
        os << fmt::format(
                  R"(<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="1.4" stroke-dasharray="7,5"/>)",
                  legend_x, legend_y, legend_x + 22, legend_y, b.color)
           << '\n';
        os << fmt::format(R"(<text x="{}" y="{}" font-size="11">{}</text>)", legend_x + 28, legend_y + 4,
                          escape(b.label))
           << '\n';
        legend_y += 18;
    }
    os << "</svg>\n";
    return os.str();
}

std::string render_heatmap(const FeasibilityMap& map, const std::string& title) {
    if (map.columns.empty() || map.rows.empty()) fail(ErrorKind::InvalidInput, "render_heatmap: empty map");
    auto edges = [](const std::vector<double>& v) {
        const double h = v.size() > 1 ? (v.back() - v.front()) / static_cast<double>(v.size() - 1) : 1.0;
        return std::pair{v.front() - 0.5 * h, v.back() + 0.5 * h};
    };
    const auto [cx0, cx1] = edges(map.columns);
    const auto [ry0, ry1] = edges(map.rows);
    const Frame f{cx0, cx1, ry0, ry1};
    const double cw = (f.px(cx1) - f.px(cx0)) / static_cast<double>(map.columns.size());
    const double rh = (f.py(ry0) - f.py(ry1)) / static_cast<double>(map.rows.size());

    std::ostringstream os;
    os << svg_open();
    for (std::size_t i = 0; i < map.rows.size(); ++i) {
        for (std::size_t j = 0; j < map.columns.size(); ++j) {
            const double x = f.px(cx0) + cw * static_cast<double>(j);
            const double y = f.py(ry0) - rh * static_cast<double>(i + 1);
            os << fmt::format(R"(<rect x="{:.2f}" y="{:.2f}" width="{:.2f}" height="{:.2f}" fill="{}"/>)", x, y,
                              cw + 0.3, rh + 0.3, map.cells[i][j] ? "#4caf50" : "#e0e0e0")
               << '\n';
        }
    }
    axes(os, f, title, to_string(map.column_axis), to_string(map.row_axis));
    const double lx = kWidth - kRight + 12;
    os << fmt::format(R"(<rect x="{}" y="{}" width="16" height="12" fill="#4caf50"/>)", lx, kTop + 4) << '\n';
    os << fmt::format(R"(<text x="{}" y="{}" font-size="11">feasible</text>)", lx + 22, kTop + 14) << '\n';
    os << fmt::format(R"(<rect x="{}" y="{}" width="16" height="12" fill="#e0e0e0"/>)", lx, kTop + 24) << '\n';
    os << fmt::format(R"(<text x="{}" y="{}" font-size="11">infeasible</text>)", lx + 22, kTop + 34) << '\n';
    os << "</svg>\n";
    return os.str();
}

}  // namespace blfmrac
