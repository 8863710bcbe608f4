#include "blfmrac/scenario.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fmt/format.h>
#include <fstream>
#include <map>
#include <sstream>

#include "blfmrac/errors.hpp"
#include "blfmrac/linalg.hpp"

namespace blfmrac {

namespace {

enum class ValueShape { Scalar, Vector, Rows, Word };

struct KeySpec {
    const char* name;
    ValueShape shape;
    bool required;
};

struct SectionSpec {
    const char* name;
    std::vector<KeySpec> keys;
};

const std::vector<SectionSpec>& schema() {
    static const std::vector<SectionSpec> s = {
        {"plant", {{"A", ValueShape::Rows, true}, {"B", ValueShape::Rows, true}, {"d_bar", ValueShape::Scalar, true}}},
        {"reference",
         {{"Ar", ValueShape::Rows, true}, {"Br", ValueShape::Rows, true}, {"Q", ValueShape::Rows, true}}},
        {"constraints",
         {{"x_bar", ValueShape::Scalar, true},
          {"u1_bar", ValueShape::Scalar, true},
          {"u2_bar", ValueShape::Scalar, true},
          {"M", ValueShape::Rows, true},
          {"x_bar_r", ValueShape::Scalar, true},
          {"ed_bar", ValueShape::Scalar, false},
          {"rho", ValueShape::Scalar, false}}},
        {"gains",
         {{"Gamma_x", ValueShape::Rows, true},
          {"Gamma_u", ValueShape::Rows, true},
          {"sigma_x", ValueShape::Scalar, true},
          {"kx_bar", ValueShape::Scalar, true},
          {"kr_bar", ValueShape::Scalar, true},
          {"baseline_Gamma_x", ValueShape::Rows, false},
          {"baseline_sigma_x", ValueShape::Scalar, false}}},
        {"signals",
         {{"reference", ValueShape::Word, false},
          {"reference_constant", ValueShape::Vector, false},
          {"reference_channels", ValueShape::Rows, false},
          {"disturbance", ValueShape::Word, false},
          {"disturbance_peak", ValueShape::Scalar, false},
          {"disturbance_channels", ValueShape::Rows, false},
          {"disturbance_components", ValueShape::Scalar, false},
          {"disturbance_max_omega", ValueShape::Scalar, false}}},
        {"init",
         {{"x0", ValueShape::Vector, false},
          {"xr0", ValueShape::Vector, false},
          {"u0", ValueShape::Vector, false},
          {"udot0", ValueShape::Vector, false},
          {"Khat_x0", ValueShape::Rows, false},
          {"Ku0", ValueShape::Rows, false}}},
        {"integrator",
         {{"dt", ValueShape::Scalar, false},
          {"horizon", ValueShape::Scalar, false},
          {"decimation", ValueShape::Scalar, false},
          {"dt_min", ValueShape::Scalar, false}}},
        {"run", {{"name", ValueShape::Word, false}, {"controller", ValueShape::Word, false}, {"seed", ValueShape::Scalar, false}}},
    };
    return s;
}

struct Entry {
    std::size_t line = 0;
    std::string value;
    std::vector<std::pair<std::size_t, std::string>> rows;
};

[[noreturn]] void parse_error(std::size_t line, const std::string& msg) {
    fail(ErrorKind::Parse, fmt::format("line {}: {}", line, msg));
}

// Optional [signals] keys and the signal kinds they belong to.
bool signal_key_applies(std::string_view key, std::string_view kind) {
    if (key == "reference_constant") return kind == "constant";
    if (key == "reference_channels" || key == "disturbance_channels") return kind == "sinusoid";
    if (key == "disturbance_peak") return kind == "sinusoid" || kind == "random";
    if (key == "disturbance_components" || key == "disturbance_max_omega") return kind == "random";
    return true;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream is(s);
    std::vector<std::string> out;
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

double parse_number(const std::string& tok, std::size_t line, const std::string& field) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (tok.empty() || end != tok.c_str() + tok.size() || errno == ERANGE) {
        parse_error(line, fmt::format("{}: '{}' is not a number", field, tok));
    }
    return v;
}

const KeySpec* find_key(const SectionSpec& sec, const std::string& key) {
    for (const auto& k : sec.keys) {
        if (key == k.name) return &k;
    }
    return nullptr;
}

class Document {
public:
    explicit Document(const std::string& text) {
        std::istringstream is(text);
        std::string raw;
        std::size_t lineno = 0;
        const SectionSpec* section = nullptr;
        Entry* open_rows = nullptr;
        while (std::getline(is, raw)) {
            ++lineno;
            const auto hash = raw.find('#');
            const std::string content = hash == std::string::npos ? raw : raw.substr(0, hash);
            const std::string line = trim(content);
            if (line.empty()) continue;
            const bool indented = content[0] == ' ' || content[0] == '\t';
            if (indented && open_rows != nullptr && line.find('=') == std::string::npos) {
                open_rows->rows.emplace_back(lineno, line);
                continue;
            }
            open_rows = nullptr;
            if (line.front() == '[') {
                if (line.back() != ']') parse_error(lineno, "malformed section header");
                const std::string name = trim(line.substr(1, line.size() - 2));
                section = nullptr;
                for (const auto& s : schema()) {
                    if (name == s.name) section = &s;
                }
                if (section == nullptr) parse_error(lineno, fmt::format("unknown section [{}]", name));
                if (!seen_sections_.insert({name, lineno}).second) {
                    parse_error(lineno, fmt::format("duplicate section [{}]", name));
                }
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) parse_error(lineno, "expected 'key = value'");
            if (section == nullptr) parse_error(lineno, "key outside of any section");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            const KeySpec* spec = find_key(*section, key);
            if (spec == nullptr) parse_error(lineno, fmt::format("unknown key {}.{}", section->name, key));
            const std::string full = std::string(section->name) + "." + key;
            if (entries_.count(full) != 0) parse_error(lineno, fmt::format("duplicate key {}", full));
            Entry& entry = entries_[full];
            entry.line = lineno;
            entry.value = value;
            if (spec->shape == ValueShape::Rows) {
                if (!value.empty()) parse_error(lineno, fmt::format("{} expects its rows on the following lines", full));
                open_rows = &entry;
            } else if (value.empty()) {
                parse_error(lineno, fmt::format("{} has no value", full));
            }
        }
        for (const auto& sec : schema()) {
            for (const auto& k : sec.keys) {
                const std::string full = std::string(sec.name) + "." + k.name;
                if (k.required && entries_.count(full) == 0) {
                    fail(ErrorKind::Parse, fmt::format("missing required key {}", full));
                }
                if (k.shape == ValueShape::Rows && entries_.count(full) != 0 && entries_.at(full).rows.empty()) {
                    parse_error(entries_.at(full).line, fmt::format("{} has no rows", full));
                }
            }
        }
    }

    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    const Entry& at(const std::string& key) const { return entries_.at(key); }

    double scalar(const std::string& key) const {
        const Entry& e = at(key);
        const auto toks = split_ws(e.value);
        if (toks.size() != 1) parse_error(e.line, fmt::format("{} expects a single number", key));
        return parse_number(toks[0], e.line, key);
    }

    std::string word(const std::string& key) const {
        const Entry& e = at(key);
        const auto toks = split_ws(e.value);
        if (toks.size() != 1) parse_error(e.line, fmt::format("{} expects a single word", key));
        return toks[0];
    }

    Vector vector(const std::string& key) const {
        const Entry& e = at(key);
        std::vector<double> v;
        for (const auto& tok : split_ws(e.value)) v.push_back(parse_number(tok, e.line, key));
        return Vector(std::move(v));
    }

    Matrix matrix(const std::string& key) const {
        const Entry& e = at(key);
        std::vector<std::vector<double>> rows;
        for (const auto& [lineno, text] : e.rows) {
            std::vector<double> row;
            for (const auto& tok : split_ws(text)) row.push_back(parse_number(tok, lineno, key));
            rows.push_back(std::move(row));
        }
        const std::size_t cols = rows.front().size();
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != cols) {
                fail(ErrorKind::Validation,
                     fmt::format("line {}: {} row {} has {} entries, expected {}", e.rows[i].first, key, i + 1,
                                 rows[i].size(), cols));
            }
        }
        std::vector<double> flat;
        for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
        return Matrix::from_row_major(rows.size(), cols, std::move(flat));
    }

    std::vector<SinusoidChannel> channels(const std::string& key) const {
        const Entry& e = at(key);
        std::vector<SinusoidChannel> out;
        for (const auto& [lineno, text] : e.rows) {
            const auto toks = split_ws(text);
            if (toks.size() != 4) parse_error(lineno, fmt::format("{} rows read 'sin|cos amplitude omega phase'", key));
            SinusoidChannel c;
            if (toks[0] == "sin") {
                c.wave = Waveform::Sin;
            } else if (toks[0] == "cos") {
                c.wave = Waveform::Cos;
            } else {
                parse_error(lineno, fmt::format("{}: unknown waveform '{}'", key, toks[0]));
            }
            c.amplitude = parse_number(toks[1], lineno, key);
            c.omega = parse_number(toks[2], lineno, key);
            c.phase = parse_number(toks[3], lineno, key);
            out.push_back(c);
        }
        return out;
    }

    std::size_t count(const std::string& key) const {
        const double v = scalar(key);
        if (!(v >= 0.0) || v != static_cast<double>(static_cast<std::uint64_t>(v))) {
            parse_error(at(key).line, fmt::format("{} expects a non-negative integer", key));
        }
        return static_cast<std::size_t>(v);
    }

private:
    std::map<std::string, Entry> entries_;
    std::map<std::string, std::size_t> seen_sections_;
};

std::string dims(const Matrix& m) { return fmt::format("{}x{}", m.rows(), m.cols()); }

[[noreturn]] void mismatch(const std::string& field, const std::string& field_dims, const std::string& other,
                           const std::string& other_dims) {
    fail(ErrorKind::Validation, fmt::format("{} is {} but {} is {}", field, field_dims, other, other_dims));
}

void expect_shape(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& field,
                  const std::string& other, const std::string& other_dims) {
    if (m.rows() != rows || m.cols() != cols) mismatch(field, dims(m), other, other_dims);
}

void expect_length(const Vector& v, std::size_t n, const std::string& field, const std::string& other,
                   const std::string& other_dims) {
    if (v.size() != n) mismatch(field, fmt::format("length {}", v.size()), other, other_dims);
}

std::string num(double v) { return fmt::format("{}", v); }

void write_matrix(std::ostringstream& os, const char* key, const Matrix& m) {
    os << key << " =\n";
    for (std::size_t i = 0; i < m.rows(); ++i) {
        os << " ";
        for (std::size_t j = 0; j < m.cols(); ++j) os << ' ' << num(m(i, j));
        os << '\n';
    }
}

void write_vector(std::ostringstream& os, const char* key, const Vector& v) {
    os << key << " =";
    for (double x : v.values()) os << ' ' << num(x);
    os << '\n';
}

void write_channels(std::ostringstream& os, const char* key, const std::vector<SinusoidChannel>& chans) {
    os << key << " =\n";
    for (const auto& c : chans) {
        os << "  " << (c.wave == Waveform::Sin ? "sin" : "cos") << ' ' << num(c.amplitude) << ' ' << num(c.omega)
           << ' ' << num(c.phase) << '\n';
    }
}

DisturbanceSignal build_disturbance(const Scenario& s) {
    switch (s.disturbance.kind) {
        case DisturbanceKind::Zero: return DisturbanceSignal::zero(s.state_dim());
        case DisturbanceKind::Sinusoid: return DisturbanceSignal::sinusoid(s.disturbance.channels, s.disturbance.peak);
        case DisturbanceKind::RandomSmooth:
            return DisturbanceSignal::random_smooth(s.state_dim(), s.disturbance.components, s.disturbance.max_omega,
                                                    s.disturbance.peak, s.seed);
    }
    return DisturbanceSignal::zero(s.state_dim());
}

bool all_zero(const Vector& v) { return v.squared_norm() == 0.0; }
bool all_zero(const Matrix& m) { return m.max_abs() == 0.0; }

}  // namespace

void Scenario::validate() const {
    if (a.rows() == 0 || a.rows() != a.cols()) fail(ErrorKind::Validation, "plant.A must be square and non-empty");
    const std::size_t n = a.rows();
    const std::string a_dims = dims(a);
    if (b.rows() != n) mismatch("plant.B", dims(b), "plant.A", a_dims);
    if (b.cols() == 0) fail(ErrorKind::Validation, "plant.B must have at least one column");
    const std::size_t mdim = b.cols();
    const std::string b_dims = dims(b);
    const std::string input_dims = fmt::format("{}x{}", mdim, mdim);

    expect_shape(ar, n, n, "reference.Ar", "plant.A", a_dims);
    if (br.rows() != n) mismatch("reference.Br", dims(br), "plant.A", a_dims);
    expect_shape(q, n, n, "reference.Q", "plant.A", a_dims);
    expect_shape(m, mdim, mdim, "constraints.M", "plant.B", b_dims);
    expect_shape(gains.gamma_x, mdim, mdim, "gains.Gamma_x", "plant.B", b_dims);
    expect_shape(gains.gamma_u, mdim, mdim, "gains.Gamma_u", "plant.B", b_dims);
    if (baseline_gamma_x) expect_shape(*baseline_gamma_x, mdim, mdim, "gains.baseline_Gamma_x", "plant.B", b_dims);

    const std::size_t p = br.cols();
    if (reference.dim != p) {
        const char* field = reference.kind == ReferenceKind::Constant ? "signals.reference_constant"
                                                                      : "signals.reference_channels";
        mismatch(field, fmt::format("dimension {}", reference.dim), "reference.Br", dims(br));
    }
    // Fields that belong to another signal kind have no text form and would be lost.
    if (reference.kind != ReferenceKind::Sinusoid && !reference.channels.empty()) {
        fail(ErrorKind::Validation, "signals.reference_channels is set but signals.reference is not sinusoid");
    }
    if (reference.kind != ReferenceKind::Constant && reference.constant.size() != 0) {
        fail(ErrorKind::Validation, "signals.reference_constant is set but signals.reference is not constant");
    }
    if (disturbance.kind != DisturbanceKind::Sinusoid && !disturbance.channels.empty()) {
        fail(ErrorKind::Validation, "signals.disturbance_channels is set but signals.disturbance is not sinusoid");
    }
    if (disturbance.kind != DisturbanceKind::RandomSmooth &&
        (disturbance.components != 0 || disturbance.max_omega != 0.0)) {
        fail(ErrorKind::Validation,
             "signals.disturbance_components/disturbance_max_omega are set but signals.disturbance is not random");
    }
    if (disturbance.kind == DisturbanceKind::Zero && disturbance.peak != 0.0) {
        fail(ErrorKind::Validation, "signals.disturbance_peak is set but signals.disturbance is zero");
    }
    if (disturbance.kind == DisturbanceKind::Sinusoid && disturbance.channels.size() != n) {
        mismatch("signals.disturbance_channels", fmt::format("{} channels", disturbance.channels.size()), "plant.A",
                 a_dims);
    }
    if (disturbance.kind != DisturbanceKind::Zero && !(disturbance.peak >= 0.0)) {
        fail(ErrorKind::Validation, "signals.disturbance_peak must be >= 0");
    }
    if (disturbance.kind == DisturbanceKind::Sinusoid && disturbance.peak > d_bar) {
        fail(ErrorKind::Validation, "signals.disturbance_peak exceeds plant.d_bar");
    }
    if (disturbance.kind == DisturbanceKind::RandomSmooth) {
        if (disturbance.components == 0 || !(disturbance.max_omega > 0.0)) {
            fail(ErrorKind::Validation, "signals.disturbance_components and disturbance_max_omega must be > 0");
        }
        if (disturbance.peak > d_bar) fail(ErrorKind::Validation, "signals.disturbance_peak exceeds plant.d_bar");
    }

    expect_length(init.x0, n, "init.x0", "plant.A", a_dims);
    expect_length(init.xr0, n, "init.xr0", "plant.A", a_dims);
    expect_length(init.u0, mdim, "init.u0", "plant.B", b_dims);
    expect_length(init.udot0, mdim, "init.udot0", "plant.B", b_dims);
    expect_shape(init.khat_x0, mdim, n, "init.Khat_x0", "plant.B", b_dims);
    expect_shape(init.ku0, mdim, mdim, "init.Ku0", "plant.B", b_dims);

    if (!(integrator.dt > 0.0) || !(integrator.horizon > 0.0) || !(integrator.dt_min > 0.0) ||
        integrator.decimation == 0) {
        fail(ErrorKind::Validation, "integrator.dt, horizon, decimation and dt_min must be positive");
    }
    if (integrator.dt_min > integrator.dt) fail(ErrorKind::Validation, "integrator.dt_min exceeds integrator.dt");
    (void)input_dims;
}

Scenario parse_scenario(const std::string& text) {
    const Document doc(text);
    Scenario s;
    s.a = doc.matrix("plant.A");
    s.b = doc.matrix("plant.B");
    s.d_bar = doc.scalar("plant.d_bar");

    s.ar = doc.matrix("reference.Ar");
    s.br = doc.matrix("reference.Br");
    s.q = doc.matrix("reference.Q");

    s.x_bar = doc.scalar("constraints.x_bar");
    s.u1_bar = doc.scalar("constraints.u1_bar");
    s.u2_bar = doc.scalar("constraints.u2_bar");
    s.m = doc.matrix("constraints.M");
    s.x_bar_r = doc.scalar("constraints.x_bar_r");
    if (doc.has("constraints.ed_bar")) s.ed_bar = doc.scalar("constraints.ed_bar");
    if (doc.has("constraints.rho")) s.rho = doc.scalar("constraints.rho");

    s.gains.gamma_x = doc.matrix("gains.Gamma_x");
    s.gains.gamma_u = doc.matrix("gains.Gamma_u");
    s.gains.sigma_x = doc.scalar("gains.sigma_x");
    s.gains.kx_bar = doc.scalar("gains.kx_bar");
    s.gains.kr_bar = doc.scalar("gains.kr_bar");
    if (doc.has("gains.baseline_Gamma_x")) s.baseline_gamma_x = doc.matrix("gains.baseline_Gamma_x");
    if (doc.has("gains.baseline_sigma_x")) s.baseline_sigma_x = doc.scalar("gains.baseline_sigma_x");

    const std::string ref_kind = doc.has("signals.reference") ? doc.word("signals.reference") : "zero";
    if (ref_kind == "zero") {
        s.reference = ReferenceSignal::zero(s.br.cols());
    } else if (ref_kind == "constant") {
        if (!doc.has("signals.reference_constant")) fail(ErrorKind::Parse, "missing required key signals.reference_constant");
        s.reference.kind = ReferenceKind::Constant;
        s.reference.constant = doc.vector("signals.reference_constant");
        s.reference.dim = s.reference.constant.size();
    } else if (ref_kind == "sinusoid") {
        if (!doc.has("signals.reference_channels")) fail(ErrorKind::Parse, "missing required key signals.reference_channels");
        s.reference.kind = ReferenceKind::Sinusoid;
        s.reference.channels = doc.channels("signals.reference_channels");
        s.reference.dim = s.reference.channels.size();
    } else {
        parse_error(doc.at("signals.reference").line,
                    fmt::format("signals.reference: unknown kind '{}' (zero, constant, sinusoid)", ref_kind));
    }

    const std::string dist_kind = doc.has("signals.disturbance") ? doc.word("signals.disturbance") : "zero";
    if (dist_kind == "zero") {
        s.disturbance = {};
    } else if (dist_kind == "sinusoid") {
        if (!doc.has("signals.disturbance_channels")) fail(ErrorKind::Parse, "missing required key signals.disturbance_channels");
        if (!doc.has("signals.disturbance_peak")) fail(ErrorKind::Parse, "missing required key signals.disturbance_peak");
        s.disturbance.kind = DisturbanceKind::Sinusoid;
        s.disturbance.channels = doc.channels("signals.disturbance_channels");
        s.disturbance.peak = doc.scalar("signals.disturbance_peak");
    } else if (dist_kind == "random") {
        for (const char* k : {"signals.disturbance_peak", "signals.disturbance_components", "signals.disturbance_max_omega"}) {
            if (!doc.has(k)) fail(ErrorKind::Parse, fmt::format("missing required key {}", k));
        }
        s.disturbance.kind = DisturbanceKind::RandomSmooth;
        s.disturbance.peak = doc.scalar("signals.disturbance_peak");
        s.disturbance.components = doc.count("signals.disturbance_components");
        s.disturbance.max_omega = doc.scalar("signals.disturbance_max_omega");
    } else {
        parse_error(doc.at("signals.disturbance").line,
                    fmt::format("signals.disturbance: unknown kind '{}' (zero, sinusoid, random)", dist_kind));
    }

    for (const char* key : {"reference_constant", "reference_channels", "disturbance_peak", "disturbance_channels",
                            "disturbance_components", "disturbance_max_omega"}) {
        const std::string full = std::string("signals.") + key;
        const std::string& kind = std::string_view(key).starts_with("reference") ? ref_kind : dist_kind;
        if (doc.has(full) && !signal_key_applies(key, kind)) {
            parse_error(doc.at(full).line, fmt::format("{} does not apply to kind '{}'", full, kind));
        }
    }

    const std::size_t n = s.a.rows();
    const std::size_t mdim = s.b.cols();
    s.init.x0 = doc.has("init.x0") ? doc.vector("init.x0") : Vector(n);
    s.init.xr0 = doc.has("init.xr0") ? doc.vector("init.xr0") : Vector(n);
    s.init.u0 = doc.has("init.u0") ? doc.vector("init.u0") : Vector(mdim);
    s.init.udot0 = doc.has("init.udot0") ? doc.vector("init.udot0") : Vector(mdim);
    s.init.khat_x0 = doc.has("init.Khat_x0") ? doc.matrix("init.Khat_x0") : Matrix(mdim, n);
    s.init.ku0 = doc.has("init.Ku0") ? doc.matrix("init.Ku0") : Matrix(mdim, mdim);

    if (doc.has("integrator.dt")) s.integrator.dt = doc.scalar("integrator.dt");
    if (doc.has("integrator.horizon")) s.integrator.horizon = doc.scalar("integrator.horizon");
    if (doc.has("integrator.decimation")) s.integrator.decimation = doc.count("integrator.decimation");
    if (doc.has("integrator.dt_min")) s.integrator.dt_min = doc.scalar("integrator.dt_min");

    if (doc.has("run.name")) s.name = doc.word("run.name");
    if (doc.has("run.controller")) s.controller = parse_controller_kind(doc.word("run.controller"));
    if (doc.has("run.seed")) s.seed = doc.count("run.seed");

    s.validate();
    return s;
}

std::string serialize_scenario(const Scenario& s) {
    std::ostringstream os;
    os << "[plant]\n";
    write_matrix(os, "A", s.a);
    write_matrix(os, "B", s.b);
    os << "d_bar = " << num(s.d_bar) << "\n\n";

    os << "[reference]\n";
    write_matrix(os, "Ar", s.ar);
    write_matrix(os, "Br", s.br);
    write_matrix(os, "Q", s.q);
    os << '\n';

    os << "[constraints]\n";
    os << "x_bar = " << num(s.x_bar) << '\n';
    os << "u1_bar = " << num(s.u1_bar) << '\n';
    os << "u2_bar = " << num(s.u2_bar) << '\n';
    write_matrix(os, "M", s.m);
    os << "x_bar_r = " << num(s.x_bar_r) << '\n';
    if (s.ed_bar) os << "ed_bar = " << num(*s.ed_bar) << '\n';
    if (s.rho) os << "rho = " << num(*s.rho) << '\n';
    os << '\n';

    os << "[gains]\n";
    write_matrix(os, "Gamma_x", s.gains.gamma_x);
    write_matrix(os, "Gamma_u", s.gains.gamma_u);
    os << "sigma_x = " << num(s.gains.sigma_x) << '\n';
    os << "kx_bar = " << num(s.gains.kx_bar) << '\n';
    os << "kr_bar = " << num(s.gains.kr_bar) << '\n';
    if (s.baseline_gamma_x) write_matrix(os, "baseline_Gamma_x", *s.baseline_gamma_x);
    if (s.baseline_sigma_x) os << "baseline_sigma_x = " << num(*s.baseline_sigma_x) << '\n';
    os << '\n';

    os << "[signals]\n";
    switch (s.reference.kind) {
        case ReferenceKind::Zero: os << "reference = zero\n"; break;
        case ReferenceKind::Constant:
            os << "reference = constant\n";
            write_vector(os, "reference_constant", s.reference.constant);
            break;
        case ReferenceKind::Sinusoid:
            os << "reference = sinusoid\n";
            write_channels(os, "reference_channels", s.reference.channels);
            break;
    }
    switch (s.disturbance.kind) {
        case DisturbanceKind::Zero: os << "disturbance = zero\n"; break;
        case DisturbanceKind::Sinusoid:
            os << "disturbance = sinusoid\n";
            os << "disturbance_peak = " << num(s.disturbance.peak) << '\n';
            write_channels(os, "disturbance_channels", s.disturbance.channels);
            break;
        case DisturbanceKind::RandomSmooth:
            os << "disturbance = random\n";
            os << "disturbance_peak = " << num(s.disturbance.peak) << '\n';
            os << "disturbance_components = " << s.disturbance.components << '\n';
            os << "disturbance_max_omega = " << num(s.disturbance.max_omega) << '\n';
            break;
    }
    os << '\n';

    os << "[init]\n";
    write_vector(os, "x0", s.init.x0);
    write_vector(os, "xr0", s.init.xr0);
    write_vector(os, "u0", s.init.u0);
    write_vector(os, "udot0", s.init.udot0);
    write_matrix(os, "Khat_x0", s.init.khat_x0);
    write_matrix(os, "Ku0", s.init.ku0);
    os << '\n';

    os << "[integrator]\n";
    os << "dt = " << num(s.integrator.dt) << '\n';
    os << "horizon = " << num(s.integrator.horizon) << '\n';
    os << "decimation = " << s.integrator.decimation << '\n';
    os << "dt_min = " << num(s.integrator.dt_min) << "\n\n";

    os << "[run]\n";
    os << "name = " << s.name << '\n';
    os << "controller = " << to_string(s.controller) << '\n';
    os << "seed = " << s.seed << '\n';
    return os.str();
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::InvalidInput, "cannot open scenario file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

Scenario apply_overrides(const Scenario& scenario, const std::vector<std::string>& assignments) {
    if (assignments.empty()) return scenario;
    std::vector<std::string> lines;
    {
        std::istringstream is(serialize_scenario(scenario));
        std::string line;
        while (std::getline(is, line)) lines.push_back(line);
    }
    for (const auto& assignment : assignments) {
        const auto eq = assignment.find('=');
        const auto dot = assignment.find('.');
        if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
            fail(ErrorKind::Parse, fmt::format("override '{}' is not section.key=value", assignment));
        }
        const std::string section = trim(assignment.substr(0, dot));
        const std::string key = trim(assignment.substr(dot + 1, eq - dot - 1));
        const std::string value = trim(assignment.substr(eq + 1));

        const SectionSpec* sec = nullptr;
        for (const auto& s : schema()) {
            if (section == s.name) sec = &s;
        }
        if (sec == nullptr) fail(ErrorKind::Parse, fmt::format("override: unknown section [{}]", section));
        const KeySpec* spec = find_key(*sec, key);
        if (spec == nullptr) fail(ErrorKind::Parse, fmt::format("override: unknown key {}.{}", section, key));

        std::vector<std::string> replacement;
        if (spec->shape == ValueShape::Rows) {
            replacement.push_back(key + " =");
            std::istringstream rows(value);
            std::string row;
            while (std::getline(rows, row, ';')) replacement.push_back("  " + trim(row));
        } else {
            replacement.push_back(key + " = " + value);
        }

        const auto header = std::find(lines.begin(), lines.end(), "[" + section + "]");
        if (header == lines.end()) fail(ErrorKind::Parse, fmt::format("override: section [{}] missing", section));
        auto it = header + 1;
        auto insert_at = it;
        bool found = false;
        for (; it != lines.end() && !(it->size() > 0 && it->front() == '['); ++it) {
            const auto e = it->find('=');
            if (e != std::string::npos && trim(it->substr(0, e)) == key && it->front() != ' ') {
                auto end = it + 1;
                while (end != lines.end() && !end->empty() && (end->front() == ' ' || end->front() == '\t')) ++end;
                insert_at = lines.erase(it, end);
                found = true;
                break;
            }
        }
        if (!found) insert_at = header + 1;
        lines.insert(insert_at, replacement.begin(), replacement.end());
    }
    // A kind switch drops the keys of the old kind.
    const auto signals = std::find(lines.begin(), lines.end(), "[signals]");
    for (const char* family : {"reference", "disturbance"}) {
        std::string kind;
        for (auto it = signals; it != lines.end(); ++it) {
            if (it->rfind(std::string(family) + " = ", 0) == 0) kind = trim(it->substr(it->find('=') + 1));
        }
        for (auto it = signals + 1; it != lines.end() && !(it->size() > 0 && it->front() == '[');) {
            const auto e = it->find('=');
            const std::string key = e == std::string::npos ? "" : trim(it->substr(0, e));
            if (it->front() != ' ' && key.rfind(std::string(family) + "_", 0) == 0 && !signal_key_applies(key, kind)) {
                auto end = it + 1;
                while (end != lines.end() && !end->empty() && (end->front() == ' ' || end->front() == '\t')) ++end;
                it = lines.erase(it, end);
            } else {
                ++it;
            }
        }
    }
    std::string text;
    for (const auto& l : lines) text += l + "\n";
    return parse_scenario(text);
}

Scenario aircraft_preset() {
    Scenario s;
    s.name = "aircraft";
    s.a = Matrix{{0, 4, 0, 0}, {-15, -15.85, -4.02, -5.7}, {0, 0, 0, 4}, {-6.85, -9.9, -8, -9.8}};
    s.b = Matrix{{0, 0}, {0.2, 0}, {0, 0}, {0, 0.2}};
    s.d_bar = 1.0;

    s.ar = Matrix{{0, 4, 0, 0}, {-14.18, -16.05, -3.88, -6.12}, {0, 0, 0, 4}, {-7, -10.2, -7, -10.2}};
    s.br = Matrix{{0, 0}, {1, 0}, {0, 0}, {0, 2}};
    s.q = Matrix::identity(4);

    s.x_bar = 6.0;
    s.u1_bar = 1.0;
    s.u2_bar = 0.6;
    s.m = Matrix::identity(2);
    s.x_bar_r = 2.0;
    s.rho = 2.3;

    s.gains.gamma_x = 5.0 * Matrix::identity(2);
    s.gains.gamma_u = 2.0 * Matrix::identity(2);
    s.gains.sigma_x = 1.0;
    s.gains.kx_bar = 5.0;
    s.gains.kr_bar = 10.0;
    s.baseline_gamma_x = 15.0 * Matrix::identity(2);
    s.baseline_sigma_x = 1.0;

    s.reference.kind = ReferenceKind::Sinusoid;
    s.reference.dim = 2;
    s.reference.channels = {{Waveform::Sin, 0.4, 0.1, 0.0}, {Waveform::Cos, 0.2, 0.05, 0.0}};

    s.disturbance.kind = DisturbanceKind::Sinusoid;
    s.disturbance.peak = 0.99;
    s.disturbance.channels = {{Waveform::Sin, 1.0, 2.0, 0.0},
                              {Waveform::Cos, 1.0, 3.0, 0.0},
                              {Waveform::Sin, 1.0, 1.0, 0.0},
                              {Waveform::Cos, 1.0, 2.0, 0.0}};

    s.init.x0 = Vector(4);
    s.init.xr0 = Vector(4);
    s.init.u0 = Vector(2);
    s.init.udot0 = Vector(2);
    s.init.khat_x0 = Matrix(2, 4);
    s.init.ku0 = Matrix::identity(2);

    s.integrator = SimulationOptions{1e-3, 60.0, 10, 1e-6};
    s.controller = ControllerKind::Proposed;
    s.seed = 0;
    return s;
}

Scenario aircraft_baseline_preset() {
    Scenario s = aircraft_preset();
    s.name = "aircraft-baseline";
    s.controller = ControllerKind::RobustMrac;
    return s;
}

Scenario preset_by_name(const std::string& name) {
    if (name == "aircraft") return aircraft_preset();
    if (name == "aircraft-baseline") return aircraft_baseline_preset();
    fail(ErrorKind::InvalidInput, "unknown preset '" + name + "' (aircraft, aircraft-baseline)");
}

PreparedRun prepare(const Scenario& scenario) {
    scenario.validate();
    PreparedRun run;
    run.scenario = scenario;
    run.plant = PlantModel{scenario.a, scenario.b, scenario.d_bar};
    run.warnings = run.plant.validate();
    run.reference = ReferenceModel::make(scenario.ar, scenario.br, scenario.q);
    scenario.gains.validate(scenario.input_dim());
    if (scenario.baseline_gamma_x) {
        AdaptiveGains g = scenario.gains;
        g.gamma_x = *scenario.baseline_gamma_x;
        g.sigma_x = scenario.baseline_sigma_x.value_or(g.sigma_x);
        g.validate(scenario.input_dim());
    }

    run.matched = matched_gains(run.plant, run.reference);
    if (!run.matched.matched) {
        run.warnings.push_back(fmt::format("matching conditions fail: ||A + B Kx - Ar|| = {:.3g}, ||B Kr - Br|| = {:.3g}",
                                           run.matched.residual_a, run.matched.residual_b));
    }
    const double kx_norm = spectral_norm(run.matched.kx);
    if (kx_norm > scenario.gains.kx_bar) {
        run.warnings.push_back(
            fmt::format("||Kx|| = {:.6g} exceeds gains.kx_bar = {}; the estimate cannot reach the true gain", kx_norm,
                        scenario.gains.kx_bar));
    }
    const double kr_norm = spectral_norm(run.matched.kr);
    if (kr_norm > scenario.gains.kr_bar) {
        run.warnings.push_back(fmt::format("||Kr|| = {:.6g} exceeds gains.kr_bar = {}", kr_norm, scenario.gains.kr_bar));
    }

    if (scenario.rho) {
        validate_rho(*scenario.rho, scenario.ar);
        run.rho = *scenario.rho;
    } else {
        run.rho = default_rho(scenario.ar);
    }

    FeasibilityInputs& in = run.feasibility_inputs;
    in.rho = run.rho;
    in.kx_bar = scenario.gains.kx_bar;
    in.kr_bar = scenario.gains.kr_bar;
    in.r_bar = scenario.reference.bound();
    in.x_bar_r = scenario.x_bar_r;
    in.norm_b = spectral_norm(scenario.b);
    in.d_bar = scenario.d_bar;
    in.x_bar = scenario.x_bar;
    in.u1_bar = scenario.u1_bar;
    in.p = run.reference.p;
    in.q = run.reference.q;
    run.feasibility = assess(in);

    run.reference_bound =
        verify_reference_bound(run.reference, scenario.reference, scenario.integrator.horizon, scenario.x_bar_r);
    if (!run.reference_bound.pass) {
        run.warnings.push_back(fmt::format("sup ||x_r|| = {:.6g} is not below constraints.x_bar_r = {}",
                                           run.reference_bound.sup_norm, scenario.x_bar_r));
    }

    run.ed_bar = scenario.ed_bar.value_or(run.feasibility.ed_bar);
    if (run.ed_bar > 0.0) {
        ClosedLoopModel model;
        model.plant = run.plant;
        model.reference = run.reference;
        model.reference_signal = scenario.reference;
        model.disturbance = build_disturbance(scenario);
        model.spec = ConstraintSpec::make(scenario.x_bar, scenario.u1_bar, scenario.u2_bar, scenario.m,
                                          scenario.x_bar_r, run.ed_bar, run.reference.p);
        model.gains = scenario.gains;
        model.kr = run.matched.kr;
        model.kx_true = run.matched.kx;
        model.controller = ControllerKind::Proposed;
        run.model = std::move(model);
        run.model = with_controller(run, scenario.controller);
    } else {
        run.warnings.push_back(fmt::format("no positive Ed is available (computed {:.6g}); runs are not possible",
                                           run.ed_bar));
    }

    const InitialConditions& init = scenario.init;
    run.initial = AugmentedState::zero(scenario.state_dim(), scenario.input_dim());
    run.initial.x = init.x0;
    run.initial.xr = init.xr0;
    run.initial.u = init.u0;
    run.initial.u_dot = init.udot0;
    run.initial.khat_x = init.khat_x0;
    run.initial.ku = init.ku0;
    if (scenario.controller == ControllerKind::Proposed && all_zero(init.ku0) && all_zero(init.u0) &&
        all_zero(init.udot0)) {
        run.warnings.push_back("Ku0, u0 and udot0 are all zero: the input stays identically zero");
    }
    return run;
}

ClosedLoopModel with_controller(const PreparedRun& run, ControllerKind kind) {
    if (!run.model) fail(ErrorKind::InfeasibleModel, "no closed-loop model: Ed is not positive");
    ClosedLoopModel model = *run.model;
    model.controller = kind;
    model.gains = run.scenario.gains;
    if (kind == ControllerKind::RobustMrac) {
        if (run.scenario.baseline_gamma_x) model.gains.gamma_x = *run.scenario.baseline_gamma_x;
        if (run.scenario.baseline_sigma_x) model.gains.sigma_x = *run.scenario.baseline_sigma_x;
    }
    return model;
}

}  // namespace blfmrac
