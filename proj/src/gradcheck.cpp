#include "blfmrac/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <random>
#include <sstream>

#include "blfmrac/controller.hpp"
#include "blfmrac/linalg.hpp"

namespace blfmrac {

namespace {

class Sampler {
public:
    explicit Sampler(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }
    std::size_t dim(std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
    }

    Vector vector(std::size_t n) {
        Vector v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = normal();
        return v;
    }

    Matrix matrix(std::size_t r, std::size_t c) {
        Matrix m(r, c);
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) m(i, j) = normal();
        }
        return m;
    }

    Matrix spd(std::size_t n) {
        const Matrix g = matrix(n, n);
        Matrix w = (1.0 / static_cast<double>(n)) * (g * g.transpose());
        w += 0.2 * Matrix::identity(n);
        return 0.5 * (w + w.transpose());
    }

    // Point with zᵀWz = ratio·b for a ratio drawn from [0.05, 0.9].
    Vector interior(const Matrix& w, double b) {
        Vector d = vector(w.rows());
        const double ratio = uniform(0.05, 0.9);
        return std::sqrt(ratio * b / quad_form(d, w)) * d;
    }

private:
    std::mt19937_64 rng_;
};

double rel_error(const Vector& approx, const Vector& exact) {
    return (approx - exact).norm() / std::max(exact.norm(), 1e-300);
}

double rel_error(double approx, double exact) {
    return std::abs(approx - exact) / std::max({std::abs(exact), std::abs(approx), 1e-300});
}

GradcheckTerm barrier_term(const char* name, Sampler& rng, const GradcheckOptions& opt, bool flip,
                           std::size_t dim_lo, std::size_t dim_hi) {
    GradcheckTerm term{name, 0.0, opt.points, false};
    for (std::size_t k = 0; k < opt.points; ++k) {
        const std::size_t n = rng.dim(dim_lo, dim_hi);
        const Matrix w = rng.spd(n);
        const double b = rng.uniform(0.1, 4.0);
        const Vector z = rng.interior(w, b);
        const double h = 1e-5 * std::sqrt(b / symmetric_eig_extremes(w).lambda_max);

        Vector analytic = barrier_gradient(z, w, b, name);
        if (flip) analytic *= -1.0;
        Vector fd(n);
        for (std::size_t i = 0; i < n; ++i) {
            Vector zp = z;
            Vector zm = z;
            zp[i] += h;
            zm[i] -= h;
            fd[i] = (barrier_value(zp, w, b, name) - barrier_value(zm, w, b, name)) / (2.0 * h);
        }
        term.max_rel_error = std::max(term.max_rel_error, rel_error(fd, analytic));
    }
    term.pass = term.max_rel_error <= opt.threshold;
    return term;
}

struct ThetaPoint {
    ConstraintSpec spec;
    AdaptiveGains gains;
    ControllerState state;
    Vector v;
};

ThetaPoint theta_point(Sampler& rng) {
    const std::size_t m = rng.dim(1, 4);
    const std::size_t n = rng.dim(m, 6);
    ThetaPoint p;
    p.spec = ConstraintSpec::make(6.0, rng.uniform(0.5, 2.0), rng.uniform(0.3, 2.0), rng.spd(m), 2.0, 1.0,
                                  rng.spd(n));
    p.gains.gamma_x = rng.spd(m);
    p.gains.gamma_u = rng.spd(m);
    p.gains.sigma_x = 1.0;
    p.gains.kx_bar = 5.0;
    p.gains.kr_bar = 10.0;
    p.state.u = rng.interior(p.spec.m, p.spec.u1_primed * p.spec.u1_primed);
    p.state.u_dot = rng.interior(p.spec.m, p.spec.u2_primed * p.spec.u2_primed);
    p.state.khat_x = rng.matrix(m, n);
    p.state.ku = rng.matrix(m, m);
    p.v = rng.vector(m);
    return p;
}

}  // namespace

bool GradcheckReport::pass() const {
    return std::all_of(terms.begin(), terms.end(), [](const GradcheckTerm& t) { return t.pass; });
}

GradcheckReport run_gradcheck(const GradcheckOptions& opt) {
    GradcheckReport report;
    report.threshold = opt.threshold;
    Sampler rng(opt.seed);

    report.terms.push_back(barrier_term("V1", rng, opt, opt.inject == FaultInjection::V1, 2, 8));
    report.terms.push_back(barrier_term("V2", rng, opt, opt.inject == FaultInjection::V2, 1, 4));
    report.terms.push_back(barrier_term("V3", rng, opt, opt.inject == FaultInjection::V3, 1, 4));

    const double flip = opt.inject == FaultInjection::ThetaRate ? -1.0 : 1.0;
    GradcheckTerm identity{"ThetaRate", 0.0, opt.points, false};
    GradcheckTerm flow{"ThetaFlow", 0.0, opt.points, false};
    for (std::size_t k = 0; k < opt.points; ++k) {
        const ThetaPoint p = theta_point(rng);
        const double assembled = flip * theta_rate_assembled(p.state, p.v, p.gains, p.spec);
        const double closed = theta_rate_closed_form(p.state.u_dot, p.spec);
        identity.max_rel_error = std::max(identity.max_rel_error, rel_error(assembled, closed));

        // V_θ along the straight line through the state in the flow direction.
        const Vector accel = controller_accel(p.state, p.v, p.spec);
        const Matrix ku_dot = ku_derivative(p.state.u_dot, p.v, p.gains, p.spec);
        const double speed = std::max({p.state.u_dot.norm(), accel.norm(), ku_dot.frobenius_norm(), 1e-300});
        const double h = 1e-5 * std::min(p.spec.u1_primed, p.spec.u2_primed) / speed;
        auto theta_at = [&](double s) {
            ControllerState q = p.state;
            q.u += s * p.state.u_dot;
            q.u_dot += s * accel;
            q.ku += s * ku_dot;
            return composite_lyapunov_theta(q, p.gains, p.spec);
        };
        const double fd = (theta_at(h) - theta_at(-h)) / (2.0 * h);
        flow.max_rel_error = std::max(flow.max_rel_error, rel_error(fd, assembled));
    }
    identity.pass = identity.max_rel_error <= opt.threshold;
    flow.pass = flow.max_rel_error <= opt.threshold;
    report.terms.push_back(identity);
    report.terms.push_back(flow);
    return report;
}

std::string format_gradcheck(const GradcheckReport& report) {
    std::ostringstream os;
    for (const auto& t : report.terms) {
        os << fmt::format("{:<10} points={:<4} max_rel_error={:.3e}  {}\n", t.name, t.points, t.max_rel_error,
                          t.pass ? "PASS" : "FAIL");
    }
    os << fmt::format("threshold {:.0e}: {}\n", report.threshold, report.pass() ? "PASS" : "FAIL");
    return os.str();
}

}  // namespace blfmrac
