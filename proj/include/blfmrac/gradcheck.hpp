#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace blfmrac {

/// Test hook: flips the sign of one analytic quantity before comparison.
enum class FaultInjection { None, V1, V2, V3, ThetaRate };

struct GradcheckOptions {
    std::size_t points = 100;
    std::uint64_t seed = 0;
    double threshold = 1e-6;
    FaultInjection inject = FaultInjection::None;
};

struct GradcheckTerm {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t points = 0;
    bool pass = false;
};

struct GradcheckReport {
    std::vector<GradcheckTerm> terms;
    double threshold = 0.0;

    bool pass() const;
};

/// Compares the analytic barrier gradients against central differences and
/// the assembled V̇_θ against both the closed form and a finite difference
/// of V_θ along the controller flow, at seeded random interior points.
GradcheckReport run_gradcheck(const GradcheckOptions& options);

std::string format_gradcheck(const GradcheckReport& report);

}  // namespace blfmrac
