#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gaitpred {

// Gradient-check targets: the five layer kinds and the four assembled
// models ("model-simple", ...).
std::vector<std::string> gradcheck_targets();

struct GradCheckSummary {
    std::string target;
    int instances = 0;
    double max_rel_error = 0.0;
    std::string worst;  // parameter slot of the worst instance
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    double seconds = 0.0;
    bool passed = false;
};

inline constexpr double kGradCheckTolerance = 1e-4;
inline constexpr double kGradCheckEpsilon = 1e-5;

// Runs `instances` seeded random instances of one target (random parameters,
// random input, probe loss) and keeps the worst relative error. With
// `corrupt_gradient`, every instance doubles its largest analytic partial.
GradCheckSummary run_gradcheck_target(const std::string& target, int instances,
                                      std::uint64_t seed, bool corrupt_gradient = false);

}  // namespace gaitpred
