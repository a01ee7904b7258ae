#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gaitpred/layers.hpp"
#include "gaitpred/matrix.hpp"
#include "gaitpred/rng.hpp"

namespace gaitpred {

template <class F>
concept Differentiable = requires(F f, const Matrix& m) {
    { f.forward(m) } -> std::same_as<Matrix>;
    { f.backward(m) } -> std::same_as<Matrix>;
    { f.parameters() } -> std::same_as<std::vector<Parameter*>>;
    f.zero_grad();
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst;  // "<param>[index]" or "input[index]"
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t checked = 0;
};

struct GradCheckOptions {
    bool check_input = true;
    // Fault injection: doubles the largest-magnitude analytic partial before
    // comparing, which must push the error far above any passing threshold.
    bool corrupt_gradient = false;
};

inline double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
    return std::abs(analytic - numeric) / denom;
}

// Compares every analytic partial of the probe loss L = sum(r * f(x)), with
// r drawn from `seed`, against the central difference
// (L(theta + eps) - L(theta - eps)) / (2 eps). Layers must be in inference
// mode (no dropout) so repeated forwards are identical.
template <Differentiable F>
GradCheckResult gradient_check(F& f, const Matrix& input, double eps, std::uint64_t seed,
                               const GradCheckOptions& options = {}) {
    if (!(eps >= 1e-7 && eps <= 1e-3)) {
        throw std::invalid_argument("gradient_check: epsilon must be in [1e-7, 1e-3]");
    }
    SplitMix64 rng(seed);
    Matrix probe = f.forward(input);
    for (std::size_t i = 0; i < probe.size(); ++i) probe[i] = rng.uniform(-1.0, 1.0);

    auto loss = [&](const Matrix& x) {
        const Matrix y = f.forward(x);
        double s = 0;
        for (std::size_t i = 0; i < y.size(); ++i) s += probe[i] * y[i];
        return s;
    };

    f.zero_grad();
    f.forward(input);
    Matrix input_grad = f.backward(probe);

    struct Slot {
        std::string name;
        Matrix* value;
        Matrix analytic;
    };
    std::vector<Slot> slots;
    for (Parameter* p : f.parameters()) slots.push_back({p->name, &p->value, p->grad});
    Matrix x = input;
    if (options.check_input) slots.push_back({"input", &x, input_grad});

    if (options.corrupt_gradient) {
        Slot* best = nullptr;
        std::size_t best_i = 0;
        double best_mag = -1;
        for (auto& s : slots) {
            for (std::size_t i = 0; i < s.analytic.size(); ++i) {
                if (std::abs(s.analytic[i]) > best_mag) {
                    best_mag = std::abs(s.analytic[i]);
                    best = &s;
                    best_i = i;
                }
            }
        }
        if (best) best->analytic[best_i] *= 2.0;
    }

    GradCheckResult result;
    for (auto& s : slots) {
        for (std::size_t i = 0; i < s.value->size(); ++i) {
            const double saved = (*s.value)[i];
            (*s.value)[i] = saved + eps;
            const double up = loss(x);
            (*s.value)[i] = saved - eps;
            const double down = loss(x);
            (*s.value)[i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double err = relative_error(s.analytic[i], numeric);
            ++result.checked;
            if (err > result.max_rel_error) {
                result.max_rel_error = err;
                result.worst = s.name + "[" + std::to_string(i) + "]";
                result.worst_analytic = s.analytic[i];
                result.worst_numeric = numeric;
            }
        }
    }
    // Leave caches consistent with the unperturbed input.
    f.forward(input);
    return result;
}

}  // namespace gaitpred
