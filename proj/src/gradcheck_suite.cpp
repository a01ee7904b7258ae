#include "gaitpred/gradcheck_suite.hpp"

#include <chrono>
#include <stdexcept>

#include "gaitpred/gradcheck.hpp"
#include "gaitpred/layers.hpp"
#include "gaitpred/models.hpp"
#include "gaitpred/rng.hpp"

namespace gaitpred {

namespace {

Matrix random_input(std::size_t rows, std::size_t cols, SplitMix64& rng) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform(-1.0, 1.0);
    return m;
}

void randomize(Layer& layer, SplitMix64& rng) {
    for (auto* p : layer.parameters()) {
        for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] = rng.uniform(-0.5, 0.5);
    }
}

std::size_t between(SplitMix64& rng, std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

template <class F>
GradCheckResult check(F& f, const Matrix& x, std::uint64_t seed, bool corrupt) {
    GradCheckOptions opt;
    opt.corrupt_gradient = corrupt;
    return gradient_check(f, x, kGradCheckEpsilon, seed, opt);
}

GradCheckResult check_instance(const std::string& target, std::uint64_t seed, bool corrupt) {
    SplitMix64 rng(seed);
    const bool seq = rng.below(2) == 0;
    if (target == "dense") {
        Dense d(between(rng, 2, 7), between(rng, 1, 5));
        randomize(d, rng);
        return check(d, random_input(between(rng, 1, 3), d.weight().value.cols(), rng), seed, corrupt);
    }
    if (target == "rnn") {
        const std::size_t in = between(rng, 2, 5), h = between(rng, 2, 5);
        SimpleRnn r(in, h, seq);
        randomize(r, rng);
        return check(r, random_input(between(rng, 2, 8), in, rng), seed, corrupt);
    }
    if (target == "lstm") {
        const std::size_t in = between(rng, 2, 5), h = between(rng, 2, 5);
        Lstm l(in, h, seq);
        randomize(l, rng);
        return check(l, random_input(between(rng, 2, 8), in, rng), seed, corrupt);
    }
    if (target == "bilstm") {
        const std::size_t in = between(rng, 2, 4), h = between(rng, 2, 4);
        BiLstm b(in, h, seq);
        randomize(b, rng);
        return check(b, random_input(between(rng, 2, 7), in, rng), seed, corrupt);
    }
    if (target == "conv1d") {
        const std::size_t in = between(rng, 1, 6), filters = between(rng, 1, 5);
        const std::size_t k = between(rng, 1, 3);
        Conv1d c(in, filters, k, seq ? Conv1d::Activation::Relu : Conv1d::Activation::None);
        randomize(c, rng);
        return check(c, random_input(between(rng, k, k + 6), in, rng), seed, corrupt);
    }
    if (target.rfind("model-", 0) == 0) {
        const auto kind = parse_model_kind(target.substr(6));
        if (!kind) throw std::invalid_argument("unknown gradcheck target '" + target + "'");
        ModelSpec spec;
        spec.kind = *kind;
        spec.w_in = between(rng, 5, 10);
        spec.w_out = between(rng, 1, 5);
        spec.hidden = between(rng, 3, 6);
        spec.conv_filters = between(rng, 3, 6);
        Model m = Model::build(spec, seed);
        return check(m, random_input(spec.w_in, 6, rng), seed, corrupt);
    }
    throw std::invalid_argument("unknown gradcheck target '" + target + "'");
}

}  // namespace

std::vector<std::string> gradcheck_targets() {
    return {"dense",        "rnn",        "lstm",         "bilstm",      "conv1d",
            "model-simple", "model-lstm", "model-bilstm", "model-cnnrnn"};
}

GradCheckSummary run_gradcheck_target(const std::string& target, int instances,
                                      std::uint64_t seed, bool corrupt_gradient) {
    if (instances < 1) throw std::invalid_argument("gradcheck needs at least one instance");
    GradCheckSummary s;
    s.target = target;
    s.instances = instances;
    std::uint64_t tag = 0;
    for (char c : target) tag = tag * 131 + static_cast<unsigned char>(c);
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < instances; ++i) {
        const auto r = check_instance(target, derive_seed(seed, {tag, static_cast<std::uint64_t>(i)}),
                                      corrupt_gradient);
        if (r.max_rel_error >= s.max_rel_error) {
            s.max_rel_error = r.max_rel_error;
            s.worst = r.worst;
            s.worst_analytic = r.worst_analytic;
            s.worst_numeric = r.worst_numeric;
        }
    }
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    s.passed = s.max_rel_error <= kGradCheckTolerance;
    return s;
}

}  // namespace gaitpred
