// Acceptance checks. Prints one PASS/FAIL line per criterion. Exits 0 once
// every line is printed; with --strict it exits 1 when any criterion fails.
//
// usage: acceptance <path-to-gaitpred> [--strict] [--only N[,N...]]

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "gaitpred/csv_io.hpp"
#include "gaitpred/experiments.hpp"
#include "gaitpred/gait_data.hpp"
#include "gaitpred/gradcheck.hpp"
#include "gaitpred/gradcheck_suite.hpp"
#include "gaitpred/metrics.hpp"
#include "gaitpred/models.hpp"
#include "gaitpred/rng.hpp"
#include "gaitpred/synth.hpp"

namespace fs = std::filesystem;
using namespace gaitpred;
using Clock = std::chrono::steady_clock;

namespace tol {
constexpr double kGradRelError = 1e-4;
constexpr double kGradBudgetS = 120.0;
constexpr double kMetricRel = 1e-12;
constexpr double kWorkedCase = 1e-4;
constexpr double kByTrialRatio = 0.8;
constexpr double kByTrialAbsRmse = 0.25;
constexpr double kByTrialBudgetS = 600.0;
constexpr double kByParticipantBudgetS = 1200.0;
constexpr double kPredictWallS = 1.0;
constexpr double kPredictRatio = 0.1;
constexpr double kLearnFinalFraction = 0.1;
}  // namespace tol

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(n, std::thread::hardware_concurrency()));
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

// Emits, for each target row, the index of the step it predicts.
class IndexPredictor final : public WindowPredictor {
public:
    IndexPredictor(std::size_t w_in, std::size_t w_out) : w_in_(w_in), w_out_(w_out) {}
    std::string name() const override { return "index"; }
    std::size_t w_in() const override { return w_in_; }
    std::size_t w_out() const override { return w_out_; }
    Matrix predict(const Matrix& window) override {
        Matrix y(w_out_, kChannels);
        for (std::size_t r = 0; r < w_out_; ++r) y(r, 0) = window(0, 0) + static_cast<double>(w_in_ + r);
        return y;
    }

private:
    std::size_t w_in_, w_out_;
};

// ---- 1 ---------------------------------------------------------------------
Outcome gradient_correctness() {
    const auto t0 = Clock::now();
    GradCheckSummary worst;
    std::vector<std::string> failing;
    for (const auto& t : gradcheck_targets()) {
        const auto s = run_gradcheck_target(t, 20, 2024);
        if (s.max_rel_error > tol::kGradRelError) failing.push_back(t);
        if (s.max_rel_error >= worst.max_rel_error) worst = s;
    }
    const double dt = seconds_since(t0);
    std::string failed_list;
    for (const auto& t : failing) failed_list += (failed_list.empty() ? "" : ",") + t;
    return {failing.empty() && dt < tol::kGradBudgetS,
            std::to_string(gradcheck_targets().size()) + " targets x 20 instances, max rel err " +
                fmt("%.2e", worst.max_rel_error) + " at " + worst.target + " " + worst.worst + " (analytic " +
                fmt("%.4e", worst.worst_analytic) + ", numeric " + fmt("%.4e", worst.worst_numeric) + ")" +
                (failing.empty() ? "" : ", over 1e-4: " + failed_list) + ", " + fmt("%.1f s", dt)};
}

// ---- 2 ---------------------------------------------------------------------
Outcome shape_law() {
    auto big = Model::build({ModelKind::CnnRnn, 20, 5}, 1);
    const auto t20 = big.trace_lengths();
    const bool ok20 = t20.size() >= 3 && t20[0] == 20 && t20[1] == 18 && t20[2] == 16;
    auto small = Model::build({ModelKind::CnnRnn, 5, 1}, 1);
    const auto t5 = small.trace_lengths();
    const bool ok5 = t5.size() >= 3 && t5[0] == 5 && t5[1] == 3 && t5[2] == 1 &&
                     small.forward(Matrix(5, kChannels)).rows() == 1;
    bool rejected = false;
    try {
        Model::build({ModelKind::CnnRnn, 4, 1}, 1);
    } catch (const std::invalid_argument&) {
        rejected = true;
    }
    return {ok20 && ok5 && rejected, std::string("20->18->16 ") + (ok20 ? "ok" : "WRONG") + ", 5->3->1 " +
                                         (ok5 ? "ok" : "WRONG") + ", w_in 4 " + (rejected ? "rejected" : "ACCEPTED")};
}

// ---- 3 ---------------------------------------------------------------------
Outcome metric_oracle() {
    SplitMix64 rng(77);
    double worst = 0;
    for (int inst = 0; inst < 1000; ++inst) {
        const std::size_t rows = 1 + rng.below(40), cols = 1 + rng.below(6);
        Matrix a(rows, cols), b(rows, cols);
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = rng.uniform(-3, 3);
            b[i] = rng.uniform(-3, 3);
        }
        std::vector<std::uint8_t> mask(rows, 1);
        if (inst % 2) {
            for (auto& m : mask) m = rng.below(4) != 0;
            mask[rng.below(rows)] = 1;
        }
        double abs_sum = 0, sq_sum = 0;
        std::size_t n = 0;
        for (std::size_t r = 0; r < rows; ++r) {
            if (!mask[r]) continue;
            for (std::size_t c = 0; c < cols; ++c) {
                const double d = a(r, c) - b(r, c);
                abs_sum += std::abs(d);
                sq_sum += d * d;
                ++n;
            }
        }
        const auto m = compute_metrics(a, b, mask);
        const double mae = abs_sum / n, mse = sq_sum / n;
        worst = std::max({worst, relative_error(m.mae, mae), relative_error(m.mse, mse),
                          relative_error(m.rmse, std::sqrt(m.mse)), m.n == n ? 0.0 : 1.0});
    }
    Matrix y(3, 1), p(3, 1);
    y[0] = 1, y[1] = 2, y[2] = 3;
    p[0] = 2, p[1] = 2, p[2] = 5;
    const auto w = compute_metrics(y, p);
    const bool worked = std::abs(w.mae - 1.0) <= tol::kWorkedCase && std::abs(w.mse - 1.6667) <= tol::kWorkedCase &&
                        std::abs(w.rmse - 1.2910) <= tol::kWorkedCase;
    return {worst <= tol::kMetricRel && worked,
            "1000 instances, max rel diff " + fmt("%.1e", worst) + "; worked case MAE " + fmt("%.4f", w.mae) +
                " MSE " + fmt("%.4f", w.mse) + " RMSE " + fmt("%.4f", w.rmse)};
}

// ---- 4 ---------------------------------------------------------------------
Outcome window_split_algebra() {
    std::size_t bad_counts = 0, count_cases = 0;
    for (std::size_t T = 0; T <= 50; ++T) {
        for (std::size_t wi = 1; wi <= 20; ++wi) {
            for (std::size_t wo = 1; wo <= 5; ++wo) {
                std::size_t brute = 0;
                for (std::size_t s = 0; s + wi + wo <= T; ++s) ++brute;
                ++count_cases;
                if (window_count(T, wi, wo) != brute) ++bad_counts;
                if (T >= 1) {
                    Matrix v(T, kChannels);
                    if (make_windows(v, wi, wo).size() != brute) ++bad_counts;
                }
            }
        }
    }

    std::size_t bad_splits = 0, split_cases = 0;
    for (std::size_t T = 18; T <= 1500; T += (T < 200 ? 1 : 7)) {
        SplitRegions r;
        try {
            r = plan_split(T, 5, 1);
        } catch (const std::invalid_argument&) {
            continue;
        }
        ++split_cases;
        const auto need_test = static_cast<std::size_t>(std::ceil(0.15 * static_cast<double>(T) - 1e-9));
        const bool ordered = 0 < r.train_end && r.train_end < r.val_end && r.val_end < r.total && r.total == T;
        bool ok = ordered && r.test_samples() >= need_test;
        if (ok) {
            Matrix v(T, kChannels);
            for (std::size_t t = 0; t < T; ++t) v(t, 0) = static_cast<double>(t);
            Trial trial;
            trial.values = v;
            const auto split = split_by_trial(trial, 5, 1);
            // Every window, inputs and targets, stays inside its own region.
            auto inside = [&](const WindowedDataset& d, std::size_t lo, std::size_t hi) {
                for (const auto& p : d.pairs) {
                    if (p.start < lo || p.start + 6 > hi || p.x(0, 0) != static_cast<double>(p.start)) return false;
                }
                return !d.empty();
            };
            ok = inside(split.train, 0, r.train_end) && inside(split.val, r.train_end, r.val_end) &&
                 inside(split.test, r.val_end, T);
        }
        if (!ok) ++bad_splits;
    }

    std::size_t bad_tiles = 0, tile_cases = 0;
    for (std::size_t wi = 1; wi <= 20; ++wi) {
        for (std::size_t wo = 1; wo <= 5; ++wo) {
            for (std::size_t T = wi + wo; T <= 80; ++T) {
                Matrix v(T, kChannels);
                for (std::size_t t = 0; t < T; ++t) v(t, 0) = static_cast<double>(t);
                IndexPredictor p(wi, wo);
                const auto s = predict_trial(p, v);
                ++tile_cases;
                bool ok = true;
                for (std::size_t t = 0; t < T && ok; ++t) {
                    ok = s.valid[t] == (t >= wi ? 1 : 0) && (t < wi || s.values(t, 0) == static_cast<double>(t));
                }
                if (!ok) ++bad_tiles;
            }
        }
    }
    return {bad_counts == 0 && bad_splits == 0 && bad_tiles == 0 && split_cases > 0,
            std::to_string(count_cases) + " window-count cases (" + std::to_string(bad_counts) + " bad), " +
                std::to_string(split_cases) + " splits (" + std::to_string(bad_splits) + " bad), " +
                std::to_string(tile_cases) + " tilings (" + std::to_string(bad_tiles) + " bad)"};
}

// The same derivation `gaitpred gen` uses for participant p.
Trial corpus_trial(std::uint64_t seed, int p, double noise) {
    GaitProfile base = default_profile();
    base.noise_std = noise;
    const auto profile = vary_profile(base, derive_seed(seed, {1, static_cast<std::uint64_t>(p)}));
    char pid[16];
    std::snprintf(pid, sizeof pid, "P%02d", p + 1);
    return generate_participant(profile, 3, 10.0, derive_seed(seed, {2, static_cast<std::uint64_t>(p)}), pid)[0];
}

// ---- 5 ---------------------------------------------------------------------
Outcome by_trial_analogue() {
    const auto t0 = Clock::now();
    constexpr int kParticipants = 17;
    std::vector<double> model_rmse(kParticipants, NAN), base_rmse(kParticipants, NAN);
    std::atomic<int> failures{0};
    parallel_for(kParticipants, [&](std::size_t p) {
        const Trial trial = corpus_trial(2024, static_cast<int>(p), 0.02);
        ExperimentConfig cfg;  // 5x1, MSE, Adam 1e-4, 40 epochs, batch 32, unit scale
        cfg.kinds = {ModelKind::BiLstm2};
        cfg.seed = 2024;
        const auto res = run_by_trial(trial, cfg);
        for (const auto& r : res.runs) {
            if (!r.ok) {
                ++failures;
                continue;
            }
            (r.model == "persistence" ? base_rmse : model_rmse)[p] = r.metrics.rmse;
        }
    });
    const double dt = seconds_since(t0);
    const double m = median(model_rmse), b = median(base_rmse);
    const bool ok = failures == 0 && m <= tol::kByTrialRatio * b && m <= tol::kByTrialAbsRmse &&
                    dt < tol::kByTrialBudgetS;
    return {ok, "17 trials, median RMSE bilstm " + fmt("%.4f", m) + " vs persistence " + fmt("%.4f", b) +
                    " (ratio " + fmt("%.3f", m / b) + ", need <= 0.8; abs need <= 0.25), " + fmt("%.0f s", dt)};
}

// ---- 6 ---------------------------------------------------------------------
Outcome by_participant_analogue() {
    const auto t0 = Clock::now();
    constexpr int kSeeds = 5;
    std::vector<double> cnn(kSeeds, NAN), simple(kSeeds, NAN);
    std::atomic<int> failures{0};
    parallel_for(kSeeds, [&](std::size_t i) {
        const std::uint64_t seed = 100 + i;
        GaitProfile base = default_profile();
        const auto profile = vary_profile(base, derive_seed(seed, {1, 0}));
        const auto trials = generate_participant(profile, 5, 10.0, derive_seed(seed, {2, 0}), "P01");
        ExperimentConfig cfg;
        cfg.protocol = Protocol::ByParticipant;
        cfg.kinds = {ModelKind::CnnRnn, ModelKind::SimpleRnn};
        cfg.include_baseline = false;
        cfg.cells = {{20, 5}};
        cfg.seed = seed;
        const auto res = run_by_participant(trials, cfg);
        for (const auto& r : res.runs) {
            if (!r.ok) {
                ++failures;
                continue;
            }
            (r.model == "cnnrnn" ? cnn : simple)[i] = r.metrics.rmse;
        }
    });
    const double dt = seconds_since(t0);
    const double c = median(cnn), s = median(simple);
    return {failures == 0 && c <= s && dt < tol::kByParticipantBudgetS,
            "cell 20x5, 5 seeds, median RMSE cnnrnn " + fmt("%.4f", c) + " vs simple " + fmt("%.4f", s) + ", " +
                fmt("%.0f s", dt)};
}

// ---- 7 ---------------------------------------------------------------------
Outcome real_time() {
    const Trial trial = generate_trial(default_profile(), 10.0, 5);
    double worst = 0;
    std::string worst_name;
    bool ok = trial.length() == 1250;
    for (auto kind : kAllModelKinds) {
        for (WindowCell cell : {WindowCell{5, 1}, WindowCell{20, 5}}) {
            auto model = Model::build({kind, cell.w_in, cell.w_out}, 1);
            const auto t0 = Clock::now();
            const auto s = predict_trial(model, trial.values);
            const double dt = seconds_since(t0);
            ok = ok && s.valid_count() == trial.length() - cell.w_in;
            if (dt >= worst) {
                worst = dt;
                worst_name = to_string(kind) + " " + cell.label();
            }
        }
    }
    const double ratio = worst / trial.duration_s();
    return {ok && worst < tol::kPredictWallS && ratio < tol::kPredictRatio,
            "1250 steps, slowest " + worst_name + " " + fmt("%.4f s", worst) + ", ratio to 10 s " +
                fmt("%.5f", ratio)};
}

// ---- 8 ---------------------------------------------------------------------
Outcome cli_determinism(const std::string& exe) {
    const fs::path root = fs::temp_directory_path() / "gaitpred_acceptance_determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    auto run = [&](const std::string& args) {
        const std::string cmd = "\"" + exe + "\" " + args + " > \"" + (root / "log.txt").string() + "\" 2>&1";
        return std::system(cmd.c_str());
    };
    const std::string corpus = (root / "corpus").string();
    if (run("gen --out \"" + corpus + "\" --participants 1 --trials 3 --duration 3 --seed 8") != 0) {
        return {false, "gen failed"};
    }
    const std::string common = "run-participant --manifest \"" + corpus + "/manifest.csv\" --grid full --seed 11";
    const int a = run(common + " --out \"" + (root / "a").string() + "\"");
    const int b = run(common + " --out \"" + (root / "b").string() + "\"");
    const int c = run(common + " --jobs 4 --out \"" + (root / "c").string() + "\"");
    if (a || b || c) return {false, "run-participant exit codes " + std::to_string(a) + "/" + std::to_string(b)};
    const auto ra = read_text_file(root / "a" / "report.csv");
    const auto rb = read_text_file(root / "b" / "report.csv");
    const auto rc = read_text_file(root / "c" / "report.csv");
    std::size_t rows = 0;
    for (char ch : ra) rows += ch == '\n';
    const bool same = !ra.empty() && ra == rb && ra == rc;
    return {same, std::string("report.csv ") + (same ? "byte-identical" : "DIFFERS") + " across 2 sequential runs and a --jobs 4 run (" +
                      std::to_string(ra.size()) + " bytes, " + std::to_string(rows) + " lines)"};
}

// ---- 9 ---------------------------------------------------------------------
Outcome learnability() {
    auto profile = default_profile();
    profile.noise_std = 0;
    const Trial trial = generate_trial(profile, 10.0, 9);
    ExperimentConfig cfg;  // 40 epochs, MSE, Adam 1e-4, batch 32
    cfg.kinds = {ModelKind::BiLstm2};
    cfg.include_baseline = false;
    cfg.seed = 9;
    const auto res = run_by_trial(trial, cfg);
    if (res.runs.empty() || !res.runs[0].ok) return {false, "training failed"};
    const auto& loss = res.runs[0].history.train_loss;
    if (loss.size() != 40) return {false, "expected 40 epochs"};
    auto moving = [&](std::size_t end) {
        double s = 0;
        for (std::size_t i = end - 5; i < end; ++i) s += loss[i];
        return s / 5;
    };
    std::size_t rises = 0;
    for (std::size_t e = 5; e < loss.size(); ++e) rises += moving(e + 1) > moving(e);
    const double frac = loss.back() / loss.front();
    return {frac < tol::kLearnFinalFraction && rises == 0,
            "final/epoch-1 train MSE " + fmt("%.4f", frac) + " (need < 0.1), moving-average rises after epoch 5: " +
                std::to_string(rises)};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: acceptance <path-to-gaitpred> [--strict] [--only N[,N...]]\n");
        return 2;
    }
    const std::string exe = argv[1];
    bool strict = false;
    std::set<int> only;
    for (int i = 2; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--strict") {
            strict = true;
        } else if (a == "--only" && i + 1 < argc) {
            for (const auto& s : split_csv_line(argv[++i])) {
                if (const auto v = parse_int(s)) only.insert(static_cast<int>(*v));
            }
        }
    }

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gradient correctness", gradient_correctness},
        {"shape law", shape_law},
        {"metric oracle", metric_oracle},
        {"window/split/tiling algebra", window_split_algebra},
        {"by-trial analogue", by_trial_analogue},
        {"by-participant analogue", by_participant_analogue},
        {"real-time prediction", real_time},
        {"determinism", [&] { return cli_determinism(exe); }},
        {"learnability", learnability},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!only.empty() && !only.count(id)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d criteria failed\n", failed);
    return strict && failed ? 1 : 0;
}
