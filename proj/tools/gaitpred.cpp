// gaitpred: generate synthetic gait corpora, run the by-trial and
// by-participant experiments, benchmark prediction time, check gradients and
// render plots.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gaitpred/csv_io.hpp"
#include "gaitpred/experiments.hpp"
#include "gaitpred/gait_data.hpp"
#include "gaitpred/gradcheck_suite.hpp"
#include "gaitpred/metrics.hpp"
#include "gaitpred/models.hpp"
#include "gaitpred/rng.hpp"
#include "gaitpred/synth.hpp"

namespace fs = std::filesystem;
using namespace gaitpred;
using json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// Bad selections and malformed values found after parsing.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto t = std::string(trim(item));
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

std::string join(const std::vector<std::string>& items, const std::string& sep = ", ") {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
    return out;
}

// ---- config file -----------------------------------------------------------

// `key = value` lines, '#' comments. Keys are long flag names without the
// leading dashes. Each entry becomes `--key=value` placed right after the
// subcommand, unless the same flag also appears on the command line.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    std::size_t config_at = args.size();
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) config_at = i;
        if (args[i].rfind("--config=", 0) == 0) config_at = i;
    }
    if (config_at == args.size()) return args;
    std::string path;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (i == config_at) {
            if (args[i] == "--config") path = args[++i];
            else path = args[i].substr(9);
            continue;
        }
        rest.push_back(args[i]);
    }
    std::set<std::string> explicit_flags;
    for (const auto& a : rest) {
        if (a.rfind("--", 0) == 0) explicit_flags.insert(a.substr(2, a.find('=') == std::string::npos
                                                                         ? std::string::npos
                                                                         : a.find('=') - 2));
    }
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file '" + path + "'");
    std::vector<std::string> injected;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto t = std::string(trim(line));
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw UsageError(path + ":" + std::to_string(line_no) + ": expected key=value");
        }
        const auto key = std::string(trim(t.substr(0, eq)));
        auto value = std::string(trim(t.substr(eq + 1)));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            value = value.substr(1, value.size() - 2);
        }
        if (explicit_flags.count(key)) continue;
        injected.push_back("--" + key + "=" + value);
    }
    // rest[0] is the subcommand when present.
    std::vector<std::string> out;
    std::size_t sub = 0;
    while (sub < rest.size() && rest[sub].rfind("-", 0) == 0) ++sub;
    for (std::size_t i = 0; i < rest.size(); ++i) {
        out.push_back(rest[i]);
        if (i == sub) out.insert(out.end(), injected.begin(), injected.end());
    }
    return out;
}

// ---- run manifest ----------------------------------------------------------

json resolved_options(const CLI::App& sub) {
    json cfg = json::object();
    for (const CLI::Option* opt : sub.get_options()) {
        const std::string name = opt->get_single_name();
        if (name.empty() || name == "help" || name == "h") continue;
        if (opt->count() > 0) {
            const auto& res = opt->results();
            if (opt->get_items_expected_max() > 1 || res.size() > 1) cfg[name] = res;
            else cfg[name] = opt->as<std::string>();
        } else {
            cfg[name] = opt->get_default_str();
        }
    }
    return cfg;
}

std::string config_text(const json& cfg) {
    std::string out;
    for (const auto& [k, v] : cfg.items()) {
        if (v.is_array()) {
            std::vector<std::string> items;
            for (const auto& e : v) items.push_back(e.get<std::string>());
            if (!items.empty()) out += k + "=" + join(items, ",") + "\n";
        } else if (!v.get<std::string>().empty()) {
            out += k + "=" + v.get<std::string>() + "\n";
        }
    }
    return out;
}

struct Manifest {
    std::string command;
    std::vector<std::string> argv;
    std::uint64_t seed = 0;
    std::vector<std::string> artifacts;
};

// <prefix>run_manifest.json plus <prefix>resolved.conf, which replays the
// run through `--config`.
void write_run_manifest(const fs::path& dir, const CLI::App& sub, Manifest m, int exit_code,
                        const std::string& prefix = "") {
    const json cfg = resolved_options(sub);
    write_text_file(dir / (prefix + "resolved.conf"), config_text(cfg));
    m.artifacts.push_back(prefix + "resolved.conf");
    std::sort(m.artifacts.begin(), m.artifacts.end());
    json j;
    j["command"] = m.command;
    j["tool_version"] = kToolVersion;
    j["argv"] = m.argv;
    j["seed"] = m.seed;
    j["config"] = cfg;
    j["artifacts"] = m.artifacts;
    j["exit_code"] = exit_code;
    write_text_file(dir / (prefix + "run_manifest.json"), j.dump(2) + "\n");
}

std::vector<std::string> list_files(const fs::path& dir) {
    std::vector<std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), dir).generic_string();
        if (rel != "run_manifest.json" && rel != "resolved.conf") out.push_back(rel);
    }
    return out;
}

// ---- shared experiment flags -----------------------------------------------

struct ExperimentFlags {
    std::string models = "simple,lstm,bilstm,cnnrnn";
    bool no_baseline = false;
    std::uint64_t seed = 0;
    int epochs = 0;
    std::size_t batch_size = 32;
    double lr = 0.0;
    std::size_t hidden = 20;
    bool no_shuffle = false;
    bool dropout = false;
    std::string normalization = "unit";
    std::string stitch = "tile";
    std::size_t jobs = 1;
    bool no_save_models = false;
    std::string truncate = "none";
    std::string trim;

    void add_to(CLI::App& sub, bool training = true) {
        sub.add_option("--models", models, "Comma-separated kinds: simple, lstm, bilstm, cnnrnn")
            ->capture_default_str();
        sub.add_flag("--no-baseline", no_baseline, "Skip the persistence baseline")->default_str("false");
        sub.add_option("--seed", seed, "Run seed; every cell and layer seed derives from it")
            ->capture_default_str();
        sub.add_option("--epochs", epochs, "Epoch override (0 = protocol default)")->capture_default_str();
        if (training) {
            sub.add_option("--batch-size", batch_size, "Mini-batch size")
                ->capture_default_str()
                ->check(CLI::PositiveNumber);
            sub.add_option("--lr", lr, "Learning-rate override for every kind (0 = default)")
                ->capture_default_str();
            sub.add_option("--hidden", hidden, "Recurrent hidden units")
                ->capture_default_str()
                ->check(CLI::PositiveNumber);
            sub.add_flag("--no-shuffle", no_shuffle, "Keep batches in window order")->default_str("false");
            sub.add_flag("--dropout", dropout, "Enable recurrent dropout")->default_str("false");
            sub.add_option("--normalization", normalization, "offset or unit")
                ->capture_default_str()
                ->check(CLI::IsMember({"offset", "unit"}));
            sub.add_option("--stitch", stitch, "Test-trial stitching: tile or average")
                ->capture_default_str()
                ->check(CLI::IsMember({"tile", "average"}));
            sub.add_option("--jobs", jobs, "Worker threads for independent runs")
                ->capture_default_str()
                ->check(CLI::PositiveNumber);
            sub.add_flag("--no-save-models", no_save_models, "Do not write model_*.bin files")
                ->default_str("false");
        }
        sub.add_option("--truncate", truncate, "Idle-margin removal: none or auto")
            ->capture_default_str()
            ->check(CLI::IsMember({"none", "auto"}));
        sub.add_option("--trim", trim, "Manual truncation START:END (overrides --truncate)");
    }

    ExperimentConfig config(Protocol protocol) const {
        ExperimentConfig c;
        c.protocol = protocol;
        c.kinds.clear();
        for (const auto& name : split_list(models)) {
            const auto k = parse_model_kind(name);
            if (!k) throw UsageError("unknown model kind '" + name + "' (expected simple, lstm, bilstm, cnnrnn)");
            if (std::find(c.kinds.begin(), c.kinds.end(), *k) == c.kinds.end()) c.kinds.push_back(*k);
        }
        c.include_baseline = !no_baseline;
        if (c.kinds.empty() && !c.include_baseline) throw UsageError("no models selected");
        c.seed = seed;
        if (epochs < 0) throw UsageError("--epochs must be >= 0");
        if (epochs > 0) c.epochs = epochs;
        if (lr < 0) throw UsageError("--lr must be >= 0");
        if (lr > 0) c.learning_rate = lr;
        c.batch_size = batch_size;
        c.hidden = hidden;
        c.shuffle = !no_shuffle;
        c.dropout = dropout;
        c.scale_to_unit = normalization == "unit";
        c.stitch = *parse_stitch_mode(stitch == "average" ? "average" : "tile");
        c.jobs = jobs;
        c.save_models = !no_save_models;
        return c;
    }

    Trial preprocess(const Trial& t) const {
        if (!trim.empty()) {
            const auto colon = trim.find(':');
            const auto a = parse_int(trim.substr(0, colon));
            const auto b = colon == std::string::npos ? std::nullopt : parse_int(trim.substr(colon + 1));
            if (!a || !b || *a < 0 || *b <= *a) throw UsageError("--trim expects START:END with START < END");
            return truncate_manual(t, static_cast<std::size_t>(*a), static_cast<std::size_t>(*b));
        }
        if (truncate == "auto") return truncate_auto(t);
        return t;
    }
};

// ---- corpus selection --------------------------------------------------------

struct Participant {
    std::string id;
    std::vector<ManifestEntry> entries;
};

std::vector<Participant> group_manifest(const std::vector<ManifestEntry>& entries) {
    std::vector<Participant> out;
    for (const auto& e : entries) {
        auto it = std::find_if(out.begin(), out.end(), [&](const Participant& p) { return p.id == e.participant_id; });
        if (it == out.end()) {
            out.push_back({e.participant_id, {}});
            it = out.end() - 1;
        }
        it->entries.push_back(e);
    }
    return out;
}

std::vector<Participant> select_participants(const std::vector<Participant>& all, const std::string& selector) {
    if (all.empty()) throw UsageError("manifest lists no trials");
    if (selector == "all") return all;
    std::vector<Participant> out;
    for (const auto& id : split_list(selector)) {
        auto it = std::find_if(all.begin(), all.end(), [&](const Participant& p) { return p.id == id; });
        if (it == all.end()) {
            std::vector<std::string> ids;
            for (const auto& p : all) ids.push_back(p.id);
            throw UsageError("participant '" + id + "' not in manifest; available: " + join(ids));
        }
        out.push_back(*it);
    }
    return out;
}

std::vector<ManifestEntry> select_trials(const Participant& p, const std::string& selector) {
    if (selector == "all") return p.entries;
    if (selector == "first") return {p.entries.front()};
    std::vector<ManifestEntry> out;
    for (const auto& id : split_list(selector)) {
        auto it = std::find_if(p.entries.begin(), p.entries.end(),
                               [&](const ManifestEntry& e) { return e.trial_id == id; });
        if (it == p.entries.end()) {
            std::vector<std::string> ids;
            for (const auto& e : p.entries) ids.push_back(e.trial_id);
            throw UsageError("trial '" + id + "' not found for participant " + p.id + "; available: " + join(ids));
        }
        out.push_back(*it);
    }
    return out;
}

Trial load_entry(const ManifestEntry& e) { return load_trial_file(e.path, e.participant_id, e.trial_id); }

std::optional<std::size_t> trial_index(const Participant& p, const std::string& id) {
    if (id.empty()) return std::nullopt;
    for (std::size_t i = 0; i < p.entries.size(); ++i) {
        if (p.entries[i].trial_id == id) return i;
    }
    std::vector<std::string> ids;
    for (const auto& e : p.entries) ids.push_back(e.trial_id);
    throw UsageError("trial '" + id + "' not found for participant " + p.id + "; available: " + join(ids));
}

WindowCell parse_cell(const std::string& s) {
    const auto x = s.find('x');
    const auto a = parse_int(s.substr(0, x));
    const auto b = x == std::string::npos ? std::nullopt : parse_int(s.substr(x + 1));
    if (!a || !b || *a <= 0 || *b <= 0) throw UsageError("bad cell '" + s + "' (expected W_INxW_OUT, e.g. 20x5)");
    return {static_cast<std::size_t>(*a), static_cast<std::size_t>(*b)};
}

void print_report(const std::vector<ModelRun>& runs) {
    std::vector<MetricsRecord> records;
    for (const auto& r : runs) {
        if (r.ok) records.push_back(r.metrics);
        else std::cerr << "run failed: " << r.artifact_name() << ": " << r.error << "\n";
    }
    const auto table = aggregate(records);
    std::printf("%-12s %5s %5s %10s %10s %10s %12s %4s %4s\n", "model", "w_in", "w_out", "mean_mae", "mean_mse",
                "mean_rmse", "median_rmse", "n", "rank");
    for (const auto& row : table.rows) {
        std::printf("%-12s %5zu %5zu %10.6f %10.6f %10.6f %12.6f %4zu %4zu\n", row.model.c_str(), row.w_in,
                    row.w_out, row.mean_mae, row.mean_mse, row.mean_rmse, row.median_rmse, row.n, row.rank);
    }
}

std::size_t count_failures(const std::vector<ModelRun>& runs) {
    return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](const ModelRun& r) { return !r.ok; }));
}

// ---- gen --------------------------------------------------------------------

struct GenArgs {
    std::string out;
    int participants = 17;
    int trials = 0;
    double duration = 10.0;
    std::uint64_t seed = 0;
    std::string profile;
    double noise = -1.0;
    std::size_t idle_margin = 0;
};

// Trial counts in [3, 12] summing to 108 * n / 17 (clamped), spread by the
// seed.
std::vector<int> draw_trial_counts(int participants, std::uint64_t seed) {
    const long long lo = 3LL * participants, hi = 12LL * participants;
    const long long target = std::clamp(std::llround(108.0 * participants / 17.0), lo, hi);
    std::vector<int> counts(static_cast<std::size_t>(participants), 3);
    SplitMix64 rng(derive_seed(seed, {0x7C}));
    for (long long extra = target - lo; extra > 0;) {
        auto& c = counts[rng.below(counts.size())];
        if (c < 12) {
            ++c;
            --extra;
        }
    }
    return counts;
}

int cmd_gen(const GenArgs& a, const CLI::App& sub, const std::vector<std::string>& argv) {
    if (a.participants < 1 || a.participants > 99) throw UsageError("--participants must be in [1, 99]");
    if (a.trials < 0 || a.trials > 99) throw UsageError("--trials must be in [0, 99]");
    if (!(a.duration > 0)) throw UsageError("--duration must be positive");
    GaitProfile base = default_profile();
    if (!a.profile.empty()) base = parse_profile_config(read_text_file(a.profile));
    if (a.noise >= 0) base.noise_std = a.noise;
    base.validate();

    const fs::path out(a.out);
    fs::create_directories(out);
    const auto counts = a.trials > 0 ? std::vector<int>(static_cast<std::size_t>(a.participants), a.trials)
                                     : draw_trial_counts(a.participants, a.seed);
    std::vector<ManifestEntry> entries;
    char pid[16];
    for (int p = 0; p < a.participants; ++p) {
        std::snprintf(pid, sizeof pid, "P%02d", p + 1);
        const auto profile = vary_profile(base, derive_seed(a.seed, {1, static_cast<std::uint64_t>(p)}));
        const fs::path pdir = out / pid;
        fs::create_directories(pdir);
        write_text_file(pdir / "profile.conf", profile_to_config(profile));
        const auto trials = generate_participant(profile, counts[static_cast<std::size_t>(p)], a.duration,
                                                 derive_seed(a.seed, {2, static_cast<std::uint64_t>(p)}), pid);
        for (const auto& t0 : trials) {
            const Trial t = a.idle_margin ? add_idle_margins(t0, a.idle_margin, a.idle_margin) : t0;
            const fs::path file = pdir / (t.trial_id + ".csv");
            write_text_file(file, trial_to_csv(t));
            entries.push_back({t.participant_id, t.trial_id, file});
        }
    }
    write_manifest(out / "manifest.csv", entries);
    std::printf("wrote %zu trials for %d participants to %s\n", entries.size(), a.participants,
                out.string().c_str());
    write_run_manifest(out, sub, {"gen", argv, a.seed, list_files(out)}, kExitOk);
    return kExitOk;
}

// ---- run-trial ----------------------------------------------------------------

struct SelectArgs {
    std::string manifest;
    std::string participant = "all";
    std::string trial = "first";
    std::string out;
};

int finish_run(const fs::path& out, const std::vector<ModelRun>& runs, const ExperimentConfig& cfg,
               const CLI::App& sub, const std::string& command, const std::vector<std::string>& argv) {
    write_results(out, runs, run_metadata(cfg));
    print_report(runs);
    const std::size_t failed = count_failures(runs);
    const int code = failed ? kExitFailure : kExitOk;
    if (failed) std::fprintf(stderr, "%zu of %zu runs failed (see failures.txt)\n", failed, runs.size());
    write_run_manifest(out, sub, {command, argv, cfg.seed, list_files(out)}, code);
    return code;
}

int cmd_run_trial(const SelectArgs& s, const ExperimentFlags& f, const CLI::App& sub,
                  const std::vector<std::string>& argv) {
    auto cfg = f.config(Protocol::ByTrial);
    const auto participants = select_participants(group_manifest(read_manifest(s.manifest)), s.participant);
    std::vector<ManifestEntry> chosen;
    for (const auto& p : participants) {
        for (auto& e : select_trials(p, s.trial)) chosen.push_back(e);
    }
    const fs::path out(s.out);
    fs::create_directories(out);
    cfg.output_dir = out;
    std::vector<ModelRun> runs;
    for (const auto& e : chosen) {
        const Trial trial = f.preprocess(load_entry(e));
        std::fprintf(stderr, "by-trial %s/%s (%zu steps)\n", e.participant_id.c_str(), e.trial_id.c_str(),
                     trial.length());
        auto res = run_by_trial(trial, cfg);
        for (auto& r : res.runs) runs.push_back(std::move(r));
    }
    return finish_run(out, runs, cfg, sub, "run-trial", argv);
}

// ---- run-participant ------------------------------------------------------------

struct GridArgs {
    std::string grid = "full";
    std::vector<std::string> cells;
    std::string test_trial;
    std::string val_trial;
};

int cmd_run_participant(const SelectArgs& s, const GridArgs& g, const ExperimentFlags& f, const CLI::App& sub,
                        const std::vector<std::string>& argv) {
    auto cfg = f.config(Protocol::ByParticipant);
    if (!g.cells.empty()) {
        cfg.cells.clear();
        for (const auto& c : g.cells) {
            for (const auto& item : split_list(c)) cfg.cells.push_back(parse_cell(item));
        }
    } else if (g.grid != "full") {
        throw UsageError("--grid accepts only 'full'; use --cell for single cells");
    }
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const auto participants = select_participants(group_manifest(read_manifest(s.manifest)), s.participant);
    const fs::path out(s.out);
    fs::create_directories(out);
    cfg.output_dir = out;
    std::vector<ModelRun> runs;
    for (const auto& p : participants) {
        if (p.entries.size() < 3) {
            throw std::runtime_error("participant " + p.id + " needs >= 3 trials (has " +
                                     std::to_string(p.entries.size()) + ")");
        }
        auto pcfg = cfg;
        pcfg.test_index = trial_index(p, g.test_trial);
        pcfg.val_index = trial_index(p, g.val_trial);
        std::vector<Trial> trials;
        for (const auto& e : p.entries) trials.push_back(f.preprocess(load_entry(e)));
        std::fprintf(stderr, "by-participant %s (%zu trials, %zu cells)\n", p.id.c_str(), trials.size(),
                     pcfg.cells.size());
        auto res = run_by_participant(trials, pcfg);
        for (auto& r : res.runs) runs.push_back(std::move(r));
    }
    return finish_run(out, runs, cfg, sub, "run-participant", argv);
}

// ---- bench -------------------------------------------------------------------------

struct BenchArgs {
    std::string manifest;
    std::string participant = "all";
    std::string trial = "first";
    int reps = 3;
    std::string out;
};

int cmd_bench(const BenchArgs& b, const ExperimentFlags& f, const CLI::App& sub,
              const std::vector<std::string>& argv) {
    if (b.reps < 1) throw UsageError("--reps must be >= 1");
    auto cfg = f.config(Protocol::ByTrial);
    std::vector<Trial> corpus;
    if (b.manifest.empty()) {
        corpus.push_back(generate_trial(default_profile(), 10.0, f.seed, "P00", "T00"));
    } else {
        for (const auto& p : select_participants(group_manifest(read_manifest(b.manifest)), b.participant)) {
            for (const auto& e : select_trials(p, b.trial)) corpus.push_back(f.preprocess(load_entry(e)));
        }
    }
    const auto rows = benchmark_timing(corpus, cfg, b.reps);
    std::printf("%-12s %12s %14s %16s %14s\n", "model", "avg_train_s", "avg_predict_s", "measured_test_s",
                "predict_ratio");
    for (const auto& r : rows) {
        std::printf("%-12s %12.4f %14.6f %16.4f %14.6f\n", r.model.c_str(), r.avg_train_s, r.avg_predict_s,
                    r.measured_test_s, r.predict_ratio);
    }
    if (!b.out.empty()) {
        const fs::path out(b.out);
        fs::create_directories(out);
        write_text_file(out / "timing.csv", timing_csv(rows));
        write_run_manifest(out, sub, {"bench", argv, cfg.seed, list_files(out)}, kExitOk);
    }
    return kExitOk;
}

// ---- gradcheck ----------------------------------------------------------------------

struct GradArgs {
    std::string layer = "all";
    int instances = 20;
    std::uint64_t seed = 0;
    bool fault = false;
    std::string out;
};

int cmd_gradcheck(const GradArgs& g, const CLI::App& sub, const std::vector<std::string>& argv) {
    if (g.instances < 1) throw UsageError("--instances must be >= 1");
    const auto all = gradcheck_targets();
    std::vector<std::string> targets;
    if (g.layer == "all") {
        targets = all;
    } else {
        for (const auto& t : split_list(g.layer)) {
            if (std::find(all.begin(), all.end(), t) == all.end()) {
                throw UsageError("unknown gradcheck target '" + t + "'; available: " + join(all));
            }
            targets.push_back(t);
        }
    }
    bool ok = true;
    std::string csv = "target,instances,max_rel_error,worst,analytic,numeric,seconds,passed\n";
    std::printf("%-14s %9s %14s %-18s %13s %13s %8s\n", "target", "instances", "max_rel_error", "worst",
                "analytic", "numeric", "seconds");
    for (const auto& t : targets) {
        const auto s = run_gradcheck_target(t, g.instances, g.seed, g.fault);
        ok = ok && s.passed;
        std::printf("%-14s %9d %14.3e %-18s %13.5e %13.5e %8.3f %s\n", t.c_str(), s.instances, s.max_rel_error,
                    s.worst.c_str(), s.worst_analytic, s.worst_numeric, s.seconds, s.passed ? "PASS" : "FAIL");
        csv += t + "," + std::to_string(s.instances) + "," + format_double(s.max_rel_error) + "," + s.worst +
               "," + format_double(s.worst_analytic) + "," + format_double(s.worst_numeric) + "," +
               format_fixed(s.seconds, 3) + "," + (s.passed ? "1" : "0") + "\n";
    }
    std::printf("tolerance %.0e, epsilon %.0e: %s\n", kGradCheckTolerance, kGradCheckEpsilon,
                ok ? "all targets pass" : "FAILURES");
    const int code = ok ? kExitOk : kExitFailure;
    if (!g.out.empty()) {
        const fs::path out(g.out);
        fs::create_directories(out);
        write_text_file(out / "gradcheck.csv", csv);
        write_run_manifest(out, sub, {"gradcheck", argv, g.seed, list_files(out)}, code);
    }
    return code;
}

// ---- plot -----------------------------------------------------------------------------

struct PlotArgs {
    std::string input;
    std::string trial;
    std::string out;
    std::string title;
};

// Reads `t,true_sum,pred_sum` as written by the experiment runs.
std::pair<SummedSeries, SummedSeries> read_plot_csv(const fs::path& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line) || trim(line) != "t,true_sum,pred_sum") {
        throw ParseError("expected header t,true_sum,pred_sum", line_no);
    }
    SummedSeries truth, pred;
    auto push = [&](SummedSeries& s, std::string_view cell) {
        if (cell.empty()) {
            s.sum.push_back(0.0);
            s.valid.push_back(0);
            return;
        }
        const auto v = parse_double(cell);
        if (!v) throw ParseError("bad number '" + std::string(cell) + "'", line_no);
        s.sum.push_back(*v);
        s.valid.push_back(1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty() || line[0] == '#') continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 3) throw ParseError("expected 3 columns", line_no);
        push(truth, trim(cells[1]));
        push(pred, trim(cells[2]));
    }
    return {truth, pred};
}

int cmd_plot(const PlotArgs& p, const CLI::App& sub, const std::vector<std::string>& argv) {
    if (p.input.empty() == p.trial.empty()) throw UsageError("give exactly one of --input or --trial");
    SummedSeries truth, pred;
    if (!p.input.empty()) {
        std::tie(truth, pred) = read_plot_csv(p.input);
    } else {
        const Trial t = load_trial_file(p.trial, "P00", fs::path(p.trial).stem().string());
        truth = summed_series(t.values);
        pred.sum.assign(truth.size(), 0.0);
        pred.valid.assign(truth.size(), 0);
    }
    const fs::path out(p.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    const std::string title = p.title.empty() ? fs::path(p.input.empty() ? p.trial : p.input).stem().string() : p.title;
    write_text_file(out, plot_svg(truth, pred, title));
    std::printf("wrote %s (%zu steps)\n", out.string().c_str(), truth.size());
    const fs::path dir = out.has_parent_path() ? out.parent_path() : fs::path(".");
    write_run_manifest(dir, sub, {"plot", argv, 0, {out.filename().string()}}, kExitOk,
                       out.stem().string() + ".");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        args = expand_config(args);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    const std::vector<std::string> original(argv, argv + argc);

    CLI::App app{"Gait pressure value prediction: synthetic corpora, training, evaluation and reports."};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));
    app.footer(
        "Every subcommand accepts --config FILE with key=value lines (flag names without dashes, "
        "'#' comments). Flags given on the command line win over the file.\n"
        "Exit codes: 0 success, 1 failed runs or runtime error, 2 invalid invocation.");

    GenArgs gen;
    auto* s_gen = app.add_subcommand("gen", "Generate a synthetic corpus and its manifest");
    s_gen->add_option("--out", gen.out, "Output directory")->required();
    s_gen->add_option("--participants", gen.participants, "Number of participants")->capture_default_str();
    s_gen->add_option("--trials", gen.trials, "Trials per participant (0 = drawn in [3,12], about 108 total)")
        ->capture_default_str();
    s_gen->add_option("--duration", gen.duration, "Nominal trial length in seconds")->capture_default_str();
    s_gen->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
    s_gen->add_option("--profile", gen.profile, "Gait profile key=value file (default built-in)");
    s_gen->add_option("--noise", gen.noise, "Noise standard deviation override (negative = profile value)")
        ->capture_default_str();
    s_gen->add_option("--idle-margin", gen.idle_margin, "Standing rows added before and after each trial")
        ->capture_default_str();

    ExperimentFlags trial_flags;
    SelectArgs trial_sel;
    auto* s_trial = app.add_subcommand("run-trial", "By-trial protocol: 70/15/15 split of each selected trial");
    s_trial->add_option("--manifest", trial_sel.manifest, "Dataset manifest CSV")->required();
    s_trial->add_option("--participant", trial_sel.participant, "Participant id(s) or 'all'")->capture_default_str();
    s_trial->add_option("--trial", trial_sel.trial, "Trial id(s), 'first' or 'all'")->capture_default_str();
    s_trial->add_option("--out", trial_sel.out, "Results directory")->required();
    trial_flags.add_to(*s_trial);

    ExperimentFlags part_flags;
    SelectArgs part_sel;
    GridArgs grid;
    auto* s_part = app.add_subcommand("run-participant", "By-participant protocol over the window grid");
    s_part->add_option("--manifest", part_sel.manifest, "Dataset manifest CSV")->required();
    s_part->add_option("--participant", part_sel.participant, "Participant id(s) or 'all'")->capture_default_str();
    s_part->add_option("--out", part_sel.out, "Results directory")->required();
    s_part->add_option("--grid", grid.grid, "Window grid: 'full' (12 cells)")->capture_default_str();
    s_part->add_option("--cell", grid.cells, "Single cell W_INxW_OUT, repeatable (overrides --grid)");
    s_part->add_option("--test-trial", grid.test_trial, "Test trial id (default last)");
    s_part->add_option("--val-trial", grid.val_trial, "Validation trial id (default second to last)");
    part_flags.add_to(*s_part);

    ExperimentFlags bench_flags;
    BenchArgs bench;
    auto* s_bench = app.add_subcommand("bench", "Time training and test-region prediction per model");
    s_bench->add_option("--manifest", bench.manifest, "Dataset manifest CSV (default: one synthetic 10 s trial)");
    s_bench->add_option("--participant", bench.participant, "Participant id(s) or 'all'")->capture_default_str();
    s_bench->add_option("--trial", bench.trial, "Trial id(s), 'first' or 'all'")->capture_default_str();
    s_bench->add_option("--reps", bench.reps, "Prediction repetitions per model")->capture_default_str();
    s_bench->add_option("--out", bench.out, "Directory for timing.csv");
    bench_flags.add_to(*s_bench);

    GradArgs grad;
    auto* s_grad = app.add_subcommand("gradcheck", "Finite-difference check of every layer and model");
    s_grad->add_option("--layer", grad.layer, "Target(s): " + join(gradcheck_targets()) + " or 'all'")
        ->capture_default_str();
    s_grad->add_option("--instances", grad.instances, "Random instances per target")->capture_default_str();
    s_grad->add_option("--seed", grad.seed, "Seed for parameters, inputs and probes")->capture_default_str();
    s_grad->add_flag("--fault-injection", grad.fault, "Corrupt one analytic partial per instance")
        ->default_str("false");
    s_grad->add_option("--out", grad.out, "Directory for gradcheck.csv");

    PlotArgs plot;
    auto* s_plot = app.add_subcommand("plot", "Render a plot CSV or a trial CSV as SVG");
    s_plot->add_option("--input", plot.input, "plot_*.csv with t,true_sum,pred_sum");
    s_plot->add_option("--trial", plot.trial, "Trial CSV (summed pressure only)");
    s_plot->add_option("--out", plot.out, "SVG file")->required();
    s_plot->add_option("--title", plot.title, "Plot title");

    for (auto* sub : app.get_subcommands({})) {
        sub->add_option("--config", "key=value configuration file (flags win)");
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    } catch (const CLI::CallForVersion& e) {
        app.exit(e);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*s_gen) return cmd_gen(gen, *s_gen, original);
        if (*s_trial) return cmd_run_trial(trial_sel, trial_flags, *s_trial, original);
        if (*s_part) return cmd_run_participant(part_sel, grid, part_flags, *s_part, original);
        if (*s_bench) return cmd_bench(bench, bench_flags, *s_bench, original);
        if (*s_grad) return cmd_gradcheck(grad, *s_grad, original);
        if (*s_plot) return cmd_plot(plot, *s_plot, original);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}
