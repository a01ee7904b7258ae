#include "gaitpred/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <thread>

#include "gaitpred/csv_io.hpp"
#include "gaitpred/rng.hpp"

namespace gaitpred {

std::string to_string(Protocol protocol) {
    return protocol == Protocol::ByTrial ? "by-trial" : "by-participant";
}

std::vector<WindowCell> participant_grid() {
    std::vector<WindowCell> cells;
    for (std::size_t w_in : {5, 10, 15, 20}) {
        for (std::size_t w_out : {3, 4, 5}) cells.push_back({w_in, w_out});
    }
    return cells;
}

TrainConfig default_train_config(ModelKind kind, Protocol protocol) {
    TrainConfig tc;
    if (protocol == Protocol::ByTrial) {
        tc.loss = LossKind::MSE;
        tc.epochs = 40;
    } else {
        tc.loss = LossKind::MAE;
        tc.epochs = 20;
    }
    if (kind == ModelKind::CnnRnn) {
        tc.optimizer.kind = OptimizerKind::RmsProp;
        tc.optimizer.learning_rate = 1e-2;
    } else {
        tc.optimizer.kind = OptimizerKind::Adam;
        tc.optimizer.learning_rate = 1e-4;
    }
    return tc;
}

void ExperimentConfig::validate() const {
    if (kinds.empty() && !include_baseline) throw std::invalid_argument("no models selected");
    if (hidden == 0) throw std::invalid_argument("hidden must be >= 1");
    if (batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
    if (epochs && *epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (learning_rate && !(*learning_rate > 0)) throw std::invalid_argument("learning rate must be > 0");
    if (jobs == 0) throw std::invalid_argument("jobs must be >= 1");
    if (protocol == Protocol::ByParticipant) {
        if (cells.empty()) throw std::invalid_argument("no window cells selected");
        const auto grid = participant_grid();
        for (const auto& c : cells) {
            if (std::find(grid.begin(), grid.end(), c) == grid.end()) {
                throw std::invalid_argument("cell " + c.label() + " is not part of the grid");
            }
        }
    }
}

std::vector<WindowCell> ExperimentConfig::effective_cells() const {
    if (protocol == Protocol::ByTrial) return {kByTrialCell};
    return cells;
}

TrainConfig ExperimentConfig::train_config(ModelKind kind, WindowCell cell) const {
    TrainConfig tc = default_train_config(kind, protocol);
    if (epochs) tc.epochs = *epochs;
    if (learning_rate) tc.optimizer.learning_rate = *learning_rate;
    tc.batch_size = batch_size;
    tc.shuffle = shuffle;
    tc.seed = derive_seed(seed, {cell.w_in, cell.w_out, static_cast<std::uint64_t>(kind), 1});
    return tc;
}

std::string ModelRun::artifact_name() const {
    std::string s = model + "_" + participant;
    if (!trial.empty()) s += "_" + trial;
    return s + "_" + cell.label();
}

std::vector<MetricsRecord> ExperimentResult::records() const {
    std::vector<MetricsRecord> out;
    for (const auto& r : runs) {
        if (r.ok) out.push_back(r.metrics);
    }
    return out;
}

std::size_t ExperimentResult::failures() const {
    return static_cast<std::size_t>(
        std::count_if(runs.begin(), runs.end(), [](const ModelRun& r) { return !r.ok; }));
}

namespace {

// FNV-1a; stable across platforms, unlike std::hash.
std::uint64_t text_hash(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void run_tasks(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& task) {
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < std::min(jobs, count); ++w) {
        workers.emplace_back([&]() {
            for (std::size_t i = next++; i < count; i = next++) task(i);
        });
    }
    for (auto& t : workers) t.join();
}

struct Job {
    std::optional<ModelKind> kind;  // nullopt = persistence baseline
    WindowCell cell;
};

// Trains (unless baseline), predicts the whole test series and scores it.
// Never throws; failures are recorded in the run.
ModelRun run_one(const Job& job, const ExperimentConfig& config, const WindowedDataset& train,
                 const WindowedDataset& val, const Trial& test, const std::string& participant,
                 const std::string& trial_label) {
    ModelRun run;
    run.model = job.kind ? to_string(*job.kind) : "persistence";
    run.cell = job.cell;
    run.participant = participant;
    run.trial = trial_label;
    run.measured_test_seconds = test.duration_s();
    try {
        std::optional<Model> model;
        PersistenceBaseline baseline(job.cell.w_in, job.cell.w_out);
        WindowPredictor* predictor = &baseline;
        if (job.kind) {
            ModelSpec spec;
            spec.kind = *job.kind;
            spec.w_in = job.cell.w_in;
            spec.w_out = job.cell.w_out;
            spec.hidden = config.hidden;
            spec.dropout_enabled = config.dropout;
            const std::uint64_t init_seed =
                derive_seed(config.seed, {job.cell.w_in, job.cell.w_out,
                                          static_cast<std::uint64_t>(*job.kind), 0,
                                          text_hash(participant + "/" + trial_label)});
            model.emplace(Model::build(spec, init_seed));
            TrainConfig tc = config.train_config(*job.kind, job.cell);
            run.history = fit(*model, train, val, tc);
            predictor = &*model;
        }

        const PredictedSeries pred = predict_trial(*predictor, test.values, config.stitch);
        run.predict_seconds = pred.seconds;
        run.predicted_steps = pred.valid_count();
        run.metrics = compute_metrics(test.values, pred.values, pred.valid);
        run.metrics.context = {participant, test.trial_id, run.model, job.cell.w_in, job.cell.w_out};
        if (!std::isfinite(run.metrics.rmse)) throw std::runtime_error("non-finite prediction");

        if (config.output_dir) {
            const auto& dir = *config.output_dir;
            const std::string name = run.artifact_name();
            if (job.kind) write_text_file(dir / ("history_" + name + ".csv"), history_csv(run.history));
            write_text_file(dir / ("pred_" + name + ".csv"), predicted_series_csv(pred));
            emit_plot(summed_series(test.values), summed_series(pred.values, pred.valid),
                      dir / ("plot_" + name),
                      participant + " " + test.trial_id + " " + run.model + " " + job.cell.label());
            if (model && config.save_models) save_model_file(*model, dir / ("model_" + name + ".bin"));
        }
        run.ok = true;
    } catch (const std::exception& e) {
        run.ok = false;
        run.error = e.what();
    }
    return run;
}

std::vector<Job> make_jobs(const ExperimentConfig& config, WindowCell cell) {
    std::vector<Job> jobs;
    for (auto k : config.kinds) jobs.push_back({k, cell});
    if (config.include_baseline) jobs.push_back({std::nullopt, cell});
    return jobs;
}

}  // namespace

ExperimentResult run_by_trial(const Trial& trial, const ExperimentConfig& config) {
    config.validate();
    validate_trial(trial, false);
    const WindowCell cell = kByTrialCell;

    ExperimentResult result;
    result.protocol = Protocol::ByTrial;
    const SplitRegions regions = plan_split(trial.length(), cell.w_in, cell.w_out);
    result.regions = regions;

    const auto norm = fit_normalizer(trial.values.slice_rows(0, regions.train_end),
                                     config.scale_to_unit);
    const Trial normalized = apply_normalizer(trial, norm);
    const TrialSplit split = split_by_trial(normalized, cell.w_in, cell.w_out);
    const Trial test = truncate_manual(normalized, regions.val_end, regions.total);

    const auto jobs = make_jobs(config, cell);
    result.runs.resize(jobs.size());
    run_tasks(jobs.size(), config.jobs, [&](std::size_t i) {
        result.runs[i] = run_one(jobs[i], config, split.train, split.val, test,
                                 trial.participant_id, trial.trial_id);
    });
    return result;
}

ExperimentResult run_by_participant(std::span<const Trial> trials, const ExperimentConfig& config) {
    config.validate();
    if (trials.size() < 3) {
        throw std::invalid_argument("by-participant protocol needs >= 3 trials (participant has " +
                                    std::to_string(trials.size()) + ")");
    }
    for (const auto& t : trials) validate_trial(t, false);
    const std::size_t test_index = config.test_index.value_or(trials.size() - 1);
    const std::size_t val_index = config.val_index.value_or(trials.size() - 2);

    ExperimentResult result;
    result.protocol = Protocol::ByParticipant;
    result.test_trial = trials[test_index].trial_id;
    result.val_trial = trials[val_index].trial_id;
    const std::string participant = trials.front().participant_id;

    std::vector<ParticipantSplit> splits;
    std::vector<std::pair<std::size_t, Job>> tasks;
    for (const auto& cell : config.effective_cells()) {
        splits.push_back(assemble_by_participant(trials, test_index, val_index, cell.w_in,
                                                 cell.w_out, config.scale_to_unit));
        for (const auto& job : make_jobs(config, cell)) tasks.emplace_back(splits.size() - 1, job);
    }

    result.runs.resize(tasks.size());
    run_tasks(tasks.size(), config.jobs, [&](std::size_t i) {
        const auto& [split_idx, job] = tasks[i];
        const auto& s = splits[split_idx];
        result.runs[i] = run_one(job, config, s.train, s.val, s.test_trial, participant, "");
    });
    return result;
}

std::vector<TimingRow> timing_table(std::span<const ModelRun> runs) {
    struct Acc {
        double train = 0, predict = 0, measured = 0;
        std::size_t n = 0;
    };
    std::map<std::string, Acc> acc;
    std::vector<std::string> order;
    for (const auto& r : runs) {
        if (!r.ok) continue;
        if (!acc.count(r.model)) order.push_back(r.model);
        auto& a = acc[r.model];
        a.train += r.history.train_seconds;
        a.predict += r.predict_seconds;
        a.measured += r.measured_test_seconds;
        ++a.n;
    }
    std::vector<TimingRow> rows;
    for (const auto& name : order) {
        const auto& a = acc[name];
        const double n = static_cast<double>(a.n);
        TimingRow row{name, a.train / n, a.predict / n, a.measured / n, 0.0};
        row.predict_ratio = row.measured_test_s > 0 ? row.avg_predict_s / row.measured_test_s : 0.0;
        rows.push_back(row);
    }
    return rows;
}

std::string timing_csv(std::span<const TimingRow> rows) {
    std::string s = "model,avg_train_s,avg_predict_s,measured_test_s,predict_ratio\n";
    for (const auto& r : rows) {
        s += r.model + "," + format_fixed(r.avg_train_s, 6) + "," + format_fixed(r.avg_predict_s, 6) +
             "," + format_fixed(r.measured_test_s, 6) + "," + format_fixed(r.predict_ratio, 6) + "\n";
    }
    return s;
}

std::vector<TimingRow> benchmark_timing(std::span<const Trial> corpus,
                                        const ExperimentConfig& config, int repetitions) {
    if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
    if (corpus.empty()) throw std::invalid_argument("benchmark_timing: empty corpus");
    ExperimentConfig cfg = config;
    cfg.protocol = Protocol::ByTrial;
    cfg.output_dir.reset();
    cfg.validate();
    const WindowCell cell = kByTrialCell;

    std::vector<ModelRun> all;
    for (const auto& trial : corpus) {
        const SplitRegions regions = plan_split(trial.length(), cell.w_in, cell.w_out);
        const auto norm = fit_normalizer(trial.values.slice_rows(0, regions.train_end),
                                         cfg.scale_to_unit);
        const Trial normalized = apply_normalizer(trial, norm);
        const TrialSplit split = split_by_trial(normalized, cell.w_in, cell.w_out);
        const Trial test = truncate_manual(normalized, regions.val_end, regions.total);

        for (const auto& job : make_jobs(cfg, cell)) {
            ModelRun run;
            run.model = job.kind ? to_string(*job.kind) : "persistence";
            run.cell = cell;
            run.participant = trial.participant_id;
            run.trial = trial.trial_id;
            run.measured_test_seconds = test.duration_s();
            try {
                std::optional<Model> model;
                PersistenceBaseline baseline(cell.w_in, cell.w_out);
                WindowPredictor* predictor = &baseline;
                if (job.kind) {
                    ModelSpec spec{*job.kind, cell.w_in, cell.w_out, cfg.hidden, 20, 3, cfg.dropout};
                    model.emplace(Model::build(spec, derive_seed(cfg.seed, {static_cast<std::uint64_t>(*job.kind),
                                                                            text_hash(trial.participant_id + "/" + trial.trial_id)})));
                    run.history = fit(*model, split.train, split.val, cfg.train_config(*job.kind, cell));
                    predictor = &*model;
                }
                double total = 0;
                for (int r = 0; r < repetitions; ++r) {
                    total += predict_trial(*predictor, test.values, cfg.stitch).seconds;
                }
                run.predict_seconds = total / repetitions;
                run.ok = true;
            } catch (const std::exception& e) {
                run.error = e.what();
            }
            all.push_back(std::move(run));
        }
    }
    return timing_table(all);
}

Metadata run_metadata(const ExperimentConfig& config) {
    Metadata m;
    m.emplace_back("tool_version", kToolVersion);
    m.emplace_back("protocol", to_string(config.protocol));
    m.emplace_back("seed", std::to_string(config.seed));
    m.emplace_back("normalization", config.scale_to_unit ? "unit" : "offset");
    m.emplace_back("batch_size", std::to_string(config.batch_size));
    m.emplace_back("stitching", to_string(config.stitch));
    m.emplace_back("shuffle", config.shuffle ? "true" : "false");
    m.emplace_back("hidden", std::to_string(config.hidden));
    m.emplace_back("dropout", config.dropout ? "true" : "false");
    m.emplace_back("epochs", config.epochs ? std::to_string(*config.epochs) : "default");
    m.emplace_back("learning_rate",
                   config.learning_rate ? format_double(*config.learning_rate) : "default");
    return m;
}

void write_results(const std::filesystem::path& dir, std::span<const ModelRun> runs,
                   const Metadata& metadata) {
    std::vector<MetricsRecord> records;
    std::string failures;
    for (const auto& r : runs) {
        if (r.ok) records.push_back(r.metrics);
        else failures += r.artifact_name() + ": " + r.error + "\n";
    }
    Metadata meta = metadata;
    meta.emplace_back("runs", std::to_string(runs.size()));
    meta.emplace_back("failed_runs", std::to_string(runs.size() - records.size()));
    if (!records.empty()) {
        write_text_file(dir / "report.csv", report_csv(aggregate(records), meta));
    } else {
        write_text_file(dir / "report.csv", report_csv(ReportTable{}, meta));
    }
    write_text_file(dir / "records.csv", records_csv(records, meta));
    const auto timing = timing_table(runs);
    write_text_file(dir / "timing.csv", timing_csv(timing));
    if (!failures.empty()) write_text_file(dir / "failures.txt", failures);
}

}  // namespace gaitpred
