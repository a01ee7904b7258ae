#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gaitpred/gait_data.hpp"
#include "gaitpred/metrics.hpp"
#include "gaitpred/models.hpp"
#include "gaitpred/train.hpp"

namespace gaitpred {

inline constexpr const char* kToolVersion = "0.3.0";

enum class Protocol { ByTrial, ByParticipant };

std::string to_string(Protocol protocol);

struct WindowCell {
    std::size_t w_in = 5;
    std::size_t w_out = 1;

    std::string label() const { return std::to_string(w_in) + "x" + std::to_string(w_out); }
    friend bool operator==(const WindowCell&, const WindowCell&) = default;
};

// w_in in {5, 10, 15, 20} x w_out in {3, 4, 5}, w_in-major.
std::vector<WindowCell> participant_grid();
inline constexpr WindowCell kByTrialCell{5, 1};

// Protocol defaults: Adam 1e-4 for the recurrent stacks, RMSprop 1e-2 for
// CnnRnn; MSE for 40 epochs by trial, MAE for 20 epochs by participant.
TrainConfig default_train_config(ModelKind kind, Protocol protocol);

struct ExperimentConfig {
    Protocol protocol = Protocol::ByTrial;
    std::vector<ModelKind> kinds{std::begin(kAllModelKinds), std::end(kAllModelKinds)};
    bool include_baseline = true;
    // By participant: a subset of participant_grid(). By trial: ignored
    // (always 5x1).
    std::vector<WindowCell> cells = participant_grid();
    std::uint64_t seed = 0;
    bool scale_to_unit = true;
    std::size_t hidden = 20;
    bool dropout = false;
    StitchMode stitch = StitchMode::Tile;
    std::size_t batch_size = 32;
    bool shuffle = true;
    std::optional<int> epochs;              // overrides the protocol default
    std::optional<double> learning_rate;    // overrides every kind's default
    std::optional<std::size_t> test_index;  // by participant; default last trial
    std::optional<std::size_t> val_index;   // default second to last
    std::size_t jobs = 1;
    // Artifacts (history/plot/pred/model files) are written here when set.
    std::optional<std::filesystem::path> output_dir;
    bool save_models = true;

    void validate() const;
    std::vector<WindowCell> effective_cells() const;
    TrainConfig train_config(ModelKind kind, WindowCell cell) const;
};

struct ModelRun {
    std::string model;  // kind name or "persistence"
    WindowCell cell;
    std::string participant;
    std::string trial;  // test trial
    bool ok = false;
    std::string error;
    MetricsRecord metrics;
    TrainHistory history;
    double predict_seconds = 0.0;
    std::size_t predicted_steps = 0;
    double measured_test_seconds = 0.0;  // test steps x sample period

    std::string artifact_name() const;
};

struct ExperimentResult {
    Protocol protocol = Protocol::ByTrial;
    std::vector<ModelRun> runs;
    std::optional<SplitRegions> regions;  // by trial
    std::string test_trial, val_trial;    // by participant

    std::vector<MetricsRecord> records() const;
    std::size_t failures() const;
};

ExperimentResult run_by_trial(const Trial& trial, const ExperimentConfig& config);
ExperimentResult run_by_participant(std::span<const Trial> trials, const ExperimentConfig& config);

struct TimingRow {
    std::string model;
    double avg_train_s = 0.0;
    double avg_predict_s = 0.0;
    double measured_test_s = 0.0;
    double predict_ratio = 0.0;  // avg_predict_s / measured_test_s
};

// Averages per model over all successful runs.
std::vector<TimingRow> timing_table(std::span<const ModelRun> runs);
// `model,avg_train_s,avg_predict_s,measured_test_s,predict_ratio`
std::string timing_csv(std::span<const TimingRow> rows);

// Runs the by-trial protocol on every trial, timing the test-region
// prediction `repetitions` times per model.
std::vector<TimingRow> benchmark_timing(std::span<const Trial> corpus,
                                        const ExperimentConfig& config, int repetitions);

using Metadata = std::vector<std::pair<std::string, std::string>>;
Metadata run_metadata(const ExperimentConfig& config);

// report.csv, records.csv and timing.csv into `dir`. report.csv holds no
// timing data, so it is byte-identical across reruns with the same seed.
void write_results(const std::filesystem::path& dir, std::span<const ModelRun> runs,
                   const Metadata& metadata);

}  // namespace gaitpred
