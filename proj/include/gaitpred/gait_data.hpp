#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gaitpred/matrix.hpp"

namespace gaitpred {

inline constexpr std::size_t kChannels = 6;
// Right-foot insole sensors. FSR8..FSR10 sit under the forefoot, FSR11..FSR13
// under the heel.
inline const std::array<std::string, kChannels> kChannelLabels = {"fsr8",  "fsr9",  "fsr10",
                                                                 "fsr11", "fsr12", "fsr13"};
inline constexpr double kDefaultSamplePeriodMs = 8.0;

// One recorded walk: T rows of 6 pressure readings.
struct Trial {
    std::string participant_id;
    std::string trial_id;
    double sample_period_ms = kDefaultSamplePeriodMs;
    Matrix values;  // T x 6
    std::array<std::string, kChannels> channel_labels = kChannelLabels;

    std::size_t length() const { return values.rows(); }
    double duration_s() const { return static_cast<double>(length()) * sample_period_ms / 1000.0; }
};

struct NormalizationParams {
    std::array<double, kChannels> min{};
    std::array<double, kChannels> range{};
    bool scale_to_unit = false;
};

// One supervised example. `source` is the index of the trial the window came
// from and `start` the first input step inside that trial.
struct WindowPair {
    Matrix x;  // w_in x 6
    Matrix y;  // w_out x 6
    std::size_t source = 0;
    std::size_t start = 0;
};

struct WindowedDataset {
    std::size_t w_in = 0;
    std::size_t w_out = 0;
    std::vector<WindowPair> pairs;

    std::size_t size() const { return pairs.size(); }
    bool empty() const { return pairs.empty(); }
    void append(const WindowedDataset& other);
};

struct SplitSpec {
    double train_fraction = 0.70;
    double val_fraction = 0.15;
    double test_fraction = 0.15;

    void validate() const;
};

// Sample ranges of a by-trial split: train [0, train_end), val [train_end,
// val_end), test [val_end, total).
struct SplitRegions {
    std::size_t train_end = 0;
    std::size_t val_end = 0;
    std::size_t total = 0;

    std::size_t train_samples() const { return train_end; }
    std::size_t val_samples() const { return val_end - train_end; }
    std::size_t test_samples() const { return total - val_end; }
};

struct TrialSplit {
    SplitRegions regions;
    WindowedDataset train;
    WindowedDataset val;
    WindowedDataset test;
};

struct ParticipantSplit {
    WindowedDataset train;
    WindowedDataset val;
    WindowedDataset test;
    NormalizationParams normalizer;
    std::vector<std::size_t> train_indices;
    Trial val_trial;   // normalized
    Trial test_trial;  // normalized
};

// --- ingestion ------------------------------------------------------------

// Parses the trial CSV format (`t,fsr8,...,fsr13`). Throws ParseError with
// the offending line number.
Trial load_trial(std::istream& source, const std::string& participant_id,
                 const std::string& trial_id);
Trial load_trial_file(const std::filesystem::path& path, const std::string& participant_id,
                      const std::string& trial_id);
// Values are written in shortest round-trip form, so load_trial reproduces
// them bit for bit.
void emit_trial_csv(const Trial& trial, std::ostream& out);
std::string trial_to_csv(const Trial& trial);

// Throws std::invalid_argument when a Trial invariant is broken.
void validate_trial(const Trial& trial, bool require_non_negative = true);

struct ManifestEntry {
    std::string participant_id;
    std::string trial_id;
    std::filesystem::path path;  // resolved against the manifest directory
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest_path);
// Paths are written relative to the manifest directory when possible.
void write_manifest(const std::filesystem::path& manifest_path,
                    std::span<const ManifestEntry> entries);

// --- preprocessing ----------------------------------------------------------

Trial truncate_manual(const Trial& trial, std::size_t start_step, std::size_t end_step);

struct ActiveRegion {
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive
};

// Locates [first, last] steps covered by a rolling window (over the per-step
// channel sum) whose variance exceeds the threshold. Throws if none does.
ActiveRegion find_active_region(const Trial& trial, std::size_t window_len,
                                double variance_threshold);
Trial truncate_auto(const Trial& trial, std::size_t window_len = 50,
                    double variance_threshold = 1e-4);

NormalizationParams fit_normalizer(const Matrix& training_values, bool scale_to_unit);
NormalizationParams fit_normalizer(std::span<const Trial> training_trials, bool scale_to_unit);

// Shifts each channel so its minimum equals the training minimum; in
// unit-scale mode then maps (v - train_min) / train_range, with zero-range
// channels mapped to 0.
Matrix apply_normalizer(const Matrix& values, const NormalizationParams& params);
Trial apply_normalizer(const Trial& trial, const NormalizationParams& params);

// --- windowing and protocols ---------------------------------------------

WindowedDataset make_windows(const Matrix& values, std::size_t w_in, std::size_t w_out,
                             std::size_t stride = 1, std::size_t source = 0);
// Stride-1 window count, max(0, T - w_in - w_out + 1).
std::size_t window_count(std::size_t length, std::size_t w_in, std::size_t w_out);

SplitRegions plan_split(std::size_t length, std::size_t w_in, std::size_t w_out,
                        const SplitSpec& spec = {});
// Splits one trial into contiguous train/val/test regions and windows each
// region independently. The trial is used as given (normalize first).
TrialSplit split_by_trial(const Trial& trial, std::size_t w_in, std::size_t w_out,
                          const SplitSpec& spec = {});

// Holds out trials[test_index] and trials[val_index]; every other trial is
// windowed on its own and the window lists are concatenated in trial order.
ParticipantSplit assemble_by_participant(std::span<const Trial> trials, std::size_t test_index,
                                         std::size_t val_index, std::size_t w_in,
                                         std::size_t w_out, bool scale_to_unit = true);

}  // namespace gaitpred
