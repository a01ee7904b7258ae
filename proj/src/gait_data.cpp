#include "gaitpred/gait_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "gaitpred/csv_io.hpp"

namespace gaitpred {

void WindowedDataset::append(const WindowedDataset& other) {
    if (!pairs.empty() && (other.w_in != w_in || other.w_out != w_out)) {
        throw std::invalid_argument("WindowedDataset::append: window sizes differ");
    }
    w_in = other.w_in;
    w_out = other.w_out;
    pairs.insert(pairs.end(), other.pairs.begin(), other.pairs.end());
}

void SplitSpec::validate() const {
    if (!(train_fraction > 0 && val_fraction > 0 && test_fraction > 0)) {
        throw std::invalid_argument("SplitSpec: fractions must be positive");
    }
    if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9) {
        throw std::invalid_argument("SplitSpec: fractions must sum to 1");
    }
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string header_line() {
    std::string h = "t";
    for (const auto& label : kChannelLabels) h += "," + label;
    return h;
}

}  // namespace

Trial load_trial(std::istream& source, const std::string& participant_id,
                 const std::string& trial_id) {
    Trial trial;
    trial.participant_id = participant_id;
    trial.trial_id = trial_id;

    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    std::vector<std::pair<long long, std::array<double, kChannels>>> rows;

    while (std::getline(source, line)) {
        ++line_no;
        const std::string_view text = trim(line);
        if (text.empty()) continue;
        if (!saw_header) {
            saw_header = true;
            if (text != header_line()) {
                throw ParseError("malformed header (expected '" + header_line() + "')", line_no);
            }
            continue;
        }
        const auto fields = split_csv_line(text);
        if (fields.size() != kChannels + 1) {
            throw ParseError("wrong column count (" + std::to_string(fields.size()) +
                                 ", expected " + std::to_string(kChannels + 1) + ")",
                             line_no);
        }
        const auto step = parse_int(fields[0]);
        if (!step || *step < 0) throw ParseError("malformed step index", line_no);
        std::array<double, kChannels> vals{};
        for (std::size_t c = 0; c < kChannels; ++c) {
            const auto v = parse_double(fields[c + 1]);
            if (!v) throw ParseError("non-numeric value in column " + kChannelLabels[c], line_no);
            if (!std::isfinite(*v)) throw ParseError("non-finite value", line_no);
            if (*v < 0.0) throw ParseError("negative pressure value", line_no);
            vals[c] = *v;
        }
        rows.emplace_back(*step, vals);
    }
    if (!saw_header) throw ParseError("empty file", std::max<std::size_t>(line_no, 1));
    if (rows.empty()) throw ParseError("no data rows", line_no);

    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].first == rows[i - 1].first) {
            throw ParseError("duplicate step index " + std::to_string(rows[i].first), line_no);
        }
    }

    trial.values = Matrix(rows.size(), kChannels);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy(rows[r].second.begin(), rows[r].second.end(), trial.values.row(r).begin());
    }
    return trial;
}

Trial load_trial_file(const std::filesystem::path& path, const std::string& participant_id,
                      const std::string& trial_id) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trial file " + path.string());
    return load_trial(in, participant_id, trial_id);
}

void emit_trial_csv(const Trial& trial, std::ostream& out) {
    out << header_line() << '\n';
    for (std::size_t t = 0; t < trial.length(); ++t) {
        out << t;
        for (double v : trial.values.row(t)) out << ',' << format_double(v);
        out << '\n';
    }
}

std::string trial_to_csv(const Trial& trial) {
    std::ostringstream ss;
    emit_trial_csv(trial, ss);
    return ss.str();
}

void validate_trial(const Trial& trial, bool require_non_negative) {
    if (trial.values.cols() != kChannels) {
        throw std::invalid_argument("trial must have exactly 6 channels");
    }
    if (trial.length() == 0) throw std::invalid_argument("trial is empty");
    if (!(trial.sample_period_ms > 0)) throw std::invalid_argument("sample period must be positive");
    for (double v : trial.values.values()) {
        if (!std::isfinite(v)) throw std::invalid_argument("trial contains non-finite values");
        if (require_non_negative && v < 0) {
            throw std::invalid_argument("trial contains negative pressure values");
        }
    }
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("cannot open manifest " + manifest_path.string());
    const auto base = manifest_path.parent_path();

    std::vector<ManifestEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = trim(line);
        if (text.empty() || text.front() == '#') continue;
        if (!saw_header) {
            saw_header = true;
            if (text != "participant_id,trial_id,path") {
                throw ParseError("malformed manifest header", line_no);
            }
            continue;
        }
        const auto f = split_csv_line(text);
        if (f.size() != 3) throw ParseError("wrong column count in manifest", line_no);
        ManifestEntry e;
        e.participant_id = std::string(trim(f[0]));
        e.trial_id = std::string(trim(f[1]));
        std::filesystem::path p{std::string(trim(f[2]))};
        e.path = p.is_absolute() ? p : base / p;
        if (e.participant_id.empty() || e.trial_id.empty()) {
            throw ParseError("empty participant or trial id", line_no);
        }
        entries.push_back(std::move(e));
    }
    if (!saw_header) throw ParseError("empty manifest", std::max<std::size_t>(line_no, 1));
    return entries;
}

void write_manifest(const std::filesystem::path& manifest_path,
                    std::span<const ManifestEntry> entries) {
    const auto base = manifest_path.parent_path();
    std::string text = "participant_id,trial_id,path\n";
    for (const auto& e : entries) {
        auto rel = e.path.lexically_relative(base.empty() ? "." : base);
        if (rel.empty() || *rel.begin() == "..") rel = e.path;
        text += e.participant_id + "," + e.trial_id + "," + rel.generic_string() + "\n";
    }
    write_text_file(manifest_path, text);
}

// ---------------------------------------------------------------------------
// Truncation

Trial truncate_manual(const Trial& trial, std::size_t start_step, std::size_t end_step) {
    if (start_step >= end_step || end_step > trial.length()) {
        throw std::out_of_range("truncate_manual: need 0 <= start < end <= length (got [" +
                                std::to_string(start_step) + ", " + std::to_string(end_step) +
                                ") for length " + std::to_string(trial.length()) + ")");
    }
    Trial out = trial;
    out.values = trial.values.slice_rows(start_step, end_step);
    return out;
}

ActiveRegion find_active_region(const Trial& trial, std::size_t window_len,
                                double variance_threshold) {
    if (window_len < 2) throw std::invalid_argument("truncate_auto: window_len must be >= 2");
    const std::size_t n = trial.length();
    if (n < window_len) throw std::runtime_error("no active region (trial shorter than window)");

    std::vector<double> sum(n);
    for (std::size_t t = 0; t < n; ++t) {
        double s = 0;
        for (double v : trial.values.row(t)) s += v;
        sum[t] = s;
    }

    bool found = false;
    ActiveRegion region;
    const double inv = 1.0 / static_cast<double>(window_len);
    for (std::size_t s = 0; s + window_len <= n; ++s) {
        double mean = 0;
        for (std::size_t k = 0; k < window_len; ++k) mean += sum[s + k];
        mean *= inv;
        double var = 0;
        for (std::size_t k = 0; k < window_len; ++k) {
            const double d = sum[s + k] - mean;
            var += d * d;
        }
        var *= inv;
        if (var > variance_threshold) {
            if (!found) region.begin = s;
            region.end = s + window_len;
            found = true;
        }
    }
    if (!found) throw std::runtime_error("no active region");
    return region;
}

Trial truncate_auto(const Trial& trial, std::size_t window_len, double variance_threshold) {
    const auto region = find_active_region(trial, window_len, variance_threshold);
    return truncate_manual(trial, region.begin, region.end);
}

// ---------------------------------------------------------------------------
// Normalization

NormalizationParams fit_normalizer(const Matrix& training_values, bool scale_to_unit) {
    if (training_values.rows() == 0) throw std::invalid_argument("fit_normalizer: empty input");
    if (training_values.cols() != kChannels) {
        throw std::invalid_argument("fit_normalizer: expected 6 channels");
    }
    NormalizationParams p;
    p.scale_to_unit = scale_to_unit;
    std::array<double, kChannels> hi{};
    p.min.fill(std::numeric_limits<double>::infinity());
    hi.fill(-std::numeric_limits<double>::infinity());
    for (std::size_t t = 0; t < training_values.rows(); ++t) {
        for (std::size_t c = 0; c < kChannels; ++c) {
            p.min[c] = std::min(p.min[c], training_values(t, c));
            hi[c] = std::max(hi[c], training_values(t, c));
        }
    }
    for (std::size_t c = 0; c < kChannels; ++c) p.range[c] = hi[c] - p.min[c];
    return p;
}

NormalizationParams fit_normalizer(std::span<const Trial> training_trials, bool scale_to_unit) {
    std::size_t rows = 0;
    for (const auto& t : training_trials) rows += t.length();
    Matrix all(rows, kChannels);
    std::size_t r = 0;
    for (const auto& t : training_trials) {
        std::copy(t.values.values().begin(), t.values.values().end(), all.data() + r * kChannels);
        r += t.length();
    }
    return fit_normalizer(all, scale_to_unit);
}

Matrix apply_normalizer(const Matrix& values, const NormalizationParams& params) {
    if (values.cols() != kChannels) throw std::invalid_argument("apply_normalizer: 6 channels");
    Matrix out = values;
    if (values.rows() == 0) return out;
    for (std::size_t c = 0; c < kChannels; ++c) {
        double own_min = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < values.rows(); ++t) own_min = std::min(own_min, values(t, c));
        const double offset = params.min[c] - own_min;
        const double range = params.range[c];
        for (std::size_t t = 0; t < values.rows(); ++t) {
            const double shifted = values(t, c) + offset;
            if (!params.scale_to_unit) {
                out(t, c) = shifted;
            } else {
                out(t, c) = range > 0 ? (shifted - params.min[c]) / range : 0.0;
            }
        }
    }
    return out;
}

Trial apply_normalizer(const Trial& trial, const NormalizationParams& params) {
    Trial out = trial;
    out.values = apply_normalizer(trial.values, params);
    return out;
}

// ---------------------------------------------------------------------------
// Windows and protocols

std::size_t window_count(std::size_t length, std::size_t w_in, std::size_t w_out) {
    return length + 1 > w_in + w_out ? length + 1 - w_in - w_out : 0;
}

WindowedDataset make_windows(const Matrix& values, std::size_t w_in, std::size_t w_out,
                             std::size_t stride, std::size_t source) {
    if (w_in == 0 || w_out == 0 || stride == 0) {
        throw std::invalid_argument("make_windows: w_in, w_out and stride must be >= 1");
    }
    WindowedDataset ds;
    ds.w_in = w_in;
    ds.w_out = w_out;
    const std::size_t n = values.rows();
    for (std::size_t s = 0; s + w_in + w_out <= n; s += stride) {
        WindowPair p;
        p.x = values.slice_rows(s, s + w_in);
        p.y = values.slice_rows(s + w_in, s + w_in + w_out);
        p.source = source;
        p.start = s;
        ds.pairs.push_back(std::move(p));
    }
    return ds;
}

SplitRegions plan_split(std::size_t length, std::size_t w_in, std::size_t w_out,
                        const SplitSpec& spec) {
    spec.validate();
    const std::size_t need = w_in + w_out;
    if (length < 3 * need) {
        throw std::invalid_argument("split_by_trial: trial of length " + std::to_string(length) +
                                    " is too short for three regions of >= " +
                                    std::to_string(need) + " samples");
    }
    const double n = static_cast<double>(length);
    // Small epsilons keep 0.15*1000 from landing on 150.00000000000003.
    std::size_t val = static_cast<std::size_t>(std::llround(spec.val_fraction * n));
    std::size_t test = static_cast<std::size_t>(std::ceil(spec.test_fraction * n - 1e-9));
    const auto train_cap = static_cast<std::size_t>(std::floor(spec.train_fraction * n + 1e-9));
    val = std::max(val, need);
    test = std::max(test, need);
    if (val + test + need > length) {
        throw std::invalid_argument("split_by_trial: trial too short for one window per region");
    }
    std::size_t train = length - val - test;
    if (train > train_cap) {
        // The rounding remainder goes to the test region.
        test += train - train_cap;
        train = train_cap;
    }
    if (train < need) {
        throw std::invalid_argument("split_by_trial: training region shorter than one window");
    }
    return SplitRegions{train, train + val, length};
}

TrialSplit split_by_trial(const Trial& trial, std::size_t w_in, std::size_t w_out,
                          const SplitSpec& spec) {
    TrialSplit split;
    split.regions = plan_split(trial.length(), w_in, w_out, spec);
    const auto& r = split.regions;
    split.train = make_windows(trial.values.slice_rows(0, r.train_end), w_in, w_out);
    split.val = make_windows(trial.values.slice_rows(r.train_end, r.val_end), w_in, w_out);
    split.test = make_windows(trial.values.slice_rows(r.val_end, r.total), w_in, w_out);
    for (auto& p : split.val.pairs) p.start += r.train_end;
    for (auto& p : split.test.pairs) p.start += r.val_end;
    return split;
}

ParticipantSplit assemble_by_participant(std::span<const Trial> trials, std::size_t test_index,
                                         std::size_t val_index, std::size_t w_in,
                                         std::size_t w_out, bool scale_to_unit) {
    if (trials.size() < 3) {
        throw std::invalid_argument("by-participant protocol needs >= 3 trials (got " +
                                    std::to_string(trials.size()) + ")");
    }
    if (test_index == val_index) {
        throw std::invalid_argument("test and validation trial must differ");
    }
    if (test_index >= trials.size() || val_index >= trials.size()) {
        throw std::out_of_range("test/validation trial index out of range");
    }

    ParticipantSplit out;
    std::vector<Trial> train_trials;
    for (std::size_t i = 0; i < trials.size(); ++i) {
        if (i == test_index || i == val_index) continue;
        out.train_indices.push_back(i);
        train_trials.push_back(trials[i]);
    }
    out.normalizer = fit_normalizer(train_trials, scale_to_unit);

    out.train.w_in = w_in;
    out.train.w_out = w_out;
    for (std::size_t k = 0; k < train_trials.size(); ++k) {
        const auto normalized = apply_normalizer(train_trials[k].values, out.normalizer);
        out.train.append(make_windows(normalized, w_in, w_out, 1, out.train_indices[k]));
    }
    out.val_trial = apply_normalizer(trials[val_index], out.normalizer);
    out.test_trial = apply_normalizer(trials[test_index], out.normalizer);
    out.val = make_windows(out.val_trial.values, w_in, w_out, 1, val_index);
    out.test = make_windows(out.test_trial.values, w_in, w_out, 1, test_index);
    return out;
}

}  // namespace gaitpred
