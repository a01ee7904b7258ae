#include "gaitpred/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include "gaitpred/csv_io.hpp"
#include "gaitpred/rng.hpp"

namespace gaitpred {

void GaitProfile::validate() const {
    if (!(cadence_hz > 0)) throw std::invalid_argument("profile: cadence_hz must be > 0");
    if (!(stance_fraction > 0 && stance_fraction < 1)) {
        throw std::invalid_argument("profile: stance_fraction must be in (0,1)");
    }
    if (!(sample_rate_hz > 0)) throw std::invalid_argument("profile: sample_rate_hz must be > 0");
    if (!(noise_std >= 0)) throw std::invalid_argument("profile: noise_std must be >= 0");
    if (!(cadence_jitter >= 0)) throw std::invalid_argument("profile: cadence_jitter must be >= 0");
    for (const auto& ch : channels) {
        if (!(ch.amplitude >= 0)) throw std::invalid_argument("profile: amplitudes must be >= 0");
        if (!(ch.bump_width > 0 && ch.bump_width <= 1)) {
            throw std::invalid_argument("profile: bump_width must be in (0,1]");
        }
        const double lo = ch.phase_offset - ch.bump_width / 2;
        const double hi = ch.phase_offset + ch.bump_width / 2;
        if (lo < -1e-9 || hi > stance_fraction + 1e-9) {
            throw std::invalid_argument("profile: lobe must lie inside the stance phase");
        }
    }
}

GaitProfile default_profile() {
    GaitProfile p;
    // fsr8..fsr10: forefoot, loaded in the second half of stance.
    p.channels[0] = {0.75, 0.37, 0.26};
    p.channels[1] = {0.90, 0.45, 0.22};
    p.channels[2] = {0.80, 0.53, 0.14};
    // fsr11..fsr13: heel, loaded right after heel strike.
    p.channels[3] = {1.00, 0.07, 0.14};
    p.channels[4] = {0.85, 0.15, 0.22};
    p.channels[5] = {0.70, 0.23, 0.26};
    return p;
}

namespace {

void clamp_into_stance(ChannelShape& ch, double stance) {
    ch.bump_width = std::min(ch.bump_width, stance);
    const double half = ch.bump_width / 2;
    ch.phase_offset = std::clamp(ch.phase_offset, half, stance - half);
}

}  // namespace

GaitProfile vary_profile(const GaitProfile& base, std::uint64_t seed) {
    SplitMix64 rng(derive_seed(seed, {0x70726f66ULL}));
    GaitProfile p = base;
    p.cadence_hz = base.cadence_hz * rng.uniform(0.85, 1.15);
    p.stance_fraction = std::clamp(base.stance_fraction + rng.uniform(-0.02, 0.02), 0.05, 0.95);
    const double stretch = p.stance_fraction / base.stance_fraction;
    double max_amp = 0;
    for (auto& ch : p.channels) {
        ch.amplitude *= rng.uniform(0.6, 1.4);
        ch.phase_offset = ch.phase_offset * stretch + rng.uniform(-0.02, 0.02);
        ch.bump_width *= stretch * rng.uniform(0.9, 1.1);
        clamp_into_stance(ch, p.stance_fraction);
        max_amp = std::max(max_amp, ch.amplitude);
    }
    // Keep the strongest sensor at the base profile's peak level.
    double base_max = 0;
    for (const auto& ch : base.channels) base_max = std::max(base_max, ch.amplitude);
    if (max_amp > 0) {
        for (auto& ch : p.channels) ch.amplitude *= base_max / max_amp;
    }
    return p;
}

std::string profile_to_config(const GaitProfile& p) {
    auto list = [&](auto field) {
        std::string s;
        for (std::size_t c = 0; c < kChannels; ++c) {
            if (c) s += ",";
            s += format_double(p.channels[c].*field);
        }
        return s;
    };
    std::string out;
    out += "cadence_hz=" + format_double(p.cadence_hz) + "\n";
    out += "stance_fraction=" + format_double(p.stance_fraction) + "\n";
    out += "noise_std=" + format_double(p.noise_std) + "\n";
    out += "cadence_jitter=" + format_double(p.cadence_jitter) + "\n";
    out += "sample_rate_hz=" + format_double(p.sample_rate_hz) + "\n";
    out += "amplitude=" + list(&ChannelShape::amplitude) + "\n";
    out += "phase_offset=" + list(&ChannelShape::phase_offset) + "\n";
    out += "bump_width=" + list(&ChannelShape::bump_width) + "\n";
    return out;
}

GaitProfile parse_profile_config(std::string_view text) {
    GaitProfile p = default_profile();
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto raw = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError("expected key=value", line_no);
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));

        auto scalar = [&]() {
            const auto v = parse_double(value);
            if (!v) throw ParseError("non-numeric value for " + std::string(key), line_no);
            return *v;
        };
        auto per_channel = [&](double ChannelShape::*field) {
            const auto parts = split_csv_line(value);
            if (parts.size() != kChannels) {
                throw ParseError(std::string(key) + " needs 6 comma-separated values", line_no);
            }
            for (std::size_t c = 0; c < kChannels; ++c) {
                const auto v = parse_double(parts[c]);
                if (!v) throw ParseError("non-numeric value for " + std::string(key), line_no);
                p.channels[c].*field = *v;
            }
        };

        if (key == "cadence_hz") p.cadence_hz = scalar();
        else if (key == "stance_fraction") p.stance_fraction = scalar();
        else if (key == "noise_std") p.noise_std = scalar();
        else if (key == "cadence_jitter") p.cadence_jitter = scalar();
        else if (key == "sample_rate_hz") p.sample_rate_hz = scalar();
        else if (key == "amplitude") per_channel(&ChannelShape::amplitude);
        else if (key == "phase_offset") per_channel(&ChannelShape::phase_offset);
        else if (key == "bump_width") per_channel(&ChannelShape::bump_width);
        else throw ParseError("unknown profile key '" + std::string(key) + "'", line_no);
    }
    p.validate();
    return p;
}

double channel_pressure(const ChannelShape& shape, double phase) {
    const double d = phase - shape.phase_offset;
    if (std::abs(d) >= shape.bump_width / 2) return 0.0;
    return shape.amplitude * 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * d / shape.bump_width));
}

namespace {

std::size_t steps_for(double duration_s, double rate) {
    return static_cast<std::size_t>(std::llround(duration_s * rate));
}

Trial generate_steps(const GaitProfile& profile, std::size_t n_steps, std::uint64_t seed,
                     const std::string& participant_id, const std::string& trial_id) {
    profile.validate();
    const double cycle = profile.cycle_samples();
    if (static_cast<double>(n_steps) + 0.5 < cycle) {
        throw std::invalid_argument("generate_trial: duration shorter than one gait cycle");
    }

    Trial trial;
    trial.participant_id = participant_id;
    trial.trial_id = trial_id;
    trial.sample_period_ms = 1000.0 / profile.sample_rate_hz;
    trial.values = Matrix(n_steps, kChannels);

    SplitMix64 rng(seed);
    std::size_t k = 0;
    while (k < n_steps) {
        double len = cycle;
        if (profile.cadence_jitter > 0) len *= 1.0 + profile.cadence_jitter * rng.normal();
        const auto cycle_len = std::max<long long>(2, std::llround(len));
        for (long long j = 0; j < cycle_len && k < n_steps; ++j, ++k) {
            const double phase = static_cast<double>(j) / static_cast<double>(cycle_len);
            for (std::size_t c = 0; c < kChannels; ++c) {
                double v = channel_pressure(profile.channels[c], phase);
                if (profile.noise_std > 0) v += profile.noise_std * rng.normal();
                trial.values(k, c) = std::max(0.0, v);
            }
        }
    }
    return trial;
}

}  // namespace

Trial generate_trial(const GaitProfile& profile, double duration_s, std::uint64_t seed,
                     const std::string& participant_id, const std::string& trial_id) {
    if (!(duration_s > 0)) throw std::invalid_argument("generate_trial: duration must be > 0");
    return generate_steps(profile, steps_for(duration_s, profile.sample_rate_hz), seed,
                          participant_id, trial_id);
}

std::vector<Trial> generate_participant(const GaitProfile& profile, int n_trials,
                                        double duration_s, std::uint64_t base_seed,
                                        const std::string& participant_id) {
    if (n_trials < 3 || n_trials > 12) {
        throw std::invalid_argument("generate_participant: n_trials must be in [3, 12]");
    }
    profile.validate();

    std::vector<GaitProfile> profiles;
    std::vector<std::size_t> lengths;
    std::set<std::size_t> used;
    for (int i = 0; i < n_trials; ++i) {
        SplitMix64 rng(derive_seed(base_seed, {static_cast<std::uint64_t>(i), 1}));
        GaitProfile tp = profile;
        double dur = duration_s;
        if (profile.cadence_jitter > 0) {
            tp.cadence_hz *= std::max(0.5, 1.0 + profile.cadence_jitter * rng.normal());
            dur *= std::max(0.5, 1.0 + profile.cadence_jitter * rng.normal());
        }
        dur = std::max(dur, 1.0 / tp.cadence_hz);
        std::size_t n = steps_for(dur, tp.sample_rate_hz);
        if (profile.cadence_jitter > 0) {
            while (used.count(n)) ++n;
        }
        used.insert(n);
        profiles.push_back(tp);
        lengths.push_back(n);
    }

    std::vector<Trial> trials;
    for (int i = 0; i < n_trials; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "T%02d", i + 1);
        trials.push_back(generate_steps(profiles[static_cast<std::size_t>(i)],
                                        lengths[static_cast<std::size_t>(i)],
                                        derive_seed(base_seed, {static_cast<std::uint64_t>(i), 2}),
                                        participant_id, id));
    }
    return trials;
}

Trial add_idle_margins(const Trial& trial, std::size_t before, std::size_t after, double level) {
    const std::size_t n = trial.length();
    std::array<double, kChannels> idle{};
    for (std::size_t c = 0; c < kChannels; ++c) {
        double s = 0;
        for (std::size_t t = 0; t < n; ++t) s += trial.values(t, c);
        idle[c] = n ? level * s / static_cast<double>(n) : 0.0;
    }
    Trial out = trial;
    out.values = Matrix(before + n + after, kChannels);
    for (std::size_t t = 0; t < out.length(); ++t) {
        for (std::size_t c = 0; c < kChannels; ++c) {
            out.values(t, c) = (t >= before && t < before + n) ? trial.values(t - before, c) : idle[c];
        }
    }
    return out;
}

}  // namespace gaitpred
