#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gaitpred/gait_data.hpp"

namespace gaitpred {

// Raised-cosine pressure lobe of one sensor within a gait cycle. Phase and
// width are fractions of the cycle; the lobe is centred on phase_offset.
struct ChannelShape {
    double amplitude = 1.0;
    double phase_offset = 0.3;
    double bump_width = 0.2;
};

struct GaitProfile {
    double cadence_hz = 0.9;
    double stance_fraction = 0.6;
    std::array<ChannelShape, kChannels> channels{};
    double noise_std = 0.02;
    double cadence_jitter = 0.03;
    double sample_rate_hz = 125.0;

    void validate() const;
    double cycle_samples() const { return sample_rate_hz / cadence_hz; }
};

// Heel sensors (fsr11..13) peak early in stance, forefoot sensors (fsr8..10)
// late, with a maximum amplitude of 1.
GaitProfile default_profile();

// A participant-specific variant of `base`: cadence, stance fraction and the
// per-sensor lobes are perturbed deterministically from `seed`.
GaitProfile vary_profile(const GaitProfile& base, std::uint64_t seed);

// key=value text, one key per line, '#' comments. Per-channel keys take six
// comma-separated numbers in fsr8..fsr13 order.
std::string profile_to_config(const GaitProfile& profile);
GaitProfile parse_profile_config(std::string_view text);

// Noise-free lobe sum for one channel at cycle phase `phase` in [0, 1).
double channel_pressure(const ChannelShape& shape, double phase);

Trial generate_trial(const GaitProfile& profile, double duration_s, std::uint64_t seed,
                     const std::string& participant_id = "P00",
                     const std::string& trial_id = "T00");

// Trials share the participant's profile; each trial gets its own seed,
// cadence and duration jitter. Step counts are kept pairwise distinct when
// cadence_jitter > 0.
std::vector<Trial> generate_participant(const GaitProfile& profile, int n_trials,
                                        double duration_s, std::uint64_t base_seed,
                                        const std::string& participant_id = "P00");

// Prepends and appends constant "standing" rows to a trial (the level of
// each channel is `level` times its mean). Used to exercise truncation.
Trial add_idle_margins(const Trial& trial, std::size_t before, std::size_t after,
                       double level = 0.3);

}  // namespace gaitpred
