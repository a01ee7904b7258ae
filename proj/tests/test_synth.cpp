#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "gaitpred/csv_io.hpp"
#include "gaitpred/synth.hpp"

using namespace gaitpred;

namespace {

std::vector<double> channel_sum(const Trial& t) {
    std::vector<double> s(t.length(), 0.0);
    for (std::size_t r = 0; r < t.length(); ++r) {
        for (double v : t.values.row(r)) s[r] += v;
    }
    return s;
}

double occupancy(const Trial& t) {
    const auto s = channel_sum(t);
    const double mx = *std::max_element(s.begin(), s.end());
    const auto above = std::count_if(s.begin(), s.end(), [&](double v) { return v > 0.1 * mx; });
    return static_cast<double>(above) / static_cast<double>(s.size());
}

double pearson(const std::vector<double>& a, std::size_t ia, const std::vector<double>& b,
               std::size_t ib, std::size_t n) {
    double ma = 0, mb = 0;
    for (std::size_t k = 0; k < n; ++k) {
        ma += a[ia + k];
        mb += b[ib + k];
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double da = a[ia + k] - ma, db = b[ib + k] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    return sab / std::sqrt(saa * sbb);
}

// Peak normalized cross-correlation over lags of up to one cycle.
double peak_xcorr(const Trial& x, const Trial& y) {
    const auto a = channel_sum(x), b = channel_sum(y);
    const std::size_t n = 600, max_lag = 200;
    double best = -1;
    for (std::size_t lag = 0; lag <= max_lag; ++lag) {
        best = std::max(best, pearson(a, lag, b, 0, n));
        best = std::max(best, pearson(a, 0, b, lag, n));
    }
    return best;
}

}  // namespace

TEST_SUITE("synth-gait") {

TEST_CASE("default profile is valid and orders heel before forefoot") {
    const auto p = default_profile();
    CHECK_NOTHROW(p.validate());
    double max_amp = 0;
    for (const auto& ch : p.channels) max_amp = std::max(max_amp, ch.amplitude);
    CHECK(max_amp == 1.0);
    for (std::size_t heel = 3; heel < 6; ++heel) {
        CHECK(p.channels[heel].phase_offset < 0.5 * p.stance_fraction);
    }
    for (std::size_t fore = 0; fore < 3; ++fore) {
        CHECK(p.channels[fore].phase_offset > 0.5 * p.stance_fraction);
    }
}

TEST_CASE("profile validation") {
    auto p = default_profile();
    p.stance_fraction = 1.0;
    CHECK_THROWS(p.validate());
    p = default_profile();
    p.channels[2].amplitude = -1;
    CHECK_THROWS(p.validate());
    p = default_profile();
    p.sample_rate_hz = 0;
    CHECK_THROWS(p.validate());
}

TEST_CASE("generate_trial length is duration times rate") {
    CHECK(generate_trial(default_profile(), 10.0, 1).length() == 1250);
    CHECK(generate_trial(default_profile(), 2.004, 1).length() == 251);
    CHECK_THROWS(generate_trial(default_profile(), 0.5, 1));
}

TEST_CASE("noiseless, jitter-free output is exactly periodic") {
    auto p = default_profile();
    p.noise_std = 0;
    p.cadence_jitter = 0;
    const auto t = generate_trial(p, 6.0, 3);
    const auto period = static_cast<std::size_t>(std::llround(p.sample_rate_hz / p.cadence_hz));
    CHECK(period == 139);
    for (std::size_t r = 0; r + period < t.length(); ++r) {
        for (std::size_t c = 0; c < kChannels; ++c) REQUIRE(t.values(r, c) == t.values(r + period, c));
    }
}

TEST_CASE("stance occupancy matches the stance fraction") {
    const auto p = default_profile();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const double occ = occupancy(generate_trial(p, 10.0, seed));
        CHECK(std::abs(occ - p.stance_fraction) <= 0.05);
    }
}

TEST_CASE("values are never negative") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto t = generate_trial(vary_profile(default_profile(), seed), 5.0, seed);
        for (double v : t.values.values()) CHECK(v >= 0.0);
    }
}

TEST_CASE("generation is deterministic per seed") {
    const auto p = vary_profile(default_profile(), 17);
    CHECK(trial_to_csv(generate_trial(p, 5.0, 99)) == trial_to_csv(generate_trial(p, 5.0, 99)));
    CHECK(trial_to_csv(generate_trial(p, 5.0, 99)) != trial_to_csv(generate_trial(p, 5.0, 100)));
}

TEST_CASE("generate_participant") {
    const auto p = default_profile();
    SUBCASE("three trials with distinct step counts") {
        const auto trials = generate_participant(p, 3, 10.0, 5, "P07");
        REQUIRE(trials.size() == 3);
        std::set<std::size_t> lengths;
        for (const auto& t : trials) {
            lengths.insert(t.length());
            CHECK(t.participant_id == "P07");
        }
        CHECK(lengths.size() == 3);
        CHECK(trials[0].trial_id == "T01");
    }
    SUBCASE("same seed reproduces the sequence") {
        const auto a = generate_participant(p, 5, 6.0, 11);
        const auto b = generate_participant(p, 5, 6.0, 11);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].values == b[i].values);
    }
    SUBCASE("trial count range") {
        CHECK_THROWS(generate_participant(p, 2, 6.0, 1));
        CHECK_THROWS(generate_participant(p, 13, 6.0, 1));
        CHECK(generate_participant(p, 12, 3.0, 1).size() == 12);
    }
}

TEST_CASE("trials correlate more within a participant than across") {
    const auto pa = vary_profile(default_profile(), 101);
    const auto pb = vary_profile(default_profile(), 202);
    const auto a = generate_participant(pa, 4, 8.0, 1, "A");
    const auto b = generate_participant(pb, 4, 8.0, 2, "B");
    double within = 0, across = 0;
    int nw = 0, na = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            within += peak_xcorr(a[i], a[j]) + peak_xcorr(b[i], b[j]);
            nw += 2;
        }
        for (std::size_t j = 0; j < b.size(); ++j) {
            across += peak_xcorr(a[i], b[j]);
            ++na;
        }
    }
    CHECK(within / nw > across / na);
}

TEST_CASE("profile config round-trips") {
    const auto p = vary_profile(default_profile(), 5);
    const auto back = parse_profile_config(profile_to_config(p));
    CHECK(profile_to_config(back) == profile_to_config(p));
    CHECK(back.channels[4].bump_width == p.channels[4].bump_width);
    CHECK_THROWS_AS(parse_profile_config("cadence_hz=abc\n"), ParseError);
    CHECK_THROWS_AS(parse_profile_config("amplitude=1,2\n"), ParseError);
    CHECK_THROWS_AS(parse_profile_config("bogus=1\n"), ParseError);
    CHECK(parse_profile_config("# comment\nnoise_std=0\n").noise_std == 0.0);
}

TEST_CASE("idle margins") {
    const auto t = generate_trial(default_profile(), 3.0, 1);
    const auto padded = add_idle_margins(t, 10, 20);
    CHECK(padded.length() == t.length() + 30);
    CHECK(padded.values(0, 0) == padded.values(9, 0));
    CHECK(padded.values(10, 0) == t.values(0, 0));
}

}  // TEST_SUITE
