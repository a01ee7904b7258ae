#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "gaitpred/gait_data.hpp"
#include "gaitpred/matrix.hpp"
#include "gaitpred/rng.hpp"

namespace testutil {

inline gaitpred::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                                      double lo = -1.0, double hi = 1.0) {
    gaitpred::SplitMix64 rng(seed);
    gaitpred::Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform(lo, hi);
    return m;
}

inline gaitpred::Trial make_trial(const gaitpred::Matrix& values, const std::string& pid = "P01",
                                  const std::string& tid = "T01") {
    gaitpred::Trial t;
    t.participant_id = pid;
    t.trial_id = tid;
    t.values = values;
    return t;
}

// Trial of `length` steps with non-negative random values.
inline gaitpred::Trial random_trial(std::size_t length, std::uint64_t seed,
                                    const std::string& tid = "T01") {
    return make_trial(random_matrix(length, gaitpred::kChannels, seed, 0.0, 2.0), "P01", tid);
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("gaitpred_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testutil
