#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tcf/series.hpp"

namespace tcf::test {

// Uniform 5-min frame starting Monday 2012-03-05 00:00.
inline SeriesFrame flat_frame(int T, int C, float fill = 50.0f) {
    SeriesFrame f;
    for (int c = 0; c < C; ++c) f.sensor_ids.push_back("s" + std::to_string(c));
    const int64_t start = epoch_minutes(2012, 3, 5);
    f.timestamps.resize(T);
    for (int t = 0; t < T; ++t) f.timestamps[t] = start + 5LL * t;
    f.values.assign(static_cast<size_t>(T) * C, fill);
    return f;
}

// Same grid, every cell distinct and positive.
inline SeriesFrame ramp_frame(int T, int C) {
    SeriesFrame f = flat_frame(T, C, 1.0f);
    for (int t = 0; t < T; ++t) {
        for (int c = 0; c < C; ++c) f.at(t, c) = 1.0f + t * C + c;
    }
    return f;
}

// Window with explicit speeds; slots follow the grid from slot0.
inline InputWindow window_of(int L, int C, const std::vector<float>& speeds,
                             uint32_t slot0 = 0, uint32_t period = 2016) {
    InputWindow w;
    w.L = L;
    w.C = C;
    w.period = period;
    w.origin_t = L - 1;
    w.speeds = speeds;
    w.slots.resize(L);
    for (int l = 0; l < L; ++l) w.slots[l] = (slot0 + l) % period;
    return w;
}

inline std::filesystem::path tmp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "tcf_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace tcf::test
