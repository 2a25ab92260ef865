#pragma once

#include <cstdint>
#include <string>

#include "tcf/series.hpp"
#include "json.hpp"

namespace tcf {

// Chronological train/val/test fractions. Sizes are floor(train*T),
// floor(val*T) and the remainder.
struct SplitSpec {
    double train_frac = 0.7;
    double val_frac = 0.1;
    double test_frac = 0.2;
    bool chronological = true;
    void validate() const;
};

struct Splits {
    SeriesFrame train, val, test;
};

Splits split(const SeriesFrame& frame, const SplitSpec& spec = SplitSpec{});

// CSV with header `timestamp,<id1>,<id2>,...`, one row per sampling step,
// timestamps as "YYYY-MM-DD HH:MM:SS". Empty speed cells parse as 0.
SeriesFrame load_csv(const std::string& path);
void write_csv(const SeriesFrame& frame, const std::string& path);

// Synthetic periodic traffic with injected extreme events: contiguous
// zero bursts (sensor outages / standstill) and congestion ramps.
struct SyntheticSpec {
    int sensors = 20;
    int weeks = 8;
    double base_speed = 60.0;
    double daily_amplitude = 18.0;
    double weekend_factor = 0.35;   // scales the weekday rush-hour dips
    double noise_std = 2.0;

    // Each step starts a zero burst with probability zero_burst_rate; the
    // burst spans a uniform number of steps and a contiguous sensor range.
    double zero_burst_rate = 0.017;
    int zero_burst_min_steps = 2;
    int zero_burst_max_steps = 6;
    int zero_burst_min_sensors = 4;
    int zero_burst_max_sensors = 20;  // clamped to `sensors`

    // Congestion events ramp a contiguous sensor block down by up to
    // congestion_depth and back over the event span.
    double congestion_rate = 0.0015;
    double congestion_depth = 40.0;
    int congestion_min_steps = 24;
    int congestion_max_steps = 72;

    uint64_t seed = 17;

    void validate() const;
    static SyntheticSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

SeriesFrame generate_synthetic(const SyntheticSpec& spec);

}  // namespace tcf
