#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcf/common.hpp"

namespace tcf {

// Weekly period grid. With the defaults one period holds
// 12 * 24 * 7 = 2016 five-minute slots, slot 0 = Monday 00:00.
struct PeriodConfig {
    int steps_per_hour = 12;
    int hours_per_day = 24;
    int days_per_week = 7;

    int slots_per_day() const { return steps_per_hour * hours_per_day; }
    int period() const { return slots_per_day() * days_per_week; }
    int step_minutes() const { return 60 / steps_per_hour; }
    void validate() const;
    bool operator==(const PeriodConfig&) const = default;
};

// Civil date (assumed local to the dataset) -> minutes since the epoch.
int64_t epoch_minutes(int year, int month, int day, int hour = 0, int minute = 0);
std::string format_timestamp(int64_t minutes);           // "YYYY-MM-DD HH:MM:SS"
int64_t parse_timestamp(const std::string& text);        // inverse of the above

// Period slot of a timestamp, day-major:
// day_of_week * slots_per_day + hour * steps_per_hour + minute / step.
// Throws ValidationError if the timestamp is off the sampling grid.
uint32_t slot_of(int64_t ts_minutes, const PeriodConfig& cfg);

// Full multivariate speed series: T x C row-major, uniform timestamps.
// Zero values encode missing/stopped sensors. Immutable once validated.
struct SeriesFrame {
    std::vector<float> values;        // T * C
    std::vector<int64_t> timestamps;  // epoch minutes, strictly increasing
    std::vector<std::string> sensor_ids;

    size_t rows() const { return timestamps.size(); }
    size_t cols() const { return sensor_ids.size(); }
    float at(size_t t, size_t c) const { return values[t * cols() + c]; }
    float& at(size_t t, size_t c) { return values[t * cols() + c]; }
    int64_t step_minutes() const;
    void validate() const;
    SeriesFrame slice_rows(size_t begin, size_t end) const;  // [begin, end)
};

// One model input of shape L x C x 2. Channel 0 is the speed, channel 1
// the period slot of the step scaled to [0, 1).
struct InputWindow {
    static constexpr int kChannels = 2;

    int64_t origin_t = 0;          // frame row index of the last step
    int64_t origin_timestamp = 0;  // epoch minutes of the last step
    int L = 0;
    int C = 0;
    uint32_t period = 2016;
    std::vector<float> speeds;     // L * C
    std::vector<uint32_t> slots;   // per step

    float speed(int l, int c) const { return speeds[static_cast<size_t>(l) * C + c]; }
    double slot_enc(int l) const { return static_cast<double>(slots[l]) / period; }
    double at(int l, int c, int d) const { return d == 0 ? speed(l, c) : slot_enc(l); }
};

// The tau future steps following a window.
struct HorizonTarget {
    int64_t origin_t = 0;
    int tau = 0;
    int C = 0;
    std::vector<float> speeds;  // tau * C

    float at(int h, int c) const { return speeds[static_cast<size_t>(h) * C + c]; }
};

struct WindowSet {
    std::vector<InputWindow> windows;
    std::vector<HorizonTarget> targets;
    size_t size() const { return windows.size(); }
};

// Sliding (window, target) pairs: window i covers steps [i, i+L), its target
// [i+L, i+L+tau). Requires T >= L + tau; yields T - L - tau + 1 pairs.
WindowSet make_windows(const SeriesFrame& frame, int L, int tau,
                       const PeriodConfig& cfg = PeriodConfig{});

}  // namespace tcf
