#include "tcf/series.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

namespace tcf {

void PeriodConfig::validate() const {
    if (steps_per_hour < 1 || hours_per_day < 1 || days_per_week < 1) {
        throw ValidationError("period config counts must all be >= 1");
    }
    if (60 % steps_per_hour != 0) {
        throw ValidationError("steps_per_hour must divide 60");
    }
}

namespace {

// Days since 1970-01-01 for a civil date (Gregorian, proleptic).
int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

void civil_from_days(int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int64_t yr = static_cast<int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yr + (m <= 2));
}

int64_t floor_div(int64_t a, int64_t b) {
    int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

int64_t floor_mod(int64_t a, int64_t b) { return a - floor_div(a, b) * b; }

// 1970-01-01 was a Thursday; the nearest Monday at or before it is epoch
// day -3, so shifting timestamps forward by 3 days anchors Monday at 0.
constexpr int64_t kMondayShift = 3;

}  // namespace

int64_t epoch_minutes(int year, int month, int day, int hour, int minute) {
    return days_from_civil(year, month, day) * 1440 + hour * 60 + minute;
}

std::string format_timestamp(int64_t minutes) {
    int y, m, d;
    civil_from_days(floor_div(minutes, 1440), y, m, d);
    const int64_t mins = floor_mod(minutes, 1440);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d %02d:%02d:00", y, m, d,
                  static_cast<int>(mins / 60), static_cast<int>(mins % 60));
    return buf;
}

int64_t parse_timestamp(const std::string& text) {
    int y = 0, m = 0, d = 0, hh = 0, mm = 0, ss = 0;
    if (std::sscanf(text.c_str(), "%d-%d-%d %d:%d:%d", &y, &m, &d, &hh, &mm, &ss) != 6 ||
        m < 1 || m > 12 || d < 1 || d > 31 || hh < 0 || hh > 23 || mm < 0 || mm > 59 ||
        ss != 0) {
        throw ValidationError("bad timestamp '" + text + "', expected YYYY-MM-DD HH:MM:SS");
    }
    return epoch_minutes(y, m, d, hh, mm);
}

uint32_t slot_of(int64_t ts_minutes, const PeriodConfig& cfg) {
    cfg.validate();
    const int64_t step = cfg.step_minutes();
    if (floor_mod(ts_minutes, step) != 0) {
        throw ValidationError("timestamp " + std::to_string(ts_minutes) +
                              " not aligned to the " + std::to_string(step) +
                              "-minute sampling grid");
    }
    const int64_t week_minutes = static_cast<int64_t>(cfg.period()) * step;
    const int64_t into_week =
        floor_mod(ts_minutes + kMondayShift * 1440, week_minutes);
    return static_cast<uint32_t>(into_week / step);
}

int64_t SeriesFrame::step_minutes() const {
    if (timestamps.size() < 2) return 5;
    return timestamps[1] - timestamps[0];
}

void SeriesFrame::validate() const {
    if (values.size() != rows() * cols()) {
        throw ValidationError("frame value buffer does not match T x C");
    }
    const int64_t step = step_minutes();
    if (step <= 0) throw ValidationError("timestamps must be strictly increasing");
    for (size_t t = 1; t < timestamps.size(); ++t) {
        if (timestamps[t] - timestamps[t - 1] != step) {
            throw ValidationError("non-uniform timestamp spacing at row " +
                                  std::to_string(t));
        }
    }
    for (float v : values) {
        if (!std::isfinite(v) || v < 0.0f) {
            throw ValidationError("speeds must be finite and >= 0");
        }
    }
}

SeriesFrame SeriesFrame::slice_rows(size_t begin, size_t end) const {
    if (begin > end || end > rows()) throw ValidationError("bad row slice");
    SeriesFrame out;
    out.sensor_ids = sensor_ids;
    out.timestamps.assign(timestamps.begin() + begin, timestamps.begin() + end);
    out.values.assign(values.begin() + begin * cols(), values.begin() + end * cols());
    return out;
}

WindowSet make_windows(const SeriesFrame& frame, int L, int tau,
                       const PeriodConfig& cfg) {
    cfg.validate();
    if (L < 1 || tau < 1) throw ValidationError("L and tau must be >= 1");
    const int64_t T = static_cast<int64_t>(frame.rows());
    const int C = static_cast<int>(frame.cols());
    if (T < L + tau) {
        throw ValidationError("series too short: T=" + std::to_string(T) +
                              " < L+tau=" + std::to_string(L + tau));
    }

    // Slots are per time step, shared by every window that covers the step.
    std::vector<uint32_t> slot_by_row(frame.rows());
    for (size_t t = 0; t < frame.rows(); ++t) {
        slot_by_row[t] = slot_of(frame.timestamps[t], cfg);
    }

    WindowSet out;
    const int64_t n = T - L - tau + 1;
    out.windows.reserve(n);
    out.targets.reserve(n);
    for (int64_t i = 0; i < n; ++i) {
        InputWindow w;
        w.L = L;
        w.C = C;
        w.period = static_cast<uint32_t>(cfg.period());
        w.origin_t = i + L - 1;
        w.origin_timestamp = frame.timestamps[w.origin_t];
        w.speeds.assign(frame.values.begin() + i * C,
                        frame.values.begin() + (i + L) * C);
        w.slots.assign(slot_by_row.begin() + i, slot_by_row.begin() + i + L);

        HorizonTarget tgt;
        tgt.origin_t = w.origin_t;
        tgt.tau = tau;
        tgt.C = C;
        tgt.speeds.assign(frame.values.begin() + (i + L) * C,
                          frame.values.begin() + (i + L + tau) * C);

        out.windows.push_back(std::move(w));
        out.targets.push_back(std::move(tgt));
    }
    return out;
}

}  // namespace tcf
