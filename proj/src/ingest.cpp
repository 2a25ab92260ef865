#include "tcf/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace tcf {

void SplitSpec::validate() const {
    if (train_frac <= 0 || val_frac <= 0 || test_frac <= 0) {
        throw ValidationError("split fractions must be positive");
    }
    if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
        throw ValidationError("split fractions must sum to 1");
    }
    if (!chronological) {
        throw ValidationError("only chronological splits are supported");
    }
}

Splits split(const SeriesFrame& frame, const SplitSpec& spec) {
    spec.validate();
    const size_t T = frame.rows();
    if (T < 10) throw ValidationError("need at least 10 rows to split");
    const size_t n_train = static_cast<size_t>(spec.train_frac * T);
    const size_t n_val = static_cast<size_t>(spec.val_frac * T);
    Splits out;
    out.train = frame.slice_rows(0, n_train);
    out.val = frame.slice_rows(n_train, n_train + n_val);
    out.test = frame.slice_rows(n_train + n_val, T);
    return out;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    cells.push_back(cur);
    return cells;
}

}  // namespace

SeriesFrame load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty file", 0);
    auto header = split_line(line);
    if (header.size() < 2 || header[0] != "timestamp") {
        throw ParseError("header must start with 'timestamp' and name one sensor", 0);
    }

    SeriesFrame frame;
    frame.sensor_ids.assign(header.begin() + 1, header.end());
    const size_t C = frame.sensor_ids.size();

    size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (cells.size() != C + 1) {
            throw ParseError("expected " + std::to_string(C + 1) + " cells, got " +
                                 std::to_string(cells.size()),
                             row);
        }
        int64_t ts;
        try {
            ts = parse_timestamp(cells[0]);
        } catch (const ValidationError& e) {
            throw ParseError(e.what(), row);
        }
        if (!frame.timestamps.empty() && ts <= frame.timestamps.back()) {
            throw ParseError("timestamps not strictly increasing", row);
        }
        frame.timestamps.push_back(ts);
        for (size_t c = 0; c < C; ++c) {
            const std::string& cell = cells[c + 1];
            if (cell.empty()) {
                frame.values.push_back(0.0f);  // empty cell = missing = 0
                continue;
            }
            float v = 0.0f;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
                throw ParseError("non-numeric cell '" + cell + "'", row);
            }
            frame.values.push_back(v);
        }
    }
    frame.validate();
    return frame;
}

void write_csv(const SeriesFrame& frame, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "timestamp";
    for (const auto& id : frame.sensor_ids) out << ',' << id;
    out << '\n';
    char buf[32];
    for (size_t t = 0; t < frame.rows(); ++t) {
        out << format_timestamp(frame.timestamps[t]);
        for (size_t c = 0; c < frame.cols(); ++c) {
            // %.9g round-trips binary32 exactly
            std::snprintf(buf, sizeof(buf), "%.9g", frame.at(t, c));
            out << ',' << buf;
        }
        out << '\n';
    }
    if (!out) throw IoError("short write to " + path);
}

void SyntheticSpec::validate() const {
    if (sensors < 1 || weeks < 1) throw ValidationError("sensors and weeks must be >= 1");
    if (noise_std < 0) throw ValidationError("noise_std must be >= 0");
    auto rate_ok = [](double r) { return r >= 0.0 && r <= 1.0; };
    if (!rate_ok(zero_burst_rate) || !rate_ok(congestion_rate)) {
        throw ValidationError("event rates must lie in [0, 1]");
    }
    if (zero_burst_min_steps < 1 || zero_burst_min_steps > zero_burst_max_steps ||
        zero_burst_min_sensors < 1 || zero_burst_min_sensors > zero_burst_max_sensors ||
        congestion_min_steps < 1 || congestion_min_steps > congestion_max_steps) {
        throw ValidationError("event spans must satisfy 1 <= min <= max");
    }
    if (base_speed <= 0) throw ValidationError("base_speed must be positive");
}

namespace {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

}  // namespace

SyntheticSpec SyntheticSpec::from_json(const nlohmann::json& j) {
    SyntheticSpec s;
    read_field(j, "sensors", s.sensors);
    read_field(j, "weeks", s.weeks);
    read_field(j, "base_speed", s.base_speed);
    read_field(j, "daily_amplitude", s.daily_amplitude);
    read_field(j, "weekend_factor", s.weekend_factor);
    read_field(j, "noise_std", s.noise_std);
    read_field(j, "zero_burst_rate", s.zero_burst_rate);
    read_field(j, "zero_burst_min_steps", s.zero_burst_min_steps);
    read_field(j, "zero_burst_max_steps", s.zero_burst_max_steps);
    read_field(j, "zero_burst_min_sensors", s.zero_burst_min_sensors);
    read_field(j, "zero_burst_max_sensors", s.zero_burst_max_sensors);
    read_field(j, "congestion_rate", s.congestion_rate);
    read_field(j, "congestion_depth", s.congestion_depth);
    read_field(j, "congestion_min_steps", s.congestion_min_steps);
    read_field(j, "congestion_max_steps", s.congestion_max_steps);
    read_field(j, "seed", s.seed);
    s.validate();
    return s;
}

nlohmann::json SyntheticSpec::to_json() const {
    return {{"sensors", sensors},
            {"weeks", weeks},
            {"base_speed", base_speed},
            {"daily_amplitude", daily_amplitude},
            {"weekend_factor", weekend_factor},
            {"noise_std", noise_std},
            {"zero_burst_rate", zero_burst_rate},
            {"zero_burst_min_steps", zero_burst_min_steps},
            {"zero_burst_max_steps", zero_burst_max_steps},
            {"zero_burst_min_sensors", zero_burst_min_sensors},
            {"zero_burst_max_sensors", zero_burst_max_sensors},
            {"congestion_rate", congestion_rate},
            {"congestion_depth", congestion_depth},
            {"congestion_min_steps", congestion_min_steps},
            {"congestion_max_steps", congestion_max_steps},
            {"seed", seed}};
}

namespace {

// Rush-hour slowdown profile over the day, in [0, 1].
double daily_dip(int slot_of_day, const PeriodConfig& cfg) {
    const double hour = static_cast<double>(slot_of_day) / cfg.steps_per_hour;
    const double morning = std::exp(-std::pow((hour - 8.0) / 1.5, 2));
    const double evening = std::exp(-std::pow((hour - 17.5) / 2.0, 2));
    return std::min(1.0, morning + 0.9 * evening);
}

}  // namespace

SeriesFrame generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const PeriodConfig cfg;
    const int C = spec.sensors;
    const int P = cfg.period();
    const int64_t T = static_cast<int64_t>(spec.weeks) * P;
    const int spd = cfg.slots_per_day();

    SeriesFrame frame;
    frame.sensor_ids.reserve(C);
    for (int c = 0; c < C; ++c) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "s%03d", c);
        frame.sensor_ids.emplace_back(buf);
    }
    const int64_t start = epoch_minutes(2012, 3, 5);  // a Monday
    frame.timestamps.resize(T);
    for (int64_t t = 0; t < T; ++t) frame.timestamps[t] = start + t * cfg.step_minutes();

    // Base signal: a pure function of the period slot, so the noise-free
    // series is exactly P-periodic.
    std::vector<double> level(static_cast<size_t>(T) * C);
    for (int64_t t = 0; t < T; ++t) {
        const int s = static_cast<int>(t % P);
        const int day = s / spd;
        const double wf = day < 5 ? 1.0 : spec.weekend_factor;
        const double dip = daily_dip(s % spd, cfg) * wf;
        for (int c = 0; c < C; ++c) {
            const double offset = 2.0 * std::sin(2.0 * M_PI * c / C + 0.7);
            const double amp = 0.85 + 0.3 * ((c * 13) % 17) / 17.0;
            level[t * C + c] = spec.base_speed + offset - spec.daily_amplitude * amp * dip;
        }
    }

    if (spec.noise_std > 0) {
        std::mt19937_64 rng(mix_seed(spec.seed, 0xa01));
        std::normal_distribution<double> noise(0.0, spec.noise_std);
        for (double& v : level) v += noise(rng);
    }

    // Congestion: contiguous sensor block ramps down and recovers.
    {
        std::mt19937_64 rng(mix_seed(spec.seed, 0xa02));
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        std::uniform_int_distribution<int> dur_d(spec.congestion_min_steps,
                                                 spec.congestion_max_steps);
        const int w_min = std::max(1, C / 4);
        const int w_max = std::max(w_min, C / 2);
        std::uniform_int_distribution<int> width_d(w_min, w_max);
        for (int64_t t = 0; t < T; ++t) {
            if (u01(rng) >= spec.congestion_rate) continue;
            const int dur = dur_d(rng);
            const int width = width_d(rng);
            const int c0 = std::uniform_int_distribution<int>(0, C - width)(rng);
            const double rise = std::max(1.0, dur / 3.0);
            for (int u = 0; u < dur && t + u < T; ++u) {
                const double shape =
                    std::clamp(std::min(u / rise, (dur - 1 - u) / rise), 0.0, 1.0);
                for (int c = c0; c < c0 + width; ++c) {
                    level[(t + u) * C + c] -= spec.congestion_depth * shape;
                }
            }
        }
    }

    frame.values.resize(level.size());
    for (size_t i = 0; i < level.size(); ++i) {
        frame.values[i] = static_cast<float>(std::max(level[i], 1.0));
    }

    // Zero bursts last so the zeros survive clamping.
    {
        std::mt19937_64 rng(mix_seed(spec.seed, 0xa03));
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        std::uniform_int_distribution<int> steps_d(spec.zero_burst_min_steps,
                                                   spec.zero_burst_max_steps);
        const int s_max = std::min(spec.zero_burst_max_sensors, C);
        const int s_min = std::min(spec.zero_burst_min_sensors, s_max);
        std::uniform_int_distribution<int> sens_d(s_min, s_max);
        for (int64_t t = 0; t < T; ++t) {
            if (u01(rng) >= spec.zero_burst_rate) continue;
            const int span = steps_d(rng);
            const int nsens = sens_d(rng);
            const int c0 = std::uniform_int_distribution<int>(0, C - nsens)(rng);
            for (int u = 0; u < span && t + u < T; ++u) {
                for (int c = c0; c < c0 + nsens; ++c) frame.values[(t + u) * C + c] = 0.0f;
            }
        }
    }

    frame.validate();
    return frame;
}

}  // namespace tcf
