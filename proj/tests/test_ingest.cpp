#include "doctest.h"

#include <cmath>
#include <fstream>

#include "helpers.hpp"
#include "tcf/extremeness.hpp"
#include "tcf/ingest.hpp"

using namespace tcf;
using test::flat_frame;
using test::ramp_frame;
using test::tmp_path;

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream os(p);
    os << text;
}

}  // namespace

TEST_CASE("split fractions are validated") {
    CHECK_NOTHROW(SplitSpec{}.validate());
    CHECK_THROWS_AS((SplitSpec{0.8, 0.1, 0.2}.validate()), ValidationError);
    CHECK_THROWS_AS((SplitSpec{0.0, 0.5, 0.5}.validate()), ValidationError);
    CHECK_THROWS_AS((SplitSpec{0.7, 0.1, 0.2, false}.validate()), ValidationError);
}

TEST_CASE("split sizes follow the floor rule with remainder to test") {
    Splits s = split(ramp_frame(100, 2));
    CHECK(s.train.rows() == 70);
    CHECK(s.val.rows() == 10);
    CHECK(s.test.rows() == 20);

    Splits odd = split(ramp_frame(101, 2));
    CHECK(odd.train.rows() == 70);
    CHECK(odd.val.rows() == 10);
    CHECK(odd.test.rows() == 21);

    CHECK_THROWS_AS(split(ramp_frame(9, 2)), ValidationError);
}

TEST_CASE("splits partition the frame chronologically") {
    SeriesFrame f = ramp_frame(53, 3);
    Splits s = split(f);
    CHECK(s.train.timestamps.back() < s.val.timestamps.front());
    CHECK(s.val.timestamps.back() < s.test.timestamps.front());

    // concatenation reproduces the frame exactly
    std::vector<float> glued = s.train.values;
    glued.insert(glued.end(), s.val.values.begin(), s.val.values.end());
    glued.insert(glued.end(), s.test.values.begin(), s.test.values.end());
    CHECK(glued == f.values);
    CHECK(s.train.rows() + s.val.rows() + s.test.rows() == f.rows());
}

TEST_CASE("csv loading accepts a well-formed file") {
    auto p = tmp_path("ok.csv");
    write_text(p,
               "timestamp,a,b\n"
               "2012-03-05 00:00:00,60.5,58\n"
               "2012-03-05 00:05:00,61,57.25\n"
               "2012-03-05 00:10:00,59,56\n");
    SeriesFrame f = load_csv(p.string());
    CHECK(f.rows() == 3);
    CHECK(f.cols() == 2);
    CHECK(f.sensor_ids == std::vector<std::string>{"a", "b"});
    CHECK(f.at(0, 0) == 60.5f);
    CHECK(f.at(2, 1) == 56.0f);
}

TEST_CASE("empty speed cells read as zero") {
    auto p = tmp_path("gap.csv");
    write_text(p,
               "timestamp,a,b\n"
               "2012-03-05 00:00:00,60,\n"
               "2012-03-05 00:05:00,,58\n");
    SeriesFrame f = load_csv(p.string());
    CHECK(f.at(0, 1) == 0.0f);
    CHECK(f.at(1, 0) == 0.0f);
    CHECK(f.at(1, 1) == 58.0f);
}

TEST_CASE("csv errors carry the offending row") {
    auto ragged = tmp_path("ragged.csv");
    write_text(ragged,
               "timestamp,a,b\n"
               "2012-03-05 00:00:00,60,58\n"
               "2012-03-05 00:05:00,61\n");
    CHECK_THROWS_AS(load_csv(ragged.string()), ParseError);
    try {
        load_csv(ragged.string());
    } catch (const ParseError& e) {
        CHECK(e.row == 2);
    }

    auto backwards = tmp_path("backwards.csv");
    write_text(backwards,
               "timestamp,a\n"
               "2012-03-05 00:05:00,60\n"
               "2012-03-05 00:00:00,61\n");
    CHECK_THROWS_AS(load_csv(backwards.string()), ParseError);

    auto garbled = tmp_path("garbled.csv");
    write_text(garbled,
               "timestamp,a\n"
               "2012-03-05 00:00:00,sixty\n");
    CHECK_THROWS_AS(load_csv(garbled.string()), ParseError);

    auto headerless = tmp_path("headerless.csv");
    write_text(headerless, "a,b\n1,2\n");
    CHECK_THROWS_AS(load_csv(headerless.string()), ParseError);

    auto empty = tmp_path("empty.csv");
    write_text(empty, "");
    CHECK_THROWS_AS(load_csv(empty.string()), ParseError);

    CHECK_THROWS_AS(load_csv(tmp_path("missing.csv").string()), IoError);
}

TEST_CASE("csv round trip is bit-exact on float speeds") {
    SeriesFrame f = flat_frame(5, 3);
    f.at(0, 0) = 0.1f;
    f.at(1, 1) = 1.0f / 3.0f;
    f.at(2, 2) = 65.4321f;
    f.at(3, 0) = 0.0f;
    f.at(4, 2) = 123456.78f;
    auto p = tmp_path("roundtrip.csv");
    write_csv(f, p.string());
    SeriesFrame g = load_csv(p.string());
    CHECK(g.values == f.values);
    CHECK(g.timestamps == f.timestamps);
    CHECK(g.sensor_ids == f.sensor_ids);
}

TEST_CASE("synthetic generation is deterministic per seed") {
    SyntheticSpec spec;
    spec.sensors = 5;
    spec.weeks = 1;
    SeriesFrame a = generate_synthetic(spec);
    SeriesFrame b = generate_synthetic(spec);
    CHECK(a.values == b.values);
    CHECK(a.timestamps == b.timestamps);

    spec.seed = 18;
    SeriesFrame c = generate_synthetic(spec);
    CHECK(a.values != c.values);
}

TEST_CASE("event-free noise-free synthetic is exactly periodic") {
    SyntheticSpec spec;
    spec.sensors = 4;
    spec.weeks = 2;
    spec.noise_std = 0.0;
    spec.zero_burst_rate = 0.0;
    spec.congestion_rate = 0.0;
    SeriesFrame f = generate_synthetic(spec);
    const int P = PeriodConfig{}.period();
    REQUIRE(f.rows() == size_t(2 * P));
    for (int t = 0; t < P; ++t) {
        for (int c = 0; c < 4; ++c) CHECK(f.at(t, c) == f.at(t + P, c));
    }
    for (float v : f.values) CHECK(v > 0.0f);
}

TEST_CASE("default spec hits the all-zero-row calibration target") {
    SeriesFrame f = generate_synthetic(SyntheticSpec{});
    size_t zero_rows = 0;
    for (size_t t = 0; t < f.rows(); ++t) {
        bool all = true;
        for (size_t c = 0; c < f.cols() && all; ++c) all = f.at(t, c) == 0.0f;
        zero_rows += all;
    }
    const double frac = double(zero_rows) / f.rows();
    CHECK(frac > 0.003);  // 0.4% plus/minus 0.1%
    CHECK(frac < 0.005);
}

TEST_CASE("default spec zero counts are long-tailed") {
    SeriesFrame f = generate_synthetic(SyntheticSpec{});
    WindowSet ws = make_windows(f, 12, 12);
    std::vector<int> zeros;
    zeros.reserve(ws.size());
    for (const auto& w : ws.windows) zeros.push_back(count_zeros(w));
    std::sort(zeros.begin(), zeros.end());
    const int median = zeros[zeros.size() / 2];
    const int p99 = zeros[size_t(zeros.size() * 0.99)];
    CHECK(p99 >= 10 * median);
    CHECK(p99 > 0);
}

TEST_CASE("synthetic spec json round trip and validation") {
    SyntheticSpec spec;
    spec.sensors = 7;
    spec.weeks = 3;
    spec.noise_std = 1.5;
    spec.seed = 99;
    SyntheticSpec back = SyntheticSpec::from_json(spec.to_json());
    CHECK(back.sensors == 7);
    CHECK(back.weeks == 3);
    CHECK(back.noise_std == 1.5);
    CHECK(back.seed == 99);
    // partial json keeps defaults
    SyntheticSpec partial = SyntheticSpec::from_json({{"sensors", 3}});
    CHECK(partial.sensors == 3);
    CHECK(partial.weeks == SyntheticSpec{}.weeks);

    SyntheticSpec bad;
    bad.zero_burst_rate = 1.5;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = SyntheticSpec{};
    bad.zero_burst_min_steps = 9;
    bad.zero_burst_max_steps = 2;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}
