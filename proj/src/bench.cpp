#include "tcf/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "tcf/attention.hpp"

namespace tcf {

namespace {

// keeps the optimizer from discarding timed work
volatile double g_sink = 0.0;

struct StubData {
    Vec q, k, v;
};

StubData make_tokens(int n, uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed));
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    StubData s;
    s.q.resize(n);
    s.k.resize(n);
    s.v.resize(n);
    for (double& x : s.q) x = d(rng);
    for (double& x : s.k) x = d(rng);
    for (double& x : s.v) x = d(rng);
    return s;
}

// d=1 self attention over n tokens into preallocated scratch
void run_stub(const StubData& s, Mat& scores, Vec& out) {
    const int n = static_cast<int>(s.q.size());
    if (scores.rows != n || scores.cols != n) scores = Mat(n, n);
    out.resize(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) scores(i, j) = s.q[i] * s.k[j];
        softmax_row(std::span<double>(scores.a).subspan(size_t(i) * n, n));
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += scores(i, j) * s.v[j];
        out[i] = acc;
    }
    g_sink = g_sink + out[0];
}

template <typename F>
double time_median_seconds(F&& kernel, int repetitions) {
    using clock = std::chrono::steady_clock;
    auto secs = [](clock::duration d) {
        return std::chrono::duration<double>(d).count();
    };
    kernel();  // warm-up
    auto t0 = clock::now();
    kernel();
    double once = secs(clock::now() - t0);
    int iters = static_cast<int>(std::ceil(0.02 / std::max(once, 1e-9)));
    iters = std::clamp(iters, 1, 1000000);

    std::vector<double> times(repetitions);
    for (int r = 0; r < repetitions; ++r) {
        t0 = clock::now();
        for (int i = 0; i < iters; ++i) kernel();
        times[r] = secs(clock::now() - t0) / iters;
    }
    std::sort(times.begin(), times.end());
    return times[repetitions / 2];
}

}  // namespace

Mat temporal_attention_stub(int L, uint64_t seed) {
    StubData s = make_tokens(L, seed);
    Mat scores;
    Vec out;
    run_stub(s, scores, out);
    return scores;
}

Mat spatio_temporal_attention_stub(int L, int C, uint64_t seed) {
    StubData s = make_tokens(L * C, seed);
    Mat scores;
    Vec out;
    run_stub(s, scores, out);
    return scores;
}

double BenchReport::seconds_for(const std::string& variant, int L) const {
    for (const auto& e : entries) {
        if (e.variant == variant && e.L == L) return e.seconds;
    }
    throw ValidationError("no bench entry for " + variant + " at L=" + std::to_string(L));
}

nlohmann::json BenchReport::to_json() const {
    nlohmann::json j{{"C", C}, {"R", R}, {"repetitions", repetitions}};
    j["entries"] = nlohmann::json::array();
    for (const auto& e : entries) {
        j["entries"].push_back({{"variant", e.variant},
                                {"L", e.L},
                                {"seconds", e.seconds},
                                {"working_set_bytes", e.working_set_bytes}});
    }
    return j;
}

std::string BenchReport::table() const {
    std::ostringstream os;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "  %-16s %4s %14s %16s\n", "variant", "L",
                  "median (us)", "working set (B)");
    os << "C=" << C << " R=" << R << " reps=" << repetitions << "\n" << buf;
    for (const auto& e : entries) {
        std::snprintf(buf, sizeof(buf), "  %-16s %4d %14.2f %16zu\n", e.variant.c_str(),
                      e.L, e.seconds * 1e6, e.working_set_bytes);
        os << buf;
    }
    return os.str();
}

BenchReport bench_attention(int C, int R, std::vector<int> L_sweep, int repetitions,
                            uint64_t seed) {
    if (C < 1 || R < 1 || repetitions < 1) throw ValidationError("bad bench settings");
    if (L_sweep.size() < 2) throw ValidationError("sweep needs at least 2 lengths");
    for (int L : L_sweep) {
        if (L < 1) throw ValidationError("sweep lengths must be positive");
    }

    BenchReport report;
    report.C = C;
    report.R = R;
    report.repetitions = repetitions;

    // Spatial: one application of the production module, L plays no role.
    AttentionConfig acfg;
    std::mt19937_64 rng(mix_seed(seed, 0x7370));
    AttentionParams params = AttentionParams::init(acfg, rng);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<Mat> q_feat(1), kv_feat(1);
    q_feat[0] = Mat(C, acfg.feat_dim);
    kv_feat[0] = Mat(R * C, acfg.feat_dim);
    for (double& x : q_feat[0].a) x = dist(rng);
    for (double& x : kv_feat[0].a) x = dist(rng);
    auto spatial_kernel = [&] {
        CompensatedFeatures f = attention_forward(q_feat, kv_feat, params);
        g_sink = g_sink + f.data[0](0, 0);
    };
    const size_t spatial_ws =
        (size_t(R) * C * C + size_t(R) * C + C) * sizeof(double);

    Mat scratch;
    Vec out;
    for (int L : L_sweep) {
        StubData t_tokens = make_tokens(L, mix_seed(seed, 0x74, L));
        report.entries.push_back(
            {"temporal", L,
             time_median_seconds([&] { run_stub(t_tokens, scratch, out); }, repetitions),
             (size_t(L) * L + L) * sizeof(double)});

        StubData st_tokens = make_tokens(L * C, mix_seed(seed, 0x7374, L));
        report.entries.push_back(
            {"spatio-temporal", L,
             time_median_seconds([&] { run_stub(st_tokens, scratch, out); }, repetitions),
             (size_t(L) * L * C * C + size_t(L) * C) * sizeof(double)});

        // measured fresh per L even though the kernel never reads L
        report.entries.push_back(
            {"spatial", L, time_median_seconds(spatial_kernel, repetitions), spatial_ws});
    }
    for (const auto& e : report.entries) {
        if (!(e.seconds > 0.0)) throw Error("non-positive timing for " + e.variant);
    }
    return report;
}

}  // namespace tcf
