#include "tcf/extremeness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tcf {

int count_zeros(const InputWindow& w) {
    int n = 0;
    for (float v : w.speeds) {
        if (v == 0.0f) ++n;
    }
    return n;
}

double input_entropy(const InputWindow& w, const ExtremenessConfig& cfg) {
    cfg.validate();
    const int L = w.L, C = w.C;
    double acc = 0.0;
    for (int c = 0; c < C; ++c) {
        double total = 0.0;
        for (int l = 0; l < L; ++l) total += w.speed(l, c);
        for (int l = 0; l < L; ++l) {
            const double p = total > 0.0 ? w.speed(l, c) / total : 1.0 / L;
            const double q = p + cfg.epsilon;
            acc -= q * std::log(q);
        }
    }
    return acc / L;
}

ExtremenessScore score_window(const InputWindow& w, const ExtremenessConfig& cfg) {
    return {w.origin_t, count_zeros(w), input_entropy(w, cfg)};
}

std::vector<ExtremenessScore> score_windows(const WindowSet& ws,
                                            const ExtremenessConfig& cfg) {
    std::vector<ExtremenessScore> out;
    out.reserve(ws.size());
    for (const auto& w : ws.windows) out.push_back(score_window(w, cfg));
    return out;
}

std::optional<double> ppmcc(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ValidationError("ppmcc: length mismatch");
    const size_t n = a.size();
    if (n < 2) throw ValidationError("ppmcc: need at least 2 elements");
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
    return sab / std::sqrt(saa * sbb);
}

std::vector<std::optional<double>> adjacent_ppmcc_profile(const SeriesFrame& frame) {
    const size_t T = frame.rows(), C = frame.cols();
    if (T < 2) throw ValidationError("profile needs at least 2 rows");
    std::vector<double> prev(C), cur(C);
    for (size_t c = 0; c < C; ++c) prev[c] = frame.at(0, c);
    std::vector<std::optional<double>> out;
    out.reserve(T - 1);
    for (size_t t = 1; t < T; ++t) {
        for (size_t c = 0; c < C; ++c) cur[c] = frame.at(t, c);
        out.push_back(ppmcc(prev, cur));
        std::swap(prev, cur);
    }
    return out;
}

namespace {

// Quantile edges over (value, origin_t)-sorted scores; bucket of v = number
// of edges strictly below v, so tied values land together.
std::vector<int> bucket_by(const std::vector<ExtremenessScore>& scores, int n_buckets,
                           double (*value)(const ExtremenessScore&)) {
    const size_t N = scores.size();
    std::vector<size_t> order(N);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t i, size_t j) {
        const double vi = value(scores[i]), vj = value(scores[j]);
        if (vi != vj) return vi < vj;
        return scores[i].origin_t < scores[j].origin_t;
    });
    std::vector<double> edges;
    edges.reserve(n_buckets - 1);
    for (int k = 1; k < n_buckets; ++k) {
        const size_t idx = std::max<size_t>(N * k / n_buckets, 1);
        edges.push_back(value(scores[order[idx - 1]]));
    }
    std::vector<int> buckets(N);
    for (size_t i = 0; i < N; ++i) {
        const double v = value(scores[i]);
        int b = 0;
        for (double e : edges) {
            if (v > e) ++b;
        }
        buckets[i] = b;
    }
    return buckets;
}

}  // namespace

Stratification stratify(const std::vector<ExtremenessScore>& scores, int n_buckets) {
    if (n_buckets < 1) throw ValidationError("n_buckets must be >= 1");
    if (scores.empty()) throw ValidationError("no scores to stratify");
    Stratification s;
    s.n_buckets = n_buckets;
    s.bucket_zero = bucket_by(scores, n_buckets,
                              [](const ExtremenessScore& x) { return double(x.zero_count); });
    s.bucket_entropy =
        bucket_by(scores, n_buckets, [](const ExtremenessScore& x) { return x.entropy; });
    return s;
}

}  // namespace tcf
