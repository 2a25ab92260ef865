#include "tcf/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace tcf {

MetricTriple compute_metrics(std::span<const double> pred, std::span<const double> target,
                             bool mask_zero_targets) {
    if (pred.size() != target.size()) throw ValidationError("metrics: shape mismatch");
    MetricTriple m;
    double abs_acc = 0.0, sq_acc = 0.0, pct_acc = 0.0;
    size_t n = 0, n_pct = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const double t = target[i];
        if (mask_zero_targets && t == 0.0) continue;
        const double d = pred[i] - t;
        abs_acc += std::abs(d);
        sq_acc += d * d;
        ++n;
        if (t != 0.0) {  // zero targets never enter MAPE
            pct_acc += std::abs(d) / std::abs(t);
            ++n_pct;
        }
    }
    if (n == 0) {
        m.empty = true;
        return m;
    }
    m.count = n;
    m.mae = abs_acc / n;
    m.rmse = std::sqrt(sq_acc / n);
    m.mape = n_pct > 0 ? pct_acc / n_pct : 0.0;
    return m;
}

namespace {

nlohmann::json triple_to_json(const MetricTriple& m) {
    return {{"mae", m.mae},
            {"rmse", m.rmse},
            {"mape", m.mape},
            {"count", m.count},
            {"empty", m.empty}};
}

MetricTriple triple_from_json(const nlohmann::json& j) {
    MetricTriple m;
    m.mae = j.at("mae");
    m.rmse = j.at("rmse");
    m.mape = j.at("mape");
    m.count = j.at("count");
    m.empty = j.at("empty");
    return m;
}

nlohmann::json bucket_to_json(const BucketMetrics& b) {
    nlohmann::json j{{"bucket", b.bucket},
                     {"count", b.count},
                     {"metrics", triple_to_json(b.metrics)}};
    if (b.has_gap) j["loss_gap"] = b.loss_gap;
    return j;
}

BucketMetrics bucket_from_json(const nlohmann::json& j) {
    BucketMetrics b;
    b.bucket = j.at("bucket");
    b.count = j.at("count");
    b.metrics = triple_from_json(j.at("metrics"));
    if (j.contains("loss_gap")) {
        b.loss_gap = j.at("loss_gap");
        b.has_gap = true;
    }
    return b;
}

void check_triple(const MetricTriple& m, const char* where) {
    if (m.empty) return;
    if (m.mae > m.rmse * (1.0 + 1e-12) + 1e-15) {
        throw ValidationError(std::string("MAE exceeds RMSE in ") + where);
    }
    if (m.mape < 0) throw ValidationError(std::string("negative MAPE in ") + where);
}

}  // namespace

void MetricsReport::validate() const {
    check_triple(overall, "overall");
    for (const auto& m : by_horizon) check_triple(m, "horizon");
    size_t zn = 0, en = 0;
    for (const auto& b : by_zero_bucket) {
        check_triple(b.metrics, "zero bucket");
        zn += b.count;
    }
    for (const auto& b : by_entropy_bucket) {
        check_triple(b.metrics, "entropy bucket");
        en += b.count;
    }
    if (!by_zero_bucket.empty() && zn != window_count) {
        throw ValidationError("zero-bucket counts do not sum to window count");
    }
    if (!by_entropy_bucket.empty() && en != window_count) {
        throw ValidationError("entropy-bucket counts do not sum to window count");
    }
}

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json j;
    j["window_count"] = window_count;
    j["n_buckets"] = n_buckets;
    j["horizons"] = horizons;
    j["by_horizon"] = nlohmann::json::array();
    for (const auto& m : by_horizon) j["by_horizon"].push_back(triple_to_json(m));
    j["overall"] = triple_to_json(overall);
    j["by_zero_bucket"] = nlohmann::json::array();
    for (const auto& b : by_zero_bucket) j["by_zero_bucket"].push_back(bucket_to_json(b));
    j["by_entropy_bucket"] = nlohmann::json::array();
    for (const auto& b : by_entropy_bucket) {
        j["by_entropy_bucket"].push_back(bucket_to_json(b));
    }
    return j;
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
    MetricsReport r;
    r.window_count = j.at("window_count");
    r.n_buckets = j.at("n_buckets");
    r.horizons = j.at("horizons").get<std::vector<int>>();
    for (const auto& m : j.at("by_horizon")) r.by_horizon.push_back(triple_from_json(m));
    r.overall = triple_from_json(j.at("overall"));
    for (const auto& b : j.at("by_zero_bucket")) {
        r.by_zero_bucket.push_back(bucket_from_json(b));
    }
    for (const auto& b : j.at("by_entropy_bucket")) {
        r.by_entropy_bucket.push_back(bucket_from_json(b));
    }
    return r;
}

namespace {

void print_triple_row(std::ostringstream& os, const std::string& label,
                      const MetricTriple& m) {
    char buf[128];
    if (m.empty) {
        std::snprintf(buf, sizeof(buf), "  %-14s %10s %10s %10s %8s\n", label.c_str(), "-",
                      "-", "-", "0");
    } else {
        std::snprintf(buf, sizeof(buf), "  %-14s %10.4f %10.4f %9.2f%% %8zu\n",
                      label.c_str(), m.mae, m.rmse, m.mape * 100.0, m.count);
    }
    os << buf;
}

}  // namespace

std::string MetricsReport::table() const {
    std::ostringstream os;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "  %-14s %10s %10s %10s %8s\n", "", "MAE", "RMSE",
                  "MAPE", "n");
    os << "windows: " << window_count << "\n" << buf;
    print_triple_row(os, "overall", overall);
    for (size_t i = 0; i < by_horizon.size(); ++i) {
        print_triple_row(os, "horizon " + std::to_string(horizons[i]), by_horizon[i]);
    }
    auto bucket_rows = [&](const std::vector<BucketMetrics>& buckets, const char* kind) {
        for (const auto& b : buckets) {
            print_triple_row(os, std::string(kind) + " q" + std::to_string(b.bucket),
                             b.metrics);
            if (b.has_gap) {
                std::snprintf(buf, sizeof(buf), "  %-14s %10.4f\n", "  loss gap",
                              b.loss_gap);
                os << buf;
            }
        }
    };
    bucket_rows(by_zero_bucket, "zeros");
    bucket_rows(by_entropy_bucket, "entropy");
    return os.str();
}

namespace {

struct Collector {
    std::vector<double> pred, target;

    void add(const Mat& p, const HorizonTarget& t) {
        for (int h = 0; h < t.tau; ++h) {
            for (int c = 0; c < t.C; ++c) {
                pred.push_back(p(h, c));
                target.push_back(t.at(h, c));
            }
        }
    }
    void add_horizon(const Mat& p, const HorizonTarget& t, int h) {
        for (int c = 0; c < t.C; ++c) {
            pred.push_back(p(h - 1, c));
            target.push_back(t.at(h - 1, c));
        }
    }
    MetricTriple metrics() const { return compute_metrics(pred, target); }
};

std::vector<BucketMetrics> bucket_metrics(const std::vector<Mat>& preds,
                                          const std::vector<HorizonTarget>& targets,
                                          const std::vector<int>& buckets, int n_buckets,
                                          const std::vector<Mat>* control_preds) {
    std::vector<Collector> comp(n_buckets), ctrl(n_buckets);
    std::vector<size_t> counts(n_buckets, 0);
    for (size_t i = 0; i < preds.size(); ++i) {
        const int b = buckets[i];
        comp[b].add(preds[i], targets[i]);
        if (control_preds) ctrl[b].add((*control_preds)[i], targets[i]);
        ++counts[b];
    }
    std::vector<BucketMetrics> out(n_buckets);
    for (int b = 0; b < n_buckets; ++b) {
        out[b].bucket = b;
        out[b].count = counts[b];
        out[b].metrics = comp[b].metrics();
        if (control_preds) {
            const MetricTriple cm = ctrl[b].metrics();
            out[b].has_gap = true;
            out[b].loss_gap =
                (cm.empty ? 0.0 : cm.mae) - (out[b].metrics.empty ? 0.0 : out[b].metrics.mae);
        }
    }
    return out;
}

}  // namespace

MetricsReport stratified_report(const std::vector<Mat>& preds,
                                const std::vector<HorizonTarget>& targets,
                                const std::vector<ExtremenessScore>& scores, int n_buckets,
                                const std::vector<Mat>* control_preds,
                                std::vector<int> horizons) {
    if (preds.size() != targets.size() || preds.size() != scores.size()) {
        throw ValidationError("report inputs misaligned");
    }
    if (preds.empty()) throw ValidationError("no windows to report on");
    if (control_preds && control_preds->size() != preds.size()) {
        throw ValidationError("control predictions misaligned");
    }

    MetricsReport r;
    r.window_count = preds.size();
    r.n_buckets = n_buckets;
    const int tau = targets.front().tau;
    for (int h : horizons) {
        if (h >= 1 && h <= tau) r.horizons.push_back(h);
    }

    Collector all;
    std::vector<Collector> per_h(r.horizons.size());
    for (size_t i = 0; i < preds.size(); ++i) {
        all.add(preds[i], targets[i]);
        for (size_t k = 0; k < r.horizons.size(); ++k) {
            per_h[k].add_horizon(preds[i], targets[i], r.horizons[k]);
        }
    }
    r.overall = all.metrics();
    for (const auto& c : per_h) r.by_horizon.push_back(c.metrics());

    const Stratification strat = stratify(scores, n_buckets);
    r.by_zero_bucket =
        bucket_metrics(preds, targets, strat.bucket_zero, n_buckets, control_preds);
    r.by_entropy_bucket =
        bucket_metrics(preds, targets, strat.bucket_entropy, n_buckets, control_preds);
    r.validate();
    return r;
}

}  // namespace tcf
