#pragma once

#include "json.hpp"
#include <span>
#include <string>
#include <vector>

#include "tcf/common.hpp"
#include "tcf/extremeness.hpp"
#include "tcf/series.hpp"

namespace tcf {

struct MetricTriple {
    double mae = 0.0;
    double rmse = 0.0;
    double mape = 0.0;  // fraction, not percent
    size_t count = 0;   // positions entering mae/rmse
    bool empty = false;
};

// Pointwise error stats. With masking on, zero targets are excluded from all
// three metrics; with masking off they still never enter MAPE.
MetricTriple compute_metrics(std::span<const double> pred, std::span<const double> target,
                             bool mask_zero_targets = true);

struct BucketMetrics {
    int bucket = 0;
    size_t count = 0;  // windows in the bucket
    MetricTriple metrics;
    double loss_gap = 0.0;  // control MAE minus compensated MAE
    bool has_gap = false;
};

struct MetricsReport {
    size_t window_count = 0;
    int n_buckets = 1;
    std::vector<int> horizons;
    std::vector<MetricTriple> by_horizon;
    MetricTriple overall;
    std::vector<BucketMetrics> by_zero_bucket;
    std::vector<BucketMetrics> by_entropy_bucket;

    void validate() const;
    nlohmann::json to_json() const;
    static MetricsReport from_json(const nlohmann::json& j);
    std::string table() const;  // human-readable rendering
};

// Buckets windows by zero count and entropy, reports masked metrics per
// horizon and per bucket. control_preds, when given, fills the loss-gap
// column (control minus compensated, per bucket).
MetricsReport stratified_report(const std::vector<Mat>& preds,
                                const std::vector<HorizonTarget>& targets,
                                const std::vector<ExtremenessScore>& scores, int n_buckets,
                                const std::vector<Mat>* control_preds = nullptr,
                                std::vector<int> horizons = {3, 6, 12});

}  // namespace tcf
