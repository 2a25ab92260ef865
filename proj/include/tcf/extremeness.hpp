#pragma once

#include <optional>
#include <span>
#include <vector>

#include "tcf/series.hpp"

namespace tcf {

struct ExtremenessConfig {
    double epsilon = 1e-5;

    void validate() const {
        if (epsilon <= 0) throw ValidationError("epsilon must be positive");
    }
};

// Per-window extremeness measurements.
struct ExtremenessScore {
    int64_t origin_t = 0;
    int zero_count = 0;
    double entropy = 0.0;
};

// Number of exactly-zero speed entries in the window.
int count_zeros(const InputWindow& w);

// Entropy of the per-sensor speed profile. Each sensor's L speeds are
// normalized by their sum (all-zero sensors use the uniform profile), then
// P = (1/L) sum_l sum_c -(p + eps) ln(p + eps).
double input_entropy(const InputWindow& w, const ExtremenessConfig& cfg = {});

ExtremenessScore score_window(const InputWindow& w, const ExtremenessConfig& cfg = {});
std::vector<ExtremenessScore> score_windows(const WindowSet& ws,
                                            const ExtremenessConfig& cfg = {});

// Pearson correlation. Empty result when either vector is constant.
std::optional<double> ppmcc(std::span<const double> a, std::span<const double> b);

// Correlation between consecutive sensor-speed rows; entry t relates rows t
// and t+1. Constant rows yield empty entries rather than errors.
std::vector<std::optional<double>> adjacent_ppmcc_profile(const SeriesFrame& frame);

// Quantile bucket assignments, computed independently for zero_count and
// entropy. Equal values always share a bucket; origin_t orders ties when
// locating the quantile edges.
struct Stratification {
    int n_buckets = 1;
    std::vector<int> bucket_zero;
    std::vector<int> bucket_entropy;
};

Stratification stratify(const std::vector<ExtremenessScore>& scores, int n_buckets);

}  // namespace tcf
