#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tcf/attention.hpp"
#include "tcf/bank.hpp"
#include "tcf/extremeness.hpp"
#include "tcf/series.hpp"

namespace tcf {

// Scalar z-score over the nonzero training speeds (zeros are sensor
// dropouts, not traffic, and would drag the mean).
struct Scaler {
    double mean = 0.0;
    double std = 1.0;

    static Scaler fit(const SeriesFrame& train);
    double normalize(double v) const { return (v - mean) / std; }
    double denormalize(double v) const { return v * std + mean; }
};

// Two-layer perceptron applied per sensor to the flattened window features.
struct HeadParams {
    Mat w1;  // hidden x (L * F)
    Mat b1;  // hidden x 1
    Mat w2;  // tau x hidden
    Mat b2;  // tau x 1

    static HeadParams init(int in_dim, int hidden, int tau, std::mt19937_64& rng);
    static HeadParams zeros_like(int in_dim, int hidden, int tau);
    void zero();
    std::vector<Mat*> tensors();
    std::vector<const Mat*> tensors() const;
};

struct ModelConfig {
    AttentionConfig attention;
    PeriodConfig period;
    int L = 12;
    int tau = 12;
    int R = 5;
    int hidden = 64;
    CompensateMode mode = CompensateMode::concat;
    bool use_compensation = true;

    int feature_dim() const {
        return mode == CompensateMode::concat ? 2 * attention.feat_dim
                                              : attention.feat_dim;
    }
    void validate() const;
};

struct Model {
    ModelConfig cfg;
    Scaler scaler;
    AttentionParams att;
    HeadParams head;

    static Model init(const ModelConfig& cfg, uint64_t seed);
    static Model zeros_like(const ModelConfig& cfg);  // gradient accumulator
    std::vector<Mat*> tensors();
    std::vector<const Mat*> tensors() const;
};

struct TrainConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double grad_clip = 5.0;
    int batch_size = 64;
    int max_epochs = 50;
    int patience = 10;
    uint64_t seed = 0;

    void validate() const;
};

struct MaskedLoss {
    double value = 0.0;
    size_t count = 0;       // unmasked positions
    bool all_masked = false;
};

// Mean |pred - target| over nonzero targets. pred is tau x C.
MaskedLoss mae_loss(const Mat& pred, const HorizonTarget& target);

// Full forward pass for one window; pred is denormalized, tau x C.
// caches are filled when requested so backward() can run. bank may be null
// only when compensation is off.
struct ForwardCache {
    std::vector<Mat> q_feat;   // L of C x feat_dim
    std::vector<Mat> aug;      // L of C x F
    Mat x;                     // C x (L*F) flattened head input
    Mat a1;                    // C x hidden, pre-activation
    Mat h;                     // C x hidden, rectified
    AttentionCache att;
    bool used_attention = false;
    int64_t latest_source_timestamp = INT64_MIN;  // newest bank record used
    int forward_hops = 0;
};

Mat forward(const Model& model, const InputWindow& window, const PeriodicDataBank* bank,
            uint64_t sample_seed, ForwardCache* cache = nullptr);

// Accumulates exact gradients of the per-window masked MAE into grad
// (same tensor layout as the model).
void backward(const Model& model, const ForwardCache& cache, const Mat& pred,
              const HorizonTarget& target, Model& grad);

struct EpochStats {
    int epoch = 0;
    double train_mae = 0.0;
    double val_mae = 0.0;
    double max_clipped_norm = 0.0;
};

struct TrainResult {
    Model model;  // best-validation parameters
    std::vector<EpochStats> trace;
    int best_epoch = -1;
    double best_val_mae = 0.0;
};

TrainResult train(const SeriesFrame& train_frame, const SeriesFrame& val_frame,
                  const PeriodicDataBank* bank, const ModelConfig& mcfg,
                  const TrainConfig& tcfg);

struct Prediction {
    WindowSet ws;
    std::vector<Mat> preds;              // per window: tau x C, denormalized
    std::vector<ExtremenessScore> scores;
    int64_t latest_source_timestamp = INT64_MIN;  // newest bank record touched
    long forward_hops = 0;
};

Prediction predict(const SeriesFrame& frame, const PeriodicDataBank* bank,
                   const Model& model, uint64_t seed);

void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

void write_loss_trace(const std::vector<EpochStats>& trace, const std::string& path);

}  // namespace tcf
