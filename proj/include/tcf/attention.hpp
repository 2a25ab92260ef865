#pragma once

#include <random>
#include <vector>

#include "tcf/bank.hpp"
#include "tcf/common.hpp"
#include "tcf/series.hpp"

namespace tcf {

struct AttentionConfig {
    int d_model = 16;
    int n_heads = 4;
    int feat_dim = 2;  // speed channel + slot channel

    int d_head() const { return d_model / n_heads; }
    void validate() const {
        if (d_model < 1 || n_heads < 1 || feat_dim < 1) {
            throw ValidationError("attention dims must be positive");
        }
        if (d_model % n_heads != 0) {
            throw ValidationError("d_model must be divisible by n_heads");
        }
    }
};

struct AttentionParams {
    AttentionConfig cfg;
    Mat w_in;                      // d_model x feat_dim
    std::vector<Mat> w_q, w_k, w_v;  // per head: d_head x d_model
    Mat w_out;                     // feat_dim x d_model

    static AttentionParams init(const AttentionConfig& cfg, std::mt19937_64& rng);
    static AttentionParams zeros_like(const AttentionConfig& cfg);
    void zero();
    // Fixed traversal order shared by the optimizer and the checkpoint codec.
    std::vector<Mat*> tensors();
    std::vector<const Mat*> tensors() const;
};

struct CompensatedFeatures {
    std::vector<Mat> data;       // per step: C x feat_dim
    std::vector<Mat> attention;  // per step: C x K, head-averaged, rows sum to 1
};

// Intermediates retained by the forward pass for the exact backward pass.
struct AttentionCache {
    bool filled = false;
    std::vector<Mat> q_feat, kv_feat;      // inputs, per step
    std::vector<Mat> q_embed, kv_embed;    // per step: C x d_model, K x d_model
    std::vector<std::vector<Mat>> qh, kh, vh, ah;  // [step][head]
    std::vector<Mat> concat;               // per step: C x d_model
};

enum class CompensateMode { concat, add };

CompensateMode parse_mode(const std::string& name);
std::string mode_name(CompensateMode mode);

// Per-position affine embedding (bias-free).
Mat embed(const Mat& feat, const AttentionParams& p);

// q_feat: L mats of C x feat_dim; kv_feat: L mats of K x feat_dim. Runs
// scaled-dot-product softmax attention per step and head, concatenates the
// heads and projects back to feat_dim.
CompensatedFeatures attention_forward(const std::vector<Mat>& q_feat,
                                      const std::vector<Mat>& kv_feat,
                                      const AttentionParams& p,
                                      AttentionCache* cache = nullptr);

// Exact gradients of the forward map. Parameter gradients accumulate into
// grad (pre-shaped via zeros_like); input gradients are written if requested.
void attention_backward(const std::vector<Mat>& upstream, const AttentionCache& cache,
                        const AttentionParams& p, AttentionParams& grad,
                        std::vector<Mat>* dq_feat = nullptr,
                        std::vector<Mat>* dkv_feat = nullptr);

// Joins input features with compensated features: concat widens the feature
// axis to 2*feat_dim, add keeps it at feat_dim.
std::vector<Mat> compensate(const std::vector<Mat>& input_feat,
                            const CompensatedFeatures& features, CompensateMode mode);

}  // namespace tcf
