#include "tcf/attention.hpp"

#include <cmath>

namespace tcf {

AttentionParams AttentionParams::init(const AttentionConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    AttentionParams p;
    p.cfg = cfg;
    p.w_in = Mat(cfg.d_model, cfg.feat_dim);
    xavier_fill(p.w_in, cfg.feat_dim, cfg.d_model, rng);
    const int dh = cfg.d_head();
    p.w_q.resize(cfg.n_heads);
    p.w_k.resize(cfg.n_heads);
    p.w_v.resize(cfg.n_heads);
    for (int h = 0; h < cfg.n_heads; ++h) {
        for (Mat* m : {&p.w_q[h], &p.w_k[h], &p.w_v[h]}) {
            *m = Mat(dh, cfg.d_model);
            xavier_fill(*m, cfg.d_model, dh, rng);
        }
    }
    p.w_out = Mat(cfg.feat_dim, cfg.d_model);
    xavier_fill(p.w_out, cfg.d_model, cfg.feat_dim, rng);
    return p;
}

AttentionParams AttentionParams::zeros_like(const AttentionConfig& cfg) {
    cfg.validate();
    AttentionParams p;
    p.cfg = cfg;
    p.w_in = Mat(cfg.d_model, cfg.feat_dim);
    const int dh = cfg.d_head();
    p.w_q.assign(cfg.n_heads, Mat(dh, cfg.d_model));
    p.w_k.assign(cfg.n_heads, Mat(dh, cfg.d_model));
    p.w_v.assign(cfg.n_heads, Mat(dh, cfg.d_model));
    p.w_out = Mat(cfg.feat_dim, cfg.d_model);
    return p;
}

void AttentionParams::zero() {
    for (Mat* m : tensors()) m->zero();
}

std::vector<Mat*> AttentionParams::tensors() {
    std::vector<Mat*> out{&w_in};
    for (auto& m : w_q) out.push_back(&m);
    for (auto& m : w_k) out.push_back(&m);
    for (auto& m : w_v) out.push_back(&m);
    out.push_back(&w_out);
    return out;
}

std::vector<const Mat*> AttentionParams::tensors() const {
    std::vector<const Mat*> out{&w_in};
    for (const auto& m : w_q) out.push_back(&m);
    for (const auto& m : w_k) out.push_back(&m);
    for (const auto& m : w_v) out.push_back(&m);
    out.push_back(&w_out);
    return out;
}

CompensateMode parse_mode(const std::string& name) {
    if (name == "concat") return CompensateMode::concat;
    if (name == "add") return CompensateMode::add;
    throw ValidationError("mode must be 'concat' or 'add', got '" + name + "'");
}

std::string mode_name(CompensateMode mode) {
    return mode == CompensateMode::concat ? "concat" : "add";
}

Mat embed(const Mat& feat, const AttentionParams& p) {
    if (feat.cols != p.cfg.feat_dim) throw ValidationError("feature width mismatch");
    Mat out;
    gemm_nt(feat, p.w_in, out);
    return out;
}

CompensatedFeatures attention_forward(const std::vector<Mat>& q_feat,
                                      const std::vector<Mat>& kv_feat,
                                      const AttentionParams& p, AttentionCache* cache) {
    p.cfg.validate();
    const int L = static_cast<int>(q_feat.size());
    if (kv_feat.size() != q_feat.size()) throw ValidationError("step count mismatch");
    if (L == 0) throw ValidationError("empty input");
    const int H = p.cfg.n_heads;
    const int dh = p.cfg.d_head();
    const double scale = 1.0 / std::sqrt(double(dh));

    CompensatedFeatures out;
    out.data.resize(L);
    out.attention.resize(L);
    if (cache) {
        cache->filled = false;
        cache->q_feat = q_feat;
        cache->kv_feat = kv_feat;
        cache->q_embed.resize(L);
        cache->kv_embed.resize(L);
        cache->qh.assign(L, std::vector<Mat>(H));
        cache->kh.assign(L, std::vector<Mat>(H));
        cache->vh.assign(L, std::vector<Mat>(H));
        cache->ah.assign(L, std::vector<Mat>(H));
        cache->concat.resize(L);
    }

    Mat eq, ek, qh, kh, vh, scores, oh;
    for (int l = 0; l < L; ++l) {
        const int C = q_feat[l].rows;
        const int K = kv_feat[l].rows;
        gemm_nt(q_feat[l], p.w_in, eq);
        gemm_nt(kv_feat[l], p.w_in, ek);

        Mat concat(C, p.cfg.d_model);
        Mat& avg = out.attention[l];
        avg = Mat(C, K);
        for (int h = 0; h < H; ++h) {
            gemm_nt(eq, p.w_q[h], qh);
            gemm_nt(ek, p.w_k[h], kh);
            gemm_nt(ek, p.w_v[h], vh);
            gemm_nt(qh, kh, scores);
            for (double& s : scores.a) s *= scale;
            for (int i = 0; i < C; ++i) {
                auto row = std::span<double>(scores.a).subspan(size_t(i) * K, K);
                for (double s : row) {
                    if (!std::isfinite(s)) {
                        throw Error("non-finite attention score at step " +
                                    std::to_string(l) + ", head " + std::to_string(h));
                    }
                }
                softmax_row(row);
            }
            gemm_nn(scores, vh, oh);
            for (int i = 0; i < C; ++i) {
                for (int d = 0; d < dh; ++d) concat(i, h * dh + d) = oh(i, d);
            }
            for (size_t j = 0; j < avg.size(); ++j) avg.a[j] += scores.a[j] / H;
            if (cache) {
                cache->qh[l][h] = qh;
                cache->kh[l][h] = kh;
                cache->vh[l][h] = vh;
                cache->ah[l][h] = scores;
            }
        }
        gemm_nt(concat, p.w_out, out.data[l]);
        if (cache) {
            cache->q_embed[l] = eq;
            cache->kv_embed[l] = ek;
            cache->concat[l] = std::move(concat);
        }
    }
    if (cache) cache->filled = true;
    return out;
}

void attention_backward(const std::vector<Mat>& upstream, const AttentionCache& cache,
                        const AttentionParams& p, AttentionParams& grad,
                        std::vector<Mat>* dq_feat, std::vector<Mat>* dkv_feat) {
    if (!cache.filled) throw StateError("attention_backward before forward");
    const int L = static_cast<int>(cache.q_feat.size());
    if (static_cast<int>(upstream.size()) != L) throw ValidationError("upstream step mismatch");
    const int H = p.cfg.n_heads;
    const int dh = p.cfg.d_head();
    const double scale = 1.0 / std::sqrt(double(dh));

    if (dq_feat) dq_feat->resize(L);
    if (dkv_feat) dkv_feat->resize(L);

    Mat d_concat, d_eq, d_ek, doh, da, dvh, ds, dqh, dkh;
    for (int l = 0; l < L; ++l) {
        const Mat& eq = cache.q_embed[l];
        const Mat& ek = cache.kv_embed[l];
        const int C = eq.rows;
        const int K = ek.rows;

        // output projection
        gemm_nn(upstream[l], p.w_out, d_concat);
        gemm_tn(upstream[l], cache.concat[l], grad.w_out, true);

        d_eq = Mat(C, p.cfg.d_model);
        d_ek = Mat(K, p.cfg.d_model);
        for (int h = 0; h < H; ++h) {
            const Mat& a = cache.ah[l][h];
            doh = Mat(C, dh);
            for (int i = 0; i < C; ++i) {
                for (int d = 0; d < dh; ++d) doh(i, d) = d_concat(i, h * dh + d);
            }
            gemm_nt(doh, cache.vh[l][h], da);
            gemm_tn(a, doh, dvh);

            // softmax rows: ds_i = a_i (da_i - <da_i, a_i>)
            ds = Mat(C, K);
            for (int i = 0; i < C; ++i) {
                double dot = 0.0;
                for (int j = 0; j < K; ++j) dot += da(i, j) * a(i, j);
                for (int j = 0; j < K; ++j) ds(i, j) = a(i, j) * (da(i, j) - dot) * scale;
            }
            gemm_nn(ds, cache.kh[l][h], dqh);
            gemm_tn(ds, cache.qh[l][h], dkh);

            gemm_tn(dqh, eq, grad.w_q[h], true);
            gemm_tn(dkh, ek, grad.w_k[h], true);
            gemm_tn(dvh, ek, grad.w_v[h], true);
            gemm_nn(dqh, p.w_q[h], d_eq, true);
            gemm_nn(dkh, p.w_k[h], d_ek, true);
            gemm_nn(dvh, p.w_v[h], d_ek, true);
        }
        gemm_tn(d_eq, cache.q_feat[l], grad.w_in, true);
        gemm_tn(d_ek, cache.kv_feat[l], grad.w_in, true);
        if (dq_feat) gemm_nn(d_eq, p.w_in, (*dq_feat)[l]);
        if (dkv_feat) gemm_nn(d_ek, p.w_in, (*dkv_feat)[l]);
    }
}

std::vector<Mat> compensate(const std::vector<Mat>& input_feat,
                            const CompensatedFeatures& features, CompensateMode mode) {
    if (input_feat.size() != features.data.size()) {
        throw ValidationError("compensate: step count mismatch");
    }
    std::vector<Mat> out(input_feat.size());
    for (size_t l = 0; l < input_feat.size(); ++l) {
        const Mat& x = input_feat[l];
        const Mat& f = features.data[l];
        if (x.rows != f.rows || x.cols != f.cols) {
            throw ValidationError("compensate: feature shape mismatch");
        }
        if (mode == CompensateMode::add) {
            Mat m = x;
            for (size_t j = 0; j < m.size(); ++j) m.a[j] += f.a[j];
            out[l] = std::move(m);
        } else {
            Mat m(x.rows, x.cols * 2);
            for (int i = 0; i < x.rows; ++i) {
                for (int c = 0; c < x.cols; ++c) {
                    m(i, c) = x(i, c);
                    m(i, x.cols + c) = f(i, c);
                }
            }
            out[l] = std::move(m);
        }
    }
    return out;
}

}  // namespace tcf
