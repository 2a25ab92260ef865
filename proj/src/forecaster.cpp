#include "tcf/forecaster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "binio.hpp"

namespace tcf {

Scaler Scaler::fit(const SeriesFrame& train) {
    double sum = 0.0;
    size_t n = 0;
    for (float v : train.values) {
        if (v != 0.0f) {
            sum += v;
            ++n;
        }
    }
    if (n == 0) throw ValidationError("cannot fit scaler: no nonzero speeds");
    const double mean = sum / n;
    double ss = 0.0;
    for (float v : train.values) {
        if (v != 0.0f) ss += (v - mean) * (v - mean);
    }
    Scaler s;
    s.mean = mean;
    s.std = std::sqrt(ss / n);
    if (s.std < 1e-12) s.std = 1.0;
    return s;
}

HeadParams HeadParams::init(int in_dim, int hidden, int tau, std::mt19937_64& rng) {
    HeadParams h;
    h.w1 = Mat(hidden, in_dim);
    xavier_fill(h.w1, in_dim, hidden, rng);
    h.b1 = Mat(hidden, 1);
    h.w2 = Mat(tau, hidden);
    xavier_fill(h.w2, hidden, tau, rng);
    h.b2 = Mat(tau, 1);
    return h;
}

HeadParams HeadParams::zeros_like(int in_dim, int hidden, int tau) {
    HeadParams h;
    h.w1 = Mat(hidden, in_dim);
    h.b1 = Mat(hidden, 1);
    h.w2 = Mat(tau, hidden);
    h.b2 = Mat(tau, 1);
    return h;
}

void HeadParams::zero() {
    for (Mat* m : tensors()) m->zero();
}

std::vector<Mat*> HeadParams::tensors() { return {&w1, &b1, &w2, &b2}; }
std::vector<const Mat*> HeadParams::tensors() const { return {&w1, &b1, &w2, &b2}; }

void ModelConfig::validate() const {
    attention.validate();
    period.validate();
    if (L < 1 || tau < 1 || R < 1 || hidden < 1) {
        throw ValidationError("model dims must be positive");
    }
    if (attention.feat_dim != InputWindow::kChannels) {
        throw ValidationError("model features are speed + slot, feat_dim must be 2");
    }
}

Model Model::init(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    std::mt19937_64 rng(mix_seed(seed, 0x6d6f64));
    m.att = AttentionParams::init(cfg.attention, rng);
    m.head = HeadParams::init(cfg.L * cfg.feature_dim(), cfg.hidden, cfg.tau, rng);
    return m;
}

Model Model::zeros_like(const ModelConfig& cfg) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    m.att = AttentionParams::zeros_like(cfg.attention);
    m.head = HeadParams::zeros_like(cfg.L * cfg.feature_dim(), cfg.hidden, cfg.tau);
    return m;
}

std::vector<Mat*> Model::tensors() {
    auto out = att.tensors();
    for (Mat* m : head.tensors()) out.push_back(m);
    return out;
}

std::vector<const Mat*> Model::tensors() const {
    auto out = std::as_const(att).tensors();
    for (const Mat* m : std::as_const(head).tensors()) out.push_back(m);
    return out;
}

void TrainConfig::validate() const {
    if (lr <= 0 || beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1 || eps <= 0) {
        throw ValidationError("bad optimizer settings");
    }
    if (grad_clip <= 0 || batch_size < 1 || max_epochs < 1 || patience < 1) {
        throw ValidationError("bad training settings");
    }
}

MaskedLoss mae_loss(const Mat& pred, const HorizonTarget& target) {
    if (pred.rows != target.tau || pred.cols != target.C) {
        throw ValidationError("prediction/target shape mismatch");
    }
    MaskedLoss out;
    double acc = 0.0;
    for (int h = 0; h < target.tau; ++h) {
        for (int c = 0; c < target.C; ++c) {
            const double tv = target.at(h, c);
            if (tv == 0.0) continue;
            acc += std::abs(pred(h, c) - tv);
            ++out.count;
        }
    }
    if (out.count == 0) {
        out.all_masked = true;
        return out;
    }
    out.value = acc / out.count;
    return out;
}

namespace {

std::vector<Mat> window_features(const Model& model, const InputWindow& w) {
    const int L = w.L, C = w.C;
    std::vector<Mat> feat(L);
    for (int l = 0; l < L; ++l) {
        Mat m(C, model.cfg.attention.feat_dim);
        const double enc = w.slot_enc(l);
        for (int c = 0; c < C; ++c) {
            m(c, 0) = model.scaler.normalize(w.speed(l, c));
            m(c, 1) = enc;
        }
        feat[l] = std::move(m);
    }
    return feat;
}

std::vector<Mat> sample_features(const Model& model, const BankSample& s) {
    const double P = model.cfg.period.period();
    std::vector<Mat> feat(s.L);
    for (int l = 0; l < s.L; ++l) {
        Mat m(s.R * s.C, model.cfg.attention.feat_dim);
        const double enc = s.key_slots[l] / P;
        for (int j = 0; j < s.R * s.C; ++j) {
            m(j, 0) = model.scaler.normalize(s.at(l, j));
            m(j, 1) = enc;
        }
        feat[l] = std::move(m);
    }
    return feat;
}

void add_bias_rows(Mat& m, const Mat& b) {
    for (int i = 0; i < m.rows; ++i) {
        for (int j = 0; j < m.cols; ++j) m(i, j) += b(j, 0);
    }
}

}  // namespace

Mat forward(const Model& model, const InputWindow& window, const PeriodicDataBank* bank,
            uint64_t sample_seed, ForwardCache* cache) {
    const ModelConfig& cfg = model.cfg;
    if (window.L != cfg.L) throw ValidationError("window length != configured L");
    if (cfg.use_compensation && !bank) {
        throw ValidationError("compensation enabled but no bank given");
    }
    const int C = window.C;
    const int F = cfg.feature_dim();
    const int D = cfg.attention.feat_dim;

    std::vector<Mat> q_feat = window_features(model, window);
    std::vector<Mat> aug;
    ForwardCache local;
    ForwardCache& cc = cache ? *cache : local;
    cc.used_attention = false;
    cc.latest_source_timestamp = INT64_MIN;
    cc.forward_hops = 0;

    if (cfg.use_compensation) {
        BankSample sample = sample_keys(*bank, window, cfg.R, sample_seed);
        for (int64_t ts : sample.source_timestamps) {
            cc.latest_source_timestamp = std::max(cc.latest_source_timestamp, ts);
        }
        cc.forward_hops = sample.forward_hops;
        std::vector<Mat> kv_feat = sample_features(model, sample);
        CompensatedFeatures comp =
            attention_forward(q_feat, kv_feat, model.att, cache ? &cc.att : nullptr);
        aug = compensate(q_feat, comp, cfg.mode);
        cc.used_attention = true;
    } else if (cfg.mode == CompensateMode::concat) {
        aug.resize(cfg.L);
        for (int l = 0; l < cfg.L; ++l) {
            Mat m(C, 2 * D);
            for (int c = 0; c < C; ++c) {
                for (int d = 0; d < D; ++d) m(c, d) = q_feat[l](c, d);
            }
            aug[l] = std::move(m);
        }
    } else {
        aug = q_feat;
    }

    Mat x(C, cfg.L * F);
    for (int l = 0; l < cfg.L; ++l) {
        for (int c = 0; c < C; ++c) {
            for (int f = 0; f < F; ++f) x(c, l * F + f) = aug[l](c, f);
        }
    }
    Mat a1, h, y;
    gemm_nt(x, model.head.w1, a1);
    add_bias_rows(a1, model.head.b1);
    h = a1;
    for (double& v : h.a) v = std::max(v, 0.0);
    gemm_nt(h, model.head.w2, y);
    add_bias_rows(y, model.head.b2);

    Mat pred(cfg.tau, C);
    for (int t = 0; t < cfg.tau; ++t) {
        for (int c = 0; c < C; ++c) pred(t, c) = model.scaler.denormalize(y(c, t));
    }
    if (cache) {
        cc.q_feat = std::move(q_feat);
        cc.aug = std::move(aug);
        cc.x = std::move(x);
        cc.a1 = std::move(a1);
        cc.h = std::move(h);
    }
    return pred;
}

void backward(const Model& model, const ForwardCache& cache, const Mat& pred,
              const HorizonTarget& target, Model& grad) {
    const ModelConfig& cfg = model.cfg;
    const int C = target.C;
    const int F = cfg.feature_dim();
    const int D = cfg.attention.feat_dim;

    size_t n = 0;
    for (int t = 0; t < target.tau; ++t) {
        for (int c = 0; c < C; ++c) {
            if (target.at(t, c) != 0.0) ++n;
        }
    }
    if (n == 0) return;  // fully masked window contributes nothing

    // d(masked MAE)/dy, folding in the denormalization slope
    Mat dy(C, cfg.tau);
    for (int t = 0; t < cfg.tau; ++t) {
        for (int c = 0; c < C; ++c) {
            const double tv = target.at(t, c);
            if (tv == 0.0) continue;
            const double diff = pred(t, c) - tv;
            const double sgn = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
            dy(c, t) = sgn * model.scaler.std / double(n);
        }
    }

    gemm_tn(dy, cache.h, grad.head.w2, true);
    for (int t = 0; t < cfg.tau; ++t) {
        double s = 0.0;
        for (int c = 0; c < C; ++c) s += dy(c, t);
        grad.head.b2(t, 0) += s;
    }
    Mat dh;
    gemm_nn(dy, model.head.w2, dh);
    for (int c = 0; c < C; ++c) {
        for (int j = 0; j < cfg.hidden; ++j) {
            if (cache.a1(c, j) <= 0.0) dh(c, j) = 0.0;
        }
    }
    gemm_tn(dh, cache.x, grad.head.w1, true);
    for (int j = 0; j < cfg.hidden; ++j) {
        double s = 0.0;
        for (int c = 0; c < C; ++c) s += dh(c, j);
        grad.head.b1(j, 0) += s;
    }
    if (!cache.used_attention) return;

    Mat dx;
    gemm_nn(dh, model.head.w1, dx);
    std::vector<Mat> d_comp(cfg.L);
    for (int l = 0; l < cfg.L; ++l) {
        Mat m(C, D);
        const int off = cfg.mode == CompensateMode::concat ? D : 0;
        for (int c = 0; c < C; ++c) {
            for (int d = 0; d < D; ++d) m(c, d) = dx(c, l * F + off + d);
        }
        d_comp[l] = std::move(m);
    }
    attention_backward(d_comp, cache.att, model.att, grad.att);
}

namespace {

double grad_norm(const std::vector<Mat*>& tensors) {
    double ss = 0.0;
    for (const Mat* m : tensors) {
        for (double v : m->a) ss += v * v;
    }
    return std::sqrt(ss);
}

struct Adam {
    double lr, beta1, beta2, eps;
    Vec m, v;
    long t = 0;

    explicit Adam(const TrainConfig& cfg, size_t n)
        : lr(cfg.lr), beta1(cfg.beta1), beta2(cfg.beta2), eps(cfg.eps), m(n, 0.0), v(n, 0.0) {}

    void step(const std::vector<Mat*>& params, const std::vector<Mat*>& grads) {
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, t);
        const double bc2 = 1.0 - std::pow(beta2, t);
        size_t i = 0;
        for (size_t k = 0; k < params.size(); ++k) {
            Mat& p = *params[k];
            const Mat& g = *grads[k];
            for (size_t j = 0; j < p.size(); ++j, ++i) {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g.a[j];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g.a[j] * g.a[j];
                p.a[j] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
            }
        }
    }
};

double mean_masked_mae(const Model& model, const WindowSet& ws, const PeriodicDataBank* bank,
                       uint64_t seed_tag) {
    double acc = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < ws.size(); ++i) {
        const uint64_t s = mix_seed(seed_tag, ws.windows[i].origin_t);
        Mat pred = forward(model, ws.windows[i], bank, s);
        MaskedLoss l = mae_loss(pred, ws.targets[i]);
        if (l.all_masked) continue;
        acc += l.value;
        ++n;
    }
    if (n == 0) throw ValidationError("every window is fully masked");
    return acc / n;
}

}  // namespace

TrainResult train(const SeriesFrame& train_frame, const SeriesFrame& val_frame,
                  const PeriodicDataBank* bank, const ModelConfig& mcfg,
                  const TrainConfig& tcfg) {
    mcfg.validate();
    tcfg.validate();
    WindowSet train_ws = make_windows(train_frame, mcfg.L, mcfg.tau, mcfg.period);
    WindowSet val_ws = make_windows(val_frame, mcfg.L, mcfg.tau, mcfg.period);
    if (train_ws.size() == 0 || val_ws.size() == 0) {
        throw ValidationError("not enough rows for a single window");
    }

    Model model = Model::init(mcfg, tcfg.seed);
    model.scaler = Scaler::fit(train_frame);
    Model grad = Model::zeros_like(mcfg);
    auto params = model.tensors();
    auto grads = grad.tensors();
    size_t n_scalars = 0;
    for (const Mat* m : params) n_scalars += m->size();
    Adam adam(tcfg, n_scalars);

    const uint64_t val_tag = mix_seed(tcfg.seed, 0x76616c);

    TrainResult result;
    result.model = model;
    result.best_val_mae = std::numeric_limits<double>::infinity();
    int since_best = 0;

    std::vector<size_t> order(train_ws.size());
    std::iota(order.begin(), order.end(), 0);
    ForwardCache cache;

    for (int epoch = 0; epoch < tcfg.max_epochs; ++epoch) {
        std::mt19937_64 shuffle_rng(mix_seed(tcfg.seed, epoch, 0x736866));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double epoch_acc = 0.0;
        size_t epoch_n = 0;
        double max_clipped = 0.0;
        for (size_t start = 0; start < order.size(); start += tcfg.batch_size) {
            const size_t stop = std::min(order.size(), start + tcfg.batch_size);
            for (Mat* g : grads) g->zero();
            size_t used = 0;
            for (size_t k = start; k < stop; ++k) {
                const InputWindow& w = train_ws.windows[order[k]];
                const HorizonTarget& tgt = train_ws.targets[order[k]];
                const uint64_t s = mix_seed(tcfg.seed, epoch, w.origin_t);
                Mat pred = forward(model, w, bank, s, &cache);
                MaskedLoss l = mae_loss(pred, tgt);
                if (l.all_masked) continue;
                if (!std::isfinite(l.value)) {
                    throw Error("training diverged: non-finite loss at epoch " +
                                std::to_string(epoch));
                }
                backward(model, cache, pred, tgt, grad);
                epoch_acc += l.value;
                ++epoch_n;
                ++used;
            }
            if (used == 0) continue;
            for (Mat* g : grads) {
                for (double& v : g->a) v /= double(used);
            }
            double norm = grad_norm(grads);
            if (!std::isfinite(norm)) {
                throw Error("training diverged: non-finite gradient at epoch " +
                            std::to_string(epoch));
            }
            if (norm > tcfg.grad_clip) {
                const double s = tcfg.grad_clip / norm;
                for (Mat* g : grads) {
                    for (double& v : g->a) v *= s;
                }
                norm = tcfg.grad_clip;
            }
            max_clipped = std::max(max_clipped, norm);
            adam.step(params, grads);
        }
        if (epoch_n == 0) throw ValidationError("every training window is fully masked");

        EpochStats st;
        st.epoch = epoch;
        st.train_mae = epoch_acc / epoch_n;
        st.val_mae = mean_masked_mae(model, val_ws, bank, val_tag);
        st.max_clipped_norm = max_clipped;
        result.trace.push_back(st);
        if (!std::isfinite(st.val_mae)) {
            throw Error("training diverged: non-finite validation loss at epoch " +
                        std::to_string(epoch));
        }

        if (st.val_mae < result.best_val_mae) {
            result.best_val_mae = st.val_mae;
            result.best_epoch = epoch;
            result.model = model;
            since_best = 0;
        } else if (++since_best >= tcfg.patience) {
            break;
        }
    }
    return result;
}

Prediction predict(const SeriesFrame& frame, const PeriodicDataBank* bank,
                   const Model& model, uint64_t seed) {
    Prediction out;
    out.ws = make_windows(frame, model.cfg.L, model.cfg.tau, model.cfg.period);
    out.preds.reserve(out.ws.size());
    out.scores = score_windows(out.ws);
    const uint64_t tag = mix_seed(seed, 0x707264);
    ForwardCache cache;
    for (const auto& w : out.ws.windows) {
        out.preds.push_back(forward(model, w, bank, mix_seed(tag, w.origin_t), &cache));
        out.latest_source_timestamp =
            std::max(out.latest_source_timestamp, cache.latest_source_timestamp);
        out.forward_hops += cache.forward_hops;
    }
    return out;
}

namespace {

const char kCheckpointMagic[4] = {'C', 'P', 'F', 'M'};
constexpr uint16_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path);
    os.write(kCheckpointMagic, 4);
    binio::put<uint16_t>(os, kCheckpointVersion);
    const ModelConfig& c = model.cfg;
    binio::put<uint16_t>(os, c.mode == CompensateMode::concat ? 0 : 1);
    binio::put<uint16_t>(os, c.use_compensation ? 1 : 0);
    binio::put<uint16_t>(os, static_cast<uint16_t>(c.attention.d_model));
    binio::put<uint16_t>(os, static_cast<uint16_t>(c.attention.n_heads));
    binio::put<uint16_t>(os, static_cast<uint16_t>(c.attention.feat_dim));
    binio::put<uint16_t>(os, static_cast<uint16_t>(c.L));
    binio::put<uint16_t>(os, static_cast<uint16_t>(c.tau));
    binio::put<uint16_t>(os, static_cast<uint16_t>(c.R));
    binio::put<uint16_t>(os, static_cast<uint16_t>(c.hidden));
    binio::put<uint16_t>(os, static_cast<uint16_t>(c.period.steps_per_hour));
    binio::put<uint16_t>(os, static_cast<uint16_t>(c.period.hours_per_day));
    binio::put<uint16_t>(os, static_cast<uint16_t>(c.period.days_per_week));
    binio::put<double>(os, model.scaler.mean);
    binio::put<double>(os, model.scaler.std);
    for (const Mat* m : model.tensors()) {
        binio::put<uint32_t>(os, static_cast<uint32_t>(m->rows));
        binio::put<uint32_t>(os, static_cast<uint32_t>(m->cols));
        for (double v : m->a) binio::put<float>(os, static_cast<float>(v));
    }
    if (!os) throw IoError("short write to " + path);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    binio::expect_magic(is, kCheckpointMagic, "checkpoint");
    const uint16_t version = binio::get<uint16_t>(is, "checkpoint");
    if (version != kCheckpointVersion) {
        throw IoError("unsupported checkpoint version " + std::to_string(version));
    }
    ModelConfig c;
    c.mode = binio::get<uint16_t>(is, "checkpoint") == 0 ? CompensateMode::concat
                                                         : CompensateMode::add;
    c.use_compensation = binio::get<uint16_t>(is, "checkpoint") != 0;
    c.attention.d_model = binio::get<uint16_t>(is, "checkpoint");
    c.attention.n_heads = binio::get<uint16_t>(is, "checkpoint");
    c.attention.feat_dim = binio::get<uint16_t>(is, "checkpoint");
    c.L = binio::get<uint16_t>(is, "checkpoint");
    c.tau = binio::get<uint16_t>(is, "checkpoint");
    c.R = binio::get<uint16_t>(is, "checkpoint");
    c.hidden = binio::get<uint16_t>(is, "checkpoint");
    c.period.steps_per_hour = binio::get<uint16_t>(is, "checkpoint");
    c.period.hours_per_day = binio::get<uint16_t>(is, "checkpoint");
    c.period.days_per_week = binio::get<uint16_t>(is, "checkpoint");
    Model model = Model::zeros_like(c);
    model.scaler.mean = binio::get<double>(is, "checkpoint");
    model.scaler.std = binio::get<double>(is, "checkpoint");
    for (Mat* m : model.tensors()) {
        const uint32_t rows = binio::get<uint32_t>(is, "checkpoint");
        const uint32_t cols = binio::get<uint32_t>(is, "checkpoint");
        if (rows != static_cast<uint32_t>(m->rows) ||
            cols != static_cast<uint32_t>(m->cols)) {
            throw IoError("checkpoint tensor shape mismatch");
        }
        for (double& v : m->a) v = binio::get<float>(is, "checkpoint");
    }
    return model;
}

void write_loss_trace(const std::vector<EpochStats>& trace, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path);
    os << "epoch,train_mae,val_mae\n";
    for (const auto& e : trace) {
        os << e.epoch << ',' << e.train_mae << ',' << e.val_mae << '\n';
    }
    if (!os) throw IoError("short write to " + path);
}

}  // namespace tcf
