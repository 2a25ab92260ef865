#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "helpers.hpp"
#include "tcf/bank.hpp"
#include "tcf/forecaster.hpp"

using namespace tcf;

namespace {

SeriesFrame noisy_frame(int T, int C, uint64_t seed) {
    SeriesFrame f = test::flat_frame(T, C);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> d(30.0f, 70.0f);
    for (float& v : f.values) v = d(rng);
    return f;
}

ModelConfig tiny_config(int L = 4, int tau = 2,
                        CompensateMode mode = CompensateMode::concat,
                        bool use_comp = true) {
    ModelConfig cfg;
    cfg.attention = AttentionConfig{4, 2, 2};
    cfg.L = L;
    cfg.tau = tau;
    cfg.R = 2;
    cfg.hidden = 8;
    cfg.mode = mode;
    cfg.use_compensation = use_comp;
    return cfg;
}

}  // namespace

TEST_CASE("scaler fits the nonzero speeds only") {
    SeriesFrame f = test::flat_frame(2, 2);
    f.at(0, 0) = 10.0f;
    f.at(0, 1) = 0.0f;
    f.at(1, 0) = 20.0f;
    f.at(1, 1) = 30.0f;
    Scaler s = Scaler::fit(f);
    CHECK(s.mean == doctest::Approx(20.0).epsilon(1e-12));
    CHECK(s.std == doctest::Approx(std::sqrt(200.0 / 3.0)).epsilon(1e-12));
    CHECK(s.denormalize(s.normalize(43.7)) == doctest::Approx(43.7).epsilon(1e-12));

    // constant data degenerates to unit scale instead of dividing by zero
    Scaler flat = Scaler::fit(test::flat_frame(3, 2));
    CHECK(flat.mean == doctest::Approx(50.0));
    CHECK(flat.std == 1.0);

    CHECK_THROWS_AS(Scaler::fit(test::flat_frame(2, 2, 0.0f)), ValidationError);
}

TEST_CASE("masked mae ignores zero targets") {
    HorizonTarget t;
    t.tau = 1;
    t.C = 2;
    t.speeds = {0.0f, 30.0f};
    Mat pred(1, 2);
    pred(0, 0) = 5.0;
    pred(0, 1) = 30.0;
    MaskedLoss l = mae_loss(pred, t);
    CHECK(l.value == 0.0);
    CHECK(l.count == 1);
    CHECK(!l.all_masked);

    t.speeds = {50.0f, 40.0f};
    pred(0, 0) = 60.0;
    pred(0, 1) = 30.0;
    l = mae_loss(pred, t);
    CHECK(l.value == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(l.count == 2);

    pred(0, 0) = 50.0;
    pred(0, 1) = 40.0;
    CHECK(mae_loss(pred, t).value == 0.0);

    t.speeds = {0.0f, 0.0f};
    l = mae_loss(pred, t);
    CHECK(l.all_masked);
    CHECK(l.count == 0);
    CHECK(l.value == 0.0);

    Mat wrong(2, 2);
    CHECK_THROWS_AS(mae_loss(wrong, t), ValidationError);
}

TEST_CASE("forward yields one denormalized tau x C block per window") {
    SeriesFrame f = noisy_frame(8, 3, 11);
    PeriodicDataBank bank = build_bank(f);
    ModelConfig cfg = tiny_config(4, 2);
    Model m = Model::init(cfg, 5);
    m.scaler = Scaler::fit(f);
    WindowSet ws = make_windows(f, cfg.L, cfg.tau);
    REQUIRE(ws.size() == size_t(8 - 4 - 2 + 1));

    ForwardCache cache;
    Mat p1 = forward(m, ws.windows[0], &bank, 99, &cache);
    CHECK(p1.rows == cfg.tau);
    CHECK(p1.cols == 3);
    for (double v : p1.a) CHECK(std::isfinite(v));
    CHECK(cache.used_attention);
    CHECK(cache.latest_source_timestamp > std::numeric_limits<int64_t>::min());

    Mat p2 = forward(m, ws.windows[0], &bank, 99);
    CHECK(p1.a == p2.a);  // same sample seed, same answer

    CHECK_THROWS_AS(forward(m, ws.windows[0], nullptr, 99), ValidationError);
    WindowSet longer = make_windows(f, 5, 2);
    CHECK_THROWS_AS(forward(m, longer.windows[0], &bank, 99), ValidationError);
}

TEST_CASE("zeroed output projection makes additive compensation a no-op") {
    SeriesFrame f = noisy_frame(10, 2, 21);
    PeriodicDataBank bank = build_bank(f);
    ModelConfig cfg = tiny_config(4, 2, CompensateMode::add, true);
    Model comp = Model::init(cfg, 3);
    comp.scaler = Scaler::fit(f);
    comp.att.w_out.zero();
    Model ctrl = comp;
    ctrl.cfg.use_compensation = false;

    WindowSet ws = make_windows(f, cfg.L, cfg.tau);
    for (size_t i = 0; i < ws.size(); ++i) {
        Mat a = forward(comp, ws.windows[i], &bank, 7 + i);
        Mat b = forward(ctrl, ws.windows[i], nullptr, 7 + i);
        CHECK(a.a == b.a);
    }
}

TEST_CASE("control mode never routes gradient into attention") {
    SeriesFrame f = noisy_frame(10, 2, 31);
    ModelConfig cfg = tiny_config(4, 2, CompensateMode::concat, false);
    Model m = Model::init(cfg, 9);
    m.scaler = Scaler::fit(f);
    WindowSet ws = make_windows(f, cfg.L, cfg.tau);

    ForwardCache cache;
    Mat pred = forward(m, ws.windows[0], nullptr, 1, &cache);
    CHECK(!cache.used_attention);
    const int F = cfg.feature_dim();
    for (int l = 0; l < cfg.L; ++l) {
        for (int c = 0; c < 2; ++c) {
            for (int d = 2; d < F; ++d) CHECK(cache.x(c, l * F + d) == 0.0);
        }
    }

    Model grad = Model::zeros_like(cfg);
    backward(m, cache, pred, ws.targets[0], grad);
    for (const Mat* g : std::as_const(grad.att).tensors()) {
        for (double v : g->a) CHECK(v == 0.0);
    }
    double head_mass = 0.0;
    for (const Mat* g : std::as_const(grad.head).tensors()) {
        for (double v : g->a) head_mass += std::abs(v);
    }
    CHECK(head_mass > 0.0);
}

TEST_CASE("window gradients agree with central differences") {
    for (CompensateMode mode : {CompensateMode::concat, CompensateMode::add}) {
        CAPTURE(mode_name(mode));
        SeriesFrame f = noisy_frame(6, 2, mode == CompensateMode::concat ? 41 : 43);
        PeriodicDataBank bank = build_bank(f);
        ModelConfig cfg = tiny_config(4, 2, mode, true);
        cfg.hidden = 3;
        Model m = Model::init(cfg, 17);
        m.scaler = Scaler::fit(f);
        WindowSet ws = make_windows(f, cfg.L, cfg.tau);
        REQUIRE(ws.size() == 1);
        const InputWindow& w = ws.windows[0];
        const HorizonTarget& tgt = ws.targets[0];
        const uint64_t seed = 923;

        ForwardCache cache;
        Mat pred = forward(m, w, &bank, seed, &cache);
        Model grad = Model::zeros_like(cfg);
        backward(m, cache, pred, tgt, grad);

        const double h = 1e-5;
        auto params = m.tensors();
        auto grads = std::as_const(grad).tensors();
        double worst = 0.0;
        for (size_t k = 0; k < params.size(); ++k) {
            Mat& p = *params[k];
            for (size_t i = 0; i < p.size(); ++i) {
                const double keep = p.a[i];
                p.a[i] = keep + h;
                const double hi = mae_loss(forward(m, w, &bank, seed), tgt).value;
                p.a[i] = keep - h;
                const double lo = mae_loss(forward(m, w, &bank, seed), tgt).value;
                p.a[i] = keep;
                const double fd = (hi - lo) / (2 * h);
                const double an = grads[k]->a[i];
                worst = std::max(worst, std::abs(fd - an) /
                                            std::max({std::abs(fd), std::abs(an), 1e-3}));
            }
        }
        CHECK(worst < 1e-3);
    }
}

TEST_CASE("a tiny dataset can be memorized") {
    SeriesFrame f = noisy_frame(8, 2, 51);
    PeriodicDataBank bank = build_bank(f);
    ModelConfig cfg = tiny_config(4, 2);
    TrainConfig tc;
    tc.lr = 1e-2;
    tc.max_epochs = 500;
    tc.patience = 500;
    tc.seed = 5;

    TrainResult r = train(f, f, &bank, cfg, tc);
    REQUIRE(!r.trace.empty());
    const double first = r.trace.front().train_mae;
    const double last = r.trace.back().train_mae;
    CHECK(first > 0.0);
    CHECK(last < 0.05 * first);
    for (const EpochStats& e : r.trace) {
        CHECK(e.max_clipped_norm <= tc.grad_clip + 1e-6);
        CHECK(e.max_clipped_norm > 0.0);
    }
}

TEST_CASE("training is reproducible and tracks its best epoch") {
    SeriesFrame tr = noisy_frame(14, 2, 61);
    SeriesFrame va = noisy_frame(8, 2, 62);
    PeriodicDataBank bank = build_bank(tr);
    ModelConfig cfg = tiny_config(4, 2);
    TrainConfig tc;
    tc.max_epochs = 6;
    tc.patience = 2;
    tc.seed = 77;

    TrainResult a = train(tr, va, &bank, cfg, tc);
    TrainResult b = train(tr, va, &bank, cfg, tc);
    REQUIRE(a.trace.size() == b.trace.size());
    for (size_t i = 0; i < a.trace.size(); ++i) {
        CHECK(a.trace[i].epoch == int(i));
        CHECK(a.trace[i].train_mae == b.trace[i].train_mae);
        CHECK(a.trace[i].val_mae == b.trace[i].val_mae);
    }
    auto ta = std::as_const(a.model).tensors();
    auto tb = std::as_const(b.model).tensors();
    REQUIRE(ta.size() == tb.size());
    for (size_t i = 0; i < ta.size(); ++i) CHECK(ta[i]->a == tb[i]->a);

    double best = std::numeric_limits<double>::infinity();
    int arg = -1;
    for (const EpochStats& e : a.trace) {
        if (e.val_mae < best) {
            best = e.val_mae;
            arg = e.epoch;
        }
    }
    CHECK(a.best_val_mae == best);
    CHECK(a.best_epoch == arg);
    CHECK(int(a.trace.size()) - 1 - a.best_epoch <= tc.patience);

    TrainConfig other = tc;
    other.seed = 78;
    TrainResult c = train(tr, va, &bank, cfg, other);
    CHECK(c.trace.front().train_mae != a.trace.front().train_mae);
}

TEST_CASE("prediction covers every window and reads only historical records") {
    SeriesFrame full = noisy_frame(40, 2, 71);
    SeriesFrame trainf = full.slice_rows(0, 30);
    SeriesFrame testf = full.slice_rows(30, 40);
    PeriodicDataBank bank = build_bank(trainf);
    ModelConfig cfg = tiny_config(4, 2);
    Model m = Model::init(cfg, 1);
    m.scaler = Scaler::fit(trainf);

    Prediction out = predict(testf, &bank, m, 9);
    CHECK(out.ws.size() == size_t(10 - 4 - 2 + 1));
    CHECK(out.preds.size() == out.ws.size());
    CHECK(out.scores.size() == out.ws.size());
    for (const Mat& p : out.preds) {
        CHECK(p.rows == cfg.tau);
        CHECK(p.cols == 2);
        for (double v : p.a) CHECK(std::isfinite(v));
    }
    // every record fed to the model predates the evaluation range
    CHECK(out.latest_source_timestamp > std::numeric_limits<int64_t>::min());
    CHECK(out.latest_source_timestamp <= trainf.timestamps.back());
    CHECK(out.latest_source_timestamp < testf.timestamps.front());
    CHECK(out.forward_hops > 0);  // the test slots are unpopulated
}

TEST_CASE("checkpoints restore the model as float32") {
    ModelConfig cfg = tiny_config(3, 2, CompensateMode::add, false);
    cfg.hidden = 5;
    cfg.R = 4;
    Model m = Model::init(cfg, 99);
    m.scaler.mean = 47.25;
    m.scaler.std = 11.5;
    auto path = test::tmp_path("model.cpfm");
    save_checkpoint(m, path.string());

    Model r = load_checkpoint(path.string());
    CHECK(r.cfg.L == cfg.L);
    CHECK(r.cfg.tau == cfg.tau);
    CHECK(r.cfg.R == cfg.R);
    CHECK(r.cfg.hidden == cfg.hidden);
    CHECK(r.cfg.mode == cfg.mode);
    CHECK(r.cfg.use_compensation == cfg.use_compensation);
    CHECK(r.cfg.attention.d_model == cfg.attention.d_model);
    CHECK(r.cfg.attention.n_heads == cfg.attention.n_heads);
    CHECK(r.cfg.attention.feat_dim == cfg.attention.feat_dim);
    CHECK(r.cfg.period == cfg.period);
    CHECK(r.scaler.mean == 47.25);
    CHECK(r.scaler.std == 11.5);

    auto orig = std::as_const(m).tensors();
    auto load = std::as_const(r).tensors();
    REQUIRE(orig.size() == load.size());
    for (size_t k = 0; k < orig.size(); ++k) {
        REQUIRE(orig[k]->size() == load[k]->size());
        for (size_t i = 0; i < orig[k]->size(); ++i) {
            CHECK(load[k]->a[i] == double(float(orig[k]->a[i])));
        }
    }

    // a reload-save cycle is bit-stable
    auto path2 = test::tmp_path("model2.cpfm");
    save_checkpoint(r, path2.string());
    auto slurp = [](const std::filesystem::path& p) {
        std::ifstream is(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(is), {});
    };
    CHECK(slurp(path) == slurp(path2));

    auto trunc = test::tmp_path("model_trunc.cpfm");
    std::ofstream(trunc, std::ios::binary) << slurp(path).substr(0, 24);
    CHECK_THROWS_AS(load_checkpoint(trunc.string()), IoError);
    auto junk = test::tmp_path("model_junk.cpfm");
    std::ofstream(junk, std::ios::binary) << "JUNKJUNKJUNKJUNK";
    CHECK_THROWS_AS(load_checkpoint(junk.string()), IoError);
    CHECK_THROWS_AS(load_checkpoint(test::tmp_path("absent.cpfm").string()), IoError);
}

TEST_CASE("exploding steps are reported as divergence") {
    SeriesFrame f = noisy_frame(12, 2, 81);
    ModelConfig cfg = tiny_config(4, 2, CompensateMode::concat, false);
    TrainConfig tc;
    tc.lr = 1e200;  // one update flings every weight past the overflow line
    tc.max_epochs = 30;
    tc.patience = 30;
    tc.seed = 1;
    try {
        train(f, f, nullptr, cfg, tc);
        FAIL("expected training to diverge");
    } catch (const Error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("diverged") != std::string::npos);
        CHECK(msg.find("non-finite") != std::string::npos);
    }
}

TEST_CASE("configuration errors are rejected up front") {
    TrainConfig tc;
    tc.lr = 0.0;
    CHECK_THROWS_AS(tc.validate(), ValidationError);
    tc = TrainConfig{};
    tc.grad_clip = 0.0;
    CHECK_THROWS_AS(tc.validate(), ValidationError);
    tc = TrainConfig{};
    tc.patience = 0;
    CHECK_THROWS_AS(tc.validate(), ValidationError);

    ModelConfig mc = tiny_config();
    mc.attention.feat_dim = 3;
    CHECK_THROWS_AS(mc.validate(), ValidationError);
    mc = tiny_config();
    mc.R = 0;
    CHECK_THROWS_AS(mc.validate(), ValidationError);

    SeriesFrame f = noisy_frame(5, 2, 91);  // too short for L=4, tau=2
    PeriodicDataBank bank = build_bank(f);
    CHECK_THROWS_AS(train(f, f, &bank, tiny_config(4, 2), TrainConfig{}),
                    ValidationError);
}

TEST_CASE("loss traces serialize one row per epoch") {
    std::vector<EpochStats> trace(2);
    trace[0] = EpochStats{0, 1.5, 2.5, 0.1};
    trace[1] = EpochStats{1, 1.25, 2.0, 0.2};
    auto path = test::tmp_path("trace.csv");
    write_loss_trace(trace, path.string());

    std::ifstream is(path);
    std::string line;
    std::getline(is, line);
    CHECK(line == "epoch,train_mae,val_mae");
    std::getline(is, line);
    CHECK(line == "0,1.5,2.5");
    std::getline(is, line);
    CHECK(line == "1,1.25,2");
    CHECK(!std::getline(is, line));
}
