#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tcf/attention.hpp"

using namespace tcf;

namespace {

Mat random_mat(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
    Mat m(rows, cols);
    std::uniform_real_distribution<double> d(-scale, scale);
    for (double& v : m.a) v = d(rng);
    return m;
}

std::vector<Mat> random_feats(int L, int rows, int cols, std::mt19937_64& rng) {
    std::vector<Mat> out(L);
    for (Mat& m : out) m = random_mat(rows, cols, rng);
    return out;
}

double max_abs(const Mat& m) {
    double hi = 0.0;
    for (double v : m.a) hi = std::max(hi, std::abs(v));
    return hi;
}

}  // namespace

TEST_CASE("attention config checks its shape arithmetic") {
    CHECK(AttentionConfig{16, 4, 2}.d_head() == 4);
    CHECK_THROWS_AS((AttentionConfig{10, 4, 2}.validate()), ValidationError);
    CHECK_THROWS_AS((AttentionConfig{0, 1, 2}.validate()), ValidationError);
}

TEST_CASE("embedding is a bias-free linear map") {
    AttentionConfig cfg{4, 2, 2};
    std::mt19937_64 rng(3);
    AttentionParams p = AttentionParams::init(cfg, rng);

    Mat x = random_mat(5, 2, rng);
    p.w_in.zero();
    CHECK(max_abs(embed(x, p)) == 0.0);

    // identity-like input projection passes features through
    AttentionConfig small{2, 1, 2};
    AttentionParams id = AttentionParams::zeros_like(small);
    id.w_in(0, 0) = 1.0;
    id.w_in(1, 1) = 1.0;
    Mat y = embed(x, id);
    for (int i = 0; i < x.rows; ++i) {
        for (int j = 0; j < x.cols; ++j) CHECK(y(i, j) == x(i, j));
    }

    // linear: embed(2x) = 2 embed(x)
    AttentionParams q = AttentionParams::init(cfg, rng);
    Mat x2 = x;
    for (double& v : x2.a) v *= 2.0;
    Mat e1 = embed(x, q), e2 = embed(x2, q);
    for (size_t i = 0; i < e1.size(); ++i) CHECK(e2.a[i] == doctest::Approx(2.0 * e1.a[i]));

    CHECK_THROWS_AS(embed(random_mat(5, 3, rng), q), ValidationError);
}

TEST_CASE("a single key receives all the attention") {
    AttentionConfig cfg{4, 2, 2};
    std::mt19937_64 rng(7);
    AttentionParams p = AttentionParams::init(cfg, rng);
    std::vector<Mat> kv = random_feats(2, 1, 2, rng);

    CompensatedFeatures a = attention_forward(random_feats(2, 3, 2, rng), kv, p);
    for (const Mat& att : a.attention) {
        CHECK(att.cols == 1);
        for (double v : att.a) CHECK(v == 1.0);
    }
    // with one key the output cannot depend on the queries
    CompensatedFeatures b = attention_forward(random_feats(2, 3, 2, rng), kv, p);
    for (int l = 0; l < 2; ++l) {
        for (size_t i = 0; i < a.data[l].size(); ++i) {
            CHECK(a.data[l].a[i] == doctest::Approx(b.data[l].a[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("identical keys mean uniform attention") {
    AttentionConfig cfg{6, 3, 2};
    std::mt19937_64 rng(9);
    AttentionParams p = AttentionParams::init(cfg, rng);
    std::vector<Mat> kv(1);
    kv[0] = Mat(5, 2);
    for (int j = 0; j < 5; ++j) {
        kv[0](j, 0) = 1.3;
        kv[0](j, 1) = -0.4;
    }
    CompensatedFeatures out = attention_forward(random_feats(1, 4, 2, rng), kv, p);
    for (double v : out.attention[0].a) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("scalar attention reproduces the softmax of raw scores") {
    // d_model = d_head = feat_dim = 1 with unit weights turns the scores into
    // q * k, so keys (0, ln 3) against query 1 weight as (1/4, 3/4)
    AttentionConfig cfg{1, 1, 1};
    AttentionParams p = AttentionParams::zeros_like(cfg);
    p.w_in(0, 0) = 1.0;
    p.w_q[0](0, 0) = 1.0;
    p.w_k[0](0, 0) = 1.0;
    p.w_v[0](0, 0) = 1.0;
    p.w_out(0, 0) = 1.0;

    std::vector<Mat> q(1), kv(1);
    q[0] = Mat(1, 1);
    q[0](0, 0) = 1.0;
    kv[0] = Mat(2, 1);
    kv[0](0, 0) = 0.0;
    kv[0](1, 0) = std::log(3.0);

    CompensatedFeatures out = attention_forward(q, kv, p);
    CHECK(out.attention[0](0, 0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(out.attention[0](0, 1) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(out.data[0](0, 0) == doctest::Approx(0.75 * std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("attention rows are stochastic and non-negative") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        AttentionConfig cfg{8, 2, 2};
        AttentionParams p = AttentionParams::init(cfg, rng);
        auto q = random_feats(3, 4, 2, rng);
        auto kv = random_feats(3, 6, 2, rng);
        CompensatedFeatures out = attention_forward(q, kv, p);
        for (const Mat& att : out.attention) {
            for (int i = 0; i < att.rows; ++i) {
                double sum = 0.0;
                for (int j = 0; j < att.cols; ++j) {
                    CHECK(att(i, j) >= 0.0);
                    sum += att(i, j);
                }
                CHECK(std::abs(sum - 1.0) < 1e-6);
            }
        }
    }
}

TEST_CASE("softmax is shift-invariant and its row gradient sums to zero") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> d(-3.0, 3.0);
    std::vector<double> row(7), shifted(7), up(7);
    for (int trial = 0; trial < 20; ++trial) {
        for (size_t j = 0; j < row.size(); ++j) {
            row[j] = d(rng);
            shifted[j] = row[j] + 11.25;
            up[j] = d(rng);
        }
        std::vector<double> a = row, b = shifted;
        softmax_row(a);
        softmax_row(b);
        for (size_t j = 0; j < row.size(); ++j) {
            CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-12));
        }

        // upstream . d(softmax)/ds_j summed over j vanishes: probe each
        // column of the Jacobian by central differences
        const double h = 1e-6;
        double col_sum = 0.0;
        for (size_t j = 0; j < row.size(); ++j) {
            std::vector<double> hi = row, lo = row;
            hi[j] += h;
            lo[j] -= h;
            softmax_row(hi);
            softmax_row(lo);
            for (size_t i = 0; i < row.size(); ++i) {
                col_sum += up[i] * (hi[i] - lo[i]) / (2.0 * h);
            }
        }
        CHECK(std::abs(col_sum) < 1e-6);
    }
}

TEST_CASE("permuting the keys permutes attention columns and nothing else") {
    std::mt19937_64 rng(19);
    AttentionConfig cfg{8, 4, 2};
    AttentionParams p = AttentionParams::init(cfg, rng);
    const int L = 3, K = 6;
    auto q = random_feats(L, 4, 2, rng);
    auto kv = random_feats(L, K, 2, rng);

    std::vector<int> perm{4, 0, 5, 2, 1, 3};
    std::vector<Mat> kv_p(L);
    for (int l = 0; l < L; ++l) {
        kv_p[l] = Mat(K, 2);
        for (int j = 0; j < K; ++j) {
            for (int c = 0; c < 2; ++c) kv_p[l](j, c) = kv[l](perm[j], c);
        }
    }
    CompensatedFeatures base = attention_forward(q, kv, p);
    CompensatedFeatures swapped = attention_forward(q, kv_p, p);
    for (int l = 0; l < L; ++l) {
        for (size_t i = 0; i < base.data[l].size(); ++i) {
            CHECK(std::abs(base.data[l].a[i] - swapped.data[l].a[i]) < 1e-9);
        }
        for (int i = 0; i < base.attention[l].rows; ++i) {
            for (int j = 0; j < K; ++j) {
                CHECK(std::abs(swapped.attention[l](i, j) -
                               base.attention[l](i, perm[j])) < 1e-9);
            }
        }
    }
}

TEST_CASE("non-finite scores fail with their location") {
    std::mt19937_64 rng(21);
    AttentionConfig cfg{4, 2, 2};
    AttentionParams p = AttentionParams::init(cfg, rng);
    auto q = random_feats(2, 3, 2, rng);
    auto kv = random_feats(2, 4, 2, rng);
    q[1](2, 0) = std::numeric_limits<double>::quiet_NaN();
    try {
        attention_forward(q, kv, p);
        FAIL("expected a non-finite score error");
    } catch (const Error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("step 1") != std::string::npos);
        CHECK(msg.find("head 0") != std::string::npos);
    }
}

TEST_CASE("backward demands a completed forward pass") {
    AttentionConfig cfg{4, 2, 2};
    AttentionParams grad = AttentionParams::zeros_like(cfg);
    AttentionCache cache;
    std::vector<Mat> up(1, Mat(2, 2));
    CHECK_THROWS_AS(attention_backward(up, cache, grad, grad), StateError);
}

TEST_CASE("zero upstream gradient produces zero parameter gradients") {
    std::mt19937_64 rng(23);
    AttentionConfig cfg{8, 2, 2};
    AttentionParams p = AttentionParams::init(cfg, rng);
    auto q = random_feats(2, 3, 2, rng);
    auto kv = random_feats(2, 5, 2, rng);
    AttentionCache cache;
    attention_forward(q, kv, p, &cache);

    AttentionParams grad = AttentionParams::zeros_like(cfg);
    std::vector<Mat> up(2, Mat(3, 2));
    std::vector<Mat> dq, dkv;
    attention_backward(up, cache, p, grad, &dq, &dkv);
    for (const Mat* g : std::as_const(grad).tensors()) CHECK(max_abs(*g) == 0.0);
    for (const Mat& m : dq) CHECK(max_abs(m) == 0.0);
    for (const Mat& m : dkv) CHECK(max_abs(m) == 0.0);
}

namespace {

// scalar probe loss: sum of elementwise products with fixed weights
double probe_loss(const std::vector<Mat>& q, const std::vector<Mat>& kv,
                  const AttentionParams& p, const std::vector<Mat>& weights) {
    CompensatedFeatures out = attention_forward(q, kv, p);
    double acc = 0.0;
    for (size_t l = 0; l < out.data.size(); ++l) {
        for (size_t i = 0; i < out.data[l].size(); ++i) {
            acc += out.data[l].a[i] * weights[l].a[i];
        }
    }
    return acc;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

}  // namespace

TEST_CASE("analytic gradients match central differences") {
    std::mt19937_64 rng(29);
    const double h = 1e-4;
    for (int trial = 0; trial < 5; ++trial) {
        AttentionConfig cfg{4, 2, 2};
        AttentionParams p = AttentionParams::init(cfg, rng);
        const int L = 3, C = 2, K = 4;
        auto q = random_feats(L, C, 2, rng);
        auto kv = random_feats(L, K, 2, rng);
        std::vector<Mat> weights(L);
        for (Mat& w : weights) w = random_mat(C, 2, rng);

        AttentionCache cache;
        attention_forward(q, kv, p, &cache);
        AttentionParams grad = AttentionParams::zeros_like(cfg);
        std::vector<Mat> dq, dkv;
        attention_backward(weights, cache, p, grad, &dq, &dkv);

        double worst = 0.0;
        auto probe = [&] { return probe_loss(q, kv, p, weights); };
        auto check_tensor = [&](Mat& param, const Mat& analytic) {
            for (size_t i = 0; i < param.size(); ++i) {
                const double keep = param.a[i];
                param.a[i] = keep + h;
                const double hi = probe();
                param.a[i] = keep - h;
                const double lo = probe();
                param.a[i] = keep;
                worst = std::max(worst, rel_err((hi - lo) / (2 * h), analytic.a[i]));
            }
        };
        auto params = p.tensors();
        auto grads = std::as_const(grad).tensors();
        for (size_t k = 0; k < params.size(); ++k) check_tensor(*params[k], *grads[k]);
        for (int l = 0; l < L; ++l) {
            check_tensor(q[l], dq[l]);
            check_tensor(kv[l], dkv[l]);
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("compensation joins features in both modes") {
    std::mt19937_64 rng(31);
    const int L = 2, C = 3, D = 2;
    std::vector<Mat> input = random_feats(L, C, D, rng);
    CompensatedFeatures feats;
    feats.data = random_feats(L, C, D, rng);

    std::vector<Mat> cat = compensate(input, feats, CompensateMode::concat);
    REQUIRE(cat.size() == size_t(L));
    for (int l = 0; l < L; ++l) {
        CHECK(cat[l].rows == C);
        CHECK(cat[l].cols == 2 * D);
        for (int i = 0; i < C; ++i) {
            for (int d = 0; d < D; ++d) {
                CHECK(cat[l](i, d) == input[l](i, d));  // first half is the input
                CHECK(cat[l](i, D + d) == feats.data[l](i, d));
            }
        }
    }

    CompensatedFeatures zeros;
    zeros.data.assign(L, Mat(C, D));
    std::vector<Mat> added = compensate(input, zeros, CompensateMode::add);
    for (int l = 0; l < L; ++l) {
        CHECK(added[l].cols == D);
        CHECK(added[l].a == input[l].a);  // additive identity
    }

    CompensatedFeatures wrong;
    wrong.data.assign(L, Mat(C + 1, D));
    CHECK_THROWS_AS(compensate(input, wrong, CompensateMode::add), ValidationError);
    wrong.data.assign(L + 1, Mat(C, D));
    CHECK_THROWS_AS(compensate(input, wrong, CompensateMode::concat), ValidationError);
}

TEST_CASE("mode names parse both ways") {
    CHECK(parse_mode("concat") == CompensateMode::concat);
    CHECK(parse_mode("add") == CompensateMode::add);
    CHECK(mode_name(CompensateMode::add) == "add");
    CHECK_THROWS_AS(parse_mode("cat"), ValidationError);
}

TEST_CASE("initialization is deterministic and bounded") {
    AttentionConfig cfg{16, 4, 2};
    std::mt19937_64 r1(42), r2(42);
    AttentionParams a = AttentionParams::init(cfg, r1);
    AttentionParams b = AttentionParams::init(cfg, r2);
    auto ta = std::as_const(a).tensors(), tb = std::as_const(b).tensors();
    REQUIRE(ta.size() == tb.size());
    REQUIRE(ta.size() == size_t(2 + 3 * cfg.n_heads));
    for (size_t i = 0; i < ta.size(); ++i) CHECK(ta[i]->a == tb[i]->a);
    const double bound = std::sqrt(6.0 / (2 + 16));
    CHECK(max_abs(a.w_in) <= bound);
    CHECK(max_abs(a.w_in) > 0.0);
}
