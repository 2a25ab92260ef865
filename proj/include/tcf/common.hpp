#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tcf {

// Base error; subcommands map ValidationError to exit code 1, the rest to 2.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad configuration, malformed input data, violated preconditions.
struct ValidationError : Error {
    using Error::Error;
};

// Parse failure carrying the offending row of a text input.
struct ParseError : ValidationError {
    ParseError(const std::string& msg, size_t row)
        : ValidationError(msg + " (row " + std::to_string(row) + ")"), row(row) {}
    size_t row;
};

// I/O and file-format failures (truncation, bad magic, version mismatch).
struct IoError : Error {
    using Error::Error;
};

// API misuse, e.g. backward called before forward.
struct StateError : Error {
    using Error::Error;
};

// Dense row-major matrix of doubles. All model parameters and gradients
// use this type so they can be enumerated uniformly by the optimizer.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    double& operator()(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
    size_t size() const { return a.size(); }
    void zero() { std::fill(a.begin(), a.end(), 0.0); }
};

using Vec = std::vector<double>;

// splitmix64; used to derive independent stream seeds from one base seed.
inline uint64_t mix_seed(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t mix_seed(uint64_t a, uint64_t b) { return mix_seed(a ^ mix_seed(b)); }
inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c) {
    return mix_seed(mix_seed(a, b), c);
}

// Glorot-uniform fill: bound sqrt(6 / (fan_in + fan_out)).
inline void xavier_fill(Mat& m, int fan_in, int fan_out, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& x : m.a) x = dist(rng);
}

namespace detail {
inline void check_dims(int a, int b, const char* what) {
    if (a != b) throw ValidationError(std::string("matmul shape mismatch (") + what + ")");
}
}  // namespace detail

// out (+)= a * b^T
inline void gemm_nt(const Mat& a, const Mat& b, Mat& out, bool accumulate = false) {
    detail::check_dims(a.cols, b.cols, "nt");
    if (out.rows != a.rows || out.cols != b.rows) out = Mat(a.rows, b.rows);
    if (!accumulate) out.zero();
    for (int i = 0; i < a.rows; ++i) {
        for (int j = 0; j < b.rows; ++j) {
            double s = 0.0;
            for (int k = 0; k < a.cols; ++k) s += a(i, k) * b(j, k);
            out(i, j) += s;
        }
    }
}

// out (+)= a * b
inline void gemm_nn(const Mat& a, const Mat& b, Mat& out, bool accumulate = false) {
    detail::check_dims(a.cols, b.rows, "nn");
    if (out.rows != a.rows || out.cols != b.cols) out = Mat(a.rows, b.cols);
    if (!accumulate) out.zero();
    for (int i = 0; i < a.rows; ++i) {
        for (int k = 0; k < a.cols; ++k) {
            const double v = a(i, k);
            if (v == 0.0) continue;
            for (int j = 0; j < b.cols; ++j) out(i, j) += v * b(k, j);
        }
    }
}

// out (+)= a^T * b
inline void gemm_tn(const Mat& a, const Mat& b, Mat& out, bool accumulate = false) {
    detail::check_dims(a.rows, b.rows, "tn");
    if (out.rows != a.cols || out.cols != b.cols) out = Mat(a.cols, b.cols);
    if (!accumulate) out.zero();
    for (int k = 0; k < a.rows; ++k) {
        for (int i = 0; i < a.cols; ++i) {
            const double v = a(k, i);
            if (v == 0.0) continue;
            for (int j = 0; j < b.cols; ++j) out(i, j) += v * b(k, j);
        }
    }
}

// In-place softmax over one score row. Shift-invariant by construction.
inline void softmax_row(std::span<double> row) {
    double hi = row[0];
    for (double v : row) hi = std::max(hi, v);
    double sum = 0.0;
    for (double& v : row) {
        v = std::exp(v - hi);
        sum += v;
    }
    for (double& v : row) v /= sum;
}

}  // namespace tcf
