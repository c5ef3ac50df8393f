#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lsar/sampler.hpp"

namespace lsar {

// Exact fraction over 128-bit integers; enough headroom for the op counts
// handled here (N <= 4096, D <= 1024 stays far below the limit).
struct Rational {
    __int128 num = 0;
    __int128 den = 1;

    Rational() = default;
    Rational(__int128 n, __int128 d);

    bool operator==(const Rational& other) const { return num == other.num && den == other.den; }
    bool is_integer() const { return den == 1; }
    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
    std::string str() const;
};

// true if n is a perfect square; root receives sqrt(n)
bool perfect_square(int64_t n, int64_t* root = nullptr);

// Attention multiplications per scheme, counting only the QK^T and
// attention-times-V products as in the scheme comparison: a cached
// semi-autoregressive pass runs sqrt(N) steps with Q of 2t-1 rows against a
// t^2-row cache.
int64_t lformer_mults(int64_t n_tokens, int64_t dim);
// (1/2 N^2 + 2/3 N^(3/2) - 1/6 sqrt(N)) * D, exact
Rational lformer_closed_form(int64_t n_tokens, int64_t dim);
// bidirectional full-context model: T * N^2 * D
int64_t bidir_mults(int64_t steps, int64_t n_tokens, int64_t dim);
// one-token-per-step cached autoregressive baseline: D * N(N+1)/2
int64_t ar_cached_mults(int64_t n_tokens, int64_t dim);

struct OpCountReport {
    std::string scheme;
    int64_t n_tokens = 0;
    int64_t dim = 0;
    int64_t steps = 0;
    int64_t mults = 0;
    Rational closed_form;
    bool exact_match = false;
};

std::vector<OpCountReport> complexity_report(const std::vector<int64_t>& n_values,
                                             const std::vector<int64_t>& d_values);

struct BenchResult {
    double cached_ms = 0.0;
    double uncached_ms = 0.0;
    double speedup = 0.0;
};

// Median wall-clock of cached vs uncached sampling on the given model.
BenchResult bench_decode(const ModelParams& params, int h, int repeats,
                         const SampleConfig& cfg = {});

}  // namespace lsar
