#include "lsar/complexity.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace lsar {

namespace {

__int128 gcd128(__int128 a, __int128 b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
        const __int128 r = a % b;
        a = b;
        b = r;
    }
    return a;
}

}  // namespace

Rational::Rational(__int128 n, __int128 d) : num(n), den(d) {
    if (den == 0) throw std::invalid_argument("zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const __int128 g = gcd128(num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
}

std::string Rational::str() const {
    auto print128 = [](__int128 v) {
        if (v == 0) return std::string("0");
        std::string s;
        const bool neg = v < 0;
        while (v != 0) {
            const int digit = static_cast<int>(neg ? -(v % 10) : (v % 10));
            s += static_cast<char>('0' + digit);
            v /= 10;
        }
        if (neg) s += '-';
        std::reverse(s.begin(), s.end());
        return s;
    };
    if (den == 1) return print128(num);
    return print128(num) + "/" + print128(den);
}

bool perfect_square(int64_t n, int64_t* root) {
    if (n < 0) return false;
    int64_t r = static_cast<int64_t>(std::sqrt(static_cast<double>(n)));
    while (r * r > n) --r;
    while ((r + 1) * (r + 1) <= n) ++r;
    if (root) *root = r;
    return r * r == n;
}

int64_t lformer_mults(int64_t n_tokens, int64_t dim) {
    int64_t root = 0;
    if (dim < 1) throw std::invalid_argument("dim must be >= 1");
    if (n_tokens < 1 || !perfect_square(n_tokens, &root))
        throw std::invalid_argument("token count must be a perfect square");
    __int128 total = 0;
    for (int64_t t = 1; t <= root; ++t)
        total += static_cast<__int128>(2 * t - 1) * t * t * dim;
    return static_cast<int64_t>(total);
}

Rational lformer_closed_form(int64_t n_tokens, int64_t dim) {
    int64_t root = 0;
    if (!perfect_square(n_tokens, &root))
        throw std::invalid_argument("token count must be a perfect square");
    const __int128 n = n_tokens;
    // 1/2 N^2 + 2/3 N^(3/2) - 1/6 sqrt(N), over the common denominator 6
    const __int128 numerator = (3 * n * n + 4 * n * root - root) * dim;
    return Rational(numerator, 6);
}

int64_t bidir_mults(int64_t steps, int64_t n_tokens, int64_t dim) {
    if (steps < 1 || n_tokens < 1 || dim < 1) throw std::invalid_argument("all args must be >= 1");
    return static_cast<int64_t>(static_cast<__int128>(steps) * n_tokens * n_tokens * dim);
}

int64_t ar_cached_mults(int64_t n_tokens, int64_t dim) {
    if (n_tokens < 1 || dim < 1) throw std::invalid_argument("all args must be >= 1");
    return static_cast<int64_t>(static_cast<__int128>(dim) * n_tokens * (n_tokens + 1) / 2);
}

std::vector<OpCountReport> complexity_report(const std::vector<int64_t>& n_values,
                                             const std::vector<int64_t>& d_values) {
    std::vector<OpCountReport> out;
    for (int64_t n : n_values) {
        int64_t root = 0;
        if (!perfect_square(n, &root)) throw std::invalid_argument("N must be a perfect square");
        for (int64_t d : d_values) {
            OpCountReport sar;
            sar.scheme = "sar-cache";
            sar.n_tokens = n;
            sar.dim = d;
            sar.steps = root;
            sar.mults = lformer_mults(n, d);
            sar.closed_form = lformer_closed_form(n, d);
            sar.exact_match = sar.closed_form.is_integer() && sar.closed_form.num == sar.mults;
            out.push_back(sar);

            OpCountReport bidir;
            bidir.scheme = "bidirectional";
            bidir.n_tokens = n;
            bidir.dim = d;
            bidir.steps = root;
            bidir.mults = bidir_mults(root, n, d);
            bidir.closed_form = Rational(bidir.mults, 1);
            bidir.exact_match = true;
            out.push_back(bidir);

            OpCountReport ar;
            ar.scheme = "ar-cache";
            ar.n_tokens = n;
            ar.dim = d;
            ar.steps = n;
            ar.mults = ar_cached_mults(n, d);
            ar.closed_form = Rational(ar.mults, 1);
            ar.exact_match = true;
            out.push_back(ar);
        }
    }
    return out;
}

BenchResult bench_decode(const ModelParams& params, int h, int repeats, const SampleConfig& cfg) {
    if (params.cfg.h != h) throw std::invalid_argument("bench grid side does not match model");
    if (repeats < 1) throw std::invalid_argument("repeats must be >= 1");

    auto median_ms = [&](auto&& fn) {
        std::vector<double> times;
        times.reserve(static_cast<size_t>(repeats));
        for (int i = 0; i < repeats; ++i) {
            const auto start = std::chrono::steady_clock::now();
            fn();
            const auto end = std::chrono::steady_clock::now();
            times.push_back(std::chrono::duration<double, std::milli>(end - start).count());
        }
        std::sort(times.begin(), times.end());
        return times[times.size() / 2];
    };

    BenchResult r;
    r.cached_ms = median_ms([&] { sample(params, 0, cfg); });
    r.uncached_ms = median_ms([&] { sample_without_cache(params, 0, cfg); });
    r.speedup = r.uncached_ms / r.cached_ms;
    return r;
}

}  // namespace lsar
