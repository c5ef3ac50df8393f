#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lsar/autodiff.hpp"

using namespace lsar;

namespace {

// central finite differences of a scalar-valued tape program w.r.t. one param
double fd_grad(Param& p, int idx, const std::function<double()>& eval, double step = 1e-5) {
    double* coeff = p.value.data() + idx;
    const double orig = *coeff;
    *coeff = orig + step;
    const double up = eval();
    *coeff = orig - step;
    const double down = eval();
    *coeff = orig;
    return (up - down) / (2.0 * step);
}

double max_fd_error(Param& p, const std::function<Var(Tape&)>& program, double step = 1e-5) {
    Tape tape;
    p.zero_grad();
    tape.backward(program(tape));
    auto eval = [&]() {
        Tape t2;
        return t2.val(program(t2))(0, 0);
    };
    double worst = 0.0;
    for (int i = 0; i < static_cast<int>(p.value.size()); ++i) {
        const double numeric = fd_grad(p, i, eval, step);
        const double analytic = p.grad.data()[i];
        worst = std::max(worst, std::abs(numeric - analytic) /
                                    std::max(1e-6, std::abs(numeric) + std::abs(analytic)));
    }
    return worst;
}

Param make_param(const char* name, int rows, int cols, uint64_t seed) {
    Rng rng(seed);
    return Param(name, randn(rows, cols, 0.5, rng));
}

}  // namespace

TEST_CASE("linear map gradient is exact up to FD truncation") {
    Param w = make_param("w", 3, 4, 1);
    Rng rng(2);
    const Mat x = randn(2, 3, 1.0, rng);
    const double err = max_fd_error(w, [&](Tape& t) {
        return t.sum(t.matmul(t.constant(x), t.param(w)));
    });
    CHECK(err <= 1e-6);
}

TEST_CASE("elementwise ops") {
    Param w = make_param("w", 2, 3, 3);
    CHECK(max_fd_error(w, [&](Tape& t) {
              Var v = t.param(w);
              return t.sum(t.mul(t.exp(v), t.square(t.scale(v, 0.7))));
          }) <= 1e-6);
}

TEST_CASE("gelu") {
    Param w = make_param("w", 4, 4, 4);
    CHECK(max_fd_error(w, [&](Tape& t) { return t.sum(t.gelu(t.param(w))); }) <= 1e-6);
}

TEST_CASE("add_row broadcast") {
    Param b = make_param("b", 1, 5, 5);
    Rng rng(6);
    const Mat x = randn(3, 5, 1.0, rng);
    CHECK(max_fd_error(b, [&](Tape& t) {
              return t.sum(t.square(t.add_row(t.constant(x), t.param(b))));
          }) <= 1e-6);
}

TEST_CASE("matmul_nt and slicing") {
    Param w = make_param("w", 4, 6, 7);
    Rng rng(8);
    const Mat x = randn(3, 6, 1.0, rng);
    CHECK(max_fd_error(w, [&](Tape& t) {
              Var v = t.param(w);
              Var prod = t.matmul_nt(t.constant(x), v);  // 3 x 4
              Var left = t.slice_cols(prod, 0, 2);
              Var right = t.slice_cols(prod, 2, 2);
              return t.sum(t.mul(left, right));
          }) <= 1e-6);
}

TEST_CASE("concat and slice rows") {
    Param w = make_param("w", 2, 3, 9);
    CHECK(max_fd_error(w, [&](Tape& t) {
              Var v = t.param(w);
              Var cat = t.concat_rows({v, t.square(v), v});
              return t.sum(t.square(t.slice_rows(cat, 1, 4)));
          }) <= 1e-6);
}

TEST_CASE("gather accumulates repeated rows") {
    Param table = make_param("emb", 5, 3, 10);
    CHECK(max_fd_error(table, [&](Tape& t) {
              Var rows = t.gather_rows(t.param(table), {0, 2, 2, 4, 0});
              return t.sum(t.square(rows));
          }) <= 1e-6);
}

TEST_CASE("mean_rows") {
    Param w = make_param("w", 6, 4, 11);
    CHECK(max_fd_error(w, [&](Tape& t) {
              return t.sum(t.square(t.mean_rows(t.param(w))));
          }) <= 1e-6);
}

TEST_CASE("masked softmax") {
    Param w = make_param("w", 3, 4, 12);
    Rng rng(21);
    const Mat weights = randn(3, 4, 1.0, rng);
    std::vector<std::vector<uint8_t>> allow = {
        {1, 0, 0, 0}, {1, 1, 1, 0}, {1, 1, 1, 1}};
    CHECK(max_fd_error(w, [&](Tape& t) {
              Var a = t.masked_softmax(t.param(w), allow);
              return t.sum(t.mul(a, t.constant(weights)));
          }) <= 1e-6);
}

TEST_CASE("masked probabilities are exactly zero and rows sum to one") {
    Tape t;
    Rng rng(13);
    Var s = t.constant(randn(3, 5, 2.0, rng));
    std::vector<std::vector<uint8_t>> allow = {
        {1, 1, 0, 0, 0}, {0, 1, 1, 1, 0}, {1, 1, 1, 1, 1}};
    const Mat p = t.val(t.masked_softmax(s, allow));
    for (int r = 0; r < 3; ++r) {
        double sum = 0.0;
        for (int k = 0; k < 5; ++k) {
            if (!allow[static_cast<size_t>(r)][static_cast<size_t>(k)]) CHECK(p(r, k) == 0.0);
            sum += p(r, k);
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("fully masked row rejected") {
    Tape t;
    Var s = t.constant(Mat::Zero(1, 3));
    std::vector<std::vector<uint8_t>> allow = {{0, 0, 0}};
    CHECK_THROWS_AS(t.masked_softmax(s, allow), std::invalid_argument);
}

TEST_CASE("layernorm gradient w.r.t. input, gain and bias") {
    Rng rng(14);
    const Mat x0 = randn(4, 6, 1.0, rng);
    Param x("x", x0);
    Param g("g", Mat::Ones(1, 6) + randn(1, 6, 0.1, rng));
    Param b("b", randn(1, 6, 0.3, rng));
    auto program = [&](Tape& t) {
        Var y = t.layernorm(t.param(x), t.param(g), t.param(b));
        return t.sum(t.mul(y, t.square(y)));
    };
    CHECK(max_fd_error(x, program) <= 1e-6);
    CHECK(max_fd_error(g, program) <= 1e-6);
    CHECK(max_fd_error(b, program) <= 1e-6);
}

TEST_CASE("cross entropy value and gradient") {
    Tape t;
    Var logits = t.constant(Mat::Zero(2, 4));  // uniform over 4
    Var ce = t.cross_entropy_mean(logits, {1, 3});
    CHECK(t.val(ce)(0, 0) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    Param w = make_param("w", 3, 4, 15);
    CHECK(max_fd_error(w, [&](Tape& tp) {
              return tp.cross_entropy_mean(tp.param(w), {0, 2, 1});
          }) <= 1e-6);
}

TEST_CASE("gradients accumulate across reuse of a node") {
    Param w = make_param("w", 2, 2, 16);
    CHECK(max_fd_error(w, [&](Tape& t) {
              Var v = t.param(w);
              Var twice = t.add(v, v);        // fan-out
              return t.sum(t.mul(twice, v));  // and reuse again
          }) <= 1e-6);
}
