#pragma once

#include <functional>
#include <vector>

#include "lsar/alignment.hpp"
#include "lsar/tensor.hpp"

namespace lsar {

// Reverse-mode tape over Mat values. One Tape per forward pass; nodes are
// appended in evaluation order, so walking the tape backwards is already a
// topological order. backward() seeds a 1x1 loss node and accumulates leaf
// gradients into the bound Param::grad buffers.
class Tape {
  public:
    struct Var {
        int i = -1;
        bool valid() const { return i >= 0; }
    };

    Var constant(Mat v);
    Var param(Param& p);

    const Mat& val(Var v) const { return nodes_[v.i].val; }
    Mat& grad(Var v) { return nodes_[v.i].grad; }

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);  // elementwise
    Var scale(Var a, double c);
    Var exp(Var a);
    Var square(Var a);
    Var gelu(Var a);
    Var matmul(Var a, Var b);
    Var matmul_nt(Var a, Var b);       // a * b^T
    Var add_row(Var a, Var row);       // broadcast a 1xC row over all rows of a
    Var concat_rows(const std::vector<Var>& parts);
    Var concat_cols(const std::vector<Var>& parts);
    Var slice_rows(Var a, int start, int count);
    Var slice_cols(Var a, int start, int count);
    Var gather_rows(Var table, std::vector<int> idx);
    Var mean_rows(Var a);  // 1xC
    Var sum(Var a);        // 1x1

    // Row-wise softmax with -inf masking of disallowed keys. allow has one
    // row per score row; masked entries get probability exactly 0.
    Var masked_softmax(Var scores, std::vector<std::vector<uint8_t>> allow);
    Var softmax_rows(Var scores);

    // Per-row layer norm with learned gain/bias (1xC each).
    Var layernorm(Var x, Var gamma, Var beta, double eps = 1e-5);

    // Mean over rows of -log softmax(logits)[target]. 1x1 output.
    Var cross_entropy_mean(Var logits, std::vector<int> targets);

    void backward(Var loss);

  private:
    struct Node {
        Mat val;
        Mat grad;
        std::function<void(Tape&)> back;  // empty for leaves
        Param* bound = nullptr;
    };

    Var push(Mat val, std::function<void(Tape&)> back = {}, Param* bound = nullptr);

    std::vector<Node> nodes_;
};

using Var = Tape::Var;

}  // namespace lsar
