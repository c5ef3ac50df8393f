#include <cmath>
#include <limits>
#include <stdexcept>

#include "lsar/net.hpp"

namespace lsar {

namespace {

Mat layernorm_value(const Mat& x, const Param& gamma, const Param& beta, double eps = 1e-5) {
    Mat y(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mean = x.row(r).mean();
        const double var = (x.row(r).array() - mean).square().mean();
        const double inv = 1.0 / std::sqrt(var + eps);
        y.row(r) = ((x.row(r).array() - mean) * inv * gamma.value.row(0).array()).matrix() +
                   beta.value.row(0);
    }
    return y;
}

Mat linear_value(const Mat& x, const Param& w, const Param& b) {
    Mat y = x * w.value;
    y.rowwise() += RowVec(b.value.row(0));
    return y;
}

// same arithmetic path as Tape::masked_softmax: masked keys never enter
Mat masked_softmax_value(const Mat& s, const std::vector<std::vector<uint8_t>>& allow) {
    Mat p = Mat::Zero(s.rows(), s.cols());
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
        const auto& row_allow = allow[static_cast<size_t>(r)];
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < s.cols(); ++k)
            if (row_allow[static_cast<size_t>(k)] && s(r, k) > mx) mx = s(r, k);
        if (!std::isfinite(mx)) throw std::invalid_argument("masked_softmax: fully masked row");
        double denom = 0.0;
        for (Eigen::Index k = 0; k < s.cols(); ++k) {
            if (!row_allow[static_cast<size_t>(k)]) continue;
            const double e = std::exp(s(r, k) - mx);
            p(r, k) = e;
            denom += e;
        }
        for (Eigen::Index k = 0; k < s.cols(); ++k)
            if (row_allow[static_cast<size_t>(k)]) p(r, k) /= denom;
    }
    return p;
}

Mat softmax_value(const Mat& s) {
    std::vector<std::vector<uint8_t>> allow(static_cast<size_t>(s.rows()),
                                            std::vector<uint8_t>(static_cast<size_t>(s.cols()), 1));
    return masked_softmax_value(s, allow);
}

Mat mha_value(const Mat& q, const Mat& k, const Mat& v, int heads,
              const std::vector<std::vector<uint8_t>>* allow) {
    const int dh = static_cast<int>(q.cols()) / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    Mat out(q.rows(), q.cols());
    for (int h = 0; h < heads; ++h) {
        const Mat s = q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose() * inv_sqrt;
        const Mat a = allow ? masked_softmax_value(s, *allow) : softmax_value(s);
        out.middleCols(h * dh, dh) = a * v.middleCols(h * dh, dh);
    }
    return out;
}

// Runs new rows through every block, appending their self-attention k/v to
// the stream. allow has one row per new position over (cached + new) keys.
Mat run_trunk(const ModelParams& params, DecodeStream& stream, Mat x,
              const std::vector<std::vector<uint8_t>>& allow) {
    const ModelConfig& cfg = params.cfg;
    const Eigen::Index m = x.rows();
    for (size_t l = 0; l < params.blocks.size(); ++l) {
        const auto& blk = params.blocks[l];
        const Mat xn = layernorm_value(x, blk.ln1_g, blk.ln1_b);
        const Mat q = linear_value(xn, blk.wq, blk.bq);
        const Mat k_new = linear_value(xn, blk.wk, blk.bk);
        const Mat v_new = linear_value(xn, blk.wv, blk.bv);

        Mat k_all(stream.cached_len + m, cfg.dim);
        Mat v_all(stream.cached_len + m, cfg.dim);
        if (stream.cached_len > 0) {
            k_all.topRows(stream.cached_len) = stream.self_k[l];
            v_all.topRows(stream.cached_len) = stream.self_v[l];
        }
        k_all.bottomRows(m) = k_new;
        v_all.bottomRows(m) = v_new;

        x += linear_value(mha_value(q, k_all, v_all, cfg.heads, &allow), blk.wo, blk.bo);

        const Mat xc = layernorm_value(x, blk.ln2_g, blk.ln2_b);
        const Mat cq = linear_value(xc, blk.cwq, blk.cbq);
        x += linear_value(mha_value(cq, stream.cross_k[l], stream.cross_v[l], cfg.heads, nullptr),
                          blk.cwo, blk.cbo);

        const Mat xf = layernorm_value(x, blk.ln3_g, blk.ln3_b);
        const Mat hidden = linear_value(xf, blk.w1, blk.b1).unaryExpr([](double t) { return gelu_scalar(t); });
        x += linear_value(hidden, blk.w2, blk.b2);

        stream.self_k[l].conservativeResize(stream.cached_len + m, cfg.dim);
        stream.self_v[l].conservativeResize(stream.cached_len + m, cfg.dim);
        stream.self_k[l].bottomRows(m) = k_new;
        stream.self_v[l].bottomRows(m) = v_new;
    }
    stream.cached_len += static_cast<int>(m);
    return x;
}

Mat head_logits(const ModelParams& params, const Mat& x_rows) {
    return linear_value(layernorm_value(x_rows, params.lnf_g, params.lnf_b), params.head_w,
                        params.head_b);
}

Mat cond_sequence(const ModelParams& params, int class_id) {
    Mat seq(params.cfg.n_cond, params.cfg.dim);
    for (int i = 0; i < params.cfg.n_cond; ++i)
        seq.row(i) = params.cond_emb.value.row(class_id * params.cfg.n_cond + i);
    return seq;
}

Mat embed_inputs(const ModelParams& params, std::span<const StepInput> inputs) {
    Mat x(static_cast<Eigen::Index>(inputs.size()), params.cfg.dim);
    for (size_t i = 0; i < inputs.size(); ++i) {
        const StepInput& in = inputs[i];
        const int id = in.kind == StepInput::Kind::Pad ? params.pad_id() : in.token_id;
        x.row(static_cast<Eigen::Index>(i)) = params.tok_emb.value.row(id) +
                                              params.row_pos.value.row(in.cell_row - 1) +
                                              params.col_pos.value.row(in.cell_col - 1);
    }
    return x;
}

}  // namespace

RowVec prior_mu_for_class(const ModelParams& params, int class_id) {
    const Mat pooled = cond_sequence(params, class_id).colwise().sum() /
                       static_cast<double>(params.cfg.n_cond);
    return linear_value(pooled, params.prior_w, params.prior_b).row(0);
}

RowVec map_latent(const ModelParams& params, const RowVec& z) {
    const Mat hidden =
        linear_value(Mat(z), params.map_w1, params.map_b1).unaryExpr([](double t) { return gelu_scalar(t); });
    return linear_value(hidden, params.map_w2, params.map_b2).row(0);
}

Mat decode_prefix(const ModelParams& params, DecodeStream& stream, int class_id, const RowVec& z) {
    const ModelConfig& cfg = params.cfg;
    if (stream.cached_len != 0) throw std::invalid_argument("decode_prefix: stream already started");
    stream.self_k.assign(static_cast<size_t>(cfg.layers), Mat(0, cfg.dim));
    stream.self_v.assign(static_cast<size_t>(cfg.layers), Mat(0, cfg.dim));
    stream.cross_k.resize(static_cast<size_t>(cfg.layers));
    stream.cross_v.resize(static_cast<size_t>(cfg.layers));

    const Mat cond_seq = cond_sequence(params, class_id);
    for (int l = 0; l < cfg.layers; ++l) {
        const auto& blk = params.blocks[static_cast<size_t>(l)];
        stream.cross_k[static_cast<size_t>(l)] = linear_value(cond_seq, blk.cwk, blk.cbk);
        stream.cross_v[static_cast<size_t>(l)] = linear_value(cond_seq, blk.cwv, blk.cbv);
    }

    const int nc = cfg.cond_positions();  // class sequence + f(z)
    Mat x(nc + 1, cfg.dim);
    x.topRows(cfg.n_cond) = cond_seq;
    x.row(cfg.n_cond) = map_latent(params, z);
    x.row(nc) = params.tok_emb.value.row(params.bos_id()) + params.row_pos.value.row(0) +
                params.col_pos.value.row(0);

    // condition slots see each other; BOS sees the whole prefix
    std::vector<std::vector<uint8_t>> allow(static_cast<size_t>(nc + 1),
                                            std::vector<uint8_t>(static_cast<size_t>(nc + 1), 0));
    for (int q = 0; q < nc; ++q)
        for (int k = 0; k < nc; ++k) allow[static_cast<size_t>(q)][static_cast<size_t>(k)] = 1;
    for (int k = 0; k <= nc; ++k) allow[static_cast<size_t>(nc)][static_cast<size_t>(k)] = 1;

    const Mat out = run_trunk(params, stream, std::move(x), allow);
    return head_logits(params, out.bottomRows(1));
}

Mat decode_step(const ModelParams& params, DecodeStream& stream, std::span<const StepInput> inputs) {
    if (stream.cached_len < params.cfg.cond_positions() + 1)
        throw std::invalid_argument("decode_step: prefix not fed yet");
    const Eigen::Index m = static_cast<Eigen::Index>(inputs.size());
    std::vector<std::vector<uint8_t>> allow(
        static_cast<size_t>(m),
        std::vector<uint8_t>(static_cast<size_t>(stream.cached_len + m), 1));
    const Mat out = run_trunk(params, stream, embed_inputs(params, inputs), allow);
    return head_logits(params, out);
}

std::vector<StepInput> padded_block_inputs(const ModelParams& params, const LOrderLayout& layout,
                                           const TokenGrid& grid, int t) {
    if (t < 2 || t > params.cfg.h) throw std::invalid_argument("padded block exists for steps 2..h");
    const int n = 2 * t - 1;
    std::vector<StepInput> inputs(static_cast<size_t>(n));
    const int prev_lo = (t - 2) * (t - 2) + 1;  // ranks of block t-1
    const int target_lo = (t - 1) * (t - 1) + 1;
    for (int i = 0; i < n; ++i) {
        StepInput& in = inputs[static_cast<size_t>(i)];
        if (i == 0 || i == n - 1) {
            in.kind = StepInput::Kind::Pad;
        } else {
            in.kind = StepInput::Kind::Token;
            const Cell c = layout.cell_of_rank(prev_lo + i - 1);
            in.token_id = grid.at(c.row - 1, c.col - 1);
            if (in.token_id < 0) throw std::invalid_argument("padded block source cell is empty");
        }
        const Cell target = layout.cell_of_rank(target_lo + i);
        in.cell_row = target.row;
        in.cell_col = target.col;
    }
    return inputs;
}

Mat forward_logits_uncached(const ModelParams& params, const TokenGrid& grid, int class_id,
                            const RowVec& z, int step_t) {
    const ModelConfig& cfg = params.cfg;
    const LOrderLayout lorder = build_layout(GridShape{cfg.h});
    const PaddedLayout layout = build_padded_layout(GridShape{cfg.h}, cfg.cond_positions());
    const AttentionMask mask = build_block_causal_mask(layout);

    // rows through padded block step_t - 1
    const int rows = step_t == 1 ? cfg.cond_positions() + 1
                                 : layout.padded_block_begin(step_t - 1) + 2 * step_t - 1;

    DecodeStream fresh;
    fresh.self_k.assign(static_cast<size_t>(cfg.layers), Mat(0, cfg.dim));
    fresh.self_v.assign(static_cast<size_t>(cfg.layers), Mat(0, cfg.dim));
    fresh.cross_k.resize(static_cast<size_t>(cfg.layers));
    fresh.cross_v.resize(static_cast<size_t>(cfg.layers));
    const Mat cond_seq = cond_sequence(params, class_id);
    for (int l = 0; l < cfg.layers; ++l) {
        const auto& blk = params.blocks[static_cast<size_t>(l)];
        fresh.cross_k[static_cast<size_t>(l)] = linear_value(cond_seq, blk.cwk, blk.cbk);
        fresh.cross_v[static_cast<size_t>(l)] = linear_value(cond_seq, blk.cwv, blk.cbv);
    }

    Mat x(rows, cfg.dim);
    x.topRows(cfg.n_cond) = cond_seq;
    x.row(cfg.n_cond) = map_latent(params, z);
    for (int pos = cfg.cond_positions(); pos < rows; ++pos) {
        const PositionDesc& d = layout.positions[static_cast<size_t>(pos)];
        int id = params.pad_id();
        if (d.kind == PositionDesc::Kind::Bos) {
            id = params.bos_id();
        } else if (d.kind == PositionDesc::Kind::Token) {
            const Cell c = lorder.cell_of_rank(d.value);
            id = grid.at(c.row - 1, c.col - 1);
            if (id < 0) throw std::invalid_argument("uncached forward: required cell is empty");
        }
        const Cell target = lorder.cell_of_rank(layout.predict_target[static_cast<size_t>(pos)]);
        x.row(pos) = params.tok_emb.value.row(id) + params.row_pos.value.row(target.row - 1) +
                     params.col_pos.value.row(target.col - 1);
    }

    std::vector<std::vector<uint8_t>> allow(static_cast<size_t>(rows),
                                            std::vector<uint8_t>(static_cast<size_t>(rows), 0));
    for (int q = 0; q < rows; ++q)
        for (int k = 0; k < rows; ++k)
            allow[static_cast<size_t>(q)][static_cast<size_t>(k)] = mask.at(q, k) ? 1 : 0;

    const Mat out = run_trunk(params, fresh, std::move(x), allow);
    const int take = step_t == 1 ? 1 : 2 * step_t - 1;
    return head_logits(params, out.bottomRows(take));
}

}  // namespace lsar
