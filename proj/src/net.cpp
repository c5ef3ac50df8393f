#include "lsar/net.hpp"

#include <cmath>
#include <stdexcept>

namespace lsar {

void ModelConfig::validate() const {
    if (h < 1) throw std::invalid_argument("h must be >= 1");
    if (codebook < 2) throw std::invalid_argument("codebook must be >= 2");
    if (n_classes < 1) throw std::invalid_argument("n_classes must be >= 1");
    if (layers < 1) throw std::invalid_argument("layers must be >= 1");
    if (heads < 1 || dim < 1 || dim % heads != 0)
        throw std::invalid_argument("dim must be a positive multiple of heads");
    if (latent_dim < 1) throw std::invalid_argument("latent_dim must be >= 1");
    if (n_cond < 1) throw std::invalid_argument("n_cond must be >= 1");
    if (cond_dropout < 0.0 || cond_dropout >= 1.0)
        throw std::invalid_argument("cond_dropout must be in [0,1)");
    if (kl_weight < 0.0) throw std::invalid_argument("kl_weight must be >= 0");
}

ModelParams init_params(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    const int D = cfg.dim;
    const double s = 0.02;
    auto w = [&](int r, int c) { return randn(r, c, s, rng); };
    auto zeros = [&](int r, int c) { return Mat::Zero(r, c); };
    auto ones = [&](int c) { return Mat::Ones(1, c); };

    ModelParams p;
    p.cfg = cfg;
    p.tok_emb = Param("tok_emb", w(cfg.codebook + 2, D));
    p.row_pos = Param("row_pos", w(cfg.h, D));
    p.col_pos = Param("col_pos", w(cfg.h, D));
    p.cond_emb = Param("cond_emb", w((cfg.n_classes + 1) * cfg.n_cond, D));

    p.blocks.resize(static_cast<size_t>(cfg.layers));
    for (int l = 0; l < cfg.layers; ++l) {
        auto& b = p.blocks[static_cast<size_t>(l)];
        const std::string pre = "blocks." + std::to_string(l) + ".";
        b.ln1_g = Param(pre + "ln1_g", ones(D));
        b.ln1_b = Param(pre + "ln1_b", zeros(1, D));
        b.wq = Param(pre + "wq", w(D, D));
        b.wk = Param(pre + "wk", w(D, D));
        b.wv = Param(pre + "wv", w(D, D));
        b.wo = Param(pre + "wo", w(D, D));
        b.bq = Param(pre + "bq", zeros(1, D));
        b.bk = Param(pre + "bk", zeros(1, D));
        b.bv = Param(pre + "bv", zeros(1, D));
        b.bo = Param(pre + "bo", zeros(1, D));
        b.ln2_g = Param(pre + "ln2_g", ones(D));
        b.ln2_b = Param(pre + "ln2_b", zeros(1, D));
        b.cwq = Param(pre + "cwq", w(D, D));
        b.cwk = Param(pre + "cwk", w(D, D));
        b.cwv = Param(pre + "cwv", w(D, D));
        b.cwo = Param(pre + "cwo", w(D, D));
        b.cbq = Param(pre + "cbq", zeros(1, D));
        b.cbk = Param(pre + "cbk", zeros(1, D));
        b.cbv = Param(pre + "cbv", zeros(1, D));
        b.cbo = Param(pre + "cbo", zeros(1, D));
        b.ln3_g = Param(pre + "ln3_g", ones(D));
        b.ln3_b = Param(pre + "ln3_b", zeros(1, D));
        b.w1 = Param(pre + "w1", w(D, 4 * D));
        b.b1 = Param(pre + "b1", zeros(1, 4 * D));
        b.w2 = Param(pre + "w2", w(4 * D, D));
        b.b2 = Param(pre + "b2", zeros(1, D));
    }

    p.lnf_g = Param("lnf_g", ones(D));
    p.lnf_b = Param("lnf_b", zeros(1, D));
    p.head_w = Param("head_w", w(D, cfg.codebook));
    p.head_b = Param("head_b", zeros(1, cfg.codebook));

    p.enc_w1 = Param("enc_w1", w(D, D));
    p.enc_b1 = Param("enc_b1", zeros(1, D));
    p.enc_w2 = Param("enc_w2", w(D, 2 * cfg.latent_dim));
    p.enc_b2 = Param("enc_b2", zeros(1, 2 * cfg.latent_dim));
    p.prior_w = Param("prior_w", w(D, cfg.latent_dim));
    p.prior_b = Param("prior_b", zeros(1, cfg.latent_dim));
    p.map_w1 = Param("map_w1", w(cfg.latent_dim, D));
    p.map_b1 = Param("map_b1", zeros(1, D));
    p.map_w2 = Param("map_w2", w(D, D));
    p.map_b2 = Param("map_b2", zeros(1, D));
    return p;
}

std::vector<Param*> ModelParams::all() {
    std::vector<Param*> out{&tok_emb, &row_pos, &col_pos, &cond_emb};
    for (auto& b : blocks) {
        for (Param* p : {&b.ln1_g, &b.ln1_b, &b.wq, &b.wk, &b.wv, &b.wo, &b.bq, &b.bk, &b.bv,
                         &b.bo, &b.ln2_g, &b.ln2_b, &b.cwq, &b.cwk, &b.cwv, &b.cwo, &b.cbq,
                         &b.cbk, &b.cbv, &b.cbo, &b.ln3_g, &b.ln3_b, &b.w1, &b.b1, &b.w2, &b.b2})
            out.push_back(p);
    }
    for (Param* p : {&lnf_g, &lnf_b, &head_w, &head_b, &enc_w1, &enc_b1, &enc_w2, &enc_b2,
                     &prior_w, &prior_b, &map_w1, &map_b1, &map_w2, &map_b2})
        out.push_back(p);
    return out;
}

std::vector<const Param*> ModelParams::all() const {
    auto mut = const_cast<ModelParams*>(this)->all();
    return {mut.begin(), mut.end()};
}

double kl_divergence(const GaussianLatent& posterior, const RowVec& prior_mu) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < posterior.mu.size(); ++i) {
        const double ls = posterior.log_sigma(i);
        const double dmu = posterior.mu(i) - prior_mu(i);
        acc += std::exp(2.0 * ls) + dmu * dmu - 1.0 - 2.0 * ls;
    }
    return 0.5 * acc;
}

double loss_value(const Mat& logits, const std::vector<int>& targets, double kl, double beta) {
    if (static_cast<Eigen::Index>(targets.size()) != logits.rows())
        throw std::invalid_argument("loss: one target per logit row required");
    double total = 0.0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double mx = logits.row(r).maxCoeff();
        const double denom = (logits.row(r).array() - mx).exp().sum();
        total += -(logits(r, targets[static_cast<size_t>(r)]) - mx - std::log(denom));
    }
    return total / static_cast<double>(logits.rows()) + beta * kl;
}

namespace {

std::vector<std::vector<uint8_t>> mask_rows(const AttentionMask& m) {
    std::vector<std::vector<uint8_t>> rows(static_cast<size_t>(m.n));
    for (int q = 0; q < m.n; ++q) {
        rows[static_cast<size_t>(q)].resize(static_cast<size_t>(m.n));
        for (int k = 0; k < m.n; ++k) rows[static_cast<size_t>(q)][static_cast<size_t>(k)] = m.at(q, k) ? 1 : 0;
    }
    return rows;
}

Var linear(Tape& tp, Var x, Param& w, Param& b) {
    return tp.add_row(tp.matmul(x, tp.param(w)), tp.param(b));
}

// multi-head attention over tape vars; empty allow means full visibility
Var attention(Tape& tp, Var q, Var k, Var v, int heads,
              const std::vector<std::vector<uint8_t>>* allow) {
    const int dh = static_cast<int>(tp.val(q).cols()) / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Var> outs;
    outs.reserve(static_cast<size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        Var qh = tp.slice_cols(q, h * dh, dh);
        Var kh = tp.slice_cols(k, h * dh, dh);
        Var vh = tp.slice_cols(v, h * dh, dh);
        Var s = tp.scale(tp.matmul_nt(qh, kh), inv_sqrt);
        Var a = allow ? tp.masked_softmax(s, *allow) : tp.softmax_rows(s);
        outs.push_back(tp.matmul(a, vh));
    }
    return tp.concat_cols(outs);
}

}  // namespace

TrainForward forward_train(ModelParams& params, const TokenGrid& grid, int class_id, Rng& rng,
                           const ForwardOptions& opt) {
    const ModelConfig& cfg = params.cfg;
    if (grid.shape.h != cfg.h) throw std::invalid_argument("grid side does not match model");
    for (int t : grid.tokens)
        if (t < 0 || t >= cfg.codebook) throw std::invalid_argument("token id outside codebook");
    if (class_id < 0 || class_id > cfg.null_class())
        throw std::invalid_argument("class id outside condition vocabulary");

    TrainForward out;
    Tape& tp = out.tape;

    out.used_class = class_id;
    if (!opt.disable_cond_dropout && cfg.cond_dropout > 0.0 && rng.bernoulli(cfg.cond_dropout))
        out.used_class = cfg.null_class();

    const LOrderLayout lorder = build_layout(grid.shape);
    const PaddedLayout layout = build_padded_layout(grid.shape, cfg.cond_positions());
    const auto allow = mask_rows(build_block_causal_mask(layout));

    Var tok_emb = tp.param(params.tok_emb);

    // condition sequence (cross-attention keys and prefix rows)
    std::vector<int> cond_idx(static_cast<size_t>(cfg.n_cond));
    for (int i = 0; i < cfg.n_cond; ++i) cond_idx[static_cast<size_t>(i)] = out.used_class * cfg.n_cond + i;
    Var cond_seq = tp.gather_rows(tp.param(params.cond_emb), cond_idx);

    // posterior over the full grid
    std::vector<int> all_tokens(grid.tokens.begin(), grid.tokens.end());
    Var pooled = tp.mean_rows(tp.gather_rows(tok_emb, all_tokens));
    Var enc_h = tp.gelu(linear(tp, pooled, params.enc_w1, params.enc_b1));
    Var stats = linear(tp, enc_h, params.enc_w2, params.enc_b2);
    Var mu_i = tp.slice_cols(stats, 0, cfg.latent_dim);
    Var log_sigma = tp.slice_cols(stats, cfg.latent_dim, cfg.latent_dim);

    // prior from the pooled condition
    Var mu_t = linear(tp, tp.mean_rows(cond_seq), params.prior_w, params.prior_b);

    // latent
    Var z;
    if (opt.fixed_z) {
        z = tp.constant(Mat(*opt.fixed_z));
    } else {
        RowVec eps(cfg.latent_dim);
        if (opt.fixed_eps) {
            eps = *opt.fixed_eps;
        } else {
            for (int i = 0; i < cfg.latent_dim; ++i) eps(i) = rng.normal();
        }
        z = tp.add(mu_i, tp.mul(tp.exp(log_sigma), tp.constant(Mat(eps))));
    }

    // kl = 0.5 * sum(sigma^2 + (mu_i - mu_t)^2 - 1 - 2 log_sigma)
    Var two_ls = tp.scale(log_sigma, 2.0);
    Var inner = tp.sub(tp.add(tp.exp(two_ls), tp.square(tp.sub(mu_i, mu_t))),
                       tp.add(tp.constant(Mat::Ones(1, cfg.latent_dim)), two_ls));
    out.kl = tp.scale(tp.sum(inner), 0.5);

    // f(z)
    Var fz = linear(tp, tp.gelu(linear(tp, z, params.map_w1, params.map_b1)), params.map_w2,
                    params.map_b2);

    // trunk inputs: token/BOS/PAD embeddings plus the predicted cell's position
    std::vector<int> ids, rows, cols;
    for (int pos = cfg.cond_positions(); pos < layout.length(); ++pos) {
        const PositionDesc& d = layout.positions[static_cast<size_t>(pos)];
        switch (d.kind) {
            case PositionDesc::Kind::Bos: ids.push_back(params.bos_id()); break;
            case PositionDesc::Kind::Pad: ids.push_back(params.pad_id()); break;
            case PositionDesc::Kind::Token: {
                const Cell c = lorder.cell_of_rank(d.value);
                ids.push_back(grid.at(c.row - 1, c.col - 1));
                break;
            }
            default: throw std::logic_error("unexpected cond position");
        }
        const Cell target = lorder.cell_of_rank(layout.predict_target[static_cast<size_t>(pos)]);
        rows.push_back(target.row - 1);
        cols.push_back(target.col - 1);
    }
    Var x_tokens = tp.add(tp.add(tp.gather_rows(tok_emb, ids), tp.gather_rows(tp.param(params.row_pos), rows)),
                          tp.gather_rows(tp.param(params.col_pos), cols));
    Var x = tp.concat_rows({cond_seq, fz, x_tokens});

    for (auto& blk : params.blocks) {
        Var xn = tp.layernorm(x, tp.param(blk.ln1_g), tp.param(blk.ln1_b));
        Var attn = attention(tp, linear(tp, xn, blk.wq, blk.bq), linear(tp, xn, blk.wk, blk.bk),
                             linear(tp, xn, blk.wv, blk.bv), cfg.heads, &allow);
        x = tp.add(x, linear(tp, attn, blk.wo, blk.bo));

        Var xc = tp.layernorm(x, tp.param(blk.ln2_g), tp.param(blk.ln2_b));
        Var cross = attention(tp, linear(tp, xc, blk.cwq, blk.cbq),
                              linear(tp, cond_seq, blk.cwk, blk.cbk),
                              linear(tp, cond_seq, blk.cwv, blk.cbv), cfg.heads, nullptr);
        x = tp.add(x, linear(tp, cross, blk.cwo, blk.cbo));

        Var xf = tp.layernorm(x, tp.param(blk.ln3_g), tp.param(blk.ln3_b));
        Var ff = linear(tp, tp.gelu(linear(tp, xf, blk.w1, blk.b1)), blk.w2, blk.b2);
        x = tp.add(x, ff);
    }

    Var xfinal = tp.layernorm(x, tp.param(params.lnf_g), tp.param(params.lnf_b));
    Var pred = tp.slice_rows(xfinal, cfg.cond_positions(), cfg.h * cfg.h);
    out.logits = linear(tp, pred, params.head_w, params.head_b);

    out.posterior.mu = tp.val(mu_i).row(0);
    out.posterior.log_sigma = tp.val(log_sigma).row(0);
    out.prior_mu = tp.val(mu_t).row(0);
    out.z = tp.val(z).row(0);
    return out;
}

TrainStats train_step(ModelParams& params, Adam& opt,
                      std::span<const std::pair<int, const TokenGrid*>> batch, Rng& rng) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    for (Param* p : params.all()) p->zero_grad();

    const PaddedLayout layout = build_padded_layout(GridShape{params.cfg.h}, params.cfg.cond_positions());
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    TrainStats stats;
    for (const auto& [class_id, grid] : batch) {
        TrainForward fw = forward_train(params, *grid, class_id, rng);
        Tape& tp = fw.tape;
        Var ce = tp.cross_entropy_mean(fw.logits, targets_in_lorder(*grid, layout));
        Var item = tp.add(ce, tp.scale(fw.kl, params.cfg.kl_weight));
        tp.backward(tp.scale(item, inv_b));
        stats.ce += tp.val(ce)(0, 0) * inv_b;
        stats.kl += tp.val(fw.kl)(0, 0) * inv_b;
    }
    opt.step(params.all());
    return stats;
}

double grad_check(ModelParams& params, std::span<const std::pair<int, const TokenGrid*>> batch,
                  double beta, int samples_per_param, double fd_step) {
    const PaddedLayout layout = build_padded_layout(GridShape{params.cfg.h}, params.cfg.cond_positions());
    Rng noise(1234);
    std::vector<RowVec> eps(batch.size());
    for (auto& e : eps) {
        e.resize(params.cfg.latent_dim);
        for (int i = 0; i < params.cfg.latent_dim; ++i) e(i) = noise.normal();
    }

    const double inv_b = 1.0 / static_cast<double>(batch.size());
    auto batch_loss = [&](bool with_grad) {
        double total = 0.0;
        Rng unused(0);
        for (size_t i = 0; i < batch.size(); ++i) {
            ForwardOptions opt;
            opt.disable_cond_dropout = true;
            opt.fixed_eps = eps[i];
            TrainForward fw = forward_train(params, *batch[i].second, batch[i].first, unused, opt);
            Tape& tp = fw.tape;
            Var ce = tp.cross_entropy_mean(fw.logits, targets_in_lorder(*batch[i].second, layout));
            Var item = tp.scale(tp.add(ce, tp.scale(fw.kl, beta)), inv_b);
            if (with_grad) tp.backward(item);
            total += tp.val(item)(0, 0);
        }
        return total;
    };

    for (Param* p : params.all()) p->zero_grad();
    batch_loss(true);

    Rng pick(99);
    double max_rel = 0.0;
    for (Param* p : params.all()) {
        const int n = static_cast<int>(p->value.size());
        for (int s = 0; s < samples_per_param; ++s) {
            const int at = pick.below(n);
            double* coeff = p->value.data() + at;
            const double orig = *coeff;
            *coeff = orig + fd_step;
            const double up = batch_loss(false);
            *coeff = orig - fd_step;
            const double down = batch_loss(false);
            *coeff = orig;
            const double numeric = (up - down) / (2.0 * fd_step);
            const double analytic = p->grad.data()[at];
            const double rel = std::abs(analytic - numeric) /
                               std::max(1e-6, std::abs(analytic) + std::abs(numeric));
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace lsar
