#include "lsar/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lsar {

void SampleConfig::validate(int codebook) const {
    if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
    if (top_k < 0 || top_k > codebook) throw std::invalid_argument("top_k must be in 1..K");
    if (!(top_p > 0.0) || top_p > 1.0) throw std::invalid_argument("top_p must be in (0,1]");
    if (cfg_scale < 0.0) throw std::invalid_argument("cfg_scale must be >= 0");
}

RowVec filter_logits(const RowVec& logits, double temperature, int top_k, double top_p) {
    const int k_size = static_cast<int>(logits.size());
    if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
    if (top_k < 1 || top_k > k_size) throw std::invalid_argument("top_k must be in 1..K");
    if (!(top_p > 0.0) || top_p > 1.0) throw std::invalid_argument("top_p must be in (0,1]");

    std::vector<int> order(static_cast<size_t>(k_size));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (logits(a) != logits(b)) return logits(a) > logits(b);
        return a < b;  // ties toward the lower id
    });

    const double mx = logits(order[0]) / temperature;
    if (!std::isfinite(mx)) throw std::invalid_argument("filter_logits: no finite logit");

    std::vector<double> kept(static_cast<size_t>(top_k));
    double denom = 0.0;
    for (int i = 0; i < top_k; ++i) {
        kept[static_cast<size_t>(i)] = std::exp(logits(order[static_cast<size_t>(i)]) / temperature - mx);
        denom += kept[static_cast<size_t>(i)];
    }

    // smallest prefix of the sorted support with cumulative mass >= top_p
    int nucleus = top_k;
    double cum = 0.0;
    for (int i = 0; i < top_k; ++i) {
        cum += kept[static_cast<size_t>(i)] / denom;
        if (cum >= top_p) {
            nucleus = i + 1;
            break;
        }
    }

    double renorm = 0.0;
    for (int i = 0; i < nucleus; ++i) renorm += kept[static_cast<size_t>(i)];
    RowVec probs = RowVec::Zero(k_size);
    for (int i = 0; i < nucleus; ++i)
        probs(order[static_cast<size_t>(i)]) = kept[static_cast<size_t>(i)] / renorm;
    return probs;
}

RowVec guided_logits(const RowVec& l_cond, const RowVec& l_null, double s) {
    if (l_cond.size() != l_null.size()) throw std::invalid_argument("guided_logits: shape mismatch");
    return l_null + s * (l_cond - l_null);
}

int draw_token(const RowVec& probs, Rng& rng) {
    const double u = rng.uniform();
    double cum = 0.0;
    int last_positive = 0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        if (probs(i) <= 0.0) continue;
        cum += probs(i);
        last_positive = static_cast<int>(i);
        if (u < cum) return static_cast<int>(i);
    }
    return last_positive;
}

BlockDecoder::BlockDecoder(const ModelParams& params, int class_id, const SampleConfig& cfg,
                           bool use_cache, std::optional<RowVec> z_override)
    : params_(params),
      cfg_(cfg),
      class_id_(class_id),
      use_cache_(use_cache),
      rng_(cfg.seed),
      layout_(build_layout(GridShape{params.cfg.h})),
      state_() {
    cfg.validate(params.cfg.codebook);
    if (class_id < 0 || class_id > params.cfg.null_class())
        throw std::invalid_argument("class id outside condition vocabulary");
    state_.grid = TokenGrid(GridShape{params.cfg.h});
    if (z_override) {
        if (z_override->size() != params.cfg.latent_dim)
            throw std::invalid_argument("latent override has the wrong dimension");
        state_.z = *z_override;
    } else {
        state_.z = prior_mu_for_class(params, class_id);
        for (Eigen::Index i = 0; i < state_.z.size(); ++i) state_.z(i) += rng_.normal();
    }
    if (guided()) z_null_ = prior_mu_for_class(params, params.cfg.null_class());
}

bool BlockDecoder::guided() const { return cfg_.cfg_scale > 0.0; }

int BlockDecoder::effective_top_k() const {
    return cfg_.top_k == 0 ? params_.cfg.codebook : cfg_.top_k;
}

Mat BlockDecoder::step_logits() {
    const int t = state_.completed_blocks + 1;
    if (t > params_.cfg.h) throw std::logic_error("generation already finished");

    Mat l_cond, l_null;
    if (use_cache_) {
        if (t == 1) {
            l_cond = decode_prefix(params_, state_.cond, class_id_, state_.z);
            if (guided())
                l_null = decode_prefix(params_, state_.null, params_.cfg.null_class(), z_null_);
        } else {
            const auto inputs = padded_block_inputs(params_, layout_, state_.grid, t);
            l_cond = decode_step(params_, state_.cond, inputs);
            if (guided()) l_null = decode_step(params_, state_.null, inputs);
        }
    } else {
        l_cond = forward_logits_uncached(params_, state_.grid, class_id_, state_.z, t);
        if (guided())
            l_null = forward_logits_uncached(params_, state_.grid, params_.cfg.null_class(), z_null_, t);
    }

    if (!guided()) return l_cond;
    Mat out(l_cond.rows(), l_cond.cols());
    for (Eigen::Index r = 0; r < l_cond.rows(); ++r)
        out.row(r) = guided_logits(l_cond.row(r), l_null.row(r), cfg_.cfg_scale);
    return out;
}

std::vector<int> BlockDecoder::sample_block_tokens(const Mat& logits) {
    std::vector<int> tokens(static_cast<size_t>(logits.rows()));
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const RowVec probs =
            filter_logits(logits.row(r), cfg_.temperature, effective_top_k(), cfg_.top_p);
        tokens[static_cast<size_t>(r)] = draw_token(probs, rng_);
    }
    return tokens;
}

void BlockDecoder::commit_block(std::span<const int> tokens) {
    const int t = state_.completed_blocks + 1;
    const RankRange range = block_range(t, state_.grid.shape);
    if (static_cast<int>(tokens.size()) != range.hi - range.lo + 1)
        throw std::invalid_argument("commit_block: wrong token count for block");
    for (int i = 0; i < static_cast<int>(tokens.size()); ++i) {
        const Cell c = layout_.cell_of_rank(range.lo + i);
        state_.grid.at(c.row - 1, c.col - 1) = tokens[static_cast<size_t>(i)];
    }
    state_.completed_blocks = t;
}

namespace {

TokenGrid run_generation(const ModelParams& params, int class_id, const SampleConfig& cfg,
                         bool use_cache, RowVec* z_out = nullptr) {
    BlockDecoder dec(params, class_id, cfg, use_cache);
    for (int t = 1; t <= params.cfg.h; ++t) {
        const Mat logits = dec.step_logits();
        dec.commit_block(dec.sample_block_tokens(logits));
    }
    if (z_out) *z_out = dec.latent();
    return dec.grid();
}

}  // namespace

TokenGrid sample(const ModelParams& params, int class_id, const SampleConfig& cfg, RowVec* z_out) {
    return run_generation(params, class_id, cfg, true, z_out);
}

TokenGrid sample_without_cache(const ModelParams& params, int class_id, const SampleConfig& cfg) {
    return run_generation(params, class_id, cfg, false);
}

double max_cached_uncached_logit_gap(const ModelParams& params, int class_id,
                                     const SampleConfig& cfg) {
    BlockDecoder cached(params, class_id, cfg, true);
    BlockDecoder uncached(params, class_id, cfg, false);
    double gap = 0.0;
    for (int t = 1; t <= params.cfg.h; ++t) {
        const Mat lc = cached.step_logits();
        const Mat lu = uncached.step_logits();
        gap = std::max(gap, (lc - lu).cwiseAbs().maxCoeff());
        const auto tokens = cached.sample_block_tokens(lc);
        cached.commit_block(tokens);
        uncached.commit_block(tokens);  // uncached side replays the same tokens
    }
    return gap;
}

}  // namespace lsar
