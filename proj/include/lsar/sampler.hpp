#pragma once

#include "lsar/net.hpp"

namespace lsar {

struct SampleConfig {
    double temperature = 1.0;
    int top_k = 0;        // 0 means the full codebook
    double top_p = 1.0;
    double cfg_scale = 0.0;  // 0 runs the conditional stream only
    uint64_t seed = 0;

    void validate(int codebook) const;
};

// Temperature, then top-k, then the smallest top-p nucleus; returns a full
// codebook-sized probability vector (zeros outside the kept support). Ties
// break toward the lower token id.
RowVec filter_logits(const RowVec& logits, double temperature, int top_k, double top_p);

// l_null + s * (l_cond - l_null)
RowVec guided_logits(const RowVec& l_cond, const RowVec& l_null, double s);

// draw from a probability vector by inverse CDF
int draw_token(const RowVec& probs, Rng& rng);

// Drives one generation: owns the decode caches, the rng stream and the
// growing grid. step_logits() advances the caches for block completed+1 and
// returns its guided logit rows; the caller then commits tokens for that
// block (sampled or imposed, which is how the editing paths replay kept
// blocks). One decoder per generation; independent decoders are unrelated.
class BlockDecoder {
  public:
    BlockDecoder(const ModelParams& params, int class_id, const SampleConfig& cfg,
                 bool use_cache = true, std::optional<RowVec> z_override = std::nullopt);

    Mat step_logits();
    std::vector<int> sample_block_tokens(const Mat& logits);
    void commit_block(std::span<const int> tokens);

    int completed() const { return state_.completed_blocks; }
    const TokenGrid& grid() const { return state_.grid; }
    const RowVec& latent() const { return state_.z; }
    const LOrderLayout& layout() const { return layout_; }
    Rng& rng() { return rng_; }

  private:
    bool guided() const;
    int effective_top_k() const;

    const ModelParams& params_;
    SampleConfig cfg_;
    int class_id_;
    bool use_cache_;
    Rng rng_;
    LOrderLayout layout_;
    DecodeState state_;
    RowVec z_null_;
};

// Semi-autoregressive generation: h steps, step t fills the 2t-1 tokens of
// block t in parallel from the cached streams. Deterministic given the seed.
// z_out, when given, receives the latent the generation used.
TokenGrid sample(const ModelParams& params, int class_id, const SampleConfig& cfg,
                 RowVec* z_out = nullptr);

// Identical sampling semantics with the full prefix recomputed every step.
TokenGrid sample_without_cache(const ModelParams& params, int class_id, const SampleConfig& cfg);

// Per-step max abs logit difference between the cached and uncached paths for
// one seeded generation (diagnostic for the equivalence contract).
double max_cached_uncached_logit_gap(const ModelParams& params, int class_id,
                                     const SampleConfig& cfg);

}  // namespace lsar
