#pragma once

#include <optional>
#include <span>

#include "lsar/alignment.hpp"
#include "lsar/autodiff.hpp"
#include "lsar/grid.hpp"
#include "lsar/tensor.hpp"

namespace lsar {

struct ModelConfig {
    int h = 8;            // grid side
    int codebook = 16;    // K
    int n_classes = 8;    // condition vocabulary (NULL class is added internally)
    int layers = 2;       // L
    int heads = 4;        // H
    int dim = 32;         // D
    int latent_dim = 4;   // d_z
    int n_cond = 2;       // class-embedding prefix length (f(z) adds one slot)
    double kl_weight = 1.0;
    double cond_dropout = 0.1;  // probability of swapping the class for NULL while training

    int null_class() const { return n_classes; }
    // condition slots seen by the transformer: class sequence plus f(z)
    int cond_positions() const { return n_cond + 1; }
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

// Transformer trunk with a condition prefix and cross-attention, plus the
// CVAE heads: a token-grid posterior encoder, a class-conditioned prior
// head, and the latent-to-hidden mapping network. Input vocabulary is the
// codebook plus PAD and BOS; the output head emits codebook logits only.
struct ModelParams {
    ModelConfig cfg;

    Param tok_emb;   // (K+2) x D, PAD = K, BOS = K+1
    Param row_pos;   // h x D, indexed by predicted cell row
    Param col_pos;   // h x D
    Param cond_emb;  // (n_classes+1)*n_cond x D

    struct Block {
        Param ln1_g, ln1_b;
        Param wq, wk, wv, wo, bq, bk, bv, bo;
        Param ln2_g, ln2_b;
        Param cwq, cwk, cwv, cwo, cbq, cbk, cbv, cbo;
        Param ln3_g, ln3_b;
        Param w1, b1, w2, b2;
    };
    std::vector<Block> blocks;

    Param lnf_g, lnf_b;
    Param head_w, head_b;  // D x K

    Param enc_w1, enc_b1, enc_w2, enc_b2;  // posterior: pooled D -> D -> 2*d_z
    Param prior_w, prior_b;                // pooled condition D -> d_z
    Param map_w1, map_b1, map_w2, map_b2;  // f: d_z -> D -> D

    int pad_id() const { return cfg.codebook; }
    int bos_id() const { return cfg.codebook + 1; }

    std::vector<Param*> all();
    std::vector<const Param*> all() const;
};

ModelParams init_params(const ModelConfig& cfg, uint64_t seed);

// Diagonal Gaussian over the latent.
struct GaussianLatent {
    RowVec mu;
    RowVec log_sigma;
};

double kl_divergence(const GaussianLatent& posterior, const RowVec& prior_mu);

// mean cross-entropy over all rows plus beta * kl
double loss_value(const Mat& logits, const std::vector<int>& targets, double kl, double beta);

struct ForwardOptions {
    std::optional<RowVec> fixed_z;    // bypass the posterior sample (tests, causality checks)
    std::optional<RowVec> fixed_eps;  // pin the reparameterization noise (finite differences)
    bool disable_cond_dropout = false;
};

// Teacher-forced forward. Returns the tape so callers can attach a loss and
// run backward; logits cover all h^2 prediction positions in rank order.
struct TrainForward {
    Tape tape;
    Var logits;   // h^2 x K
    Var kl;       // 1 x 1
    int used_class = 0;
    RowVec z;
    GaussianLatent posterior;
    RowVec prior_mu;
};

TrainForward forward_train(ModelParams& params, const TokenGrid& grid, int class_id, Rng& rng,
                           const ForwardOptions& opt = {});

// One Adam step on mean loss over a batch; returns (mean ce, mean kl).
struct TrainStats {
    double ce = 0.0;
    double kl = 0.0;
    double loss() const { return ce; }
};
TrainStats train_step(ModelParams& params, Adam& opt,
                      std::span<const std::pair<int, const TokenGrid*>> batch, Rng& rng);

// --- cached decoding -------------------------------------------------------

// Per-layer key/value cache for one conditioning stream. Grows by the rows
// fed at each step; cross-attention keys/values are fixed at prefix time.
struct DecodeStream {
    std::vector<Mat> self_k, self_v;    // per layer, cached_len x D
    std::vector<Mat> cross_k, cross_v;  // per layer, n_cond x D
    int cached_len = 0;
};

struct DecodeState {
    int completed_blocks = 0;  // t after finishing step t
    TokenGrid grid;            // filled for ranks <= t^2
    RowVec z;
    DecodeStream cond;
    DecodeStream null;  // used only when guidance is active
};

// Input symbol for one decode position.
struct StepInput {
    enum class Kind { Pad, Token };
    Kind kind = Kind::Pad;
    int token_id = 0;   // for Token
    int cell_row = 1;   // 1-indexed cell this position predicts
    int cell_col = 1;
};

RowVec prior_mu_for_class(const ModelParams& params, int class_id);
RowVec map_latent(const ModelParams& params, const RowVec& z);

// Feeds [class sequence; f(z); BOS] through the trunk, fills the stream's
// caches and returns the BOS logits row (predicts rank 1).
Mat decode_prefix(const ModelParams& params, DecodeStream& stream, int class_id, const RowVec& z);

// Feeds the padded previous block (2t-1 rows); returns one logits row per
// input position, aligned to the next block's ranks. Queries see the whole
// cache plus every row of this step.
Mat decode_step(const ModelParams& params, DecodeStream& stream, std::span<const StepInput> inputs);

// Uncached oracle: recomputes the full prefix for step t of the given grid
// state and returns the same logits decode_prefix/decode_step would produce.
// step_t = 1 returns the BOS row; step_t >= 2 returns 2t-1 rows.
Mat forward_logits_uncached(const ModelParams& params, const TokenGrid& grid, int class_id,
                            const RowVec& z, int step_t);

// Inputs describing padded block t-1, taken from a grid holding block t-1.
std::vector<StepInput> padded_block_inputs(const ModelParams& params, const LOrderLayout& layout,
                                           const TokenGrid& grid, int t);

// Max relative error between backprop gradients and central finite
// differences of the batch loss, over `samples_per_param` coordinates of
// every parameter tensor.
double grad_check(ModelParams& params, std::span<const std::pair<int, const TokenGrid*>> batch,
                  double beta, int samples_per_param = 4, double fd_step = 1e-4);

}  // namespace lsar
