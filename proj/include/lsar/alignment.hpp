#pragma once

#include <string>
#include <vector>

#include "lsar/grid.hpp"

namespace lsar {

// Input positions of the teacher-forced transformer sequence:
//   [COND x n_cond; BOS; padded block 1; ...; padded block h-1]
// where padded block t = [PAD; tokens of block t; PAD] (2t+1 positions).
// Every non-COND position predicts exactly one rank: BOS predicts rank 1
// and the i-th position of padded block t predicts rank t^2 + i, so block
// t's padded positions line up one-to-one with block t+1's targets.
struct PositionDesc {
    enum class Kind { Cond, Bos, Pad, Token };
    Kind kind = Kind::Pad;
    int value = 0;  // Cond: prefix slot index (0-based); Token: rank carried as input
};

struct PaddedLayout {
    GridShape shape;
    int n_cond = 0;
    std::vector<PositionDesc> positions;  // length n_cond + h^2
    std::vector<int> predict_target;      // rank predicted at each position, 0 for COND

    int length() const { return static_cast<int>(positions.size()); }
    // index of the first position of padded block t (1 <= t <= h-1)
    int padded_block_begin(int t) const { return n_cond + 1 + (t - 1) * (t + 1); }
};

// Boolean visibility matrix, query position x key position.
struct AttentionMask {
    int n = 0;
    std::vector<uint8_t> allow;  // row-major n x n

    bool at(int q, int k) const { return allow[static_cast<size_t>(q) * n + k] != 0; }
    int row_sum(int q) const;
};

PaddedLayout build_padded_layout(GridShape shape, int n_cond);

// Block-causal visibility: COND sees COND; BOS sees COND+BOS; a position in
// padded block k sees COND, BOS and padded blocks 1..k (its own block fully).
AttentionMask build_block_causal_mask(const PaddedLayout& layout);

// Ground-truth token per prediction position, ordered as the positions that
// carry a predict_target (BOS first, then padded blocks). Equals the grid's
// L-order sequence.
std::vector<int> targets_in_lorder(const TokenGrid& grid, const PaddedLayout& layout);

// 0/1 text grid of the mask, one query row per line.
std::string render_mask(const AttentionMask& mask);

}  // namespace lsar
