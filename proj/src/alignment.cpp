#include "lsar/alignment.hpp"

#include <numeric>
#include <stdexcept>

namespace lsar {

int AttentionMask::row_sum(int q) const {
    const auto* row = allow.data() + static_cast<size_t>(q) * n;
    return std::accumulate(row, row + n, 0);
}

PaddedLayout build_padded_layout(GridShape shape, int n_cond) {
    if (shape.h < 1) throw std::invalid_argument("grid side must be >= 1");
    if (n_cond < 1) throw std::invalid_argument("n_cond must be >= 1");

    PaddedLayout layout;
    layout.shape = shape;
    layout.n_cond = n_cond;
    layout.positions.reserve(static_cast<size_t>(n_cond + shape.total()));

    for (int i = 0; i < n_cond; ++i)
        layout.positions.push_back({PositionDesc::Kind::Cond, i});
    layout.positions.push_back({PositionDesc::Kind::Bos, 0});
    for (int t = 1; t <= shape.h - 1; ++t) {
        layout.positions.push_back({PositionDesc::Kind::Pad, 0});
        const RankRange r = block_range(t, shape);
        for (int rank = r.lo; rank <= r.hi; ++rank)
            layout.positions.push_back({PositionDesc::Kind::Token, rank});
        layout.positions.push_back({PositionDesc::Kind::Pad, 0});
    }

    // BOS predicts rank 1; the i-th position of padded block t predicts t^2+i.
    layout.predict_target.assign(layout.positions.size(), 0);
    layout.predict_target[n_cond] = 1;
    for (int t = 1; t <= shape.h - 1; ++t) {
        const int begin = layout.padded_block_begin(t);
        for (int i = 1; i <= 2 * t + 1; ++i)
            layout.predict_target[begin + i - 1] = t * t + i;
    }
    return layout;
}

AttentionMask build_block_causal_mask(const PaddedLayout& layout) {
    const int n = layout.length();
    AttentionMask mask;
    mask.n = n;
    mask.allow.assign(static_cast<size_t>(n) * n, 0);

    // visibility horizon per query: COND rows see the COND prefix only; BOS
    // additionally sees itself; padded block k sees everything up to the end
    // of its own block.
    auto block_end = [&](int t) { return layout.padded_block_begin(t) + 2 * t + 1; };
    for (int q = 0; q < n; ++q) {
        int horizon;
        switch (layout.positions[q].kind) {
            case PositionDesc::Kind::Cond: horizon = layout.n_cond; break;
            case PositionDesc::Kind::Bos: horizon = layout.n_cond + 1; break;
            default: {
                int t = 1;
                while (block_end(t) <= q) ++t;
                horizon = block_end(t);
            }
        }
        for (int k = 0; k < horizon; ++k) mask.allow[static_cast<size_t>(q) * n + k] = 1;
    }
    return mask;
}

std::vector<int> targets_in_lorder(const TokenGrid& grid, const PaddedLayout& layout) {
    if (grid.shape != layout.shape) throw std::invalid_argument("grid shape mismatch");
    std::vector<int> targets;
    targets.reserve(static_cast<size_t>(grid.shape.total()));
    const LOrderLayout lorder = build_layout(grid.shape);
    for (int pos = 0; pos < layout.length(); ++pos) {
        const int rank = layout.predict_target[pos];
        if (rank == 0) continue;
        const Cell c = lorder.cell_of_rank(rank);
        targets.push_back(grid.at(c.row - 1, c.col - 1));
    }
    return targets;
}

std::string render_mask(const AttentionMask& mask) {
    std::string out;
    out.reserve(static_cast<size_t>(mask.n) * (2 * mask.n));
    for (int q = 0; q < mask.n; ++q) {
        for (int k = 0; k < mask.n; ++k) {
            out += mask.at(q, k) ? '1' : '0';
            if (k != mask.n - 1) out += ' ';
        }
        out += '\n';
    }
    return out;
}

}  // namespace lsar
