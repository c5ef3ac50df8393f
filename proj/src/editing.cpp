#include "lsar/editing.hpp"

#include <stdexcept>

namespace lsar {

void PixelBBox::validate(int side_px) const {
    if (x1 < 0 || x1 >= x2 || x2 > side_px || y1 < 0 || y1 >= y2 || y2 > side_px)
        throw std::invalid_argument("bbox must satisfy 0 <= lo < hi <= f*h");
}

TokenRegion bbox_to_region(const PixelBBox& box, int f) {
    if (f < 1) throw std::invalid_argument("downsampling factor must be >= 1");
    if (box.x1 < 0 || box.x1 >= box.x2 || box.y1 < 0 || box.y1 >= box.y2)
        throw std::invalid_argument("bbox must satisfy 0 <= lo < hi");
    TokenRegion r;
    r.x1 = box.x1 / f;
    r.y1 = box.y1 / f;
    r.x2 = (box.x2 + f - 1) / f;
    r.y2 = (box.y2 + f - 1) / f;
    if (r.empty()) throw std::invalid_argument("bbox maps to an empty token region");
    return r;
}

BlockSpan blocks_for_region(const TokenRegion& region) {
    if (region.empty()) throw std::invalid_argument("empty token region");
    // block of 0-indexed cell (row, col) is max(row, col) + 1
    return BlockSpan{std::max(region.x1, region.y1) + 1,
                     std::max(region.x2 - 1, region.y2 - 1) + 1};
}

namespace {

std::vector<int> block_tokens_of(const TokenGrid& grid, const LOrderLayout& layout, int t) {
    const RankRange range = block_range(t, grid.shape);
    std::vector<int> tokens(static_cast<size_t>(range.hi - range.lo + 1));
    for (int i = 0; i < static_cast<int>(tokens.size()); ++i) {
        const Cell c = layout.cell_of_rank(range.lo + i);
        tokens[static_cast<size_t>(i)] = grid.at(c.row - 1, c.col - 1);
    }
    return tokens;
}

}  // namespace

TokenGrid repaint(const ModelParams& params, const TokenGrid& grid, int t_keep, int class_id,
                  const SampleConfig& cfg, RowVec* z_out) {
    const int h = params.cfg.h;
    if (grid.shape.h != h) throw std::invalid_argument("grid side does not match model");
    if (t_keep < 0 || t_keep > h) throw std::invalid_argument("t_keep must be in 0..h");
    if (!grid.complete()) throw std::invalid_argument("repaint requires a complete grid");

    BlockDecoder dec(params, class_id, cfg);
    for (int t = 1; t <= h; ++t) {
        const Mat logits = dec.step_logits();
        if (t <= t_keep) {
            dec.commit_block(block_tokens_of(grid, dec.layout(), t));
        } else {
            dec.commit_block(dec.sample_block_tokens(logits));
        }
    }
    if (z_out) *z_out = dec.latent();
    return dec.grid();
}

TokenGrid inpaint(const ModelParams& params, const TokenGrid& grid, const PixelBBox& bbox, int f,
                  int class_id, const SampleConfig& cfg, RowVec* z_out) {
    const int h = params.cfg.h;
    if (grid.shape.h != h) throw std::invalid_argument("grid side does not match model");
    if (!grid.complete()) throw std::invalid_argument("inpaint requires a complete grid");
    bbox.validate(f * h);
    const TokenRegion region = bbox_to_region(bbox, f);
    if (region.x2 > h || region.y2 > h) throw std::invalid_argument("region outside grid");
    const BlockSpan span = blocks_for_region(region);

    BlockDecoder dec(params, class_id, cfg);
    for (int t = 1; t <= span.t_hi; ++t) {
        const Mat logits = dec.step_logits();
        if (t < span.t_lo) {
            dec.commit_block(block_tokens_of(grid, dec.layout(), t));
            continue;
        }
        // replace region cells immediately; the merged block is what later
        // steps condition on
        std::vector<int> tokens = dec.sample_block_tokens(logits);
        const RankRange range = block_range(t, grid.shape);
        for (int i = 0; i < static_cast<int>(tokens.size()); ++i) {
            const Cell c = dec.layout().cell_of_rank(range.lo + i);
            if (!region.contains(c.row - 1, c.col - 1))
                tokens[static_cast<size_t>(i)] = grid.at(c.row - 1, c.col - 1);
        }
        dec.commit_block(tokens);
    }

    if (z_out) *z_out = dec.latent();
    TokenGrid out = dec.grid();
    for (int t = span.t_hi + 1; t <= h; ++t) {
        const RankRange range = block_range(t, grid.shape);
        for (int rank = range.lo; rank <= range.hi; ++rank) {
            const Cell c = dec.layout().cell_of_rank(rank);
            out.at(c.row - 1, c.col - 1) = grid.at(c.row - 1, c.col - 1);
        }
    }
    return out;
}

}  // namespace lsar
