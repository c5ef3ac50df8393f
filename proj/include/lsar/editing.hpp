#pragma once

#include "lsar/sampler.hpp"

namespace lsar {

// Pixel-space box, 0-indexed, top-left inclusive and bottom-right exclusive.
// x runs along columns, y along rows.
struct PixelBBox {
    int x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    void validate(int side_px) const;
};

// Token-space box after floor/ceil mapping, same half-open convention.
struct TokenRegion {
    int x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    bool contains(int row, int col) const {  // 0-indexed cell
        return row >= y1 && row < y2 && col >= x1 && col < x2;
    }
    bool empty() const { return x1 >= x2 || y1 >= y2; }
};

struct BlockSpan {
    int t_lo = 0;
    int t_hi = 0;  // inclusive, 1-indexed blocks
};

// x1 = floor(px.x1/f), x2 = ceil(px.x2/f); same for y. f is the pixel
// downsampling factor (side_px = f * h).
TokenRegion bbox_to_region(const PixelBBox& box, int f);

// Smallest block range whose L-blocks jointly cover every region cell.
BlockSpan blocks_for_region(const TokenRegion& region);

// Keeps ranks <= t_keep^2 bit-exactly (fed through the caches as if
// generated) and resamples everything after, under class_id.
TokenGrid repaint(const ModelParams& params, const TokenGrid& grid, int t_keep, int class_id,
                  const SampleConfig& cfg, RowVec* z_out = nullptr);

// Regenerates only the blocks intersecting the bbox-mapped region; newly
// sampled tokens replace cells inside the region immediately at each step,
// everything outside the region keeps its original token.
TokenGrid inpaint(const ModelParams& params, const TokenGrid& grid, const PixelBBox& bbox, int f,
                  int class_id, const SampleConfig& cfg, RowVec* z_out = nullptr);

}  // namespace lsar
