#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lsar {

// Square token grid geometry. The generator works on h x h grids of
// discrete codebook ids; cells are addressed 0-indexed in storage and
// 1-indexed in the L-order layout API (ranks and blocks are 1-indexed
// so that block t spans ranks (t-1)^2+1 .. t^2).
struct GridShape {
    int h = 0;

    int total() const { return h * h; }
    bool operator==(const GridShape&) const = default;
};

// h x h grid of token ids in 0..K-1. A value of -1 marks a cell not yet
// generated; complete grids contain no holes.
struct TokenGrid {
    GridShape shape;
    std::vector<int> tokens;  // row-major, shape.total() entries

    TokenGrid() = default;
    explicit TokenGrid(GridShape s, int fill = -1)
        : shape(s), tokens(static_cast<size_t>(s.total()), fill) {}

    int& at(int row, int col) { return tokens[static_cast<size_t>(row) * shape.h + col]; }
    int at(int row, int col) const { return tokens[static_cast<size_t>(row) * shape.h + col]; }

    bool complete() const;
    bool operator==(const TokenGrid&) const = default;
};

// 1-indexed grid cell.
struct Cell {
    int row = 0;
    int col = 0;
    bool operator==(const Cell&) const = default;
};

struct RankRange {
    int lo = 0;
    int hi = 0;  // inclusive
    bool operator==(const RankRange&) const = default;
};

// Bijection between grid cells and L-order ranks. Block t is the
// mirrored L of 2t-1 cells closing the top-left t x t square; within a
// block ranks ascend clockwise: (1,t),(2,t),...,(t,t),(t,t-1),...,(t,1).
// Immutable after construction.
class LOrderLayout {
  public:
    explicit LOrderLayout(GridShape shape);

    GridShape shape() const { return shape_; }

    // 1-indexed row/col -> rank in 1..h^2.
    int rank_of_cell(int row, int col) const;
    Cell cell_of_rank(int rank) const;
    // Block index t in 1..h of the given rank; cell (r,c) lies in block max(r,c).
    int block_of_rank(int rank) const;

  private:
    GridShape shape_;
    std::vector<int> rank_of_cell_;   // row-major
    std::vector<Cell> cell_of_rank_;  // rank-1 indexed
};

LOrderLayout build_layout(GridShape shape);

// Ranks covered by block t: ((t-1)^2+1, t^2).
RankRange block_range(int t, GridShape shape);

// Grid <-> L-order sequence (length h^2, index = rank-1).
std::vector<int> to_lorder(const TokenGrid& grid, const LOrderLayout& layout);
TokenGrid from_lorder(const std::vector<int>& seq, const LOrderLayout& layout);

// Text rendering of the rank layout, one grid row per line.
std::string render_layout(const LOrderLayout& layout);

}  // namespace lsar
