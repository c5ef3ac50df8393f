#include "lsar/grid.hpp"

#include <algorithm>
#include <stdexcept>

namespace lsar {

bool TokenGrid::complete() const {
    return std::none_of(tokens.begin(), tokens.end(), [](int t) { return t < 0; });
}

LOrderLayout::LOrderLayout(GridShape shape) : shape_(shape) {
    if (shape.h < 1) throw std::invalid_argument("grid side must be >= 1");
    const int h = shape.h;
    rank_of_cell_.assign(static_cast<size_t>(h) * h, 0);
    cell_of_rank_.assign(static_cast<size_t>(h) * h, Cell{});

    for (int t = 1; t <= h; ++t) {
        int rank = (t - 1) * (t - 1) + 1;
        // right column of the t x t square, top to bottom
        for (int r = 1; r <= t; ++r) {
            rank_of_cell_[static_cast<size_t>(r - 1) * h + (t - 1)] = rank;
            cell_of_rank_[rank - 1] = Cell{r, t};
            ++rank;
        }
        // bottom row, right to left (corner already placed)
        for (int c = t - 1; c >= 1; --c) {
            rank_of_cell_[static_cast<size_t>(t - 1) * h + (c - 1)] = rank;
            cell_of_rank_[rank - 1] = Cell{t, c};
            ++rank;
        }
    }
}

int LOrderLayout::rank_of_cell(int row, int col) const {
    if (row < 1 || row > shape_.h || col < 1 || col > shape_.h)
        throw std::out_of_range("cell outside grid");
    return rank_of_cell_[static_cast<size_t>(row - 1) * shape_.h + (col - 1)];
}

Cell LOrderLayout::cell_of_rank(int rank) const {
    if (rank < 1 || rank > shape_.total()) throw std::out_of_range("rank outside grid");
    return cell_of_rank_[rank - 1];
}

int LOrderLayout::block_of_rank(int rank) const {
    const Cell c = cell_of_rank(rank);
    return std::max(c.row, c.col);
}

LOrderLayout build_layout(GridShape shape) { return LOrderLayout(shape); }

RankRange block_range(int t, GridShape shape) {
    if (t < 1 || t > shape.h) throw std::out_of_range("block index outside 1..h");
    return RankRange{(t - 1) * (t - 1) + 1, t * t};
}

std::vector<int> to_lorder(const TokenGrid& grid, const LOrderLayout& layout) {
    if (grid.shape != layout.shape()) throw std::invalid_argument("grid shape mismatch");
    const int n = grid.shape.total();
    std::vector<int> seq(static_cast<size_t>(n));
    for (int rank = 1; rank <= n; ++rank) {
        const Cell c = layout.cell_of_rank(rank);
        seq[rank - 1] = grid.at(c.row - 1, c.col - 1);
    }
    return seq;
}

TokenGrid from_lorder(const std::vector<int>& seq, const LOrderLayout& layout) {
    const int n = layout.shape().total();
    if (static_cast<int>(seq.size()) != n) throw std::invalid_argument("sequence length mismatch");
    TokenGrid grid(layout.shape());
    for (int rank = 1; rank <= n; ++rank) {
        const Cell c = layout.cell_of_rank(rank);
        grid.at(c.row - 1, c.col - 1) = seq[rank - 1];
    }
    return grid;
}

std::string render_layout(const LOrderLayout& layout) {
    const int h = layout.shape().h;
    int width = 1;
    for (int n = h * h; n >= 10; n /= 10) ++width;
    std::string out;
    for (int r = 1; r <= h; ++r) {
        for (int c = 1; c <= h; ++c) {
            std::string num = std::to_string(layout.rank_of_cell(r, c));
            out.append(static_cast<size_t>(width) - num.size(), ' ');
            out += num;
            if (c != h) out += ' ';
        }
        out += '\n';
    }
    return out;
}

}  // namespace lsar
