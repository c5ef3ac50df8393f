#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "lsar/grid.hpp"

using namespace lsar;

namespace {

// independent oracle: enumerate block t clockwise straight from the rule
std::vector<Cell> clockwise_block(int t) {
    std::vector<Cell> cells;
    for (int r = 1; r <= t; ++r) cells.push_back({r, t});
    for (int c = t - 1; c >= 1; --c) cells.push_back({t, c});
    return cells;
}

}  // namespace

TEST_CASE("degenerate 1x1 grid") {
    const LOrderLayout layout = build_layout(GridShape{1});
    CHECK(layout.rank_of_cell(1, 1) == 1);
    CHECK(layout.cell_of_rank(1) == Cell{1, 1});
    CHECK(layout.block_of_rank(1) == 1);
}

TEST_CASE("h=0 rejected") { CHECK_THROWS_AS(build_layout(GridShape{0}), std::invalid_argument); }

TEST_CASE("block 3 of h=8 spans ranks 5..9") {
    const GridShape shape{8};
    const RankRange r = block_range(3, shape);
    CHECK(r.lo == 5);
    CHECK(r.hi == 9);
    CHECK(r.hi - r.lo + 1 == 5);

    const LOrderLayout layout = build_layout(shape);
    for (int rank = 5; rank <= 9; ++rank) CHECK(layout.block_of_rank(rank) == 3);
}

TEST_CASE("clockwise ranks inside block 3 of h=8") {
    const LOrderLayout layout = build_layout(GridShape{8});
    CHECK(layout.rank_of_cell(1, 3) == 5);
    CHECK(layout.rank_of_cell(3, 3) == 7);
    CHECK(layout.rank_of_cell(3, 1) == 9);

    // whole block against the enumeration oracle
    const auto cells = clockwise_block(3);
    for (size_t i = 0; i < cells.size(); ++i)
        CHECK(layout.rank_of_cell(cells[i].row, cells[i].col) == 5 + static_cast<int>(i));
}

TEST_CASE("block_range endpoints") {
    CHECK(block_range(1, GridShape{8}) == RankRange{1, 1});
    CHECK(block_range(3, GridShape{8}) == RankRange{5, 9});
    CHECK(block_range(8, GridShape{8}) == RankRange{50, 64});
    CHECK_THROWS_AS(block_range(0, GridShape{8}), std::out_of_range);
    CHECK_THROWS_AS(block_range(9, GridShape{8}), std::out_of_range);
}

TEST_CASE("bijection, square context and block size for h in 1..64") {
    for (int h = 1; h <= 64; ++h) {
        const GridShape shape{h};
        const LOrderLayout layout = build_layout(shape);

        std::set<std::pair<int, int>> seen;
        for (int rank = 1; rank <= shape.total(); ++rank) {
            const Cell c = layout.cell_of_rank(rank);
            CHECK(layout.rank_of_cell(c.row, c.col) == rank);
            seen.insert({c.row, c.col});
        }
        CHECK(static_cast<int>(seen.size()) == shape.total());

        for (int t = 1; t <= h; ++t) {
            const RankRange r = block_range(t, shape);
            CHECK(r.hi - r.lo + 1 == 2 * t - 1);
            // ranks <= t^2 fill exactly the top-left t x t square
            for (int rank = 1; rank <= t * t; ++rank) {
                const Cell c = layout.cell_of_rank(rank);
                CHECK(c.row <= t);
                CHECK(c.col <= t);
            }
            for (int rank = r.lo; rank <= r.hi; ++rank)
                CHECK(layout.block_of_rank(rank) == t);
        }
    }
}

TEST_CASE("every block-t cell touches the previous square or a sibling") {
    for (int h : {2, 5, 8}) {
        const LOrderLayout layout = build_layout(GridShape{h});
        for (int t = 2; t <= h; ++t) {
            const RankRange range = block_range(t, GridShape{h});
            for (int rank = range.lo; rank <= range.hi; ++rank) {
                const Cell c = layout.cell_of_rank(rank);
                bool adjacent = false;
                const int dr[] = {-1, 1, 0, 0};
                const int dc[] = {0, 0, -1, 1};
                for (int d = 0; d < 4; ++d) {
                    const int nr = c.row + dr[d], nc = c.col + dc[d];
                    if (nr < 1 || nr > h || nc < 1 || nc > h) continue;
                    const int nb = std::max(nr, nc);
                    if (nb == t - 1 || nb == t) adjacent = true;
                }
                CHECK(adjacent);
            }
        }
    }
}

TEST_CASE("h=2 L-order of a row-major grid") {
    TokenGrid g(GridShape{2});
    g.at(0, 0) = 10;  // a
    g.at(0, 1) = 11;  // b
    g.at(1, 0) = 12;  // c
    g.at(1, 1) = 13;  // d
    const LOrderLayout layout = build_layout(GridShape{2});
    const auto seq = to_lorder(g, layout);
    CHECK(seq == std::vector<int>{10, 11, 13, 12});  // [a, b, d, c]
}

TEST_CASE("random h=8 grids round-trip through L-order") {
    const LOrderLayout layout = build_layout(GridShape{8});
    std::mt19937 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        TokenGrid g(GridShape{8});
        for (int& t : g.tokens) t = static_cast<int>(rng() % 16);
        CHECK(from_lorder(to_lorder(g, layout), layout) == g);
    }
}

TEST_CASE("length mismatch rejected") {
    const LOrderLayout layout = build_layout(GridShape{2});
    CHECK_THROWS_AS(from_lorder(std::vector<int>{1, 2, 3}, layout), std::invalid_argument);
    TokenGrid wrong(GridShape{3}, 0);
    CHECK_THROWS_AS(to_lorder(wrong, layout), std::invalid_argument);
}

TEST_CASE("layout rendering for h=4") {
    const std::string expected =
        " 1  2  5 10\n"
        " 4  3  6 11\n"
        " 9  8  7 12\n"
        "16 15 14 13\n";
    CHECK(render_layout(build_layout(GridShape{4})) == expected);
}
