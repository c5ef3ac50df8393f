#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "lsar/alignment.hpp"

using namespace lsar;

TEST_CASE("h=1 layout is condition prefix plus BOS") {
    const PaddedLayout layout = build_padded_layout(GridShape{1}, 1);
    REQUIRE(layout.length() == 2);
    CHECK(layout.positions[0].kind == PositionDesc::Kind::Cond);
    CHECK(layout.positions[1].kind == PositionDesc::Kind::Bos);
    CHECK(layout.predict_target[0] == 0);
    CHECK(layout.predict_target[1] == 1);
}

TEST_CASE("h=2, n_cond=2 layout") {
    const PaddedLayout layout = build_padded_layout(GridShape{2}, 2);
    REQUIRE(layout.length() == 6);  // 2 + h^2
    using K = PositionDesc::Kind;
    const K kinds[] = {K::Cond, K::Cond, K::Bos, K::Pad, K::Token, K::Pad};
    for (int i = 0; i < 6; ++i) CHECK(layout.positions[static_cast<size_t>(i)].kind == kinds[i]);
    CHECK(layout.positions[4].value == 1);  // carries rank 1 as input

    // padded block 1 predicts ranks 2, 3, 4
    CHECK(layout.predict_target[2] == 1);  // BOS
    CHECK(layout.predict_target[3] == 2);
    CHECK(layout.predict_target[4] == 3);
    CHECK(layout.predict_target[5] == 4);
}

TEST_CASE("h=8, n_cond=4 layout sizes") {
    const PaddedLayout layout = build_padded_layout(GridShape{8}, 4);
    CHECK(layout.length() == 68);  // 4 + 64
    // padded block 7 has 15 positions predicting ranks 50..64
    const int begin = layout.padded_block_begin(7);
    for (int i = 0; i < 15; ++i) {
        CHECK(layout.positions[static_cast<size_t>(begin + i)].kind !=
              PositionDesc::Kind::Cond);
        CHECK(layout.predict_target[static_cast<size_t>(begin + i)] == 50 + i);
    }
    CHECK(begin + 15 == layout.length());
}

TEST_CASE("padded block t has 2t+1 positions and matches block t+1") {
    const GridShape shape{8};
    const PaddedLayout layout = build_padded_layout(shape, 3);
    for (int t = 1; t <= shape.h - 1; ++t) {
        const int len = 2 * t + 1;
        const RankRange next = block_range(t + 1, shape);
        CHECK(len == next.hi - next.lo + 1);
        const int begin = layout.padded_block_begin(t);
        CHECK(layout.positions[static_cast<size_t>(begin)].kind == PositionDesc::Kind::Pad);
        CHECK(layout.positions[static_cast<size_t>(begin + len - 1)].kind == PositionDesc::Kind::Pad);
        for (int i = 1; i < len - 1; ++i) {
            const auto& p = layout.positions[static_cast<size_t>(begin + i)];
            CHECK(p.kind == PositionDesc::Kind::Token);
            CHECK(p.value == (t - 1) * (t - 1) + i);  // carries block t in order
        }
    }
}

TEST_CASE("predict_target is a bijection onto 1..h^2") {
    for (int h : {1, 2, 3, 8, 13}) {
        const PaddedLayout layout = build_padded_layout(GridShape{h}, 2);
        std::set<int> ranks;
        for (int pos = 0; pos < layout.length(); ++pos) {
            const int r = layout.predict_target[static_cast<size_t>(pos)];
            if (layout.positions[static_cast<size_t>(pos)].kind == PositionDesc::Kind::Cond) {
                CHECK(r == 0);
            } else {
                CHECK(r >= 1);
                CHECK(r <= h * h);
                ranks.insert(r);
            }
        }
        CHECK(static_cast<int>(ranks.size()) == h * h);
    }
}

TEST_CASE("invalid layout arguments rejected") {
    CHECK_THROWS_AS(build_padded_layout(GridShape{0}, 1), std::invalid_argument);
    CHECK_THROWS_AS(build_padded_layout(GridShape{4}, 0), std::invalid_argument);
}

TEST_CASE("h=1 mask: BOS sees condition and itself") {
    const AttentionMask mask = build_block_causal_mask(build_padded_layout(GridShape{1}, 1));
    REQUIRE(mask.n == 2);
    CHECK(mask.at(0, 0));
    CHECK_FALSE(mask.at(0, 1));  // COND does not see BOS
    CHECK(mask.at(1, 0));
    CHECK(mask.at(1, 1));
}

TEST_CASE("h=2, n_cond=1: TOKEN(1) sees cond, BOS and its own padded block only") {
    const PaddedLayout layout = build_padded_layout(GridShape{2}, 1);
    const AttentionMask mask = build_block_causal_mask(layout);
    REQUIRE(mask.n == 5);  // C BOS P T P
    const int q = 3;       // TOKEN(1)
    for (int k = 0; k < 5; ++k) CHECK(mask.at(q, k));

    // nothing attends forward past its own block
    CHECK_FALSE(mask.at(1, 2));  // BOS does not see padded block 1
    CHECK_FALSE(mask.at(0, 1));  // COND sees COND only
}

TEST_CASE("mask row sums follow n_cond + 1 + k^2 + 2k") {
    for (int h : {3, 5, 8}) {
        for (int n_cond : {1, 4}) {
            const PaddedLayout layout = build_padded_layout(GridShape{h}, n_cond);
            const AttentionMask mask = build_block_causal_mask(layout);
            for (int q = 0; q < mask.n; ++q) {
                switch (layout.positions[static_cast<size_t>(q)].kind) {
                    case PositionDesc::Kind::Cond: CHECK(mask.row_sum(q) == n_cond); break;
                    case PositionDesc::Kind::Bos: CHECK(mask.row_sum(q) == n_cond + 1); break;
                    default: {
                        int t = 1;
                        while (layout.padded_block_begin(t) + 2 * t + 1 <= q) ++t;
                        CHECK(mask.row_sum(q) == n_cond + 1 + t * t + 2 * t);
                    }
                }
            }
        }
    }
}

TEST_CASE("block-lower-triangular at block granularity") {
    const PaddedLayout layout = build_padded_layout(GridShape{4}, 2);
    const AttentionMask mask = build_block_causal_mask(layout);
    // no query sees any key of a strictly later padded block
    for (int t = 1; t <= 2; ++t) {
        const int q_end = layout.padded_block_begin(t) + 2 * t + 1;
        for (int q = 0; q < q_end; ++q)
            for (int k = q_end; k < mask.n; ++k) CHECK_FALSE(mask.at(q, k));
    }
}

TEST_CASE("targets for the h=2 grid [a b; c d]") {
    TokenGrid g(GridShape{2});
    g.at(0, 0) = 10;
    g.at(0, 1) = 11;
    g.at(1, 0) = 12;
    g.at(1, 1) = 13;
    const PaddedLayout layout = build_padded_layout(GridShape{2}, 2);
    CHECK(targets_in_lorder(g, layout) == std::vector<int>{10, 11, 13, 12});
}

TEST_CASE("h=1 target is the single cell") {
    TokenGrid g(GridShape{1});
    g.at(0, 0) = 5;
    const PaddedLayout layout = build_padded_layout(GridShape{1}, 3);
    CHECK(targets_in_lorder(g, layout) == std::vector<int>{5});
}

TEST_CASE("targets of random h=8 grids are the L-order permutation") {
    const GridShape shape{8};
    const PaddedLayout layout = build_padded_layout(shape, 4);
    const LOrderLayout lorder = build_layout(shape);
    std::mt19937 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        TokenGrid g(shape);
        for (int& t : g.tokens) t = static_cast<int>(rng() % 100);
        CHECK(targets_in_lorder(g, layout) == to_lorder(g, lorder));
    }
}

TEST_CASE("target shape mismatch rejected") {
    const PaddedLayout layout = build_padded_layout(GridShape{2}, 1);
    TokenGrid wrong(GridShape{3}, 0);
    CHECK_THROWS_AS(targets_in_lorder(wrong, layout), std::invalid_argument);
}

TEST_CASE("mask rendering golden for h=2, n_cond=1") {
    const std::string expected =
        "1 0 0 0 0\n"
        "1 1 0 0 0\n"
        "1 1 1 1 1\n"
        "1 1 1 1 1\n"
        "1 1 1 1 1\n";
    CHECK(render_mask(build_block_causal_mask(build_padded_layout(GridShape{2}, 1))) == expected);
}
