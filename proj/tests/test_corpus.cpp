#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "lsar/corpus.hpp"

using namespace lsar;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const char* name)
        : path((std::filesystem::temp_directory_path() / name).string()) {}
    ~TempFile() { std::remove(path.c_str()); }
};

DatasetSpec base_spec() {
    DatasetSpec spec;
    spec.h = 8;
    spec.codebook = 16;
    spec.n_classes = 4;
    spec.n_samples = 16;
    spec.seed = 3;
    return spec;
}

}  // namespace

TEST_CASE("constant generator with zero noise fills class id everywhere") {
    DatasetSpec spec = base_spec();
    spec.generator = DatasetSpec::Generator::Constant;
    spec.n_classes = 6;
    const auto data = generate(spec);
    REQUIRE(data.size() == 16);
    for (const auto& item : data)
        for (int tok : item.grid.tokens) CHECK(tok == item.class_id % 16);
}

TEST_CASE("quadrant generator: four class-determined fills, distinct per class") {
    DatasetSpec spec = base_spec();
    spec.generator = DatasetSpec::Generator::Quadrant;
    const auto data = generate(spec);
    for (const auto& item : data) {
        const TokenGrid expect = class_pattern(spec, item.class_id);
        CHECK(item.grid == expect);
        // one id per quadrant
        CHECK(item.grid.at(0, 0) == item.grid.at(3, 3));
        CHECK(item.grid.at(0, 4) == item.grid.at(3, 7));
        CHECK(item.grid.at(4, 0) == item.grid.at(7, 3));
        CHECK(item.grid.at(4, 4) == item.grid.at(7, 7));
    }
    for (int a = 0; a < spec.n_classes; ++a)
        for (int b = a + 1; b < spec.n_classes; ++b)
            CHECK(class_pattern(spec, a) != class_pattern(spec, b));
}

TEST_CASE("noise flips stay inside the binomial 99% interval over 1000 grids") {
    DatasetSpec spec = base_spec();
    spec.generator = DatasetSpec::Generator::Constant;
    spec.noise_rate = 0.1;
    spec.n_samples = 1000;
    const auto data = generate(spec);
    int64_t flips = 0;
    for (const auto& item : data) {
        const TokenGrid clean = class_pattern(spec, item.class_id);
        for (int i = 0; i < 64; ++i)
            if (item.grid.tokens[static_cast<size_t>(i)] != clean.tokens[static_cast<size_t>(i)])
                ++flips;
    }
    // n = 64000 cells, p = 0.1: mean 6400, sd ~75.9; 99% band is +-2.58 sd
    CHECK(flips > 6400 - 196);
    CHECK(flips < 6400 + 196);
}

TEST_CASE("markov generator is deterministic and in-range") {
    DatasetSpec spec = base_spec();
    spec.generator = DatasetSpec::Generator::Markov;
    const auto a = generate(spec);
    const auto b = generate(spec);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].grid == b[i].grid);
        for (int tok : a[i].grid.tokens) {
            CHECK(tok >= 0);
            CHECK(tok < 16);
        }
    }
}

TEST_CASE("same seed gives identical dataset bytes on disk") {
    DatasetSpec spec = base_spec();
    spec.generator = DatasetSpec::Generator::Markov;
    TempFile f1("lsar_ds1.bin"), f2("lsar_ds2.bin");
    save_grids(f1.path, generate(spec), spec.codebook);
    save_grids(f2.path, generate(spec), spec.codebook);
    std::ifstream a(f1.path, std::ios::binary), b(f2.path, std::ios::binary);
    const std::string bytes_a((std::istreambuf_iterator<char>(a)), {});
    const std::string bytes_b((std::istreambuf_iterator<char>(b)), {});
    CHECK(bytes_a == bytes_b);
    CHECK_FALSE(bytes_a.empty());
}

TEST_CASE("grid file round-trip") {
    DatasetSpec spec = base_spec();
    spec.generator = DatasetSpec::Generator::Markov;
    spec.noise_rate = 0.05;
    const auto data = generate(spec);
    TempFile f("lsar_roundtrip.bin");
    save_grids(f.path, data, spec.codebook);
    const GridFile loaded = load_grids(f.path);
    CHECK(loaded.codebook == 16);
    REQUIRE(loaded.grids.size() == data.size());
    for (size_t i = 0; i < data.size(); ++i) {
        CHECK(loaded.grids[i].class_id == data[i].class_id);
        CHECK(loaded.grids[i].grid == data[i].grid);
    }
}

TEST_CASE("truncated and corrupt grid files rejected with a diagnostic") {
    DatasetSpec spec = base_spec();
    const auto data = generate(spec);
    TempFile f("lsar_corrupt.bin");
    save_grids(f.path, data, spec.codebook);

    SUBCASE("truncated") {
        std::filesystem::resize_file(f.path, 40);
        CHECK_THROWS_AS(load_grids(f.path), std::runtime_error);
    }
    SUBCASE("wrong magic") {
        std::fstream io(f.path, std::ios::in | std::ios::out | std::ios::binary);
        io.write("NOPE", 4);
        io.close();
        CHECK_THROWS_WITH_AS(load_grids(f.path),
                             doctest::Contains("bad magic"), std::runtime_error);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_grids("/nonexistent/lsar.bin"), std::runtime_error);
    }
}

TEST_CASE("checkpoint round-trip restores parameters and optimizer state") {
    ModelConfig cfg;
    cfg.h = 4;
    cfg.codebook = 8;
    cfg.n_classes = 2;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.dim = 8;
    cfg.latent_dim = 2;
    cfg.n_cond = 1;
    ModelParams params = init_params(cfg, 5);
    // fake some optimizer state
    Rng rng(6);
    for (Param* p : params.all()) {
        p->adam_m = randn(static_cast<int>(p->value.rows()), static_cast<int>(p->value.cols()), 0.1, rng);
        p->adam_v = p->adam_m.cwiseAbs();
    }

    TempFile f("lsar_ckpt.bin");
    save_ckpt(f.path, params, 321, 7);

    ModelParams restored;
    const Checkpoint ck = load_ckpt(f.path, restored);
    CHECK(ck.config == cfg);
    CHECK(ck.adam_step == 321);
    CHECK(ck.epoch == 7);
    const auto a = params.all();
    const auto b = restored.all();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i]->value == b[i]->value);
        CHECK(a[i]->adam_m == b[i]->adam_m);
        CHECK(a[i]->adam_v == b[i]->adam_v);
    }
}

TEST_CASE("checkpoint with a clobbered magic rejected") {
    ModelConfig cfg;
    cfg.h = 2;
    cfg.codebook = 4;
    cfg.n_classes = 1;
    cfg.layers = 1;
    cfg.heads = 1;
    cfg.dim = 4;
    cfg.latent_dim = 1;
    cfg.n_cond = 1;
    ModelParams params = init_params(cfg, 1);
    TempFile f("lsar_ckpt_bad.bin");
    save_ckpt(f.path, params, 0, 0);
    std::fstream io(f.path, std::ios::in | std::ios::out | std::ios::binary);
    io.write("XXXX", 4);
    io.close();
    ModelParams sink;
    CHECK_THROWS_WITH_AS(load_ckpt(f.path, sink), doctest::Contains("bad magic"),
                         std::runtime_error);
}

TEST_CASE("spec validation") {
    DatasetSpec spec = base_spec();
    spec.h = 0;
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);
    spec = base_spec();
    spec.noise_rate = 1.0;
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);
    spec = base_spec();
    spec.n_samples = 0;
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);
    CHECK_THROWS_AS(generator_from_name("wavelet"), std::invalid_argument);
    CHECK(generator_from_name("quadrant") == DatasetSpec::Generator::Quadrant);
}
