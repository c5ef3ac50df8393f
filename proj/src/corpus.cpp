#include "lsar/corpus.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>

namespace lsar {

void DatasetSpec::validate() const {
    if (h < 1) throw std::invalid_argument("h must be >= 1");
    if (codebook < 2 || codebook > 65535) throw std::invalid_argument("codebook must be in 2..65535");
    if (n_classes < 1) throw std::invalid_argument("n_classes must be >= 1");
    if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
    if (noise_rate < 0.0 || noise_rate >= 1.0) throw std::invalid_argument("noise_rate must be in [0,1)");
}

namespace {

void apply_noise(TokenGrid& grid, int codebook, double rate, Rng& rng) {
    if (rate <= 0.0) return;
    for (int& tok : grid.tokens) {
        if (!rng.bernoulli(rate)) continue;
        // uniform over the other codebook ids
        int other = rng.below(codebook - 1);
        if (other >= tok) ++other;
        tok = other;
    }
}

int quadrant_token(int class_id, int quadrant, int codebook) {
    const int step = std::max(1, codebook / 4);
    return (class_id + quadrant * step) % codebook;
}

TokenGrid constant_pattern(const DatasetSpec& spec, int class_id) {
    return TokenGrid(GridShape{spec.h}, class_id % spec.codebook);
}

TokenGrid quadrant_pattern(const DatasetSpec& spec, int class_id) {
    TokenGrid grid(GridShape{spec.h});
    const int half = spec.h / 2;
    for (int r = 0; r < spec.h; ++r)
        for (int c = 0; c < spec.h; ++c) {
            const int quadrant = (r >= half ? 2 : 0) + (c >= half ? 1 : 0);
            grid.at(r, c) = quadrant_token(class_id, quadrant, spec.codebook);
        }
    return grid;
}

// class-specific row transition matrix, rows normalized
std::vector<double> markov_table(const DatasetSpec& spec, int class_id) {
    Rng rng(spec.seed * 0x9e3779b97f4a7c15ULL + static_cast<uint64_t>(class_id) + 1);
    const int k = spec.codebook;
    std::vector<double> table(static_cast<size_t>(k) * k);
    for (int a = 0; a < k; ++a) {
        double sum = 0.0;
        for (int b = 0; b < k; ++b) {
            const double u = rng.uniform();
            table[static_cast<size_t>(a) * k + b] = u * u;  // favor a few strong transitions
            sum += u * u;
        }
        for (int b = 0; b < k; ++b) table[static_cast<size_t>(a) * k + b] /= sum;
    }
    return table;
}

int draw_from(const std::vector<double>& probs, Rng& rng) {
    const double u = rng.uniform();
    double cum = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        cum += probs[i];
        if (u < cum) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

TokenGrid markov_grid(const DatasetSpec& spec, const std::vector<double>& table, Rng& rng) {
    const int k = spec.codebook;
    TokenGrid grid(GridShape{spec.h});
    std::vector<double> mix(static_cast<size_t>(k));
    for (int r = 0; r < spec.h; ++r)
        for (int c = 0; c < spec.h; ++c) {
            if (r == 0 && c == 0) {
                grid.at(0, 0) = rng.below(k);
                continue;
            }
            const int left = c > 0 ? grid.at(r, c - 1) : -1;
            const int up = r > 0 ? grid.at(r - 1, c) : -1;
            for (int b = 0; b < k; ++b) {
                double p = 0.0;
                int n = 0;
                if (left >= 0) {
                    p += table[static_cast<size_t>(left) * k + b];
                    ++n;
                }
                if (up >= 0) {
                    p += table[static_cast<size_t>(up) * k + b];
                    ++n;
                }
                mix[static_cast<size_t>(b)] = p / n;
            }
            grid.at(r, c) = draw_from(mix, rng);
        }
    return grid;
}

}  // namespace

TokenGrid class_pattern(const DatasetSpec& spec, int class_id) {
    spec.validate();
    switch (spec.generator) {
        case DatasetSpec::Generator::Constant: return constant_pattern(spec, class_id);
        case DatasetSpec::Generator::Quadrant: return quadrant_pattern(spec, class_id);
        default: throw std::invalid_argument("markov has no deterministic class pattern");
    }
}

std::vector<LabeledGrid> generate(const DatasetSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    std::vector<LabeledGrid> out;
    out.reserve(static_cast<size_t>(spec.n_samples));

    std::vector<std::vector<double>> markov;
    if (spec.generator == DatasetSpec::Generator::Markov) {
        markov.reserve(static_cast<size_t>(spec.n_classes));
        for (int c = 0; c < spec.n_classes; ++c) markov.push_back(markov_table(spec, c));
    }

    for (int i = 0; i < spec.n_samples; ++i) {
        const int class_id = i % spec.n_classes;
        TokenGrid grid;
        switch (spec.generator) {
            case DatasetSpec::Generator::Constant: grid = constant_pattern(spec, class_id); break;
            case DatasetSpec::Generator::Quadrant: grid = quadrant_pattern(spec, class_id); break;
            case DatasetSpec::Generator::Markov:
                grid = markov_grid(spec, markov[static_cast<size_t>(class_id)], rng);
                break;
        }
        apply_noise(grid, spec.codebook, spec.noise_rate, rng);
        out.push_back({class_id, std::move(grid)});
    }
    return out;
}

DatasetSpec::Generator generator_from_name(const std::string& name) {
    if (name == "constant") return DatasetSpec::Generator::Constant;
    if (name == "quadrant") return DatasetSpec::Generator::Quadrant;
    if (name == "markov") return DatasetSpec::Generator::Markov;
    throw std::invalid_argument("unknown generator: " + name);
}

std::string generator_name(DatasetSpec::Generator g) {
    switch (g) {
        case DatasetSpec::Generator::Constant: return "constant";
        case DatasetSpec::Generator::Quadrant: return "quadrant";
        default: return "markov";
    }
}

// --- binary IO --------------------------------------------------------------

namespace {

constexpr char kGridMagic[4] = {'L', 'S', 'G', 'D'};
constexpr char kCkptMagic[4] = {'L', 'S', 'C', 'K'};
constexpr uint32_t kGridVersion = 1;
constexpr uint32_t kCkptVersion = 1;

void write_bytes(std::ostream& out, const void* p, size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void write_pod(std::ostream& out, T v) {
    write_bytes(out, &v, sizeof(T));
}

void read_bytes(std::istream& in, void* p, size_t n, const char* what) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in.gcount()) != n)
        throw std::runtime_error(std::string("truncated file while reading ") + what);
}

template <typename T>
T read_pod(std::istream& in, const char* what) {
    T v;
    read_bytes(in, &v, sizeof(T), what);
    return v;
}

void atomic_write(const std::string& path, const std::function<void(std::ostream&)>& fn) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
        fn(out);
        if (!out) throw std::runtime_error("write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

void save_grids(const std::string& path, const std::vector<LabeledGrid>& grids, int codebook) {
    if (grids.empty()) throw std::invalid_argument("refusing to save an empty grid file");
    const int h = grids.front().grid.shape.h;
    for (const auto& g : grids) {
        if (g.grid.shape.h != h) throw std::invalid_argument("mixed grid sides in one file");
        for (int tok : g.grid.tokens)
            if (tok < 0 || tok >= codebook) throw std::invalid_argument("token outside codebook");
    }
    atomic_write(path, [&](std::ostream& out) {
        write_bytes(out, kGridMagic, 4);
        write_pod<uint32_t>(out, kGridVersion);
        write_pod<uint32_t>(out, static_cast<uint32_t>(h));
        write_pod<uint32_t>(out, static_cast<uint32_t>(codebook));
        write_pod<uint32_t>(out, static_cast<uint32_t>(grids.size()));
        for (const auto& g : grids) {
            write_pod<uint32_t>(out, static_cast<uint32_t>(g.class_id));
            for (int tok : g.grid.tokens) write_pod<uint16_t>(out, static_cast<uint16_t>(tok));
        }
    });
}

GridFile load_grids(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open grid file: " + path);
    char magic[4];
    read_bytes(in, magic, 4, "magic");
    if (std::memcmp(magic, kGridMagic, 4) != 0)
        throw std::runtime_error("not a grid file (bad magic): " + path);
    const auto version = read_pod<uint32_t>(in, "version");
    if (version != kGridVersion)
        throw std::runtime_error("unsupported grid file version " + std::to_string(version));
    const auto h = read_pod<uint32_t>(in, "grid side");
    const auto codebook = read_pod<uint32_t>(in, "codebook");
    const auto count = read_pod<uint32_t>(in, "count");
    if (h < 1 || h > 4096 || codebook < 2 || codebook > 65535)
        throw std::runtime_error("grid file header out of range: " + path);

    GridFile file;
    file.codebook = static_cast<int>(codebook);
    file.grids.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        LabeledGrid item;
        item.class_id = static_cast<int>(read_pod<uint32_t>(in, "class id"));
        item.grid = TokenGrid(GridShape{static_cast<int>(h)});
        for (int& tok : item.grid.tokens) {
            const auto raw = read_pod<uint16_t>(in, "token");
            if (raw >= codebook) throw std::runtime_error("token outside codebook in " + path);
            tok = raw;
        }
        file.grids.push_back(std::move(item));
    }
    return file;
}

void save_ckpt(const std::string& path, const ModelParams& params, int64_t adam_step, int epoch) {
    atomic_write(path, [&](std::ostream& out) {
        write_bytes(out, kCkptMagic, 4);
        write_pod<uint32_t>(out, kCkptVersion);
        const ModelConfig& c = params.cfg;
        for (int v : {c.h, c.codebook, c.n_classes, c.layers, c.heads, c.dim, c.latent_dim, c.n_cond})
            write_pod<int32_t>(out, v);
        write_pod<double>(out, c.kl_weight);
        write_pod<double>(out, c.cond_dropout);
        write_pod<int64_t>(out, adam_step);
        write_pod<int32_t>(out, epoch);

        const auto tensors = params.all();
        write_pod<uint32_t>(out, static_cast<uint32_t>(tensors.size()));
        auto write_mat = [&](const Mat& m) {
            write_pod<uint64_t>(out, static_cast<uint64_t>(m.rows()));
            write_pod<uint64_t>(out, static_cast<uint64_t>(m.cols()));
            for (Eigen::Index r = 0; r < m.rows(); ++r)
                for (Eigen::Index cc = 0; cc < m.cols(); ++cc) write_pod<double>(out, m(r, cc));
        };
        for (const Param* p : tensors) {
            write_pod<uint32_t>(out, static_cast<uint32_t>(p->name.size()));
            write_bytes(out, p->name.data(), p->name.size());
            write_mat(p->value);
            write_mat(p->adam_m);
            write_mat(p->adam_v);
        }
    });
}

Checkpoint load_ckpt(const std::string& path, ModelParams& params) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    read_bytes(in, magic, 4, "magic");
    if (std::memcmp(magic, kCkptMagic, 4) != 0)
        throw std::runtime_error("not a checkpoint (bad magic): " + path);
    const auto version = read_pod<uint32_t>(in, "version");
    if (version != kCkptVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));

    Checkpoint ck;
    ck.config.h = read_pod<int32_t>(in, "h");
    ck.config.codebook = read_pod<int32_t>(in, "codebook");
    ck.config.n_classes = read_pod<int32_t>(in, "n_classes");
    ck.config.layers = read_pod<int32_t>(in, "layers");
    ck.config.heads = read_pod<int32_t>(in, "heads");
    ck.config.dim = read_pod<int32_t>(in, "dim");
    ck.config.latent_dim = read_pod<int32_t>(in, "latent_dim");
    ck.config.n_cond = read_pod<int32_t>(in, "n_cond");
    ck.config.kl_weight = read_pod<double>(in, "kl_weight");
    ck.config.cond_dropout = read_pod<double>(in, "cond_dropout");
    ck.config.validate();
    ck.adam_step = read_pod<int64_t>(in, "adam step");
    ck.epoch = read_pod<int32_t>(in, "epoch");

    params = init_params(ck.config, 0);
    const auto tensors = params.all();
    const auto count = read_pod<uint32_t>(in, "tensor count");
    if (count != tensors.size())
        throw std::runtime_error("checkpoint tensor count mismatch in " + path);

    auto read_mat = [&](Mat& m, const std::string& name) {
        const auto rows = read_pod<uint64_t>(in, "tensor rows");
        const auto cols = read_pod<uint64_t>(in, "tensor cols");
        if (rows != static_cast<uint64_t>(m.rows()) || cols != static_cast<uint64_t>(m.cols()))
            throw std::runtime_error("tensor shape mismatch for " + name);
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index cc = 0; cc < m.cols(); ++cc)
                m(r, cc) = read_pod<double>(in, "tensor data");
    };
    for (Param* p : tensors) {
        const auto name_len = read_pod<uint32_t>(in, "tensor name length");
        if (name_len > 256) throw std::runtime_error("tensor name too long in " + path);
        std::string name(name_len, '\0');
        read_bytes(in, name.data(), name_len, "tensor name");
        if (name != p->name)
            throw std::runtime_error("tensor order mismatch: expected " + p->name + ", got " + name);
        read_mat(p->value, name);
        read_mat(p->adam_m, name);
        read_mat(p->adam_v, name);
    }
    return ck;
}

}  // namespace lsar
