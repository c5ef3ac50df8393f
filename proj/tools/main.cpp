// Command-line front end: data generation, training, sampling, token-space
// editing, decoding benchmarks and the op-count verification table.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <numeric>
#include <optional>
#include <sstream>

#include "lsar/complexity.hpp"
#include "lsar/corpus.hpp"
#include "lsar/editing.hpp"
#include "lsar/sampler.hpp"

using json = nlohmann::json;
using namespace lsar;

namespace {

// config/usage problems exit 1, runtime failures exit 2
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainParams {
    double lr = 1e-3;
    int batch = 16;
    int epochs = 10;
    uint64_t seed = 1;
};

struct RunConfig {
    ModelConfig model;
    TrainParams train;
    SampleConfig sample;
};

void reject_unknown(const json& section, const char* name,
                    std::initializer_list<const char*> known) {
    for (const auto& [key, _] : section.items()) {
        if (std::find_if(known.begin(), known.end(),
                         [&](const char* k) { return key == k; }) == known.end())
            throw ConfigError(std::string("unknown key \"") + key + "\" in config section \"" +
                              name + "\"");
    }
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

RunConfig load_config_file(const std::string& path) {
    RunConfig rc;
    if (path.empty()) return rc;
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    reject_unknown(j, "(root)", {"model", "train", "sample"});
    if (j.contains("model")) {
        const json& m = j["model"];
        reject_unknown(m, "model",
                       {"h", "codebook", "classes", "layers", "heads", "dim", "latent_dim",
                        "cond_len", "kl_weight", "cond_dropout"});
        read_if(m, "h", rc.model.h);
        read_if(m, "codebook", rc.model.codebook);
        read_if(m, "classes", rc.model.n_classes);
        read_if(m, "layers", rc.model.layers);
        read_if(m, "heads", rc.model.heads);
        read_if(m, "dim", rc.model.dim);
        read_if(m, "latent_dim", rc.model.latent_dim);
        read_if(m, "cond_len", rc.model.n_cond);
        read_if(m, "kl_weight", rc.model.kl_weight);
        read_if(m, "cond_dropout", rc.model.cond_dropout);
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        reject_unknown(t, "train", {"lr", "batch", "epochs", "seed"});
        read_if(t, "lr", rc.train.lr);
        read_if(t, "batch", rc.train.batch);
        read_if(t, "epochs", rc.train.epochs);
        read_if(t, "seed", rc.train.seed);
    }
    if (j.contains("sample")) {
        const json& s = j["sample"];
        reject_unknown(s, "sample", {"temperature", "top_k", "top_p", "cfg_scale", "seed"});
        read_if(s, "temperature", rc.sample.temperature);
        read_if(s, "top_k", rc.sample.top_k);
        read_if(s, "top_p", rc.sample.top_p);
        read_if(s, "cfg_scale", rc.sample.cfg_scale);
        read_if(s, "seed", rc.sample.seed);
    }
    return rc;
}

json dump_config(const RunConfig& rc) {
    return json{{"model",
                 {{"h", rc.model.h},
                  {"codebook", rc.model.codebook},
                  {"classes", rc.model.n_classes},
                  {"layers", rc.model.layers},
                  {"heads", rc.model.heads},
                  {"dim", rc.model.dim},
                  {"latent_dim", rc.model.latent_dim},
                  {"cond_len", rc.model.n_cond},
                  {"kl_weight", rc.model.kl_weight},
                  {"cond_dropout", rc.model.cond_dropout}}},
                {"train",
                 {{"lr", rc.train.lr},
                  {"batch", rc.train.batch},
                  {"epochs", rc.train.epochs},
                  {"seed", rc.train.seed}}},
                {"sample",
                 {{"temperature", rc.sample.temperature},
                  {"top_k", rc.sample.top_k},
                  {"top_p", rc.sample.top_p},
                  {"cfg_scale", rc.sample.cfg_scale},
                  {"seed", rc.sample.seed}}}};
}

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string config_hash(const RunConfig& rc) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(dump_config(rc).dump())));
    return buf;
}

// flag overrides land on top of the config file
struct Overrides {
    std::optional<int> h, codebook, classes, layers, heads, dim, latent_dim, cond_len, top_k;
    std::optional<double> kl_weight, cond_dropout, lr, temperature, top_p, cfg_scale;
    std::optional<int> batch, epochs;
    std::optional<uint64_t> train_seed, seed;

    void apply(RunConfig& rc) const {
        auto set = [](auto& dst, const auto& src) {
            if (src) dst = *src;
        };
        set(rc.model.h, h);
        set(rc.model.codebook, codebook);
        set(rc.model.n_classes, classes);
        set(rc.model.layers, layers);
        set(rc.model.heads, heads);
        set(rc.model.dim, dim);
        set(rc.model.latent_dim, latent_dim);
        set(rc.model.n_cond, cond_len);
        set(rc.model.kl_weight, kl_weight);
        set(rc.model.cond_dropout, cond_dropout);
        set(rc.train.lr, lr);
        set(rc.train.batch, batch);
        set(rc.train.epochs, epochs);
        set(rc.train.seed, train_seed);
        set(rc.sample.temperature, temperature);
        set(rc.sample.top_k, top_k);
        set(rc.sample.top_p, top_p);
        set(rc.sample.cfg_scale, cfg_scale);
        set(rc.sample.seed, seed);
    }
};

uint64_t mix_seed(uint64_t seed, uint64_t salt) {
    uint64_t x = seed ^ (salt + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

void write_grid_csv(const std::string& path, const TokenGrid& grid) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (int r = 0; r < grid.shape.h; ++r) {
        for (int c = 0; c < grid.shape.h; ++c) {
            out << grid.at(r, c);
            out << (c == grid.shape.h - 1 ? '\n' : ',');
        }
    }
}

void write_grid_pgm(const std::string& path, const TokenGrid& grid, int codebook) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "P5\n" << grid.shape.h << " " << grid.shape.h << "\n255\n";
    for (int tok : grid.tokens) {
        const int gray = codebook > 1 ? tok * 255 / (codebook - 1) : 0;
        out.put(static_cast<char>(gray));
    }
}

void write_sidecar(const std::string& grid_path, const char* command, const RunConfig& rc,
                   int class_id, const RowVec& z, const json& extra = json::object()) {
    json meta{{"command", command},
              {"class", class_id},
              {"seed", rc.sample.seed},
              {"config_hash", config_hash(rc)},
              {"z", std::vector<double>(z.begin(), z.end())}};
    meta.update(extra);
    const std::string path = grid_path + ".meta.json";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << meta.dump(2) << "\n";
}

void emit_grid_outputs(const TokenGrid& grid, int codebook, const std::string& out_path,
                       const std::string& csv_path, const std::string& pgm_path, int class_id) {
    save_grids(out_path, {{class_id, grid}}, codebook);
    if (!csv_path.empty()) write_grid_csv(csv_path, grid);
    if (!pgm_path.empty()) write_grid_pgm(pgm_path, grid, codebook);
}

std::string human_count(int64_t v) {
    char buf[32];
    if (v >= 1000000000)
        std::snprintf(buf, sizeof(buf), "%.2fB", static_cast<double>(v) / 1e9);
    else if (v >= 1000000)
        std::snprintf(buf, sizeof(buf), "%.2fM", static_cast<double>(v) / 1e6);
    else if (v >= 1000)
        std::snprintf(buf, sizeof(buf), "%.2fK", static_cast<double>(v) / 1e3);
    else
        std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
    return buf;
}

// --- subcommands -------------------------------------------------------------

int cmd_gen_data(const std::string& spec_path, const std::string& out_path) {
    std::ifstream in(spec_path);
    if (!in) throw ConfigError("cannot open dataset spec: " + spec_path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("dataset spec parse error: " + std::string(e.what()));
    }
    reject_unknown(j, "(dataset)",
                   {"h", "codebook", "classes", "samples", "generator", "noise", "seed"});
    DatasetSpec spec;
    read_if(j, "h", spec.h);
    read_if(j, "codebook", spec.codebook);
    read_if(j, "classes", spec.n_classes);
    read_if(j, "samples", spec.n_samples);
    read_if(j, "noise", spec.noise_rate);
    read_if(j, "seed", spec.seed);
    if (j.contains("generator")) spec.generator = generator_from_name(j["generator"]);
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("invalid dataset spec: ") + e.what());
    }

    const auto data = generate(spec);
    save_grids(out_path, data, spec.codebook);
    std::cout << "wrote " << data.size() << " grids (h=" << spec.h << ", K=" << spec.codebook
              << ", " << generator_name(spec.generator) << ") to " << out_path << "\n";
    return 0;
}

int cmd_train(const RunConfig& rc, const std::string& data_path, const std::string& out_path,
              std::string metrics_path, const std::string& resume_path) {
    const GridFile data = load_grids(data_path);
    if (data.grids.empty()) throw std::runtime_error("empty dataset");

    ModelParams params;
    Adam opt(AdamConfig{.lr = rc.train.lr});
    int start_epoch = 0;
    if (!resume_path.empty()) {
        const Checkpoint ck = load_ckpt(resume_path, params);
        if (ck.config != rc.model)
            throw ConfigError("checkpoint model config differs from the requested one");
        start_epoch = ck.epoch;
        opt.set_step_count(ck.adam_step);
        std::cout << "resuming at epoch " << start_epoch << "\n";
    } else {
        params = init_params(rc.model, rc.train.seed);
    }

    if (data.grids.front().grid.shape.h != rc.model.h)
        throw std::runtime_error("dataset grid side does not match the model");
    if (data.codebook != rc.model.codebook)
        throw std::runtime_error("dataset codebook does not match the model");
    for (const auto& g : data.grids)
        if (g.class_id < 0 || g.class_id >= rc.model.n_classes)
            throw std::runtime_error("dataset class id outside the model's classes");

    if (metrics_path.empty()) metrics_path = out_path + ".metrics.csv";
    std::ofstream metrics(metrics_path, start_epoch > 0 ? std::ios::app : std::ios::trunc);
    if (!metrics) throw std::runtime_error("cannot write metrics: " + metrics_path);
    if (start_epoch == 0) metrics << "epoch,ce,kl,loss,seconds\n";

    std::vector<size_t> order(data.grids.size());

    for (int epoch = start_epoch; epoch < rc.train.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng rng(mix_seed(rc.train.seed, static_cast<uint64_t>(epoch)));
        // shuffle from the identity each time so interrupted runs resume exactly
        std::iota(order.begin(), order.end(), 0);
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<size_t>(rng.below(static_cast<int>(i)))]);

        double ce = 0.0, kl = 0.0;
        size_t seen = 0;
        for (size_t at = 0; at < order.size(); at += static_cast<size_t>(rc.train.batch)) {
            std::vector<std::pair<int, const TokenGrid*>> batch;
            for (size_t i = at; i < std::min(order.size(), at + static_cast<size_t>(rc.train.batch)); ++i)
                batch.push_back({data.grids[order[i]].class_id, &data.grids[order[i]].grid});
            const TrainStats s = train_step(params, opt, batch, rng);
            ce += s.ce * static_cast<double>(batch.size());
            kl += s.kl * static_cast<double>(batch.size());
            seen += batch.size();
        }
        ce /= static_cast<double>(seen);
        kl /= static_cast<double>(seen);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const double loss = ce + rc.model.kl_weight * kl;
        metrics << epoch << "," << ce << "," << kl << "," << loss << "," << secs << "\n";
        metrics.flush();
        std::cout << "epoch " << epoch << "  ce " << ce << "  kl " << kl << "  loss " << loss
                  << "  (" << secs << "s)\n";
        save_ckpt(out_path, params, opt.step_count(), epoch + 1);
    }
    std::cout << "checkpoint: " << out_path << "\nmetrics: " << metrics_path << "\n";
    return 0;
}

ModelParams load_model(const std::string& ckpt_path, RunConfig& rc) {
    ModelParams params;
    const Checkpoint ck = load_ckpt(ckpt_path, params);
    rc.model = ck.config;  // the checkpoint defines the architecture
    return params;
}

int cmd_sample(RunConfig rc, const std::string& ckpt_path, int class_id,
               const std::string& out_path, const std::string& csv_path,
               const std::string& pgm_path) {
    const ModelParams params = load_model(ckpt_path, rc);
    RowVec z;
    const TokenGrid grid = sample(params, class_id, rc.sample, &z);
    emit_grid_outputs(grid, rc.model.codebook, out_path, csv_path, pgm_path, class_id);
    write_sidecar(out_path, "sample", rc, class_id, z);
    std::cout << "sampled class " << class_id << " -> " << out_path << "\n";
    return 0;
}

int cmd_repaint(RunConfig rc, const std::string& ckpt_path, const std::string& in_path,
                int t_keep, int class_id, const std::string& out_path,
                const std::string& csv_path, const std::string& pgm_path) {
    const ModelParams params = load_model(ckpt_path, rc);
    const GridFile in = load_grids(in_path);
    if (in.grids.empty()) throw std::runtime_error("no grids in " + in_path);
    RowVec z;
    const TokenGrid grid = repaint(params, in.grids.front().grid, t_keep, class_id, rc.sample, &z);
    emit_grid_outputs(grid, rc.model.codebook, out_path, csv_path, pgm_path, class_id);
    write_sidecar(out_path, "repaint", rc, class_id, z, {{"keep", t_keep}});
    std::cout << "repainted with keep=" << t_keep << " -> " << out_path << "\n";
    return 0;
}

int cmd_inpaint(RunConfig rc, const std::string& ckpt_path, const std::string& in_path,
                const std::vector<int>& bbox_vals, int factor, int class_id,
                const std::string& out_path, const std::string& csv_path,
                const std::string& pgm_path) {
    if (bbox_vals.size() != 4) throw ConfigError("--bbox expects x1,y1,x2,y2");
    const ModelParams params = load_model(ckpt_path, rc);
    const GridFile in = load_grids(in_path);
    if (in.grids.empty()) throw std::runtime_error("no grids in " + in_path);
    const PixelBBox bbox{bbox_vals[0], bbox_vals[1], bbox_vals[2], bbox_vals[3]};
    RowVec z;
    const TokenGrid grid =
        inpaint(params, in.grids.front().grid, bbox, factor, class_id, rc.sample, &z);
    emit_grid_outputs(grid, rc.model.codebook, out_path, csv_path, pgm_path, class_id);
    write_sidecar(out_path, "inpaint", rc, class_id, z,
                  {{"bbox", bbox_vals}, {"factor", factor}});
    std::cout << "inpainted " << bbox_vals[0] << "," << bbox_vals[1] << "," << bbox_vals[2] << ","
              << bbox_vals[3] << " -> " << out_path << "\n";
    return 0;
}

int cmd_bench(RunConfig rc, const std::string& ckpt_path, int repeats,
              const std::string& csv_path) {
    ModelParams params;
    if (!ckpt_path.empty()) {
        params = load_model(ckpt_path, rc);
    } else {
        params = init_params(rc.model, rc.train.seed);
    }
    const BenchResult r = bench_decode(params, rc.model.h, repeats, rc.sample);
    std::printf("h=%d  layers=%d  dim=%d  repeats=%d\n", rc.model.h, rc.model.layers,
                rc.model.dim, repeats);
    std::printf("%-10s %12s\n", "path", "median ms");
    std::printf("%-10s %12.2f\n", "cached", r.cached_ms);
    std::printf("%-10s %12.2f\n", "uncached", r.uncached_ms);
    std::printf("speedup: %.2fx\n", r.speedup);
    if (!csv_path.empty()) {
        std::ofstream out(csv_path);
        if (!out) throw std::runtime_error("cannot write " + csv_path);
        out << "h,layers,dim,repeats,cached_ms,uncached_ms,speedup\n";
        out << rc.model.h << "," << rc.model.layers << "," << rc.model.dim << "," << repeats << ","
            << r.cached_ms << "," << r.uncached_ms << "," << r.speedup << "\n";
    }
    return 0;
}

int cmd_verify_complexity(int max_n, const std::string& csv_path) {
    std::vector<int64_t> ns;
    for (int64_t root = 1; root * root <= max_n; ++root) ns.push_back(root * root);
    const auto rows = complexity_report(ns, {1, 7, 1024});

    std::printf("%-14s %6s %5s %6s %16s %16s %8s %4s\n", "scheme", "N", "D", "steps", "mults",
                "closed_form", "approx", "ok");
    bool all_ok = true;
    for (const auto& r : rows) {
        std::printf("%-14s %6lld %5lld %6lld %16lld %16s %8s %4s\n", r.scheme.c_str(),
                    static_cast<long long>(r.n_tokens), static_cast<long long>(r.dim),
                    static_cast<long long>(r.steps), static_cast<long long>(r.mults),
                    r.closed_form.str().c_str(), human_count(r.mults).c_str(),
                    r.exact_match ? "yes" : "NO");
        all_ok = all_ok && r.exact_match;
    }
    if (!csv_path.empty()) {
        std::ofstream out(csv_path);
        if (!out) throw std::runtime_error("cannot write " + csv_path);
        out << "scheme,n,d,steps,mults,closed_form,exact_match\n";
        for (const auto& r : rows)
            out << r.scheme << "," << r.n_tokens << "," << r.dim << "," << r.steps << ","
                << r.mults << "," << r.closed_form.str() << "," << (r.exact_match ? 1 : 0) << "\n";
    }
    if (!all_ok) throw std::runtime_error("closed form disagreed with the summation");
    std::cout << rows.size() << " rows verified exactly\n";
    return 0;
}

int cmd_mask_dump(int h, int n_cond, bool with_mask) {
    const LOrderLayout layout = build_layout(GridShape{h});
    std::cout << "rank layout (h=" << h << "):\n" << render_layout(layout);
    if (with_mask) {
        const PaddedLayout padded = build_padded_layout(GridShape{h}, n_cond);
        std::cout << "\nblock-causal mask (n_cond=" << n_cond << ", length " << padded.length()
                  << "):\n"
                  << render_mask(build_block_causal_mask(padded));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"L-shaped semi-autoregressive token-grid generator"};
    app.set_help_flag("--help", "print help");  // keep --h free for the grid side
    app.require_subcommand(1);

    std::string config_path;
    bool dump = false;
    app.add_option("--config", config_path, "JSON config file")
        ->envname("LSAR_CONFIG")
        ->check(CLI::ExistingFile);
    app.add_flag("--dump-config", dump, "print the effective merged config and exit");

    Overrides ov;
    app.add_option("--h", ov.h, "grid side");
    app.add_option("--codebook", ov.codebook, "codebook size K");
    app.add_option("--classes", ov.classes, "number of condition classes");
    app.add_option("--layers", ov.layers, "transformer layers");
    app.add_option("--heads", ov.heads, "attention heads");
    app.add_option("--dim", ov.dim, "hidden dimension");
    app.add_option("--latent-dim", ov.latent_dim, "latent dimension");
    app.add_option("--cond-len", ov.cond_len, "condition prefix length");
    app.add_option("--kl-weight", ov.kl_weight, "KL weight beta");
    app.add_option("--cond-dropout", ov.cond_dropout, "condition dropout for guidance training");
    app.add_option("--lr", ov.lr, "learning rate");
    app.add_option("--batch", ov.batch, "batch size");
    app.add_option("--epochs", ov.epochs, "training epochs");
    app.add_option("--train-seed", ov.train_seed, "training seed");
    app.add_option("--temperature", ov.temperature, "sampling temperature");
    app.add_option("--top-k", ov.top_k, "top-k cutoff (0 = full codebook)");
    app.add_option("--top-p", ov.top_p, "nucleus mass");
    app.add_option("--cfg-scale", ov.cfg_scale, "guidance scale (0 = conditional only)");
    app.add_option("--seed", ov.seed, "sampling seed");
    app.fallthrough();

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    std::string spec_path, gen_out;
    gen->add_option("--spec", spec_path, "dataset spec JSON")->required()->check(CLI::ExistingFile);
    gen->add_option("--out", gen_out, "output grid file")->required();

    // train
    auto* train = app.add_subcommand("train", "teacher-forced training");
    std::string data_path, ckpt_out, metrics_path, resume_path;
    train->add_option("--data", data_path, "training grid file")->required();
    train->add_option("--out", ckpt_out, "checkpoint path")->required();
    train->add_option("--metrics", metrics_path, "metrics CSV (default <out>.metrics.csv)");
    train->add_option("--resume", resume_path, "resume from checkpoint");

    // sample / repaint / inpaint
    std::string ckpt_path, grid_out, grid_in, csv_out, pgm_out;
    int class_id = 0, keep_t = 0, factor = 8;
    std::vector<int> bbox_vals;

    auto* smp = app.add_subcommand("sample", "generate one grid");
    smp->add_option("--ckpt", ckpt_path, "model checkpoint")->required();
    smp->add_option("--class", class_id, "condition class")->required();
    smp->add_option("--out", grid_out, "output grid file")->required();
    smp->add_option("--csv", csv_out, "also write the grid as CSV text");
    smp->add_option("--pgm", pgm_out, "also write a PGM rendering");

    auto* rep = app.add_subcommand("repaint", "keep the first t x t tokens, regenerate the rest");
    rep->add_option("--ckpt", ckpt_path, "model checkpoint")->required();
    rep->add_option("--in", grid_in, "input grid file")->required();
    rep->add_option("--keep", keep_t, "blocks to keep (0..h)")->required();
    rep->add_option("--class", class_id, "condition class")->required();
    rep->add_option("--out", grid_out, "output grid file")->required();
    rep->add_option("--csv", csv_out, "also write the grid as CSV text");
    rep->add_option("--pgm", pgm_out, "also write a PGM rendering");

    auto* inp = app.add_subcommand("inpaint", "regenerate the blocks under a pixel bbox");
    inp->add_option("--ckpt", ckpt_path, "model checkpoint")->required();
    inp->add_option("--in", grid_in, "input grid file")->required();
    inp->add_option("--bbox", bbox_vals, "pixel bbox x1,y1,x2,y2")->required()->delimiter(',');
    inp->add_option("--factor", factor, "pixel downsampling factor f");
    inp->add_option("--class", class_id, "condition class")->required();
    inp->add_option("--out", grid_out, "output grid file")->required();
    inp->add_option("--csv", csv_out, "also write the grid as CSV text");
    inp->add_option("--pgm", pgm_out, "also write a PGM rendering");

    // bench
    auto* bench = app.add_subcommand("bench", "cached vs uncached decoding wall clock");
    int repeats = 3;
    std::string bench_ckpt;
    bench->add_option("--ckpt", bench_ckpt, "model checkpoint (default: fresh random model)");
    bench->add_option("--repeats", repeats, "median over this many runs");
    bench->add_option("--csv", csv_out, "machine-readable result");

    // verify-complexity
    auto* verify = app.add_subcommand("verify-complexity", "op-count identity table");
    int max_n = 4096;
    verify->add_option("--max-n", max_n, "largest token count to verify");
    verify->add_option("--csv", csv_out, "machine-readable table");

    // mask-dump (--h comes from the shared model options)
    auto* mask = app.add_subcommand("mask-dump", "print the rank layout and attention mask");
    int dump_n_cond = 1;
    bool with_mask = false;
    mask->add_option("--n-cond", dump_n_cond, "condition positions in the mask");
    mask->add_flag("--mask", with_mask, "also print the block-causal mask");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        RunConfig rc = load_config_file(config_path);
        ov.apply(rc);
        try {
            rc.model.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("invalid model config: ") + e.what());
        }
        if (dump) {
            std::cout << dump_config(rc).dump(2) << "\n";
            return 0;
        }

        if (gen->parsed()) return cmd_gen_data(spec_path, gen_out);
        if (train->parsed()) return cmd_train(rc, data_path, ckpt_out, metrics_path, resume_path);
        if (smp->parsed()) return cmd_sample(rc, ckpt_path, class_id, grid_out, csv_out, pgm_out);
        if (rep->parsed())
            return cmd_repaint(rc, ckpt_path, grid_in, keep_t, class_id, grid_out, csv_out, pgm_out);
        if (inp->parsed())
            return cmd_inpaint(rc, ckpt_path, grid_in, bbox_vals, factor, class_id, grid_out,
                               csv_out, pgm_out);
        if (bench->parsed()) return cmd_bench(rc, bench_ckpt, repeats, csv_out);
        if (verify->parsed()) return cmd_verify_complexity(max_n, csv_out);
        if (mask->parsed()) return cmd_mask_dump(ov.h.value_or(8), dump_n_cond, with_mask);
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
