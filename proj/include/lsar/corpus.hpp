#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lsar/net.hpp"

namespace lsar {

// Synthetic class-conditioned grid generators standing in for a stage-one
// tokenizer. Deterministic given the seed.
struct DatasetSpec {
    enum class Generator { Constant, Quadrant, Markov };

    int h = 8;
    int codebook = 16;
    int n_classes = 8;
    int n_samples = 256;
    Generator generator = Generator::Quadrant;
    double noise_rate = 0.0;
    uint64_t seed = 0;

    void validate() const;
};

struct LabeledGrid {
    int class_id = 0;
    TokenGrid grid;
};

std::vector<LabeledGrid> generate(const DatasetSpec& spec);

// Clean (noise-free) pattern a generator produces for a class; defined for
// Constant and Quadrant, which are deterministic per class.
TokenGrid class_pattern(const DatasetSpec& spec, int class_id);

DatasetSpec::Generator generator_from_name(const std::string& name);
std::string generator_name(DatasetSpec::Generator g);

// Binary grid container: magic "LSGD", version, h, codebook, count, then
// (class id, h*h uint16 tokens) per record. Little-endian throughout.
void save_grids(const std::string& path, const std::vector<LabeledGrid>& grids, int codebook);
struct GridFile {
    int codebook = 0;
    std::vector<LabeledGrid> grids;
};
GridFile load_grids(const std::string& path);

// Versioned checkpoint: magic "LSCK", config, named parameter tensors in
// declared order, then the Adam moments and step/epoch counters so training
// resumes exactly. Written atomically via a temp file + rename.
struct Checkpoint {
    ModelConfig config;
    int64_t adam_step = 0;
    int epoch = 0;  // next epoch to run
};

void save_ckpt(const std::string& path, const ModelParams& params, int64_t adam_step, int epoch);
Checkpoint load_ckpt(const std::string& path, ModelParams& params);

}  // namespace lsar
