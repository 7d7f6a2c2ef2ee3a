#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "damt/augment.hpp"
#include "damt/heads.hpp"
#include "damt/losses.hpp"
#include "damt/swin.hpp"

namespace damt::cfg {

struct DataConfig {
    int count = 16;
    int size = 64;
    int regions = 8;
    int levels = 32;  // radiomics quantization bins
};

struct OptimConfig {
    double base_lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 0.01;
    int warmup_steps = 100;
    int total_epochs = 300;
    int batch_size = 2;
    int max_steps = 0;  // 0: derived from total_epochs
    int checkpoint_interval = 0;  // 0: final checkpoint only
};

struct DownstreamConfig {
    double lr = 1e-4;
    int epochs = 50;
    int folds = 5;
    int batch_size = 4;
    int input_size = 64;
};

struct RuntimeConfig {
    int workers = 1;
};

struct RunConfig {
    int64_t seed = 42;
    std::string output_dir = "out";
    RuntimeConfig runtime;
    DataConfig data;
    aug::ViewGeometry augment;
    swin::SwinConfig model;
    heads::HeadDims head_dims;  // populated from model.num_regions etc.
    loss::LossWeights weights;
    loss::TaskFlags tasks;
    OptimConfig optim;
    DownstreamConfig downstream;

    nlohmann::ordered_json to_json() const;
};

// defaults <- file (optional) <- dotted-key overrides (later wins);
// unknown keys and type mismatches are rejected by name.
RunConfig parse_config(const std::string& path_or_empty,
                       const std::vector<std::pair<std::string, std::string>>& overrides = {});
RunConfig config_from_json(const nlohmann::ordered_json& j);

void write_resolved(const RunConfig& cfg, const std::string& out_dir);

}  // namespace damt::cfg
