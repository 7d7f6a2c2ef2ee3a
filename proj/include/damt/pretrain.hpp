#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "damt/augment.hpp"
#include "damt/config.hpp"
#include "damt/heads.hpp"
#include "damt/losses.hpp"
#include "damt/swin.hpp"

namespace damt::train {

// Linear warmup to base_lr, then cosine annealing to 0 at the final step.
double lr_at_step(int64_t step, const cfg::OptimConfig& oc, int64_t total_steps);

class AdamW {
public:
    AdamW(ParamStore& store, const cfg::OptimConfig& oc);
    void step(double lr);
    int64_t step_count() const { return t_; }
    void set_step_count(int64_t t) { t_ = t; }
    std::vector<Tensor>& moments_m() { return m_; }
    std::vector<Tensor>& moments_v() { return v_; }

private:
    ParamStore& store_;
    cfg::OptimConfig oc_;
    int64_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

struct StepStats {
    loss::LossReport report;
    double acc_rot = 0;
    double acc_loc = 0;
};

struct Model {
    ParamStore store;
    swin::SwinConfig swin_cfg;
    heads::HeadDims dims;

    static Model build(const cfg::RunConfig& cfg, uint64_t init_seed);
};

// One joint optimization step over a batch of ViewSets.
StepStats train_step(Model& model, const std::vector<aug::ViewSet>& batch,
                     const loss::LossWeights& weights, const loss::TaskFlags& flags, AdamW& opt,
                     double lr);

// ---- checkpointing (DMTC format) ----

struct CheckpointMeta {
    int64_t step = 0;
    int64_t epoch = 0;
    std::array<uint64_t, 4> rng_state{};
    nlohmann::ordered_json config;
};

void save_checkpoint(const Model& model, const AdamW& opt, const CheckpointMeta& meta,
                     const std::string& path);
// Verifies the payload hash and restores parameters and optimizer moments.
CheckpointMeta load_checkpoint(Model& model, AdamW* opt, const std::string& path);
nlohmann::ordered_json read_manifest(const std::string& path);
// Copies checkpoint params whose names and shapes match `store` (used to
// warm-start a downstream model from the pretraining encoder).
int load_matching_params(ParamStore& store, const std::string& path);

// ---- full runs ----

struct PretrainResult {
    std::string checkpoint_path;
    std::string metrics_path;
    int64_t steps = 0;
};

// Callback runs after every step; returning false stops the run early.
using StepCallback = std::function<bool(const StepStats&, int64_t step)>;

PretrainResult run_pretraining(const cfg::RunConfig& cfg, const std::vector<vol::Sample>& samples,
                               const std::string& out_dir, const StepCallback& callback = {},
                               const std::string& resume_path = "");

// Deterministic per-(run, sample, epoch) stream for data workers.
Rng view_rng(int64_t run_seed, const std::string& sample_id, int64_t epoch);

}  // namespace damt::train
