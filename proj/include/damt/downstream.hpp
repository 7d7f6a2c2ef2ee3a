#pragma once

#include <map>
#include <string>
#include <vector>

#include "damt/config.hpp"
#include "damt/voldata.hpp"

namespace damt::down {

struct FoldPlan {
    std::map<std::string, int> fold_of;
    int k = 5;
};

// Seeded stratified partition (round-robin within each shuffled class);
// classes with fewer than k members produce a warning.
FoldPlan kfold_split(const std::vector<std::string>& ids, const std::vector<int>& class_labels,
                     int k, uint64_t seed);

struct FoldMetrics {
    double acc = 0, auc = 0, mae = 0, r2 = 0;
};

struct MetricSet {
    bool classification = true;
    std::vector<FoldMetrics> folds;
    FoldMetrics mean;
};

// classify: scores are per-class probabilities, labels are class ids.
// Accuracy thresholds the positive-class probability at 0.5 (argmax); AUC is
// the rank (Mann-Whitney) statistic with tie correction, macro one-vs-rest
// for more than two classes. regress: scores[i][0] is the prediction.
FoldMetrics compute_metrics(const std::vector<std::vector<double>>& scores,
                            const std::vector<double>& labels, bool classify);

// Brute-force pair-counting AUC (test oracle).
double auc_pair_oracle(const std::vector<double>& scores, const std::vector<int>& labels);

// Fine-tunes a fresh linear head (plus the whole encoder) on pooled z.
// checkpoint_path empty = scratch arm. label_fraction stratified-subsamples
// the training folds.
MetricSet finetune_run(const cfg::RunConfig& cfg, const std::vector<vol::Sample>& samples,
                       const std::vector<double>& labels, bool classify,
                       const std::string& checkpoint_path = "", double label_fraction = 1.0);

struct SweepRow {
    std::string task;
    std::string arm;  // "pretrained" or "scratch"
    double fraction = 1.0;
    int fold = 0;
    FoldMetrics m;
};

std::vector<SweepRow> label_fraction_sweep(const cfg::RunConfig& cfg,
                                           const std::vector<vol::Sample>& samples,
                                           const std::vector<double>& labels, bool classify,
                                           const std::string& checkpoint_path,
                                           const std::vector<double>& fractions = {});

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);
void write_sweep_summary(const std::vector<SweepRow>& rows, const std::string& path);

}  // namespace damt::down
