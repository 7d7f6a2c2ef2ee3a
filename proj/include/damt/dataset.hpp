#pragma once

#include <map>
#include <string>
#include <vector>

#include "damt/radiomics.hpp"
#include "damt/voldata.hpp"

namespace damt::data {

// On-disk phantom dataset layout under a directory:
//   sample_000.vol.dvol / sample_000.lab.dvol   volumes and label maps
//   targets.json                                 per-sample morphology +
//                                                raw radiomics + labels
//   radiomics_stats.json                         corpus feature statistics
struct DatasetLabels {
    std::map<std::string, int> class_of;      // separable classification label
    std::map<std::string, double> value_of;   // regression target (region count)
};

struct Dataset {
    std::vector<vol::Sample> samples;  // radiomics targets z-scored
    DatasetLabels labels;
    rad::CorpusStats stats;
};

// Generates `count` phantoms. marked_fraction of them (seeded choice) get a
// bright spherical marker at the support centre and class label 1: a strongly
// separable downstream classification target. Regression target is the
// region count.
void generate_dataset(const std::string& dir, int count, int size, int regions, uint64_t seed,
                      double marked_fraction = 0.0);

Dataset load_dataset(const std::string& dir);

// In-memory equivalent used by tests (no files).
Dataset make_dataset(int count, int size, int regions, uint64_t seed,
                     double marked_fraction = 0.0);

// Mixed-region-count corpus for regression harness tests; the regression
// target of each sample is its own region count.
Dataset make_mixed_regions_dataset(int count, int size, const std::vector<int>& region_counts,
                                   uint64_t seed);

}  // namespace damt::data
