#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "damt/voldata.hpp"

namespace damt::rad {

// Direction-summed, symmetrized co-occurrence probabilities at distance 1
// (13 unique 3D offsets).
struct GlcmMatrix {
    int levels = 0;
    std::vector<double> p;  // levels x levels, row-major; sums to 1 unless degenerate
    bool degenerate = false;  // no valid voxel pairs
    double at(int i, int j) const { return p[size_t(i) * levels + j]; }  // i, j in [0, L)
};

// Gray level x zone size counts (26-connected zones).
struct GlszmMatrix {
    int levels = 0;
    std::map<std::pair<int, int64_t>, int64_t> counts;  // (level, zone size) -> count
    int64_t total_zones = 0;
};

struct FeatureVector {
    std::vector<std::string> names;
    std::vector<double> values;
};

const std::vector<std::string>& glcm_feature_names();   // 20, frozen order
const std::vector<std::string>& glszm_feature_names();  // 4, frozen order
// 72 names: "g{1..3}.{feature}"
std::vector<std::string> target_feature_names();

// Equal-width binning of masked intensities into [1, levels]; unmasked -> 0.
// A constant region maps to bin 1.
std::vector<int> quantize(const vol::Volume& v, const std::vector<uint8_t>& mask, int levels = 32);

GlcmMatrix glcm_matrix(const std::vector<int>& quantized, const std::vector<uint8_t>& mask,
                       const vol::Shape3& shape, int levels);
FeatureVector glcm_features(const GlcmMatrix& m);

GlszmMatrix glszm_matrix(const std::vector<int>& quantized, const std::vector<uint8_t>& mask,
                         const vol::Shape3& shape, int levels);
FeatureVector glszm_features(const std::vector<int>& quantized, const std::vector<uint8_t>& mask,
                             const vol::Shape3& shape, int levels);

// Raw (not yet z-scored) 72-value target vector: 24 features per tissue
// group in group order. Empty groups produce zeros and a degeneracy flag.
vol::RadiomicsTargets region_targets_raw(const vol::Volume& v, const vol::ParcellationMap& parc,
                                         const std::vector<int>& tissue_group, int levels = 32);

struct CorpusStats {
    std::vector<std::string> feature_names;
    std::vector<double> mean;
    std::vector<double> std_dev;
};

CorpusStats compute_corpus_stats(const std::vector<std::vector<double>>& raw_vectors);
// (v - mean) / std, 0 where std vanishes.
std::vector<double> zscore(const std::vector<double>& raw, const CorpusStats& stats);
void save_stats(const CorpusStats& stats, const std::string& path);
CorpusStats load_stats(const std::string& path);

}  // namespace damt::rad
