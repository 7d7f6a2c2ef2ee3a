#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "damt/rng.hpp"

namespace damt::vol {

using Shape3 = std::array<int64_t, 3>;  // (D, H, W), z slowest

inline int64_t numel(const Shape3& s) { return s[0] * s[1] * s[2]; }

// Single-channel 3D scalar field with voxel spacing in mm.
struct Volume {
    Shape3 shape{0, 0, 0};
    std::array<float, 3> spacing{1.0f, 1.0f, 1.0f};
    std::vector<float> data;

    Volume() = default;
    Volume(Shape3 s, std::array<float, 3> sp) : shape(s), spacing(sp) {
        data.assign(size_t(numel(s)), 0.0f);
    }
    int64_t size() const { return int64_t(data.size()); }
    float& at(int64_t z, int64_t y, int64_t x) {
        return data[size_t((z * shape[1] + y) * shape[2] + x)];
    }
    float at(int64_t z, int64_t y, int64_t x) const {
        return data[size_t((z * shape[1] + y) * shape[2] + x)];
    }
};

// Integer region ids over the same grid; 0 is background.
struct ParcellationMap {
    Shape3 shape{0, 0, 0};
    std::array<float, 3> spacing{1.0f, 1.0f, 1.0f};
    int num_regions = 0;  // K
    std::vector<int16_t> labels;

    ParcellationMap() = default;
    ParcellationMap(Shape3 s, int k) : shape(s), num_regions(k) {
        labels.assign(size_t(numel(s)), 0);
    }
    int16_t& at(int64_t z, int64_t y, int64_t x) {
        return labels[size_t((z * shape[1] + y) * shape[2] + x)];
    }
    int16_t at(int64_t z, int64_t y, int64_t x) const {
        return labels[size_t((z * shape[1] + y) * shape[2] + x)];
    }
};

// Per-region scalars: R thickness proxies followed by R curvature proxies.
struct MorphologyTable {
    std::vector<int> region_ids;  // length R
    std::vector<double> values;   // length 2R
};

// 3 tissue groups x F features (F=24), z-scored against corpus statistics.
struct RadiomicsTargets {
    std::vector<double> values;         // length 3F
    std::vector<int> tissue_group;      // region id (1-based index) -> {1,2,3}
    std::array<bool, 3> degenerate{false, false, false};
};

struct Sample {
    std::string sample_id;
    Volume volume;
    ParcellationMap parcellation;
    MorphologyTable morphology;
    RadiomicsTargets radiomics;
};

// ---- operations ----

// Deterministic synthetic brain stand-in: ellipsoidal support, K seeded
// Voronoi regions, per-region base intensity plus band-limited texture.
// Morphology targets are analytic (equivalent-sphere diameter, normalized
// surface-to-volume); radiomics targets are raw features (z-scoring happens
// in the dataset preparation pass).
Sample generate_phantom(uint64_t seed, int size, int num_regions);

Volume read_volume(const std::string& path);
void write_volume(const Volume& v, const std::string& path);
ParcellationMap read_labels(const std::string& path);
void write_labels(const ParcellationMap& m, const std::string& path);

// Corner-aligned trilinear resampling.
Volume resize_trilinear(const Volume& v, const Shape3& target);
// Nearest-neighbour resampling for label maps.
ParcellationMap resize_nearest(const ParcellationMap& m, const Shape3& target);

Volume crop(const Volume& v, const Shape3& origin, const Shape3& shape);
ParcellationMap crop_labels(const ParcellationMap& m, const Shape3& origin, const Shape3& shape);

// Zero-mean unit-variance over the mask (support voxels); others untouched.
void normalize_in_place(Volume& v, const std::vector<uint8_t>& support_mask);

// Tight bounding box of nonzero labels: returns (origin, shape).
std::pair<Shape3, Shape3> support_bbox(const ParcellationMap& m);

}  // namespace damt::vol
