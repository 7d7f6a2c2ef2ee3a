#pragma once

#include <array>
#include <optional>
#include <vector>

#include "damt/rng.hpp"
#include "damt/voldata.hpp"

namespace damt::aug {

// The 10 axis-aligned rotation classes: class 0 is the identity; classes 1-9
// enumerate (axis, quarter turns) = (x,1..3), (y,1..3), (z,1..3).
// One quarter turn is counterclockwise viewed from the positive end of the
// axis, with axes ordered (z, y, x), z slowest.
struct RotationSpec {
    enum class Axis { None, X, Y, Z };
    int class_id = 0;
    Axis axis = Axis::None;
    int quarter_turns = 0;

    static RotationSpec from_class(int cls);
    RotationSpec inverse() const;
};

struct MimMask {
    std::array<int64_t, 3> grid_shape{0, 0, 0};  // cells per axis
    int mask_patch = 16;
    double ratio = 0.75;
    std::vector<uint8_t> grid;  // true = masked cell

    int64_t num_cells() const { return grid_shape[0] * grid_shape[1] * grid_shape[2]; }
    int64_t num_masked() const;
    // 1.0 on masked voxels, 0.0 elsewhere, over the full view resolution.
    std::vector<float> voxel_mask() const;
};

struct LocationPatch {
    int octant_id = 0;                    // 4*bz + 2*by + bx
    std::array<int64_t, 3> gap{0, 0, 0};  // sampled per-axis offsets
    vol::Shape3 origin{0, 0, 0};          // source box in the local view
    int64_t box_size = 0;
    vol::Volume patch;  // resized to the location input size
};

struct AugView {
    vol::Volume input;          // augmented view, masked if mask is set
    vol::Volume recon_target;   // augmented view before masking
    vol::ParcellationMap labels;
    RotationSpec rotation;
    std::optional<MimMask> mask;
    std::vector<int> present_regions;  // sorted region ids with >= 1 voxel
    bool is_global = false;
    int slot = 0;  // 0 = global, 1..num_local = locals
    int aug_index = 0;
};

// 1 global + num_local local source views, each augmented twice; the second
// augmentation of every pair carries the MIM mask.
struct ViewSet {
    std::string sample_id;
    std::vector<AugView> views;                          // 2 * (1 + num_local)
    std::vector<std::array<LocationPatch, 8>> location;  // one set per local slot
    std::vector<double> morph_target;                    // 2R
    std::vector<double> radio_target;                    // 72
    std::vector<int> tissue_group;                       // region id -> {1,2,3}
    int num_regions = 0;
};

struct ViewGeometry {
    int global_size = 128;
    int local_crop = 56;
    int local_size = 64;
    int num_local = 3;
    int mask_patch = 16;
    double mask_ratio = 0.75;
    int sub_patch_size = 24;
    int max_gap = 8;
    double jitter_scale = 0.1;
    double jitter_shift = 0.1;
};

// Location sub-patches are resized to 32^3 so one encoder serves all tasks.
constexpr int kLocationInputSize = 32;

// Exact array rotation; requires a cubic volume.
vol::Volume rotate90(const vol::Volume& v, const RotationSpec& spec);
vol::ParcellationMap rotate90_labels(const vol::ParcellationMap& m, const RotationSpec& spec);

// v' = a*v + b
vol::Volume apply_intensity(const vol::Volume& v, float a, float b);
// a ~ U[1-scale, 1+scale], b ~ U[-shift, shift]; drawn values reported via
// a_out/b_out when given.
vol::Volume intensity_jitter(const vol::Volume& v, Rng& rng, double scale, double shift,
                             float* a_out = nullptr, float* b_out = nullptr);

MimMask make_mim_mask(const vol::Shape3& view_shape, int mask_patch, double ratio, Rng& rng);

// Eight non-overlapping sub-patches, one per octant, with random per-axis
// gaps pushing each patch away from the view center.
std::array<LocationPatch, 8> make_location_task(const vol::Volume& local_view, Rng& rng,
                                                int sub_patch_size, int max_gap,
                                                int location_input = kLocationInputSize);

ViewSet build_views(const vol::Sample& sample, Rng& rng, const ViewGeometry& geom);

}  // namespace damt::aug
