#include "damt/augment.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace damt::aug {

RotationSpec RotationSpec::from_class(int cls) {
    if (cls < 0 || cls > 9) throw std::invalid_argument("rotation class must be in [0, 9]");
    RotationSpec s;
    s.class_id = cls;
    if (cls == 0) return s;
    const int axis_idx = (cls - 1) / 3;  // 0 = x, 1 = y, 2 = z
    s.axis = axis_idx == 0 ? Axis::X : (axis_idx == 1 ? Axis::Y : Axis::Z);
    s.quarter_turns = (cls - 1) % 3 + 1;
    return s;
}

RotationSpec RotationSpec::inverse() const {
    if (class_id == 0) return *this;
    const int inv_turns = (4 - quarter_turns) % 4;
    if (inv_turns == 0) return RotationSpec{};  // cannot happen for classes 1-9
    const int axis_idx = axis == Axis::X ? 0 : (axis == Axis::Y ? 1 : 2);
    return from_class(axis_idx * 3 + inv_turns);
}

namespace {

// One counterclockwise quarter turn (viewed from the positive axis end):
//   about z: out(z, y, x) = in(z, x, S-1-y)
//   about y: out(z, y, x) = in(x, y, S-1-z)
//   about x: out(z, y, x) = in(y, S-1-z, x)
template <typename GetT, typename SetT>
void rotate_once(RotationSpec::Axis axis, int64_t s, GetT get, SetT set) {
    for (int64_t z = 0; z < s; ++z)
        for (int64_t y = 0; y < s; ++y)
            for (int64_t x = 0; x < s; ++x) {
                switch (axis) {
                    case RotationSpec::Axis::Z: set(z, y, x, get(z, x, s - 1 - y)); break;
                    case RotationSpec::Axis::Y: set(z, y, x, get(x, y, s - 1 - z)); break;
                    case RotationSpec::Axis::X: set(z, y, x, get(y, s - 1 - z, x)); break;
                    default: set(z, y, x, get(z, y, x)); break;
                }
            }
}

void require_cubic(const vol::Shape3& shape) {
    if (shape[0] != shape[1] || shape[1] != shape[2])
        throw std::invalid_argument("rotate90: volume must be cubic");
}

}  // namespace

vol::Volume rotate90(const vol::Volume& v, const RotationSpec& spec) {
    require_cubic(v.shape);
    if (spec.class_id == 0) return v;
    vol::Volume cur = v;
    const int64_t s = v.shape[0];
    for (int turn = 0; turn < spec.quarter_turns; ++turn) {
        vol::Volume next(cur.shape, cur.spacing);
        rotate_once(
            spec.axis, s, [&](int64_t z, int64_t y, int64_t x) { return cur.at(z, y, x); },
            [&](int64_t z, int64_t y, int64_t x, float val) { next.at(z, y, x) = val; });
        cur = std::move(next);
    }
    return cur;
}

vol::ParcellationMap rotate90_labels(const vol::ParcellationMap& m, const RotationSpec& spec) {
    require_cubic(m.shape);
    if (spec.class_id == 0) return m;
    vol::ParcellationMap cur = m;
    const int64_t s = m.shape[0];
    for (int turn = 0; turn < spec.quarter_turns; ++turn) {
        vol::ParcellationMap next(cur.shape, cur.num_regions);
        next.spacing = cur.spacing;
        rotate_once(
            spec.axis, s, [&](int64_t z, int64_t y, int64_t x) { return cur.at(z, y, x); },
            [&](int64_t z, int64_t y, int64_t x, int16_t val) { next.at(z, y, x) = val; });
        cur = std::move(next);
    }
    return cur;
}

vol::Volume apply_intensity(const vol::Volume& v, float a, float b) {
    vol::Volume out = v;
    for (auto& x : out.data) x = a * x + b;
    return out;
}

vol::Volume intensity_jitter(const vol::Volume& v, Rng& rng, double scale, double shift,
                             float* a_out, float* b_out) {
    const float a = float(rng.uniform(1.0 - scale, 1.0 + scale));
    const float b = float(rng.uniform(-shift, shift));
    if (a_out) *a_out = a;
    if (b_out) *b_out = b;
    return apply_intensity(v, a, b);
}

int64_t MimMask::num_masked() const {
    int64_t n = 0;
    for (uint8_t c : grid) n += c;
    return n;
}

std::vector<float> MimMask::voxel_mask() const {
    const int64_t gd = grid_shape[0], gh = grid_shape[1], gw = grid_shape[2];
    const int64_t p = mask_patch;
    std::vector<float> out(size_t(gd * gh * gw * p * p * p), 0.0f);
    const int64_t vh = gh * p, vw = gw * p;
    for (int64_t cz = 0; cz < gd; ++cz)
        for (int64_t cy = 0; cy < gh; ++cy)
            for (int64_t cx = 0; cx < gw; ++cx) {
                if (!grid[size_t((cz * gh + cy) * gw + cx)]) continue;
                for (int64_t z = cz * p; z < (cz + 1) * p; ++z)
                    for (int64_t y = cy * p; y < (cy + 1) * p; ++y)
                        for (int64_t x = cx * p; x < (cx + 1) * p; ++x)
                            out[size_t((z * vh + y) * vw + x)] = 1.0f;
            }
    return out;
}

MimMask make_mim_mask(const vol::Shape3& view_shape, int mask_patch, double ratio, Rng& rng) {
    for (int i = 0; i < 3; ++i)
        if (view_shape[i] % mask_patch != 0)
            throw std::invalid_argument("make_mim_mask: view dims must be divisible by mask_patch");
    MimMask m;
    m.mask_patch = mask_patch;
    m.ratio = ratio;
    for (int i = 0; i < 3; ++i) m.grid_shape[i] = view_shape[i] / mask_patch;
    const int64_t cells = m.num_cells();
    const int64_t n_masked = std::llround(ratio * double(cells));
    m.grid.assign(size_t(cells), 0);

    // partial Fisher-Yates: exact cardinality, uniform without replacement
    std::vector<int64_t> order(size_t(cells), 0);
    for (int64_t i = 0; i < cells; ++i) order[size_t(i)] = i;
    for (int64_t i = 0; i < n_masked; ++i) {
        const int64_t j = i + rng.randint(cells - i);
        std::swap(order[size_t(i)], order[size_t(j)]);
        m.grid[size_t(order[size_t(i)])] = 1;
    }
    return m;
}

std::array<LocationPatch, 8> make_location_task(const vol::Volume& local_view, Rng& rng,
                                                int sub_patch_size, int max_gap,
                                                int location_input) {
    const vol::Shape3& shape = local_view.shape;
    if (shape[0] != shape[1] || shape[1] != shape[2])
        throw std::invalid_argument("make_location_task: view must be cubic");
    const int64_t side = shape[0];
    const int64_t s = sub_patch_size, g = max_gap;
    if (2 * (s + g) > side)
        throw std::invalid_argument("make_location_task: 2*(sub_patch + max_gap) exceeds view");

    const int64_t lower_half = side / 2;
    const int64_t upper_start = side - lower_half;

    std::array<LocationPatch, 8> out;
    for (int oct = 0; oct < 8; ++oct) {
        const int bz = (oct >> 2) & 1, by = (oct >> 1) & 1, bx = oct & 1;
        LocationPatch& lp = out[size_t(oct)];
        lp.octant_id = oct;
        lp.box_size = s;
        const int b[3] = {bz, by, bx};
        for (int axis = 0; axis < 3; ++axis) {
            const int64_t gap = rng.randint(g + 1);  // uniform in [0, max_gap]
            lp.gap[size_t(axis)] = gap;
            // offset from the octant's inner corner, pushing away from center
            lp.origin[size_t(axis)] = b[axis] == 0 ? lower_half - gap - s : upper_start + gap;
        }
        const vol::Volume box = vol::crop(local_view, lp.origin, {s, s, s});
        lp.patch = vol::resize_trilinear(box, {location_input, location_input, location_input});
    }
    return out;
}

namespace {

std::vector<int> present_region_ids(const vol::ParcellationMap& m) {
    std::set<int> ids;
    for (int16_t l : m.labels)
        if (l > 0) ids.insert(int(l));
    return std::vector<int>(ids.begin(), ids.end());
}

}  // namespace

ViewSet build_views(const vol::Sample& sample, Rng& rng, const ViewGeometry& geom) {
    const auto [bbox_origin, bbox_shape] = vol::support_bbox(sample.parcellation);
    for (int i = 0; i < 3; ++i)
        if (geom.local_crop > bbox_shape[size_t(i)])
            throw std::invalid_argument("build_views: local crop larger than support bounding box");

    ViewSet vs;
    vs.sample_id = sample.sample_id;
    vs.num_regions = sample.parcellation.num_regions;
    vs.morph_target = sample.morphology.values;
    vs.radio_target = sample.radiomics.values;
    vs.tissue_group = sample.radiomics.tissue_group;

    struct SourceView {
        vol::Volume vol;
        vol::ParcellationMap lab;
        bool is_global;
        int slot;
    };
    std::vector<SourceView> sources;

    // global view: tight support crop resized to global_size
    {
        vol::Volume gv = vol::crop(sample.volume, bbox_origin, bbox_shape);
        vol::ParcellationMap gl = vol::crop_labels(sample.parcellation, bbox_origin, bbox_shape);
        const vol::Shape3 target{geom.global_size, geom.global_size, geom.global_size};
        sources.push_back({vol::resize_trilinear(gv, target), vol::resize_nearest(gl, target),
                           true, 0});
    }

    // local views: random crops inside the support bounding box; corner crops
    // of the box can miss the support entirely, so redraw until informative
    for (int i = 0; i < geom.num_local; ++i) {
        const vol::Shape3 crop_shape{geom.local_crop, geom.local_crop, geom.local_crop};
        vol::Volume lv;
        vol::ParcellationMap ll;
        for (int attempt = 0; attempt < 100; ++attempt) {
            vol::Shape3 origin;
            for (int a = 0; a < 3; ++a)
                origin[size_t(a)] = bbox_origin[size_t(a)] +
                                    rng.randint(bbox_shape[size_t(a)] - geom.local_crop + 1);
            lv = vol::crop(sample.volume, origin, crop_shape);
            ll = vol::crop_labels(sample.parcellation, origin, crop_shape);
            bool any = false;
            for (int16_t l : ll.labels)
                if (l != 0) any = true;
            if (any) break;
        }
        const vol::Shape3 target{geom.local_size, geom.local_size, geom.local_size};
        sources.push_back({vol::resize_trilinear(lv, target), vol::resize_nearest(ll, target),
                           false, i + 1});
    }

    for (const auto& src : sources) {
        for (int a = 0; a < 2; ++a) {
            AugView av;
            av.is_global = src.is_global;
            av.slot = src.slot;
            av.aug_index = a;
            av.rotation = RotationSpec::from_class(int(rng.randint(10)));
            vol::Volume rotated = rotate90(src.vol, av.rotation);
            av.labels = rotate90_labels(src.lab, av.rotation);
            av.recon_target = intensity_jitter(rotated, rng, geom.jitter_scale, geom.jitter_shift);
            av.present_regions = present_region_ids(av.labels);
            if (a == 1) {
                av.mask = make_mim_mask(av.recon_target.shape, geom.mask_patch, geom.mask_ratio,
                                        rng);
                av.input = av.recon_target;
                const auto vm = av.mask->voxel_mask();
                for (size_t i = 0; i < av.input.data.size(); ++i)
                    if (vm[i] != 0.0f) av.input.data[i] = 0.0f;
            } else {
                av.input = av.recon_target;
            }
            vs.views.push_back(std::move(av));
        }
    }

    // location task on local source views only
    for (const auto& src : sources) {
        if (src.is_global) continue;
        vs.location.push_back(
            make_location_task(src.vol, rng, geom.sub_patch_size, geom.max_gap));
    }
    return vs;
}

}  // namespace damt::aug
