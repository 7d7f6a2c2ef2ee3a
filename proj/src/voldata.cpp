#include "damt/voldata.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "damt/common.hpp"
#include "damt/radiomics.hpp"

namespace damt::vol {

// ---- DVOL file format ----
// bytes 0-3  magic "DVOL"
// byte  4    version = 1
// byte  5    dtype: 1 = float32, 2 = int16
// bytes 6-7  reserved, zero
// 3 x uint32 LE dims (D, H, W)
// 3 x float32 LE spacing
// payload: D*H*W values, little-endian, z-major

namespace {

constexpr char kMagic[4] = {'D', 'V', 'O', 'L'};
constexpr size_t kHeaderSize = 8 + 12 + 12;

void put_u32(std::string& buf, uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& buf, float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    put_u32(buf, u);
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open file: " + path);
    std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return content;
}

struct Header {
    uint8_t dtype;
    Shape3 shape;
    std::array<float, 3> spacing;
};

Header parse_header(const std::string& buf, const std::string& path) {
    if (buf.size() < kHeaderSize) throw FormatError("truncated header in " + path);
    if (std::memcmp(buf.data(), kMagic, 4) != 0) throw FormatError("bad magic in " + path);
    if (uint8_t(buf[4]) != 1) throw FormatError("unsupported version in " + path);
    const uint8_t dtype = uint8_t(buf[5]);
    if (dtype != 1 && dtype != 2) throw FormatError("unsupported dtype in " + path);
    if (buf[6] != 0 || buf[7] != 0) throw FormatError("reserved bytes nonzero in " + path);
    Header h;
    h.dtype = dtype;
    for (int i = 0; i < 3; ++i) {
        uint32_t v = 0;
        std::memcpy(&v, buf.data() + 8 + 4 * i, 4);
        if (v == 0) throw FormatError("invalid shape (zero dimension) in " + path);
        h.shape[i] = int64_t(v);
    }
    for (int i = 0; i < 3; ++i) std::memcpy(&h.spacing[i], buf.data() + 20 + 4 * i, 4);
    const size_t elsize = h.dtype == 1 ? 4 : 2;
    const size_t expected = kHeaderSize + size_t(numel(h.shape)) * elsize;
    if (buf.size() != expected)
        throw FormatError("payload length mismatch in " + path + " (expected " +
                          std::to_string(expected) + " bytes, got " + std::to_string(buf.size()) +
                          ")");
    return h;
}

void write_dvol(const std::string& path, uint8_t dtype, const Shape3& shape,
                const std::array<float, 3>& spacing, const void* payload, size_t bytes) {
    std::string buf;
    buf.reserve(kHeaderSize + bytes);
    buf.append(kMagic, 4);
    buf.push_back(char(1));
    buf.push_back(char(dtype));
    buf.push_back(0);
    buf.push_back(0);
    for (int i = 0; i < 3; ++i) put_u32(buf, uint32_t(shape[i]));
    for (int i = 0; i < 3; ++i) put_f32(buf, spacing[i]);
    buf.append(reinterpret_cast<const char*>(payload), bytes);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f.write(buf.data(), std::streamsize(buf.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace

Volume read_volume(const std::string& path) {
    const std::string buf = read_file(path);
    const Header h = parse_header(buf, path);
    if (h.dtype != 1) throw FormatError("dtype is not float32 in " + path);
    Volume v(h.shape, h.spacing);
    std::memcpy(v.data.data(), buf.data() + kHeaderSize, v.data.size() * 4);
    return v;
}

void write_volume(const Volume& v, const std::string& path) {
    write_dvol(path, 1, v.shape, v.spacing, v.data.data(), v.data.size() * 4);
}

ParcellationMap read_labels(const std::string& path) {
    const std::string buf = read_file(path);
    const Header h = parse_header(buf, path);
    if (h.dtype != 2) throw FormatError("dtype is not int16 in " + path);
    ParcellationMap m(h.shape, 0);
    m.spacing = h.spacing;
    std::memcpy(m.labels.data(), buf.data() + kHeaderSize, m.labels.size() * 2);
    int16_t mx = 0;
    for (int16_t l : m.labels) mx = std::max(mx, l);
    m.num_regions = mx;
    return m;
}

void write_labels(const ParcellationMap& m, const std::string& path) {
    write_dvol(path, 2, m.shape, m.spacing, m.labels.data(), m.labels.size() * 2);
}

// ---- resampling / cropping ----

Volume resize_trilinear(const Volume& v, const Shape3& target) {
    for (int i = 0; i < 3; ++i)
        if (target[i] < 1) throw std::invalid_argument("resize_trilinear: target dims must be >= 1");
    Volume out(target, v.spacing);
    for (int i = 0; i < 3; ++i)
        out.spacing[i] = target[i] > 1 ? v.spacing[i] * float(v.shape[i] - 1) / float(target[i] - 1)
                                       : v.spacing[i] * float(v.shape[i]);

    std::array<double, 3> step;
    for (int i = 0; i < 3; ++i)
        step[i] = target[i] > 1 ? double(v.shape[i] - 1) / double(target[i] - 1) : 0.0;

    for (int64_t z = 0; z < target[0]; ++z) {
        const double fz = double(z) * step[0];
        const int64_t z0 = int64_t(fz);
        const int64_t z1 = std::min(z0 + 1, v.shape[0] - 1);
        const float wz = float(fz - double(z0));
        for (int64_t y = 0; y < target[1]; ++y) {
            const double fy = double(y) * step[1];
            const int64_t y0 = int64_t(fy);
            const int64_t y1 = std::min(y0 + 1, v.shape[1] - 1);
            const float wy = float(fy - double(y0));
            for (int64_t x = 0; x < target[2]; ++x) {
                const double fx = double(x) * step[2];
                const int64_t x0 = int64_t(fx);
                const int64_t x1 = std::min(x0 + 1, v.shape[2] - 1);
                const float wx = float(fx - double(x0));
                const float c00 = v.at(z0, y0, x0) * (1 - wx) + v.at(z0, y0, x1) * wx;
                const float c01 = v.at(z0, y1, x0) * (1 - wx) + v.at(z0, y1, x1) * wx;
                const float c10 = v.at(z1, y0, x0) * (1 - wx) + v.at(z1, y0, x1) * wx;
                const float c11 = v.at(z1, y1, x0) * (1 - wx) + v.at(z1, y1, x1) * wx;
                const float c0 = c00 * (1 - wy) + c01 * wy;
                const float c1 = c10 * (1 - wy) + c11 * wy;
                out.at(z, y, x) = c0 * (1 - wz) + c1 * wz;
            }
        }
    }
    return out;
}

ParcellationMap resize_nearest(const ParcellationMap& m, const Shape3& target) {
    for (int i = 0; i < 3; ++i)
        if (target[i] < 1) throw std::invalid_argument("resize_nearest: target dims must be >= 1");
    ParcellationMap out(target, m.num_regions);
    out.spacing = m.spacing;
    std::array<double, 3> step;
    for (int i = 0; i < 3; ++i)
        step[i] = target[i] > 1 ? double(m.shape[i] - 1) / double(target[i] - 1) : 0.0;
    for (int64_t z = 0; z < target[0]; ++z) {
        const int64_t sz = int64_t(std::lround(double(z) * step[0]));
        for (int64_t y = 0; y < target[1]; ++y) {
            const int64_t sy = int64_t(std::lround(double(y) * step[1]));
            for (int64_t x = 0; x < target[2]; ++x) {
                const int64_t sx = int64_t(std::lround(double(x) * step[2]));
                out.at(z, y, x) = m.at(std::min(sz, m.shape[0] - 1), std::min(sy, m.shape[1] - 1),
                                       std::min(sx, m.shape[2] - 1));
            }
        }
    }
    return out;
}

namespace {

void check_crop_bounds(const Shape3& vol_shape, const Shape3& origin, const Shape3& shape) {
    for (int i = 0; i < 3; ++i) {
        if (shape[i] < 1) throw std::invalid_argument("crop: shape dims must be >= 1");
        if (origin[i] < 0 || origin[i] + shape[i] > vol_shape[i])
            throw std::invalid_argument("crop: box out of bounds");
    }
}

}  // namespace

Volume crop(const Volume& v, const Shape3& origin, const Shape3& shape) {
    check_crop_bounds(v.shape, origin, shape);
    Volume out(shape, v.spacing);
    for (int64_t z = 0; z < shape[0]; ++z)
        for (int64_t y = 0; y < shape[1]; ++y)
            std::memcpy(out.data.data() + (z * shape[1] + y) * shape[2],
                        v.data.data() +
                            ((origin[0] + z) * v.shape[1] + origin[1] + y) * v.shape[2] +
                            origin[2],
                        size_t(shape[2]) * 4);
    return out;
}

ParcellationMap crop_labels(const ParcellationMap& m, const Shape3& origin, const Shape3& shape) {
    check_crop_bounds(m.shape, origin, shape);
    ParcellationMap out(shape, m.num_regions);
    out.spacing = m.spacing;
    for (int64_t z = 0; z < shape[0]; ++z)
        for (int64_t y = 0; y < shape[1]; ++y)
            std::memcpy(out.labels.data() + (z * shape[1] + y) * shape[2],
                        m.labels.data() +
                            ((origin[0] + z) * m.shape[1] + origin[1] + y) * m.shape[2] +
                            origin[2],
                        size_t(shape[2]) * 2);
    return out;
}

void normalize_in_place(Volume& v, const std::vector<uint8_t>& support_mask) {
    double sum = 0.0;
    int64_t count = 0;
    for (size_t i = 0; i < v.data.size(); ++i) {
        if (support_mask[i]) {
            sum += v.data[i];
            ++count;
        }
    }
    if (count == 0) throw std::invalid_argument("normalize: empty support mask");
    const double mean = sum / double(count);
    double var = 0.0;
    for (size_t i = 0; i < v.data.size(); ++i) {
        if (support_mask[i]) {
            const double d = v.data[i] - mean;
            var += d * d;
        }
    }
    var /= double(count);
    const double rstd = var > 0 ? 1.0 / std::sqrt(var) : 1.0;
    for (size_t i = 0; i < v.data.size(); ++i)
        if (support_mask[i]) v.data[i] = float((v.data[i] - mean) * rstd);
}

std::pair<Shape3, Shape3> support_bbox(const ParcellationMap& m) {
    Shape3 lo = m.shape, hi = {-1, -1, -1};
    for (int64_t z = 0; z < m.shape[0]; ++z)
        for (int64_t y = 0; y < m.shape[1]; ++y)
            for (int64_t x = 0; x < m.shape[2]; ++x)
                if (m.at(z, y, x) != 0) {
                    lo[0] = std::min(lo[0], z);
                    lo[1] = std::min(lo[1], y);
                    lo[2] = std::min(lo[2], x);
                    hi[0] = std::max(hi[0], z);
                    hi[1] = std::max(hi[1], y);
                    hi[2] = std::max(hi[2], x);
                }
    if (hi[0] < 0) throw std::invalid_argument("support_bbox: empty label map");
    return {lo, {hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1}};
}

// ---- phantom generator ----

namespace {

// Hash-based lattice value in [-1, 1]; pure function of its arguments.
float lattice_noise(uint64_t seed, int region, int64_t cx, int64_t cy, int64_t cz) {
    uint64_t x = seed ^ (uint64_t(region) * 0x9e3779b97f4a7c15ULL);
    x ^= uint64_t(cx) * 0xbf58476d1ce4e5b9ULL;
    x ^= uint64_t(cy) * 0x94d049bb133111ebULL;
    x ^= uint64_t(cz) * 0xd6e8feb86659fd93ULL;
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return float(double(z >> 11) * 0x1.0p-53) * 2.0f - 1.0f;
}

// Band-limited value noise: trilinear interpolation of a seeded lattice with
// per-region cell size (correlation length).
float value_noise(uint64_t seed, int region, int cell, int64_t z, int64_t y, int64_t x) {
    const double fz = double(z) / cell, fy = double(y) / cell, fx = double(x) / cell;
    const int64_t z0 = int64_t(std::floor(fz)), y0 = int64_t(std::floor(fy)),
                  x0 = int64_t(std::floor(fx));
    const float wz = float(fz - double(z0)), wy = float(fy - double(y0)),
                wx = float(fx - double(x0));
    auto n = [&](int64_t a, int64_t b, int64_t c) { return lattice_noise(seed, region, c, b, a); };
    const float c00 = n(z0, y0, x0) * (1 - wx) + n(z0, y0, x0 + 1) * wx;
    const float c01 = n(z0, y0 + 1, x0) * (1 - wx) + n(z0, y0 + 1, x0 + 1) * wx;
    const float c10 = n(z0 + 1, y0, x0) * (1 - wx) + n(z0 + 1, y0, x0 + 1) * wx;
    const float c11 = n(z0 + 1, y0 + 1, x0) * (1 - wx) + n(z0 + 1, y0 + 1, x0 + 1) * wx;
    const float c0 = c00 * (1 - wy) + c01 * wy;
    const float c1 = c10 * (1 - wy) + c11 * wy;
    return c0 * (1 - wz) + c1 * wz;
}

}  // namespace

Sample generate_phantom(uint64_t seed, int size, int num_regions) {
    if (size < 32) throw std::invalid_argument("generate_phantom: size must be >= 32");
    if (num_regions < 4 || num_regions > 120)
        throw std::invalid_argument("generate_phantom: num_regions must be in [4, 120]");

    const int K = num_regions;
    Rng rng(seed ^ 0xda3717b00dull);
    const Shape3 shape{size, size, size};
    const std::array<float, 3> spacing{1.25f, 1.25f, 1.25f};

    // ellipsoidal support with per-axis jittered semi-axes
    std::array<double, 3> center, semi;
    for (int i = 0; i < 3; ++i) {
        center[i] = size * 0.5 + rng.uniform(-0.02, 0.02) * size;
        semi[i] = size * rng.uniform(0.33, 0.45);
    }

    ParcellationMap parc(shape, K);
    std::vector<uint8_t> support(size_t(numel(shape)), 0);
    int64_t support_count = 0;
    for (int64_t z = 0; z < size; ++z)
        for (int64_t y = 0; y < size; ++y)
            for (int64_t x = 0; x < size; ++x) {
                const double dz = (z - center[0]) / semi[0];
                const double dy = (y - center[1]) / semi[1];
                const double dx = (x - center[2]) / semi[2];
                if (dz * dz + dy * dy + dx * dx <= 1.0) {
                    support[size_t((z * size + y) * size + x)] = 1;
                    ++support_count;
                }
            }
    if (int64_t(K) > support_count)
        throw std::invalid_argument("generate_phantom: more regions than support voxels");

    // distinct Voronoi sites inside the support
    std::vector<Shape3> sites;
    sites.reserve(size_t(K));
    while (int(sites.size()) < K) {
        Shape3 p{rng.randint(size), rng.randint(size), rng.randint(size)};
        if (!support[size_t((p[0] * size + p[1]) * size + p[2])]) continue;
        bool dup = false;
        for (const auto& s : sites)
            if (s == p) dup = true;
        if (!dup) sites.push_back(p);
    }

    for (int64_t z = 0; z < size; ++z)
        for (int64_t y = 0; y < size; ++y)
            for (int64_t x = 0; x < size; ++x) {
                if (!support[size_t((z * size + y) * size + x)]) continue;
                int best = 0;
                int64_t best_d = INT64_MAX;
                for (int r = 0; r < K; ++r) {
                    const int64_t dz = z - sites[r][0], dy = y - sites[r][1], dx = x - sites[r][2];
                    const int64_t d = dz * dz + dy * dy + dx * dx;
                    if (d < best_d) {
                        best_d = d;
                        best = r;
                    }
                }
                parc.at(z, y, x) = int16_t(best + 1);
            }

    // per-region base intensities: shuffled even spread over [-1, 1]
    std::vector<int> perm(size_t(K), 0);
    for (int r = 0; r < K; ++r) perm[size_t(r)] = r;
    rng.shuffle(perm);
    std::vector<float> base(size_t(K), 0.0f);
    for (int r = 0; r < K; ++r)
        base[size_t(r)] = K > 1 ? -1.0f + 2.0f * float(perm[size_t(r)]) / float(K - 1) : 0.0f;

    Volume volume(shape, spacing);
    const uint64_t noise_seed = rng.next_u64();
    constexpr float kTextureAmp = 0.35f;
    for (int64_t z = 0; z < size; ++z)
        for (int64_t y = 0; y < size; ++y)
            for (int64_t x = 0; x < size; ++x) {
                const int16_t lab = parc.at(z, y, x);
                if (lab == 0) continue;
                const int corr_len = 2 + (int(lab) - 1) % 5;  // region correlation length 2..6
                volume.at(z, y, x) = base[size_t(lab - 1)] +
                                     kTextureAmp * value_noise(noise_seed, lab, corr_len, z, y, x);
            }
    normalize_in_place(volume, support);

    // analytic morphology proxies from region geometry
    std::vector<int64_t> vol_count(size_t(K), 0);
    std::vector<int64_t> face_count(size_t(K), 0);
    const auto lab_at = [&](int64_t z, int64_t y, int64_t x) -> int16_t {
        if (z < 0 || z >= size || y < 0 || y >= size || x < 0 || x >= size) return 0;
        return parc.at(z, y, x);
    };
    for (int64_t z = 0; z < size; ++z)
        for (int64_t y = 0; y < size; ++y)
            for (int64_t x = 0; x < size; ++x) {
                const int16_t lab = parc.at(z, y, x);
                if (lab == 0) continue;
                ++vol_count[size_t(lab - 1)];
                const int16_t n[6] = {lab_at(z - 1, y, x), lab_at(z + 1, y, x), lab_at(z, y - 1, x),
                                      lab_at(z, y + 1, x), lab_at(z, y, x - 1), lab_at(z, y, x + 1)};
                for (int16_t nb : n)
                    if (nb != lab) ++face_count[size_t(lab - 1)];
            }

    MorphologyTable morph;
    morph.region_ids.resize(size_t(K));
    morph.values.assign(size_t(2 * K), 0.0);
    for (int r = 0; r < K; ++r) {
        morph.region_ids[size_t(r)] = r + 1;
        const double vr = double(std::max<int64_t>(vol_count[size_t(r)], 1));
        const double d_eq = std::cbrt(6.0 * vr / M_PI);  // equivalent-sphere diameter, voxels
        const double s_over_v = double(face_count[size_t(r)]) / vr;
        morph.values[size_t(r)] = d_eq / double(size);             // thickness proxy
        morph.values[size_t(K + r)] = s_over_v * d_eq / 6.0;       // curvature proxy (1 = ball)
    }

    Sample s;
    s.sample_id = "phantom-s" + std::to_string(seed) + "-n" + std::to_string(size) + "-k" +
                  std::to_string(K);
    s.volume = std::move(volume);
    s.parcellation = std::move(parc);
    s.morphology = std::move(morph);

    // raw (un-z-scored) radiomics targets; the corpus pass standardizes them
    std::vector<int> groups(size_t(K), 0);
    for (int r = 0; r < K; ++r) groups[size_t(r)] = (r % 3) + 1;  // round-robin tissue groups
    s.radiomics = rad::region_targets_raw(s.volume, s.parcellation, groups, 32);
    return s;
}

}  // namespace damt::vol
