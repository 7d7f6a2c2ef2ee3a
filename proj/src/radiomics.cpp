#include "damt/radiomics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace damt::rad {

namespace {

double log2_safe(double x) { return x > 0 ? std::log2(x) : 0.0; }

// 13 unique distance-1 offsets (z, y, x), one per +/- pair.
constexpr int kOffsets[13][3] = {
    {0, 0, 1}, {0, 1, 0}, {1, 0, 0}, {0, 1, 1}, {0, 1, -1}, {1, 0, 1}, {1, 0, -1},
    {1, 1, 0}, {1, -1, 0}, {1, 1, 1}, {1, 1, -1}, {1, -1, 1}, {1, -1, -1},
};

}  // namespace

const std::vector<std::string>& glcm_feature_names() {
    static const std::vector<std::string> names = {
        "autocorrelation", "joint_average", "cluster_prominence", "cluster_shade",
        "cluster_tendency", "contrast", "correlation", "difference_average",
        "difference_entropy", "difference_variance", "inverse_difference",
        "inverse_difference_moment", "idmn", "idn", "inverse_variance", "joint_energy",
        "joint_entropy", "maximum_probability", "sum_entropy", "sum_of_squares",
    };
    return names;
}

const std::vector<std::string>& glszm_feature_names() {
    static const std::vector<std::string> names = {
        "small_area_emphasis", "large_area_emphasis", "zone_entropy",
        "gray_level_nonuniformity",
    };
    return names;
}

std::vector<std::string> target_feature_names() {
    std::vector<std::string> out;
    for (int g = 1; g <= 3; ++g) {
        for (const auto& n : glcm_feature_names()) out.push_back("g" + std::to_string(g) + "." + n);
        for (const auto& n : glszm_feature_names()) out.push_back("g" + std::to_string(g) + "." + n);
    }
    return out;
}

std::vector<int> quantize(const vol::Volume& v, const std::vector<uint8_t>& mask, int levels) {
    if (mask.size() != v.data.size()) throw std::invalid_argument("quantize: mask size mismatch");
    float lo = 0, hi = 0;
    bool any = false;
    for (size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        if (!any) {
            lo = hi = v.data[i];
            any = true;
        } else {
            lo = std::min(lo, v.data[i]);
            hi = std::max(hi, v.data[i]);
        }
    }
    if (!any) throw std::invalid_argument("quantize: empty mask");

    std::vector<int> q(v.data.size(), 0);
    const double width = (double(hi) - double(lo)) / double(levels);
    for (size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        if (width <= 0) {
            q[i] = 1;  // constant region
        } else {
            int b = 1 + int(std::floor((double(v.data[i]) - double(lo)) / width));
            q[i] = std::min(b, levels);
        }
    }
    return q;
}

GlcmMatrix glcm_matrix(const std::vector<int>& quantized, const std::vector<uint8_t>& mask,
                       const vol::Shape3& shape, int levels) {
    GlcmMatrix m;
    m.levels = levels;
    m.p.assign(size_t(levels) * levels, 0.0);
    const int64_t D = shape[0], H = shape[1], W = shape[2];
    auto idx = [&](int64_t z, int64_t y, int64_t x) { return size_t((z * H + y) * W + x); };

    int64_t pairs = 0;
    for (int64_t z = 0; z < D; ++z)
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) {
                const size_t i0 = idx(z, y, x);
                if (!mask[i0]) continue;
                const int a = quantized[i0];
                for (const auto& off : kOffsets) {
                    const int64_t z2 = z + off[0], y2 = y + off[1], x2 = x + off[2];
                    if (z2 < 0 || z2 >= D || y2 < 0 || y2 >= H || x2 < 0 || x2 >= W) continue;
                    const size_t i1 = idx(z2, y2, x2);
                    if (!mask[i1]) continue;
                    const int b = quantized[i1];
                    // symmetric: count the pair in both orders
                    m.p[size_t(a - 1) * levels + (b - 1)] += 1.0;
                    m.p[size_t(b - 1) * levels + (a - 1)] += 1.0;
                    pairs += 2;
                }
            }
    if (pairs == 0) {
        m.degenerate = true;
        return m;
    }
    for (auto& v : m.p) v /= double(pairs);
    return m;
}

FeatureVector glcm_features(const GlcmMatrix& m) {
    FeatureVector fv;
    fv.names = glcm_feature_names();
    fv.values.assign(fv.names.size(), 0.0);
    if (m.degenerate) return fv;

    const int L = m.levels;
    std::vector<double> px(size_t(L), 0.0);        // marginal (== py by symmetry)
    std::vector<double> pxy(size_t(2 * L + 1), 0.0);   // p_{x+y}(k), k = i+j in [2, 2L]
    std::vector<double> pxmy(size_t(L), 0.0);      // p_{x-y}(k), k = |i-j| in [0, L-1]
    double mu = 0.0;
    for (int i = 1; i <= L; ++i)
        for (int j = 1; j <= L; ++j) {
            const double p = m.at(i - 1, j - 1);
            px[size_t(i - 1)] += p;
            pxy[size_t(i + j)] += p;
            pxmy[size_t(std::abs(i - j))] += p;
            mu += i * p;
        }
    double sigma2 = 0.0;
    for (int i = 1; i <= L; ++i) sigma2 += (i - mu) * (i - mu) * px[size_t(i - 1)];

    double autocorr = 0, clus_prom = 0, clus_shade = 0, clus_tend = 0, contrast = 0;
    double energy = 0, entropy = 0, maxprob = 0, ssq = 0;
    for (int i = 1; i <= L; ++i)
        for (int j = 1; j <= L; ++j) {
            const double p = m.at(i - 1, j - 1);
            const double cpl = i + j - 2 * mu;
            autocorr += double(i) * j * p;
            clus_prom += cpl * cpl * cpl * cpl * p;
            clus_shade += cpl * cpl * cpl * p;
            clus_tend += cpl * cpl * p;
            contrast += double(i - j) * (i - j) * p;
            energy += p * p;
            entropy -= p * log2_safe(p);
            maxprob = std::max(maxprob, p);
            ssq += (i - mu) * (i - mu) * p;
        }

    double diff_avg = 0, diff_ent = 0, inv_diff = 0, idm = 0, idmn = 0, idn = 0, inv_var = 0;
    for (int k = 0; k < L; ++k) {
        const double p = pxmy[size_t(k)];
        diff_avg += k * p;
        diff_ent -= p * log2_safe(p);
        inv_diff += p / (1.0 + k);
        idm += p / (1.0 + double(k) * k);
        idmn += p / (1.0 + double(k) * k / (double(L) * L));
        idn += p / (1.0 + double(k) / L);
        if (k >= 1) inv_var += p / (double(k) * k);
    }
    double diff_var = 0;
    for (int k = 0; k < L; ++k) diff_var += (k - diff_avg) * (k - diff_avg) * pxmy[size_t(k)];

    double sum_ent = 0;
    for (int k = 2; k <= 2 * L; ++k) sum_ent -= pxy[size_t(k)] * log2_safe(pxy[size_t(k)]);

    // correlation defined as 0 on degenerate (zero-variance) matrices
    const double corr = sigma2 > 1e-15 ? (autocorr - mu * mu) / sigma2 : 0.0;

    fv.values = {autocorr, mu,   clus_prom, clus_shade, clus_tend, contrast, corr,
                 diff_avg, diff_ent, diff_var, inv_diff, idm, idmn, idn, inv_var,
                 energy,   entropy,  maxprob,  sum_ent,  ssq};
    return fv;
}

GlszmMatrix glszm_matrix(const std::vector<int>& quantized, const std::vector<uint8_t>& mask,
                         const vol::Shape3& shape, int levels) {
    GlszmMatrix m;
    m.levels = levels;
    const int64_t D = shape[0], H = shape[1], W = shape[2];
    auto idx = [&](int64_t z, int64_t y, int64_t x) { return size_t((z * H + y) * W + x); };

    std::vector<uint8_t> visited(quantized.size(), 0);
    for (int64_t z = 0; z < D; ++z)
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) {
                const size_t i0 = idx(z, y, x);
                if (!mask[i0] || visited[i0]) continue;
                const int level = quantized[i0];
                // 26-connected flood fill of the same-level zone
                int64_t zone = 0;
                std::deque<std::array<int64_t, 3>> queue{{z, y, x}};
                visited[i0] = 1;
                while (!queue.empty()) {
                    const auto [cz, cy, cx] = queue.front();
                    queue.pop_front();
                    ++zone;
                    for (int dz = -1; dz <= 1; ++dz)
                        for (int dy = -1; dy <= 1; ++dy)
                            for (int dx = -1; dx <= 1; ++dx) {
                                if (!dz && !dy && !dx) continue;
                                const int64_t nz = cz + dz, ny = cy + dy, nx = cx + dx;
                                if (nz < 0 || nz >= D || ny < 0 || ny >= H || nx < 0 || nx >= W)
                                    continue;
                                const size_t ni = idx(nz, ny, nx);
                                if (!mask[ni] || visited[ni] || quantized[ni] != level) continue;
                                visited[ni] = 1;
                                queue.push_back({nz, ny, nx});
                            }
                }
                m.counts[{level, zone}] += 1;
                ++m.total_zones;
            }
    return m;
}

FeatureVector glszm_features(const std::vector<int>& quantized, const std::vector<uint8_t>& mask,
                             const vol::Shape3& shape, int levels) {
    bool any = false;
    for (uint8_t v : mask)
        if (v) any = true;
    if (!any) throw std::invalid_argument("glszm_features: empty mask");

    const GlszmMatrix m = glszm_matrix(quantized, mask, shape, levels);
    FeatureVector fv;
    fv.names = glszm_feature_names();
    fv.values.assign(4, 0.0);
    if (m.total_zones == 0) return fv;

    const double nz = double(m.total_zones);
    double sae = 0, lae = 0, zent = 0;
    std::map<int, double> per_level;
    for (const auto& [key, count] : m.counts) {
        const auto& [level, size] = key;
        const double c = double(count);
        sae += c / (double(size) * size);
        lae += c * double(size) * size;
        const double p = c / nz;
        zent -= p * log2_safe(p);
        per_level[level] += c;
    }
    double gln = 0;
    for (const auto& [level, c] : per_level) gln += c * c;
    fv.values = {sae / nz, lae / nz, zent, gln / nz};
    return fv;
}

vol::RadiomicsTargets region_targets_raw(const vol::Volume& v, const vol::ParcellationMap& parc,
                                         const std::vector<int>& tissue_group, int levels) {
    vol::RadiomicsTargets out;
    out.tissue_group = tissue_group;
    out.values.assign(72, 0.0);
    for (int g = 1; g <= 3; ++g) {
        std::vector<uint8_t> mask(v.data.size(), 0);
        bool any = false;
        for (size_t i = 0; i < v.data.size(); ++i) {
            const int16_t lab = parc.labels[i];
            if (lab > 0 && size_t(lab) <= tissue_group.size() &&
                tissue_group[size_t(lab - 1)] == g) {
                mask[i] = 1;
                any = true;
            }
        }
        const size_t base = size_t(g - 1) * 24;
        if (!any) {
            out.degenerate[size_t(g - 1)] = true;
            continue;
        }
        const auto q = quantize(v, mask, levels);
        const auto fg = glcm_features(glcm_matrix(q, mask, v.shape, levels));
        const auto fz = glszm_features(q, mask, v.shape, levels);
        for (int i = 0; i < 20; ++i) out.values[base + size_t(i)] = fg.values[size_t(i)];
        for (int i = 0; i < 4; ++i) out.values[base + 20 + size_t(i)] = fz.values[size_t(i)];
    }
    return out;
}

CorpusStats compute_corpus_stats(const std::vector<std::vector<double>>& raw_vectors) {
    if (raw_vectors.empty()) throw std::invalid_argument("compute_corpus_stats: empty corpus");
    const size_t dim = raw_vectors[0].size();
    CorpusStats stats;
    stats.feature_names = target_feature_names();
    stats.mean.assign(dim, 0.0);
    stats.std_dev.assign(dim, 0.0);
    for (const auto& v : raw_vectors)
        for (size_t i = 0; i < dim; ++i) stats.mean[i] += v[i];
    for (auto& m : stats.mean) m /= double(raw_vectors.size());
    for (const auto& v : raw_vectors)
        for (size_t i = 0; i < dim; ++i) {
            const double d = v[i] - stats.mean[i];
            stats.std_dev[i] += d * d;
        }
    for (auto& s : stats.std_dev) s = std::sqrt(s / double(raw_vectors.size()));
    return stats;
}

std::vector<double> zscore(const std::vector<double>& raw, const CorpusStats& stats) {
    std::vector<double> out(raw.size(), 0.0);
    for (size_t i = 0; i < raw.size(); ++i)
        out[i] = stats.std_dev[i] > 1e-12 ? (raw[i] - stats.mean[i]) / stats.std_dev[i] : 0.0;
    return out;
}

void save_stats(const CorpusStats& stats, const std::string& path) {
    nlohmann::json j;
    j["feature_names"] = stats.feature_names;
    j["mean"] = stats.mean;
    j["std"] = stats.std_dev;
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write stats file: " + path);
    f << j.dump(2) << "\n";
}

CorpusStats load_stats(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read stats file: " + path);
    nlohmann::json j;
    f >> j;
    CorpusStats stats;
    stats.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    stats.mean = j.at("mean").get<std::vector<double>>();
    stats.std_dev = j.at("std").get<std::vector<double>>();
    return stats;
}

}  // namespace damt::rad
