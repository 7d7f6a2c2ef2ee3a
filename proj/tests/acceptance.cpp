// Acceptance suite: runs every criterion at its stated tolerance and prints
// one pass/fail line per criterion. Exit code 0 only if all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

#include "damt/augment.hpp"
#include "damt/dataset.hpp"
#include "damt/downstream.hpp"
#include "damt/heads.hpp"
#include "damt/losses.hpp"
#include "damt/pretrain.hpp"
#include "damt/radiomics.hpp"
#include "damt/swin.hpp"

using namespace damt;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string tmp_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------- criterion 1

// central finite differences at float64, relative error < 1e-4
template <typename F>
bool fd_ok(const F& f, std::vector<double> x, double h = 1e-6) {
    const auto vg = f(x);
    for (size_t i = 0; i < x.size(); ++i) {
        auto xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        const double fd = (f(xp).value - f(xm).value) / (2 * h);
        const double an = vg.grad[i];
        const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
        if (rel >= 1e-4) return false;
    }
    return true;
}

Outcome criterion1_gradients() {
    const double t0 = now_seconds();
    int failures = 0;
    for (int seed = 0; seed < 20; ++seed) {
        Rng rng(uint64_t(seed) * 7919 + 13);

        // anatomy: soft dice over a 2x2x2 volume, 4 channels
        std::vector<int> labels(8);
        for (auto& l : labels) l = int(rng.randint(4));
        labels[0] = 1;
        labels[1] = 2;
        std::vector<double> logits(32);
        for (auto& v : logits) v = rng.uniform(-2, 2);
        if (!fd_ok([&](const std::vector<double>& x) {
                return loss::fn::dice_loss<double>(x, labels, 4, {1, 2});
            }, logits))
            ++failures;

        // morphology / radiomics: masked mean-L1 with a margin around kinks
        for (int variant = 0; variant < 2; ++variant) {
            const size_t dim = variant == 0 ? 16 : 72;
            std::vector<double> target(dim), pred(dim);
            std::vector<int> active;
            for (size_t i = 0; i < dim; ++i) {
                target[i] = rng.uniform(-1, 1);
                pred[i] = target[i] + (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.05, 1.0);
                if (rng.uniform() < 0.5) active.push_back(int(i));
            }
            if (active.empty()) active.push_back(0);
            if (!fd_ok([&](const std::vector<double>& x) {
                    return loss::fn::masked_l1<double>(x, target, active);
                }, pred))
                ++failures;
        }

        // rotation (10-way) and location (8-way) cross entropy
        for (int classes : {10, 8}) {
            std::vector<double> cls(size_t(classes), 0.0);
            for (auto& v : cls) v = rng.uniform(-3, 3);
            const int tgt = int(rng.randint(classes));
            if (!fd_ok([&](const std::vector<double>& x) {
                    return loss::fn::cross_entropy<double>(x, tgt);
                }, cls))
                ++failures;
        }

        // MIM masked L1
        std::vector<double> orig(27), recon(27);
        std::vector<uint8_t> mask(27);
        for (size_t i = 0; i < 27; ++i) {
            orig[i] = rng.uniform(-1, 1);
            recon[i] = orig[i] + (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.05, 1.0);
            mask[i] = rng.uniform() < 0.75 ? 1 : 0;
        }
        mask[0] = 1;
        if (!fd_ok([&](const std::vector<double>& x) {
                return loss::fn::mim_l1<double>(x, orig, mask);
            }, recon))
            ++failures;

        // NT-Xent over 3 pairs
        std::vector<double> z(6 * 5);
        for (auto& v : z) v = rng.uniform(-1, 1);
        if (!fd_ok([&](const std::vector<double>& x) {
                return loss::fn::ntxent<double>(x, 6, 5, {1, 0, 3, 2, 5, 4}, 0.5);
            }, z))
            ++failures;
    }
    const double elapsed = now_seconds() - t0;
    char buf[160];
    std::snprintf(buf, sizeof buf, "7 losses x 20 seeds, %d failures, %.1f s (< 120 s)",
                  failures, elapsed);
    return {failures == 0 && elapsed < 120.0, buf};
}

// ---------------------------------------------------------------- criterion 2

Outcome criterion2_architecture() {
    swin::SwinConfig cfg;   // Table-A defaults
    heads::HeadDims dims;   // K = 120, R = 137, 72 radiomics targets
    ParamStore store;
    Rng rng(270);
    swin::build_encoder(store, cfg, rng);
    heads::build_heads(store, cfg, dims, rng);

    const double target = 57.16e6;
    const double total = double(store.total_params());
    const double enc_only = double(store.total_params_with_prefix("enc."));
    const double rel_total = std::abs(total - target) / target;
    const double rel_enc = std::abs(enc_only - target) / target;
    const bool in_band = rel_total <= 0.01 || rel_enc <= 0.01;
    const bool dim_ok = cfg.bottleneck_dim() == 768;
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "encoder+heads %.0f (rel %.4f), encoder-only %.0f (rel %.4f), final dim %d",
                  total, rel_total, enc_only, rel_enc, cfg.bottleneck_dim());
    return {in_band && dim_ok, buf};
}

// ---------------------------------------------------------------- criterion 3

Outcome criterion3_window_roundtrip() {
    Rng rng(33);
    int failures = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int window = 2 + int(rng.randint(7));
        const vol::Shape3 g{4 + rng.randint(17), 4 + rng.randint(17), 4 + rng.randint(17)};
        const int64_t ch = 1 + rng.randint(4);
        Tensor t({g[0], g[1], g[2], ch});
        for (auto& v : t.data) v = rng.uniform_f(-10.0f, 10.0f);
        auto [blocks, pad] = swin::window_partition(t, window);
        const Tensor back = swin::window_reverse(blocks, window, g, pad);
        if (back.data != t.data) ++failures;
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "200 random shapes (incl. padded), %d mismatches", failures);
    return {failures == 0, buf};
}

// ---------------------------------------------------------------- criterion 4

Outcome criterion4_mask_cardinality() {
    Rng rng(44);
    int failures = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int patch = 1 << (2 + rng.randint(3));  // 4, 8, 16
        const vol::Shape3 shape{patch * (1 + rng.randint(8)), patch * (1 + rng.randint(8)),
                                patch * (1 + rng.randint(8))};
        const auto m = aug::make_mim_mask(shape, patch, 0.75, rng);
        if (m.num_masked() != std::llround(0.75 * double(m.num_cells()))) ++failures;
    }
    Rng r2(45);
    const auto m64 = aug::make_mim_mask({64, 64, 64}, 16, 0.75, r2);
    const auto m128 = aug::make_mim_mask({128, 128, 128}, 16, 0.75, r2);
    const bool pinned = m64.num_masked() == 48 && m64.num_cells() == 64 &&
                        m128.num_masked() == 384 && m128.num_cells() == 512;
    char buf[128];
    std::snprintf(buf, sizeof buf, "100 random shapes, %d failures; 64^3 -> %lld/64, 128^3 -> %lld/512",
                  failures, (long long)m64.num_masked(), (long long)m128.num_masked());
    return {failures == 0 && pinned, buf};
}

// ---------------------------------------------------------------- criterion 5

Outcome criterion5_ntxent_closed_forms() {
    const int dim = 4;
    std::vector<double> z(4 * dim, 0.0);
    z[0 * dim + 0] = 1.0;
    z[1 * dim + 0] = 1.0;
    z[2 * dim + 1] = 1.0;
    z[3 * dim + 1] = 1.0;
    const double got1 = loss::fn::ntxent<double>(z, 4, dim, {1, 0, 3, 2}, 0.5).value;
    const double e2 = std::exp(2.0);
    const double want1 = -std::log(e2 / (e2 + 2.0));

    std::vector<double> same(6 * dim, 0.0);
    for (int i = 0; i < 6; ++i) same[size_t(i) * dim + 1] = 1.0;
    const double got2 = loss::fn::ntxent<double>(same, 6, dim, {1, 0, 3, 2, 5, 4}, 0.5).value;
    const double want2 = std::log(5.0);

    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "orthogonal: %.8f vs %.8f; identical(2N=6): %.8f vs ln5=%.8f", got1, want1,
                  got2, want2);
    return {std::abs(got1 - want1) < 1e-6 && std::abs(got2 - want2) < 1e-6, buf};
}

// ---------------------------------------------------------------- criterion 6

std::vector<double> glcm_brute(const std::vector<int>& q, const std::vector<uint8_t>& mask,
                               const vol::Shape3& s, int levels) {
    std::vector<double> m(size_t(levels) * levels, 0.0);
    double total = 0;
    for (int64_t z = 0; z < s[0]; ++z)
        for (int64_t y = 0; y < s[1]; ++y)
            for (int64_t x = 0; x < s[2]; ++x) {
                const size_t i = size_t((z * s[1] + y) * s[2] + x);
                if (!mask[i]) continue;
                for (int dz = -1; dz <= 1; ++dz)
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            if (!dz && !dy && !dx) continue;
                            const int64_t z2 = z + dz, y2 = y + dy, x2 = x + dx;
                            if (z2 < 0 || z2 >= s[0] || y2 < 0 || y2 >= s[1] || x2 < 0 ||
                                x2 >= s[2])
                                continue;
                            const size_t j = size_t((z2 * s[1] + y2) * s[2] + x2);
                            if (!mask[j]) continue;
                            m[size_t(q[i] - 1) * levels + (q[j] - 1)] += 1.0;
                            total += 1.0;
                        }
            }
    if (total > 0)
        for (auto& v : m) v /= total;
    return m;
}

// independent straight-from-formula evaluation of the 20 features
std::vector<double> features_brute(const std::vector<double>& p, int L) {
    auto P = [&](int i, int j) { return p[size_t(i - 1) * L + (j - 1)]; };
    auto lg = [](double v) { return v > 0 ? std::log2(v) : 0.0; };
    double mu = 0, sigma2 = 0;
    for (int i = 1; i <= L; ++i)
        for (int j = 1; j <= L; ++j) mu += i * P(i, j);
    for (int i = 1; i <= L; ++i) {
        double px = 0;
        for (int j = 1; j <= L; ++j) px += P(i, j);
        sigma2 += (i - mu) * (i - mu) * px;
    }
    std::vector<double> pxy(size_t(2 * L + 1), 0.0), pxmy(size_t(L), 0.0);
    for (int i = 1; i <= L; ++i)
        for (int j = 1; j <= L; ++j) {
            pxy[size_t(i + j)] += P(i, j);
            pxmy[size_t(std::abs(i - j))] += P(i, j);
        }
    std::vector<double> f;
    double v = 0;
    for (int i = 1; i <= L; ++i)
        for (int j = 1; j <= L; ++j) v += double(i) * j * P(i, j);
    const double autoc = v;
    f.push_back(autoc);
    f.push_back(mu);
    for (int pw : {4, 3, 2}) {
        v = 0;
        for (int i = 1; i <= L; ++i)
            for (int j = 1; j <= L; ++j) v += std::pow(i + j - 2 * mu, pw) * P(i, j);
        f.push_back(v);
    }
    v = 0;
    for (int i = 1; i <= L; ++i)
        for (int j = 1; j <= L; ++j) v += double(i - j) * (i - j) * P(i, j);
    f.push_back(v);
    f.push_back(sigma2 > 1e-15 ? (autoc - mu * mu) / sigma2 : 0.0);
    double da = 0;
    for (int k = 0; k < L; ++k) da += k * pxmy[size_t(k)];
    f.push_back(da);
    v = 0;
    for (int k = 0; k < L; ++k) v -= pxmy[size_t(k)] * lg(pxmy[size_t(k)]);
    f.push_back(v);
    v = 0;
    for (int k = 0; k < L; ++k) v += (k - da) * (k - da) * pxmy[size_t(k)];
    f.push_back(v);
    v = 0;
    for (int k = 0; k < L; ++k) v += pxmy[size_t(k)] / (1.0 + k);
    f.push_back(v);
    v = 0;
    for (int k = 0; k < L; ++k) v += pxmy[size_t(k)] / (1.0 + double(k) * k);
    f.push_back(v);
    v = 0;
    for (int k = 0; k < L; ++k) v += pxmy[size_t(k)] / (1.0 + double(k) * k / (double(L) * L));
    f.push_back(v);
    v = 0;
    for (int k = 0; k < L; ++k) v += pxmy[size_t(k)] / (1.0 + double(k) / L);
    f.push_back(v);
    v = 0;
    for (int k = 1; k < L; ++k) v += pxmy[size_t(k)] / (double(k) * k);
    f.push_back(v);
    double energy = 0, entropy = 0, maxp = 0, ssq = 0;
    for (int i = 1; i <= L; ++i)
        for (int j = 1; j <= L; ++j) {
            energy += P(i, j) * P(i, j);
            entropy -= P(i, j) * lg(P(i, j));
            maxp = std::max(maxp, P(i, j));
            ssq += (i - mu) * (i - mu) * P(i, j);
        }
    f.push_back(energy);
    f.push_back(entropy);
    f.push_back(maxp);
    v = 0;
    for (int k = 2; k <= 2 * L; ++k) v -= pxy[size_t(k)] * lg(pxy[size_t(k)]);
    f.push_back(v);
    f.push_back(ssq);
    return f;
}

Outcome criterion6_radiomics_oracle() {
    Rng rng(66);
    int matrix_failures = 0, feature_failures = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const vol::Shape3 s{2 + rng.randint(5), 2 + rng.randint(5), 2 + rng.randint(5)};
        const int levels = 2 + int(rng.randint(6));
        vol::Volume v(s, {1, 1, 1});
        for (auto& x : v.data) x = rng.uniform_f(0.0f, 1.0f);
        std::vector<uint8_t> mask(v.data.size());
        for (auto& b : mask) b = rng.uniform() < 0.85 ? 1 : 0;
        mask[0] = 1;
        const auto q = rad::quantize(v, mask, levels);
        const auto impl = rad::glcm_matrix(q, mask, s, levels);
        const auto brute = glcm_brute(q, mask, s, levels);
        if (impl.degenerate) continue;
        for (size_t i = 0; i < brute.size(); ++i)
            if (std::abs(impl.p[i] - brute[i]) >= 1e-9) ++matrix_failures;

        const auto feats = rad::glcm_features(impl).values;
        const auto oracle = features_brute(impl.p, levels);
        for (size_t i = 0; i < oracle.size(); ++i)
            if (std::abs(feats[i] - oracle[i]) >= 1e-9) ++feature_failures;
    }
    const auto sample = vol::generate_phantom(606, 48, 6);
    const bool len_ok = sample.radiomics.values.size() == 72;
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "matrix mismatches %d, feature mismatches %d, target length %zu",
                  matrix_failures, feature_failures, sample.radiomics.values.size());
    return {matrix_failures == 0 && feature_failures == 0 && len_ok, buf};
}

// ---------------------------------------------------------------- criterion 7

cfg::RunConfig toy_convergence_config(int64_t seed) {
    cfg::RunConfig c;
    c.seed = seed;
    c.data = {16, 48, 8, 32};
    c.augment.global_size = 32;
    c.augment.local_crop = 24;
    c.augment.local_size = 32;
    c.augment.mask_patch = 8;
    c.augment.sub_patch_size = 12;
    c.augment.max_gap = 4;
    c.model.embed_dim = 12;       // pinned by the criterion
    c.model.depths = {1, 1, 2, 1};
    c.model.num_heads = {2, 2, 4, 4};
    c.model.window = 4;
    c.model.decoder_channels = {24, 16, 12, 8, 6};
    c.head_dims.num_regions = 8;
    c.head_dims.morphology_regions = 8;
    c.optim.base_lr = 3e-4;
    c.optim.warmup_steps = 100;
    c.optim.batch_size = 2;
    c.optim.max_steps = 2000;
    return c;
}

struct SeedOutcome {
    bool pass = false;
    int64_t steps = 0;
    double minutes = 0;
    double rot_acc = 0, loc_acc = 0, mim_ratio = 1.0;
};

SeedOutcome run_toy_seed(int64_t seed, const std::vector<vol::Sample>& samples) {
    const auto c = toy_convergence_config(seed);
    const std::string dir = tmp_dir("damt_accept_toy_" + std::to_string(seed));

    std::deque<double> rot_hist, loc_hist;
    std::vector<double> mim_series;
    double base_mim = 0;
    SeedOutcome out;
    const double t0 = now_seconds();

    auto callback = [&](const train::StepStats& s, int64_t step) {
        rot_hist.push_back(s.acc_rot);
        loc_hist.push_back(s.acc_loc);
        if (rot_hist.size() > 100) rot_hist.pop_front();
        if (loc_hist.size() > 100) loc_hist.pop_front();
        mim_series.push_back(s.report.mim);
        if (step == 19) {
            // step-10 value: mean over the first 20 steps
            for (double v : mim_series) base_mim += v / double(mim_series.size());
        }
        auto mean = [](const std::deque<double>& d) {
            double s2 = 0;
            for (double v : d) s2 += v;
            return d.empty() ? 0.0 : s2 / double(d.size());
        };
        out.rot_acc = mean(rot_hist);
        out.loc_acc = mean(loc_hist);
        if (step >= 1000 && base_mim > 0) {
            // step-1000 value: trailing 50-step mean at/after step 1000
            double recent = 0;
            const size_t n = std::min<size_t>(50, mim_series.size());
            for (size_t i = mim_series.size() - n; i < mim_series.size(); ++i)
                recent += mim_series[i] / double(n);
            out.mim_ratio = recent / base_mim;
        }
        const bool converged = step >= 1000 && out.rot_acc >= 0.95 && out.loc_acc >= 0.90 &&
                               out.mim_ratio <= 0.5;
        out.steps = step + 1;
        return !converged;  // stop once every sub-criterion holds
    };

    (void)train::run_pretraining(c, samples, dir, callback);
    out.minutes = (now_seconds() - t0) / 60.0;
    out.pass = out.rot_acc >= 0.95 && out.loc_acc >= 0.90 && out.mim_ratio <= 0.5 &&
               out.steps <= 2000 && out.minutes <= 30.0;
    return out;
}

Outcome criterion7_toy_convergence() {
    const auto base = toy_convergence_config(1);
    auto ds = data::make_dataset(base.data.count, base.data.size, base.data.regions, 777);

    int passed = 0, tested = 0;
    std::ostringstream detail;
    for (int64_t seed : {1, 2, 3}) {
        if (passed >= 2) break;  // >= 2/3 already satisfied
        const auto r = run_toy_seed(seed, ds.samples);
        ++tested;
        passed += r.pass ? 1 : 0;
        detail << "seed " << seed << ": " << (r.pass ? "pass" : "FAIL") << " (rot "
               << std::fixed << r.rot_acc << ", loc " << r.loc_acc << ", mim-ratio "
               << r.mim_ratio << ", " << r.steps << " steps, " << r.minutes << " min); ";
        if (tested - passed >= 2) break;  // cannot reach 2/3 any more
    }
    return {passed >= 2, detail.str()};
}

// ---------------------------------------------------------------- criterion 8

Outcome criterion8_ablation_additivity() {
    cfg::RunConfig c;
    c.seed = 88;
    c.data = {6, 48, 6, 32};
    c.augment.global_size = 32;
    c.augment.local_crop = 24;
    c.augment.local_size = 32;
    c.augment.mask_patch = 8;
    c.augment.sub_patch_size = 12;
    c.augment.max_gap = 4;
    c.model.embed_dim = 8;
    c.model.depths = {1, 1, 1, 1};
    c.model.num_heads = {1, 2, 4, 8};
    c.model.window = 4;
    c.model.decoder_channels = {16, 12, 10, 8, 6};
    c.head_dims.num_regions = 6;
    c.head_dims.morphology_regions = 6;

    auto ds = data::make_dataset(c.data.count, c.data.size, c.data.regions, 880);
    std::vector<aug::ViewSet> batch;
    for (int b = 0; b < 2; ++b) {
        Rng vr = train::view_rng(c.seed, ds.samples[size_t(b)].sample_id, 0);
        batch.push_back(aug::build_views(ds.samples[size_t(b)], vr, c.augment));
    }

    int checked = 0, failures = 0;
    double max_err = 0;
    // every nonempty subset of {domain, self, contrast}
    for (int mask = 1; mask < 8; ++mask) {
        loss::TaskFlags flags;
        const bool domain = mask & 1, self = mask & 2, contrast = mask & 4;
        flags.anatomy = flags.morphology = flags.radiomics = domain;
        flags.rotation = flags.location = flags.mim = self;
        flags.contrastive = contrast;

        auto model = train::Model::build(c, uint64_t(c.seed));
        train::AdamW opt(model.store, c.optim);
        const auto stats = train::train_step(model, batch, c.weights, flags, opt, 0.0);
        const auto& r = stats.report;
        const double manual = c.weights.lambda1 * r.anatomy + c.weights.lambda2 * r.morpho +
                              c.weights.lambda3 * r.radiomics + c.weights.lambda4 * r.rot +
                              c.weights.lambda5 * r.loc + c.weights.lambda6 * r.mim +
                              c.weights.lambda7 * r.contrast;
        const double err = std::abs(r.total - manual);
        max_err = std::max(max_err, err);
        ++checked;
        if (err > 1e-12) ++failures;
        // inactive components must be reported as exactly zero
        if (!domain && (r.anatomy != 0 || r.morpho != 0 || r.radiomics != 0)) ++failures;
        if (!self && (r.rot != 0 || r.loc != 0 || r.mim != 0)) ++failures;
        if (!contrast && r.contrast != 0) ++failures;
    }
    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "%d task subsets (lambda1 = %.1f), %d failures, max |total - sum| = %.2e",
                  checked, 0.2, failures, max_err);
    return {failures == 0, buf};
}

// ---------------------------------------------------------------- criterion 9

Outcome criterion9_downstream() {
    std::ostringstream detail;
    bool ok = true;

    // AUC vs the pair-counting oracle for n <= 50
    Rng rng(99);
    int auc_failures = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 4 + int(rng.randint(47));
        std::vector<std::vector<double>> scores;
        std::vector<double> labels;
        std::vector<double> s1;
        std::vector<int> lab;
        bool has0 = false, has1 = false;
        for (int i = 0; i < n; ++i) {
            const double p = double(rng.randint(6)) / 5.0;
            const int l = int(rng.randint(2));
            scores.push_back({1 - p, p});
            labels.push_back(double(l));
            s1.push_back(p);
            lab.push_back(l);
            has0 |= l == 0;
            has1 |= l == 1;
        }
        if (!has0 || !has1) continue;
        const auto m = down::compute_metrics(scores, labels, true);
        if (std::abs(m.auc - down::auc_pair_oracle(s1, lab)) > 1e-12) ++auc_failures;
    }
    ok = ok && auc_failures == 0;
    detail << "auc-oracle failures " << auc_failures << "; ";

    // fold plans are stratified partitions
    int fold_failures = 0;
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 10 + int(rng.randint(30));
        std::vector<std::string> ids;
        std::vector<int> labels;
        for (int i = 0; i < n; ++i) {
            ids.push_back("s" + std::to_string(i));
            labels.push_back(int(rng.randint(2)));
        }
        const auto plan = down::kfold_split(ids, labels, 5, uint64_t(trial));
        if (plan.fold_of.size() != size_t(n)) ++fold_failures;
        std::map<int, std::map<int, int>> counts;
        for (size_t i = 0; i < ids.size(); ++i) ++counts[labels[i]][plan.fold_of.at(ids[i])];
        for (auto& [cls, per_fold] : counts) {
            (void)cls;
            int lo = n, hi = 0;
            for (int f = 0; f < 5; ++f) {
                const int ccount = per_fold.count(f) ? per_fold[f] : 0;
                lo = std::min(lo, ccount);
                hi = std::max(hi, ccount);
            }
            if (hi - lo > 1) ++fold_failures;
        }
    }
    ok = ok && fold_failures == 0;
    detail << "fold failures " << fold_failures << "; ";

    // separable synthetic task reaches AUC 1.0
    cfg::RunConfig c;
    c.seed = 5;
    c.model.embed_dim = 8;
    c.model.depths = {1, 1, 1, 1};
    c.model.num_heads = {1, 2, 4, 8};
    c.model.window = 4;
    c.model.decoder_channels = {16, 12, 10, 8, 6};
    c.head_dims.num_regions = 6;
    c.head_dims.morphology_regions = 6;
    c.downstream.input_size = 32;
    c.downstream.epochs = 8;
    c.downstream.batch_size = 4;
    c.downstream.folds = 5;
    auto sep = data::make_dataset(20, 48, 6, 990, 0.5);
    std::vector<double> sep_labels;
    for (const auto& s : sep.samples)
        sep_labels.push_back(double(sep.labels.class_of.at(s.sample_id)));
    const auto ms = down::finetune_run(c, sep.samples, sep_labels, true);
    const bool auc_one = std::abs(ms.mean.auc - 1.0) <= 1e-9;
    ok = ok && auc_one;
    detail << "separable mean AUC " << ms.mean.auc << "; ";

    // sweep emits all 10 fractions for both arms
    cfg::RunConfig cs = c;
    cs.downstream.epochs = 1;
    cs.downstream.folds = 5;
    auto sweep_ds = data::make_dataset(40, 48, 6, 991, 0.5);
    std::vector<double> sweep_labels;
    for (const auto& s : sweep_ds.samples)
        sweep_labels.push_back(double(sweep_ds.labels.class_of.at(s.sample_id)));
    const auto rows = down::label_fraction_sweep(cs, sweep_ds.samples, sweep_labels, true, "");
    std::set<double> fractions;
    std::set<std::string> arms;
    for (const auto& r : rows) {
        fractions.insert(r.fraction);
        arms.insert(r.arm);
    }
    const bool sweep_ok = fractions.size() == 10 && arms.size() == 2;
    ok = ok && sweep_ok;
    detail << "sweep fractions " << fractions.size() << "/10, arms " << arms.size() << "/2";
    return {ok, detail.str()};
}

// --------------------------------------------------------------- criterion 10

Outcome criterion10_determinism() {
    cfg::RunConfig c;
    c.seed = 10;
    c.data = {6, 48, 6, 32};
    c.augment.global_size = 32;
    c.augment.local_crop = 24;
    c.augment.local_size = 32;
    c.augment.mask_patch = 8;
    c.augment.sub_patch_size = 12;
    c.augment.max_gap = 4;
    c.model.embed_dim = 8;
    c.model.depths = {1, 1, 1, 1};
    c.model.num_heads = {1, 2, 4, 8};
    c.model.window = 4;
    c.model.decoder_channels = {16, 12, 10, 8, 6};
    c.head_dims.num_regions = 6;
    c.head_dims.morphology_regions = 6;
    c.optim.max_steps = 8;
    c.optim.checkpoint_interval = 4;
    auto ds = data::make_dataset(c.data.count, c.data.size, c.data.regions, 1000);

    const std::string d1 = tmp_dir("damt_accept_det1");
    const std::string d2 = tmp_dir("damt_accept_det2");
    const auto r1 = train::run_pretraining(c, ds.samples, d1);
    const auto r2 = train::run_pretraining(c, ds.samples, d2);
    const bool metrics_ok = slurp(r1.metrics_path) == slurp(r2.metrics_path) &&
                            !slurp(r1.metrics_path).empty();

    // save/load reproduces forward outputs bitwise
    auto model = train::Model::build(c, uint64_t(c.seed));
    train::AdamW opt(model.store, c.optim);
    (void)train::load_checkpoint(model, &opt, d1 + "/checkpoint.dmtc");
    auto fwd = [&](train::Model& m) {
        Tape tape;
        vol::Volume v = vol::resize_trilinear(ds.samples[0].volume, {32, 32, 32});
        Node* x = tape.constant(Tensor({32, 32, 32}, v.data));
        return swin::encode(tape, m.store, m.swin_cfg, x).pooled->val;
    };
    const Tensor f1 = fwd(model);

    auto model2 = train::Model::build(c, 424242);
    train::AdamW opt2(model2.store, c.optim);
    (void)train::load_checkpoint(model2, &opt2, d1 + "/checkpoint.dmtc");
    const Tensor f2 = fwd(model2);
    const bool forward_ok = f1.data == f2.data;

    // resume from the midpoint checkpoint and reproduce the tail bitwise
    const std::string d3 = tmp_dir("damt_accept_det3");
    fs::copy_file(d1 + "/checkpoint-step4.dmtc", d3 + "/resume.dmtc");
    const auto r3 = train::run_pretraining(c, ds.samples, d3, {}, d3 + "/resume.dmtc");
    std::istringstream full(slurp(r1.metrics_path));
    std::istringstream tail(slurp(r3.metrics_path));
    std::vector<std::string> full_lines, tail_lines;
    std::string line;
    while (std::getline(full, line)) full_lines.push_back(line);
    while (std::getline(tail, line)) tail_lines.push_back(line);
    bool resume_ok = tail_lines.size() == 4;
    for (size_t i = 0; resume_ok && i < tail_lines.size(); ++i)
        resume_ok = tail_lines[i] == full_lines[4 + i];

    std::ostringstream detail;
    detail << "metrics identical: " << (metrics_ok ? "yes" : "NO")
           << ", forward bitwise: " << (forward_ok ? "yes" : "NO")
           << ", resume tail identical: " << (resume_ok ? "yes" : "NO");
    return {metrics_ok && forward_ok && resume_ok, detail.str()};
}

}  // namespace

int main() {
    struct Entry {
        int id;
        const char* name;
        std::function<Outcome()> fn;
    };
    const std::vector<Entry> criteria = {
        {1, "gradient suite (7 losses, FD float64, rel < 1e-4, 20 seeds, < 2 min)",
         criterion1_gradients},
        {2, "architecture fidelity (57.16M +/- 1%, final dim 768)", criterion2_architecture},
        {3, "window partition/reverse bit-exact over 200 shapes", criterion3_window_roundtrip},
        {4, "MIM mask cardinality exact (incl. 48/64 and 384/512)", criterion4_mask_cardinality},
        {5, "NT-Xent closed forms within 1e-6 at tau = 0.5", criterion5_ntxent_closed_forms},
        {6, "radiomics oracle (GLCM + 20 features within 1e-9, 72 targets)",
         criterion6_radiomics_oracle},
        {7, "toy convergence (rot >= 0.95, loc >= 0.90, MIM halved, <= 30 min/seed, 2/3 seeds)",
         criterion7_toy_convergence},
        {8, "ablation additivity (all task subsets, 1e-12, lambda1 = 0.2)",
         criterion8_ablation_additivity},
        {9, "downstream harness (AUC oracle, stratified folds, separable AUC 1.0, 10 fractions)",
         criterion9_downstream},
        {10, "determinism (identical metrics.jsonl, bitwise checkpoint forward, exact resume)",
         criterion10_determinism},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        Outcome o;
        try {
            o = c.fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("[%s] criterion %d: %s — %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                    o.detail.c_str());
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
