#include "damt/swin.hpp"

#include <cstdio>
#include <map>
#include <stdexcept>
#include <unordered_map>

namespace damt::swin {

namespace ops = damt::ops;

void SwinConfig::validate() const {
    if (depths.size() != num_heads.size())
        throw std::invalid_argument("swin config: depths/num_heads length mismatch");
    if (depths.empty()) throw std::invalid_argument("swin config: no stages");
    for (int s = 0; s < num_stages(); ++s)
        if (stage_dim(s) % num_heads[size_t(s)] != 0)
            throw std::invalid_argument("swin config: heads must divide stage dim");
    if (int(decoder_channels.size()) != num_stages() + 1)
        throw std::invalid_argument("swin config: decoder_channels must have num_stages+1 entries");
    if (patch_size < 1 || window < 2) throw std::invalid_argument("swin config: bad patch/window");
}

namespace {

int64_t ceil_mult(int64_t v, int64_t m) { return (v + m - 1) / m * m; }

// Caches keyed by formatted parameter strings; maps are immutable once built.
std::unordered_map<std::string, ops::IndexMap>& map_cache() {
    static std::unordered_map<std::string, ops::IndexMap> cache;
    return cache;
}

std::unordered_map<std::string, ops::AttentionMask>& mask_cache() {
    static std::unordered_map<std::string, ops::AttentionMask> cache;
    return cache;
}

std::string key_of(const char* kind, std::initializer_list<int64_t> vals) {
    std::string k(kind);
    for (int64_t v : vals) {
        k.push_back(':');
        k += std::to_string(v);
    }
    return k;
}

// roll-by-shift + pad-to-window + partition, as one gather from (D,H,W,C).
// Post-roll coordinate z maps to padded coordinate (z + shift) mod Dp; padded
// coordinates beyond the content extent are fill (-1).
ops::IndexMap partition_map(const vol::Shape3& grid, int64_t ch, int window,
                            const vol::Shape3& shift) {
    const std::string key =
        key_of("part", {grid[0], grid[1], grid[2], ch, window, shift[0], shift[1], shift[2]});
    auto& cache = map_cache();
    if (auto it = cache.find(key); it != cache.end()) return it->second;

    const int64_t w = window;
    const vol::Shape3 padded{ceil_mult(grid[0], w), ceil_mult(grid[1], w), ceil_mult(grid[2], w)};
    const int64_t nwz = padded[0] / w, nwy = padded[1] / w, nwx = padded[2] / w;
    const int64_t tokens = w * w * w;
    auto idx = std::make_shared<std::vector<int32_t>>();
    idx->resize(size_t(nwz * nwy * nwx * tokens * ch));
    size_t out = 0;
    for (int64_t wz = 0; wz < nwz; ++wz)
        for (int64_t wy = 0; wy < nwy; ++wy)
            for (int64_t wx = 0; wx < nwx; ++wx)
                for (int64_t tz = 0; tz < w; ++tz)
                    for (int64_t ty = 0; ty < w; ++ty)
                        for (int64_t tx = 0; tx < w; ++tx) {
                            const int64_t zo = (wz * w + tz + shift[0]) % padded[0];
                            const int64_t yo = (wy * w + ty + shift[1]) % padded[1];
                            const int64_t xo = (wx * w + tx + shift[2]) % padded[2];
                            if (zo >= grid[0] || yo >= grid[1] || xo >= grid[2]) {
                                for (int64_t c = 0; c < ch; ++c) (*idx)[out++] = -1;
                            } else {
                                const int64_t base = ((zo * grid[1] + yo) * grid[2] + xo) * ch;
                                for (int64_t c = 0; c < ch; ++c)
                                    (*idx)[out++] = int32_t(base + c);
                            }
                        }
    cache[key] = idx;
    return idx;
}

// Inverse: gathers (D,H,W,C) from the (nW, T, C) window blocks.
ops::IndexMap reverse_map(const vol::Shape3& grid, int64_t ch, int window,
                          const vol::Shape3& shift) {
    const std::string key =
        key_of("rev", {grid[0], grid[1], grid[2], ch, window, shift[0], shift[1], shift[2]});
    auto& cache = map_cache();
    if (auto it = cache.find(key); it != cache.end()) return it->second;

    const int64_t w = window;
    const vol::Shape3 padded{ceil_mult(grid[0], w), ceil_mult(grid[1], w), ceil_mult(grid[2], w)};
    const int64_t nwy = padded[1] / w, nwx = padded[2] / w;
    const int64_t tokens = w * w * w;
    auto idx = std::make_shared<std::vector<int32_t>>();
    idx->resize(size_t(grid[0] * grid[1] * grid[2] * ch));
    size_t out = 0;
    for (int64_t zo = 0; zo < grid[0]; ++zo)
        for (int64_t yo = 0; yo < grid[1]; ++yo)
            for (int64_t xo = 0; xo < grid[2]; ++xo) {
                const int64_t z = (zo - shift[0] + padded[0]) % padded[0];
                const int64_t y = (yo - shift[1] + padded[1]) % padded[1];
                const int64_t x = (xo - shift[2] + padded[2]) % padded[2];
                const int64_t widx = (z / w * nwy + y / w) * nwx + x / w;
                const int64_t tidx = ((z % w) * w + y % w) * w + x % w;
                const int64_t base = (widx * tokens + tidx) * ch;
                for (int64_t c = 0; c < ch; ++c) (*idx)[out++] = int32_t(base + c);
            }
    cache[key] = idx;
    return idx;
}

// 2x2x2 neighbour concat for patch merging (odd dims padded by repetition).
ops::IndexMap merge_map(const vol::Shape3& grid, int64_t ch) {
    const std::string key = key_of("merge", {grid[0], grid[1], grid[2], ch});
    auto& cache = map_cache();
    if (auto it = cache.find(key); it != cache.end()) return it->second;

    const vol::Shape3 half{(grid[0] + 1) / 2, (grid[1] + 1) / 2, (grid[2] + 1) / 2};
    auto idx = std::make_shared<std::vector<int32_t>>();
    idx->resize(size_t(half[0] * half[1] * half[2] * 8 * ch));
    size_t out = 0;
    for (int64_t z = 0; z < half[0]; ++z)
        for (int64_t y = 0; y < half[1]; ++y)
            for (int64_t x = 0; x < half[2]; ++x)
                for (int64_t dz = 0; dz < 2; ++dz)
                    for (int64_t dy = 0; dy < 2; ++dy)
                        for (int64_t dx = 0; dx < 2; ++dx) {
                            const int64_t sz = std::min(2 * z + dz, grid[0] - 1);
                            const int64_t sy = std::min(2 * y + dy, grid[1] - 1);
                            const int64_t sx = std::min(2 * x + dx, grid[2] - 1);
                            const int64_t base = ((sz * grid[1] + sy) * grid[2] + sx) * ch;
                            for (int64_t c = 0; c < ch; ++c) (*idx)[out++] = int32_t(base + c);
                        }
    cache[key] = idx;
    return idx;
}

// Non-overlapping patch_size^3 voxel patches, flattened per token.
ops::IndexMap embed_map(const vol::Shape3& vol_shape, int patch) {
    const std::string key = key_of("embed", {vol_shape[0], vol_shape[1], vol_shape[2], patch});
    auto& cache = map_cache();
    if (auto it = cache.find(key); it != cache.end()) return it->second;

    const vol::Shape3 grid{vol_shape[0] / patch, vol_shape[1] / patch, vol_shape[2] / patch};
    auto idx = std::make_shared<std::vector<int32_t>>();
    idx->resize(size_t(grid[0] * grid[1] * grid[2] * patch * patch * patch));
    size_t out = 0;
    for (int64_t z = 0; z < grid[0]; ++z)
        for (int64_t y = 0; y < grid[1]; ++y)
            for (int64_t x = 0; x < grid[2]; ++x)
                for (int64_t dz = 0; dz < patch; ++dz)
                    for (int64_t dy = 0; dy < patch; ++dy)
                        for (int64_t dx = 0; dx < patch; ++dx)
                            (*idx)[out++] = int32_t(
                                ((z * patch + dz) * vol_shape[1] + y * patch + dy) * vol_shape[2] +
                                x * patch + dx);
    cache[key] = idx;
    return idx;
}

ops::IndexMap bias_index_map(int window) {
    const std::string key = key_of("bias", {window});
    auto& cache = map_cache();
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    auto idx = std::make_shared<std::vector<int32_t>>(relative_bias_index(window));
    cache[key] = idx;
    return idx;
}

}  // namespace

std::vector<int32_t> relative_bias_index(int window) {
    const int w = window, span = 2 * w - 1;
    const int t = w * w * w;
    std::vector<int32_t> idx(size_t(t) * t);
    auto coord = [w](int i) {
        return std::array<int, 3>{i / (w * w), (i / w) % w, i % w};
    };
    for (int i = 0; i < t; ++i) {
        const auto ci = coord(i);
        for (int j = 0; j < t; ++j) {
            const auto cj = coord(j);
            const int dz = ci[0] - cj[0] + w - 1;
            const int dy = ci[1] - cj[1] + w - 1;
            const int dx = ci[2] - cj[2] + w - 1;
            idx[size_t(i) * t + j] = int32_t((dz * span + dy) * span + dx);
        }
    }
    return idx;
}

ops::AttentionMask build_attention_mask(const vol::Shape3& grid, int window,
                                        const vol::Shape3& shift) {
    const std::string key =
        key_of("mask", {grid[0], grid[1], grid[2], window, shift[0], shift[1], shift[2]});
    auto& cache = mask_cache();
    if (auto it = cache.find(key); it != cache.end()) return it->second;

    const int64_t w = window;
    const vol::Shape3 padded{ceil_mult(grid[0], w), ceil_mult(grid[1], w), ceil_mult(grid[2], w)};
    const int64_t nwz = padded[0] / w, nwy = padded[1] / w, nwx = padded[2] / w;
    const int64_t nw = nwz * nwy * nwx;
    const int64_t tokens = w * w * w;

    // region id per token: pre-shift window index per axis, or the pad id
    auto axis_id = [&](int64_t z, int64_t dim, int64_t pad_dim, int64_t s) {
        const int64_t zo = (z + s) % pad_dim;
        return zo >= dim ? pad_dim / w : zo / w;  // pad id is one past the last window
    };

    auto window_type = std::make_shared<std::vector<int32_t>>(size_t(nw), -1);
    auto bank = std::make_shared<std::vector<float>>();
    std::map<std::vector<int64_t>, int32_t> dedupe;

    std::vector<int64_t> ids(size_t(tokens), 0);
    for (int64_t wi = 0; wi < nw; ++wi) {
        const int64_t wz = wi / (nwy * nwx), wy = (wi / nwx) % nwy, wx = wi % nwx;
        bool uniform = true;
        for (int64_t tz = 0; tz < w; ++tz)
            for (int64_t ty = 0; ty < w; ++ty)
                for (int64_t tx = 0; tx < w; ++tx) {
                    const int64_t az = axis_id(wz * w + tz, grid[0], padded[0], shift[0]);
                    const int64_t ay = axis_id(wy * w + ty, grid[1], padded[1], shift[1]);
                    const int64_t ax = axis_id(wx * w + tx, grid[2], padded[2], shift[2]);
                    const int64_t id = (az * (padded[1] / w + 1) + ay) * (padded[2] / w + 1) + ax;
                    ids[size_t((tz * w + ty) * w + tx)] = id;
                    if (id != ids[0]) uniform = false;
                }
        if (uniform) continue;  // all tokens share a region: no mask needed
        auto it = dedupe.find(ids);
        int32_t type;
        if (it != dedupe.end()) {
            type = it->second;
        } else {
            type = int32_t(dedupe.size());
            dedupe[ids] = type;
            const size_t base = bank->size();
            bank->resize(base + size_t(tokens) * tokens);
            for (int64_t i = 0; i < tokens; ++i)
                for (int64_t j = 0; j < tokens; ++j)
                    (*bank)[base + size_t(i * tokens + j)] =
                        ids[size_t(i)] == ids[size_t(j)] ? 0.0f : -1e9f;
        }
        (*window_type)[size_t(wi)] = type;
    }

    ops::AttentionMask mask;
    mask.bank = bank;
    mask.window_type = window_type;
    cache[key] = mask;
    return mask;
}

// ---- pure array contracts ----

std::pair<Tensor, vol::Shape3> window_partition(const Tensor& grid, int window) {
    if (grid.ndim() != 4) throw std::invalid_argument("window_partition: expects (D,H,W,C)");
    const vol::Shape3 g{grid.dim(0), grid.dim(1), grid.dim(2)};
    const int64_t ch = grid.dim(3);
    const auto idx = partition_map(g, ch, window, {0, 0, 0});
    const int64_t w = window;
    const vol::Shape3 padded{ceil_mult(g[0], w), ceil_mult(g[1], w), ceil_mult(g[2], w)};
    const int64_t nw = (padded[0] / w) * (padded[1] / w) * (padded[2] / w);
    Tensor out({nw, w * w * w, ch});
    for (size_t i = 0; i < idx->size(); ++i)
        out.data[i] = (*idx)[i] >= 0 ? grid.data[size_t((*idx)[i])] : 0.0f;
    return {std::move(out),
            {padded[0] - g[0], padded[1] - g[1], padded[2] - g[2]}};
}

Tensor window_reverse(const Tensor& blocks, int window, const vol::Shape3& grid_shape,
                      const vol::Shape3& pad) {
    if (blocks.ndim() != 3) throw std::invalid_argument("window_reverse: expects (nW,T,C)");
    const int64_t w = window;
    const vol::Shape3 padded{grid_shape[0] + pad[0], grid_shape[1] + pad[1],
                             grid_shape[2] + pad[2]};
    const int64_t expect_nw = (padded[0] / w) * (padded[1] / w) * (padded[2] / w);
    if (blocks.dim(0) != expect_nw || blocks.dim(1) != w * w * w)
        throw std::invalid_argument("window_reverse: block count does not match resolution/pad");
    const int64_t ch = blocks.dim(2);
    const auto idx = reverse_map(grid_shape, ch, window, {0, 0, 0});
    Tensor out({grid_shape[0], grid_shape[1], grid_shape[2], ch});
    for (size_t i = 0; i < idx->size(); ++i) out.data[i] = blocks.data[size_t((*idx)[i])];
    return out;
}

Tensor cyclic_shift(const Tensor& grid, const vol::Shape3& shifts) {
    if (grid.ndim() != 4) throw std::invalid_argument("cyclic_shift: expects (D,H,W,C)");
    const int64_t D = grid.dim(0), H = grid.dim(1), W = grid.dim(2), C = grid.dim(3);
    Tensor out(grid.shape);
    auto wrap = [](int64_t v, int64_t m) { return ((v % m) + m) % m; };
    for (int64_t z = 0; z < D; ++z)
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) {
                const int64_t sz = wrap(z + shifts[0], D);
                const int64_t sy = wrap(y + shifts[1], H);
                const int64_t sx = wrap(x + shifts[2], W);
                const float* src = grid.ptr() + ((sz * H + sy) * W + sx) * C;
                float* dst = out.ptr() + ((z * H + y) * W + x) * C;
                for (int64_t c = 0; c < C; ++c) dst[c] = src[c];
            }
    return out;
}

// ---- parameters ----

namespace {

std::string stage_prefix(int s, int b) {
    return "enc.s" + std::to_string(s) + ".b" + std::to_string(b) + ".";
}

void create_linear(ParamStore& store, Rng& rng, const std::string& name, int64_t in, int64_t out) {
    auto& w = store.create(name + ".w", {in, out});
    init_trunc_normal(w.value, rng, 0.02f);
    store.create(name + ".b", {out});  // zeros
}

void create_norm(ParamStore& store, const std::string& name, int64_t dim) {
    auto& g = store.create(name + ".g", {dim});
    init_ones(g.value);
    store.create(name + ".b", {dim});
}

}  // namespace

void build_encoder(ParamStore& store, const SwinConfig& cfg, Rng& rng) {
    cfg.validate();
    const int span = 2 * cfg.window - 1;
    const int64_t bias_rows = int64_t(span) * span * span;

    create_linear(store, rng, "enc.embed", int64_t(cfg.patch_size) * cfg.patch_size * cfg.patch_size,
                  cfg.embed_dim);
    create_norm(store, "enc.embed.norm", cfg.embed_dim);

    for (int s = 0; s < cfg.num_stages(); ++s) {
        const int64_t dim = cfg.stage_dim(s);
        for (int b = 0; b < cfg.depths[size_t(s)]; ++b) {
            const std::string p = stage_prefix(s, b);
            create_norm(store, p + "ln1", dim);
            create_linear(store, rng, p + "qkv", dim, 3 * dim);
            create_linear(store, rng, p + "proj", dim, dim);
            auto& bias = store.create(p + "bias", {bias_rows, cfg.num_heads[size_t(s)]});
            init_trunc_normal(bias.value, rng, 0.02f);
            create_norm(store, p + "ln2", dim);
            create_linear(store, rng, p + "fc1", dim, int64_t(cfg.mlp_ratio) * dim);
            create_linear(store, rng, p + "fc2", int64_t(cfg.mlp_ratio) * dim, dim);
        }
        const std::string m = "enc.merge" + std::to_string(s);
        create_norm(store, m + ".norm", 8 * dim);
        create_linear(store, rng, m, 8 * dim, 2 * dim);
    }
}

// ---- forward ----

Encoded encode(Tape& tape, ParamStore& store, const SwinConfig& cfg, Node* volume) {
    cfg.validate();
    if (volume->val.ndim() != 3) throw std::invalid_argument("encode: volume node must be (D,H,W)");
    const vol::Shape3 vshape{volume->val.dim(0), volume->val.dim(1), volume->val.dim(2)};
    const int64_t ds = cfg.total_downsample();
    for (int i = 0; i < 3; ++i)
        if (vshape[size_t(i)] % ds != 0)
            throw std::invalid_argument("encode: view dims must be divisible by " +
                                        std::to_string(ds));

    auto leaf = [&](const std::string& name) { return tape.leaf(store.at(name)); };

    Encoded enc;
    // patch embedding
    vol::Shape3 grid{vshape[0] / cfg.patch_size, vshape[1] / cfg.patch_size,
                     vshape[2] / cfg.patch_size};
    const int64_t pvox = int64_t(cfg.patch_size) * cfg.patch_size * cfg.patch_size;
    Node* x = ops::gather(tape, volume, embed_map(vshape, cfg.patch_size),
                          {grid[0], grid[1], grid[2], pvox});
    x = ops::linear(tape, x, leaf("enc.embed.w"), leaf("enc.embed.b"));
    x = ops::layernorm(tape, x, leaf("enc.embed.norm.g"), leaf("enc.embed.norm.b"));
    enc.pyramid.push_back(x);

    const int64_t w = cfg.window;
    for (int s = 0; s < cfg.num_stages(); ++s) {
        const int64_t dim = cfg.stage_dim(s);
        for (int b = 0; b < cfg.depths[size_t(s)]; ++b) {
            const std::string p = stage_prefix(s, b);
            vol::Shape3 shift{0, 0, 0};
            if (b % 2 == 1)
                for (int a = 0; a < 3; ++a)
                    shift[size_t(a)] = grid[size_t(a)] > w ? w / 2 : 0;

            // attention sub-block
            Node* h = ops::layernorm(tape, x, leaf(p + "ln1.g"), leaf(p + "ln1.b"));
            const vol::Shape3 padded{ceil_mult(grid[0], w), ceil_mult(grid[1], w),
                                     ceil_mult(grid[2], w)};
            const int64_t nw = (padded[0] / w) * (padded[1] / w) * (padded[2] / w);
            Node* windows = ops::gather(tape, h, partition_map(grid, dim, int(w), shift),
                                        {nw, w * w * w, dim});
            const ops::AttentionMask mask = build_attention_mask(grid, int(w), shift);
            Node* att = ops::window_attention(tape, windows, leaf(p + "qkv.w"), leaf(p + "qkv.b"),
                                              leaf(p + "proj.w"), leaf(p + "proj.b"),
                                              leaf(p + "bias"), bias_index_map(int(w)), mask,
                                              cfg.num_heads[size_t(s)]);
            Node* back = ops::gather(tape, att, reverse_map(grid, dim, int(w), shift),
                                     {grid[0], grid[1], grid[2], dim});
            x = ops::add(tape, x, back);

            // MLP sub-block
            Node* h2 = ops::layernorm(tape, x, leaf(p + "ln2.g"), leaf(p + "ln2.b"));
            h2 = ops::linear(tape, h2, leaf(p + "fc1.w"), leaf(p + "fc1.b"));
            h2 = ops::gelu(tape, h2);
            h2 = ops::linear(tape, h2, leaf(p + "fc2.w"), leaf(p + "fc2.b"));
            x = ops::add(tape, x, h2);
        }

        // patch merging (after every stage, bottleneck 16C)
        const std::string m = "enc.merge" + std::to_string(s);
        const vol::Shape3 half{(grid[0] + 1) / 2, (grid[1] + 1) / 2, (grid[2] + 1) / 2};
        x = ops::gather(tape, x, merge_map(grid, dim), {half[0], half[1], half[2], 8 * dim});
        x = ops::layernorm(tape, x, leaf(m + ".norm.g"), leaf(m + ".norm.b"));
        x = ops::linear(tape, x, leaf(m + ".w"), leaf(m + ".b"));
        grid = half;
        enc.pyramid.push_back(x);
    }

    enc.final_grid = x;
    enc.pooled = ops::mean_rows(tape, x);
    return enc;
}

}  // namespace damt::swin
