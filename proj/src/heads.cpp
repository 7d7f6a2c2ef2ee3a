#include "damt/heads.hpp"

#include <stdexcept>
#include <unordered_map>

namespace damt::heads {

namespace ops = damt::ops;

namespace {

void create_linear(ParamStore& store, Rng& rng, const std::string& name, int64_t in, int64_t out) {
    auto& w = store.create(name + ".w", {in, out});
    init_trunc_normal(w.value, rng, 0.02f);
    store.create(name + ".b", {out});
}

void create_norm(ParamStore& store, const std::string& name, int64_t dim) {
    auto& g = store.create(name + ".g", {dim});
    init_ones(g.value);
    store.create(name + ".b", {dim});
}

// pixel-shuffle gather: (gD,gH,gW, r^3*C) -> (r gD, r gH, r gW, C)
ops::IndexMap shuffle_map(const vol::Shape3& grid, int64_t r, int64_t ch) {
    static std::unordered_map<std::string, ops::IndexMap> cache;
    const std::string key = std::to_string(grid[0]) + ":" + std::to_string(grid[1]) + ":" +
                            std::to_string(grid[2]) + ":" + std::to_string(r) + ":" +
                            std::to_string(ch);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    auto idx = std::make_shared<std::vector<int32_t>>();
    const int64_t D = grid[0] * r, H = grid[1] * r, W = grid[2] * r;
    idx->resize(size_t(D * H * W * ch));
    size_t out = 0;
    const int64_t in_ch = r * r * r * ch;
    for (int64_t z = 0; z < D; ++z)
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) {
                const int64_t token = ((z / r) * grid[1] + y / r) * grid[2] + x / r;
                const int64_t sub = ((z % r) * r + y % r) * r + x % r;
                for (int64_t c = 0; c < ch; ++c)
                    (*idx)[out++] = int32_t(token * in_ch + sub * ch + c);
            }
    cache[key] = idx;
    return idx;
}

// transposed k2 s2 upsampling expressed as linear Ci -> 8*Co + pixel shuffle
Node* up2(Tape& tape, ParamStore& store, const std::string& name, Node* x, int64_t out_ch) {
    Node* h = ops::linear(tape, x, tape.leaf(store.at(name + ".w")),
                          tape.leaf(store.at(name + ".b")));
    const vol::Shape3 grid{x->val.dim(0), x->val.dim(1), x->val.dim(2)};
    return ops::gather(tape, h, shuffle_map(grid, 2, out_ch),
                       {grid[0] * 2, grid[1] * 2, grid[2] * 2, out_ch});
}

Node* conv_block(Tape& tape, ParamStore& store, const std::string& name, Node* x) {
    Node* h = ops::conv3d(tape, x, tape.leaf(store.at(name + ".w")),
                          tape.leaf(store.at(name + ".b")));
    h = ops::layernorm(tape, h, tape.leaf(store.at(name + ".norm.g")),
                       tape.leaf(store.at(name + ".norm.b")));
    return ops::gelu(tape, h);
}

}  // namespace

void build_heads(ParamStore& store, const swin::SwinConfig& cfg, const HeadDims& dims, Rng& rng) {
    const int64_t zdim = cfg.bottleneck_dim();
    const int64_t u = cfg.total_downsample();

    create_linear(store, rng, "head.morph.fc1", zdim, zdim);
    create_linear(store, rng, "head.morph.fc2", zdim, 2 * int64_t(dims.morphology_regions));
    create_linear(store, rng, "head.rad.fc1", zdim, zdim);
    create_linear(store, rng, "head.rad.fc2", zdim, dims.radiomics_dim);
    create_linear(store, rng, "head.rot", zdim, 10);
    create_linear(store, rng, "head.loc", zdim, 8);
    create_linear(store, rng, "head.mim", zdim, u * u * u);
    create_linear(store, rng, "head.contrast", zdim, cfg.contrastive_dim);

    // decoder: per level, transposed upsample + two conv3 blocks
    const int ns = cfg.num_stages();
    int64_t in_ch = zdim;
    for (int j = 0; j <= ns; ++j) {
        const int64_t out_ch = cfg.decoder_channels[size_t(j)];
        create_linear(store, rng, "dec.up" + std::to_string(j), in_ch, 8 * out_ch);
        const int64_t skip = j < ns ? cfg.stage_dim(ns - 1 - j) : 0;
        create_linear(store, rng, "dec.conv" + std::to_string(j) + "a", 27 * (out_ch + skip),
                      out_ch);
        create_norm(store, "dec.conv" + std::to_string(j) + "a.norm", out_ch);
        create_linear(store, rng, "dec.conv" + std::to_string(j) + "b", 27 * out_ch, out_ch);
        create_norm(store, "dec.conv" + std::to_string(j) + "b.norm", out_ch);
        in_ch = out_ch;
    }
    create_linear(store, rng, "dec.proj", cfg.decoder_channels.back(),
                  int64_t(dims.num_regions) + 1);
}

Node* seg_decode(Tape& tape, ParamStore& store, const swin::SwinConfig& cfg,
                 const std::vector<Node*>& pyramid, int num_regions) {
    const int ns = cfg.num_stages();
    if (int(pyramid.size()) != ns + 1)
        throw std::invalid_argument("seg_decode: pyramid level count mismatch");
    if (!store.contains("dec.proj.w"))
        throw std::invalid_argument("seg_decode: decoder parameters not built");
    if (store.at("dec.proj.w").value.dim(1) != num_regions + 1)
        throw std::invalid_argument("seg_decode: decoder built for a different region count");

    Node* x = pyramid[size_t(ns)];
    for (int j = 0; j <= ns; ++j) {
        x = up2(tape, store, "dec.up" + std::to_string(j), x, cfg.decoder_channels[size_t(j)]);
        if (j < ns) {
            Node* skip = pyramid[size_t(ns - 1 - j)];
            if (skip->val.dim(0) != x->val.dim(0))
                throw std::invalid_argument("seg_decode: pyramid/decoder resolution mismatch");
            x = ops::concat_last(tape, x, skip);
        }
        x = conv_block(tape, store, "dec.conv" + std::to_string(j) + "a", x);
        x = conv_block(tape, store, "dec.conv" + std::to_string(j) + "b", x);
    }
    return ops::linear(tape, x, tape.leaf(store.at("dec.proj.w")),
                       tape.leaf(store.at("dec.proj.b")));
}

Node* mlp_regress(Tape& tape, ParamStore& store, const std::string& head, Node* z) {
    const std::string p = "head." + head;
    Node* h = ops::linear(tape, z, tape.leaf(store.at(p + ".fc1.w")),
                          tape.leaf(store.at(p + ".fc1.b")));
    h = ops::gelu(tape, h);
    return ops::linear(tape, h, tape.leaf(store.at(p + ".fc2.w")),
                       tape.leaf(store.at(p + ".fc2.b")));
}

Node* linear_classify(Tape& tape, ParamStore& store, const std::string& head, Node* z) {
    const std::string p = "head." + head;
    return ops::linear(tape, z, tape.leaf(store.at(p + ".w")), tape.leaf(store.at(p + ".b")));
}

Node* mim_reconstruct(Tape& tape, ParamStore& store, const swin::SwinConfig& cfg,
                      Node* final_grid) {
    if (final_grid->val.ndim() != 4)
        throw std::invalid_argument("mim_reconstruct: expects a token grid");
    const int64_t u = cfg.total_downsample();
    Node* h = ops::linear(tape, final_grid, tape.leaf(store.at("head.mim.w")),
                          tape.leaf(store.at("head.mim.b")));
    const vol::Shape3 grid{final_grid->val.dim(0), final_grid->val.dim(1), final_grid->val.dim(2)};
    Node* shuffled = ops::gather(tape, h, shuffle_map(grid, u, 1),
                                 {grid[0] * u, grid[1] * u, grid[2] * u, 1});
    return shuffled;
}

Node* contrastive_project(Tape& tape, ParamStore& store, Node* z, bool* degenerate) {
    Node* h = ops::linear(tape, z, tape.leaf(store.at("head.contrast.w")),
                          tape.leaf(store.at("head.contrast.b")));
    return ops::l2_normalize_rows(tape, h, degenerate);
}

}  // namespace damt::heads
