#pragma once

#include <string>
#include <vector>

#include "damt/ops.hpp"
#include "damt/voldata.hpp"

namespace damt::swin {

struct SwinConfig {
    int patch_size = 2;
    int embed_dim = 48;  // C
    std::vector<int> depths = {2, 2, 18, 2};
    std::vector<int> num_heads = {3, 6, 12, 24};
    int window = 7;
    int mlp_ratio = 4;
    int contrastive_dim = 512;
    // Decoder width after each upsampling step (deepest first, last entry is
    // the full-resolution level).
    std::vector<int> decoder_channels = {320, 160, 80, 48, 48};

    int num_stages() const { return int(depths.size()); }
    // channel width entering stage i
    int stage_dim(int i) const { return embed_dim << i; }
    // width after the final merge (16C for four stages)
    int bottleneck_dim() const { return embed_dim << num_stages(); }
    int total_downsample() const { return patch_size << num_stages(); }
    void validate() const;
};

// ---- pure array contracts (also used by the autograd path via index maps) ----

// Pads (with zeros) to window multiples and splits into (nW, w^3, C) blocks.
// Returns the per-axis pad amounts.
std::pair<Tensor, vol::Shape3> window_partition(const Tensor& grid, int window);
// Exact inverse; grid_shape is the original (unpadded) token resolution.
Tensor window_reverse(const Tensor& blocks, int window, const vol::Shape3& grid_shape,
                      const vol::Shape3& pad);

// Cyclic roll of a (D,H,W,C) grid by the given per-axis shifts.
Tensor cyclic_shift(const Tensor& grid, const vol::Shape3& shifts);

// T*T relative-position bias indices for one window ((2w-1)^3 distinct bins).
std::vector<int32_t> relative_bias_index(int window);

// Additive attention mask for a rolled+padded grid: tokens attend only when
// they share the same pre-shift window and neither is padding.
ops::AttentionMask build_attention_mask(const vol::Shape3& grid, int window,
                                        const vol::Shape3& shift);

// ---- encoder ----

void build_encoder(ParamStore& store, const SwinConfig& cfg, Rng& rng);

struct Encoded {
    std::vector<Node*> pyramid;  // [post-embed, post-merge1, ..., post-merge4]
    Node* final_grid = nullptr;  // == pyramid.back()
    Node* pooled = nullptr;      // global average pool, 16C
};

// volume node shaped (D,H,W); dims must be divisible by total_downsample().
Encoded encode(Tape& tape, ParamStore& store, const SwinConfig& cfg, Node* volume);

}  // namespace damt::swin
