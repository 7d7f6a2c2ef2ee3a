#pragma once

#include <memory>
#include <vector>

#include "damt/autograd.hpp"

namespace damt::ops {

using IndexMap = std::shared_ptr<const std::vector<int32_t>>;

Node* add(Tape& t, Node* a, Node* b);
Node* scale(Tape& t, Node* x, float s);
// Elementwise product with a fixed (non-differentiated) mask tensor.
Node* mul_mask(Tape& t, Node* x, std::shared_ptr<const Tensor> mask);

// x viewed as [rows, in]; w is [in, out]; optional bias [out].
Node* linear(Tape& t, Node* x, Node* w, Node* b);
Node* layernorm(Tape& t, Node* x, Node* gamma, Node* beta, float eps = 1e-5f);
Node* gelu(Tape& t, Node* x);

// out[i] = idx[i] >= 0 ? x[idx[i]] : 0. Backward scatter-adds.
Node* gather(Tape& t, Node* x, IndexMap idx, std::vector<int64_t> out_shape);
Node* concat_last(Tape& t, Node* a, Node* b);
// x viewed as [rows, cols] -> column means [cols].
Node* mean_rows(Tape& t, Node* x);
Node* l2_normalize_rows(Tape& t, Node* x, bool* degenerate_flag = nullptr);
Node* sum_all(Tape& t, Node* x);
// total = sum_k weights[k] * scalars[k]
Node* weighted_sum_scalars(Tape& t, const std::vector<Node*>& scalars,
                           const std::vector<float>& weights);

// 3D convolution, kernel 3x3x3, stride 1, zero pad 1, channel-last.
// x: (D,H,W,Ci), w: (27*Ci, Co), b: (Co) -> (D,H,W,Co)
Node* conv3d(Tape& t, Node* x, Node* w, Node* b);

struct AttentionMask {
    // Additive masks, one (tokens x tokens) matrix per mask type.
    std::shared_ptr<const std::vector<float>> bank;
    // Per-window type id into the bank; -1 means unmasked.
    std::shared_ptr<const std::vector<int32_t>> window_type;
};

// Windowed multi-head self-attention over (num_windows, tokens, channels).
// bias_table: ((2w-1)^3, heads), bias_idx: tokens*tokens entries.
// Attention probabilities are recomputed in the backward pass.
Node* window_attention(Tape& t, Node* xw, Node* wqkv, Node* bqkv, Node* wproj, Node* bproj,
                       Node* bias_table, IndexMap bias_idx, const AttentionMask& mask,
                       int num_heads);

}  // namespace damt::ops
