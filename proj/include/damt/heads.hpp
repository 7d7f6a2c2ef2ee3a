#pragma once

#include "damt/swin.hpp"

namespace damt::heads {

struct HeadDims {
    int num_regions = 120;        // K; segmentation emits K+1 channels
    int morphology_regions = 137;  // R; morphology head emits 2R
    int radiomics_dim = 72;        // 3 tissue groups x 24 features
};

void build_heads(ParamStore& store, const swin::SwinConfig& cfg, const HeadDims& dims, Rng& rng);

// UNet-style decoder over the encoder pyramid; output (D,H,W,K+1).
Node* seg_decode(Tape& tape, ParamStore& store, const swin::SwinConfig& cfg,
                 const std::vector<Node*>& pyramid, int num_regions);

// Two-layer MLP regression head ("morph" or "rad" prefix).
Node* mlp_regress(Tape& tape, ParamStore& store, const std::string& head, Node* z);
// Single affine map ("rot" or "loc" prefix).
Node* linear_classify(Tape& tape, ParamStore& store, const std::string& head, Node* z);

// Single-layer projection + 3D pixel shuffle back to view resolution.
Node* mim_reconstruct(Tape& tape, ParamStore& store, const swin::SwinConfig& cfg,
                      Node* final_grid);

// Linear 16C -> contrastive_dim, L2-normalized.
Node* contrastive_project(Tape& tape, ParamStore& store, Node* z, bool* degenerate = nullptr);

}  // namespace damt::heads
