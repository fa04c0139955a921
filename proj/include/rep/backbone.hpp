// Copyright 2026 the repkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rep/params.hpp"
#include "rep/rng.hpp"
#include "rep/tensor.hpp"

namespace rep {

// One multimodal sample: per-modality raw feature sequences plus a label.
struct Sample {
    std::vector<Tensor> features;  // features[m] is [seq_len, feature_width_m]
    int label = 0;
};

struct Dataset {
    std::vector<Sample> samples;
    int64_t n_classes = 0;
};

struct BackboneConfig {
    int64_t modalities = 2;  // K
    int64_t d_model = 32;
    int64_t n_layers = 8;
    int64_t n_heads = 4;
    int64_t seq_len = 8;
    int64_t n_classes = 4;
    int64_t ffn_mult = 8;
    std::vector<int64_t> feature_widths;  // one entry per modality

    void validate() const;
};

namespace backbone {

// Fresh unfrozen weights; deterministic given the rng state.
ParamStore init_params(const BackboneConfig& cfg, Rng rng);

// [seq_len, feat_m] raw features -> [seq_len, d_model] embedding.
Tensor embed_modality(const BackboneConfig& cfg, const Bindings& p, const Tensor& raw,
                      int64_t modality);

// Pre-norm self-attention + GELU feed-forward block; shape-preserving.
Tensor encoder_layer_forward(const BackboneConfig& cfg, const Bindings& p, const Tensor& state,
                             int64_t layer, int64_t modality);

// Mean-pool tokens per modality, concatenate across modalities, linear head.
Tensor fuse_and_classify(const BackboneConfig& cfg, const Bindings& p,
                         const std::vector<Tensor>& final_states);

// Full prompt-free forward pass of one sample -> [1, n_classes] logits.
Tensor forward_plain(const BackboneConfig& cfg, const Bindings& p, const Sample& sample);

// --- batch-stacked variants (one graph per batch) -------------------------
// Rows of all stacked tensors are grouped per sample; every per-sample row
// is computed exactly as in the single-sample path.

// [B*seq_len, d_model] embeddings of one modality across the batch.
Tensor embed_modality_batch(const BackboneConfig& cfg, const Bindings& p,
                            std::span<const Sample> batch, int64_t modality);

// Transformer block over independent row blocks of `block_rows` rows.
Tensor encoder_layer_batch(const BackboneConfig& cfg, const Bindings& p, const Tensor& state,
                           int64_t layer, int64_t modality, int64_t block_rows);

// Prompt-free batch forward -> [B, n_classes] logits.
Tensor forward_plain_batch(const BackboneConfig& cfg, const Bindings& p,
                           std::span<const Sample> batch);

}  // namespace backbone

}  // namespace rep
