// Copyright 2026 the repkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rep/backbone.hpp"
#include "rep/params.hpp"
#include "rep/rng.hpp"

namespace rep {

// Configuration of the replay-prompting mechanism. The three toggles are the
// ablation axes; a full model has all of them on.
struct RepConfig {
    int64_t buffer_width = 36;  // tokens per buffer (l)
    int64_t replay_depth = 6;   // deepest layer receiving replay (d)
    double noise_eps = 0.2;     // perturbation intensity for private init
    NoiseType noise_type = NoiseType::gaussian;
    double ortho_weight = 0.1;       // regularizer weight
    bool ortho_all_layers = false;   // sum the loss over layers 1..d
    int64_t g_hidden = 8;            // hidden width of the private update MLP
    bool theta_learnable = true;     // shared-to-modality projection trainable

    bool compose_prompts = true;  // prompt blocks concatenated at layer 0
    bool dynamic_init = true;     // perturbed-embedding / unit-sphere init
    bool dual_buffers = true;     // buffer updates + projection + ortho loss
    bool replay = true;           // additive injection into layers 1..d

    void validate(const BackboneConfig& backbone) const;
};

// Row ranges of the composed sequence [shared | private | content].
struct BlockLayout {
    int64_t width = 0;  // l
    int64_t seq = 0;

    int64_t shared_begin() const { return 0; }
    int64_t shared_end() const { return width; }
    int64_t private_begin() const { return width; }
    int64_t private_end() const { return 2 * width; }
    int64_t content_begin() const { return 2 * width; }
    int64_t content_end() const { return 2 * width + seq; }
    int64_t total() const { return 2 * width + seq; }
};

enum class BufferBlock { shared_block, private_block };

namespace repm {

// The two-layer GELU MLP updating a private buffer; identity mode exists for
// recurrence-oracle tests.
struct PrivateUpdateNet {
    enum class Mode { mlp, identity };
    Mode mode = Mode::identity;
    Tensor w1, b1, w2, b2;

    Tensor apply(const Tensor& z) const;
    static PrivateUpdateNet from_bindings(const Bindings& p, int64_t modality);
    static PrivateUpdateNet identity() { return PrivateUpdateNet{}; }
};

// The single-layer GELU MLP mapping concatenated private buffers into the
// shared space; mean mode exists for recurrence-oracle tests.
struct SharedUpdateNet {
    enum class Mode { mlp, mean };
    Mode mode = Mode::mean;
    Tensor w, b;

    Tensor apply(std::span<const Tensor> private_buffers) const;
    static SharedUpdateNet from_bindings(const Bindings& p);
    static SharedUpdateNet mean() { return SharedUpdateNet{}; }
};

// seed + eps * unit-variance noise, i.i.d. per element. eps == 0 returns the
// seed tensor unchanged.
Tensor init_private_buffer(const Tensor& seed_summary, double noise_eps, NoiseType noise_type,
                           Rng& rng);

// Standard-Gaussian draw scaled to unit Frobenius norm.
Tensor init_shared_buffer(int64_t width, int64_t d_model, Rng& rng);

// [theta(F_s); F_p; E_0] concatenated along the sequence dimension. Pass
// theta = nullptr for an identity projection.
std::pair<Tensor, BlockLayout> compose_layer0_input(const Tensor& f_s, const Tensor& f_p,
                                                    const Tensor& e0, const Tensor* theta);

// Layer-normalized hidden states at the requested block positions.
Tensor extract_layer_features(const Tensor& hidden, const std::optional<BlockLayout>& layout,
                              BufferBlock block);

// alpha * G(z) + (1 - alpha) * f_prev. alpha is a scalar tensor.
Tensor update_private_buffer(const Tensor& z, const Tensor& f_prev, const Tensor& alpha,
                             const PrivateUpdateNet& g);

// eps * H(C({f_p})) + (1 - eps) * f_s_prev.
Tensor update_shared_buffer(std::span<const Tensor> f_p_all, const Tensor& f_s_prev,
                            const Tensor& eps, const SharedUpdateNet& h);

// Adds beta_p * f_p onto the private block and beta_s * f_s onto the shared
// block of x for layers 1..depth; layers beyond depth pass through untouched
// (bitwise: the input tensor itself is returned). Detached all-zero betas
// also pass through untouched.
Tensor replay_inject(const Tensor& x, const Tensor& f_p_prev, const Tensor& f_s_prev,
                     const Tensor& beta_p, const Tensor& beta_s, int64_t layer, int64_t depth,
                     const std::optional<BlockLayout>& layout);

// Sum of squared cosine similarities over (shared, private_m) for every m
// plus (private_m, private_m') for every unordered pair. Zero-norm buffers
// contribute 0 and set *warned.
Tensor orthogonality_loss(const Tensor& f_s, std::span<const Tensor> f_p_all,
                          bool* warned = nullptr);

// Mean content embedding per modality over a calibration batch, [1, d_model].
std::vector<Tensor> modality_embedding_means(const BackboneConfig& cfg, const Bindings& p,
                                             std::span<const Sample> calibration);

// Adds the "rep/" parameter family implied by the toggles. embedding_means
// seeds the private buffers when dynamic_init is on (tiled to l rows).
void add_rep_params(ParamStore& store, const RepConfig& cfg, const BackboneConfig& backbone,
                    const std::vector<Tensor>& embedding_means, const Rng& root);

struct RepForwardResult {
    Tensor logits;                       // [1, n_classes]
    std::vector<Tensor> private_buffers; // final trajectory values per modality
    Tensor shared_buffer;
    Tensor ortho_loss;  // scalar; zero tensor when the regularizer is off
    bool ortho_warned = false;
};

// Full replay-prompting forward pass of one (placeholder-applied) sample.
RepForwardResult rep_forward(const BackboneConfig& bb, const RepConfig& cfg, const Bindings& p,
                             const Sample& sample);

struct RepBatchResult {
    Tensor logits;      // [B, n_classes]
    Tensor ortho_mean;  // scalar: batch mean of the per-sample regularizer
    bool ortho_warned = false;
};

// Batch-stacked forward pass; per-sample rows match rep_forward bitwise.
RepBatchResult rep_forward_batch(const BackboneConfig& bb, const RepConfig& cfg,
                                 const Bindings& p, std::span<const Sample> batch);

}  // namespace repm

}  // namespace rep
