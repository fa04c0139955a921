// Copyright 2026 the repkit authors
// SPDX-License-Identifier: Apache-2.0

#include "rep/backbone.hpp"

#include <cmath>

#include "rep/ops.hpp"

namespace rep {

namespace {

Tensor xavier(Rng& rng, int64_t fan_in, int64_t fan_out) {
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
    Vec v(static_cast<size_t>(fan_in * fan_out));
    for (auto& x : v) x = std * rng.normal();
    return Tensor::from(fan_in, fan_out, std::move(v));
}

std::string layer_key(int64_t layer, int64_t modality, const char* field) {
    return "backbone/l" + std::to_string(layer) + "_m" + std::to_string(modality) + "_" + field;
}

}  // namespace

Tensor& ParamStore::add(std::string name, Tensor value) {
    if (index_.count(name)) throw Error("ParamStore: duplicate parameter '" + name + "'");
    index_.emplace(name, items_.size());
    items_.emplace_back(std::move(name), value.detached());
    return items_.back().second;
}

bool ParamStore::contains(std::string_view name) const {
    return index_.count(std::string(name)) > 0;
}

const Tensor& ParamStore::get(std::string_view name) const {
    const auto it = index_.find(std::string(name));
    if (it == index_.end()) throw Error("ParamStore: unknown parameter '" + std::string(name) + "'");
    return items_[it->second].second;
}

void ParamStore::set(std::string_view name, Tensor value) {
    const auto it = index_.find(std::string(name));
    if (it == index_.end()) throw Error("ParamStore: unknown parameter '" + std::string(name) + "'");
    Tensor& dst = items_[it->second].second;
    if (dst.rows != value.rows || dst.cols != value.cols)
        throw ShapeError("ParamStore::set('" + std::string(name) + "'): " + dst.shape_str() +
                         " vs " + value.shape_str());
    dst = value.detached();
}

int64_t ParamStore::count_params(std::string_view prefix) const {
    int64_t total = 0;
    for (const auto& [name, t] : items_)
        if (name.rfind(prefix, 0) == 0) total += t.numel();
    return total;
}

std::vector<std::string> ParamStore::names(std::string_view prefix) const {
    std::vector<std::string> out;
    for (const auto& [name, t] : items_)
        if (name.rfind(prefix, 0) == 0) out.push_back(name);
    return out;
}

Bindings::Bindings(const ParamStore& store, const GraphPtr& graph,
                   const std::function<bool(std::string_view)>& trainable) {
    for (const auto& [name, value] : store.items()) {
        if (graph && trainable && trainable(name)) {
            map_.emplace(name, graph->leaf(value));
        } else {
            map_.emplace(name, value);
        }
    }
}

const Tensor& Bindings::at(std::string_view name) const {
    const auto it = map_.find(std::string(name));
    if (it == map_.end()) throw Error("Bindings: unknown parameter '" + std::string(name) + "'");
    return it->second;
}

Bindings Bindings::with(std::string name, Tensor t) const {
    Bindings b = *this;
    b.map_[std::move(name)] = std::move(t);
    return b;
}

void BackboneConfig::validate() const {
    if (modalities < 2 || modalities > 3)
        throw ConfigError("backbone.modalities: expected 2 or 3, got " +
                          std::to_string(modalities));
    if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || seq_len <= 0 || n_classes <= 1)
        throw ConfigError("backbone: all dimensions must be positive");
    if (d_model % n_heads != 0)
        throw ConfigError("backbone.d_model (" + std::to_string(d_model) +
                          ") must be divisible by n_heads (" + std::to_string(n_heads) + ")");
    if (static_cast<int64_t>(feature_widths.size()) != modalities)
        throw ConfigError("backbone.feature_widths: expected " + std::to_string(modalities) +
                          " entries, got " + std::to_string(feature_widths.size()));
}

namespace backbone {

ParamStore init_params(const BackboneConfig& cfg, Rng rng) {
    cfg.validate();
    ParamStore store;
    const int64_t d = cfg.d_model;
    for (int64_t m = 0; m < cfg.modalities; ++m) {
        store.add("backbone/embed_w_" + std::to_string(m), xavier(rng, cfg.feature_widths[m], d));
        store.add("backbone/embed_b_" + std::to_string(m), Tensor::zeros(1, d));
    }
    const int64_t ffn = d * cfg.ffn_mult;
    for (int64_t m = 0; m < cfg.modalities; ++m) {
        for (int64_t l = 0; l < cfg.n_layers; ++l) {
            for (const char* w : {"wq", "wk", "wv", "wo"})
                store.add(layer_key(l, m, w), xavier(rng, d, d));
            for (const char* b : {"bq", "bk", "bv", "bo"})
                store.add(layer_key(l, m, b), Tensor::zeros(1, d));
            store.add(layer_key(l, m, "ln1_g"), Tensor::full(1, d, 1.0));
            store.add(layer_key(l, m, "ln1_b"), Tensor::zeros(1, d));
            store.add(layer_key(l, m, "ln2_g"), Tensor::full(1, d, 1.0));
            store.add(layer_key(l, m, "ln2_b"), Tensor::zeros(1, d));
            store.add(layer_key(l, m, "ffn_w1"), xavier(rng, d, ffn));
            store.add(layer_key(l, m, "ffn_b1"), Tensor::zeros(1, ffn));
            store.add(layer_key(l, m, "ffn_w2"), xavier(rng, ffn, d));
            store.add(layer_key(l, m, "ffn_b2"), Tensor::zeros(1, d));
        }
    }
    store.add("head/w", xavier(rng, cfg.modalities * d, cfg.n_classes));
    store.add("head/b", Tensor::zeros(1, cfg.n_classes));
    return store;
}

Tensor embed_modality(const BackboneConfig& cfg, const Bindings& p, const Tensor& raw,
                      int64_t modality) {
    if (modality < 0 || modality >= cfg.modalities)
        throw ConfigError("embed_modality: modality index " + std::to_string(modality) +
                          " out of range (K=" + std::to_string(cfg.modalities) + ")");
    if (raw.cols != cfg.feature_widths[static_cast<size_t>(modality)])
        throw ShapeError("embed_modality: raw features " + raw.shape_str() + ", expected width " +
                         std::to_string(cfg.feature_widths[static_cast<size_t>(modality)]));
    const std::string ms = std::to_string(modality);
    return ops::add_row_vector(ops::matmul(raw, p.at("backbone/embed_w_" + ms)),
                               p.at("backbone/embed_b_" + ms));
}

namespace {

// Shape-preserving transformer block over independent row blocks. For a
// single sample block_rows equals the full sequence length.
Tensor encoder_block(const BackboneConfig& cfg, const Bindings& p, const Tensor& state,
                     int64_t layer, int64_t modality, int64_t block_rows) {
    auto key = [&](const char* field) { return layer_key(layer, modality, field); };

    // Self-attention sublayer (pre-norm).
    Tensor h = ops::layer_norm_affine(state, p.at(key("ln1_g")), p.at(key("ln1_b")));
    Tensor q = ops::add_row_vector(ops::matmul(h, p.at(key("wq"))), p.at(key("bq")));
    Tensor k = ops::add_row_vector(ops::matmul(h, p.at(key("wk"))), p.at(key("bk")));
    Tensor v = ops::add_row_vector(ops::matmul(h, p.at(key("wv"))), p.at(key("bv")));
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_model / cfg.n_heads));
    Tensor attn = ops::block_attention(q, k, v, block_rows, cfg.n_heads, scale);
    attn = ops::add_row_vector(ops::matmul(attn, p.at(key("wo"))), p.at(key("bo")));
    Tensor x = ops::add(state, attn);

    // Feed-forward sublayer (pre-norm).
    Tensor h2 = ops::layer_norm_affine(x, p.at(key("ln2_g")), p.at(key("ln2_b")));
    Tensor f = ops::gelu(ops::add_row_vector(ops::matmul(h2, p.at(key("ffn_w1"))),
                                             p.at(key("ffn_b1"))));
    f = ops::add_row_vector(ops::matmul(f, p.at(key("ffn_w2"))), p.at(key("ffn_b2")));
    return ops::add(x, f);
}

}  // namespace

Tensor encoder_layer_forward(const BackboneConfig& cfg, const Bindings& p, const Tensor& state,
                             int64_t layer, int64_t modality) {
    if (layer < 0 || layer >= cfg.n_layers)
        throw ConfigError("encoder_layer_forward: layer " + std::to_string(layer) +
                          " out of range (n_layers=" + std::to_string(cfg.n_layers) + ")");
    if (state.cols != cfg.d_model)
        throw ShapeError("encoder_layer_forward: state " + state.shape_str() + ", d_model=" +
                         std::to_string(cfg.d_model));
    return encoder_block(cfg, p, state, layer, modality, state.rows);
}

Tensor fuse_and_classify(const BackboneConfig& cfg, const Bindings& p,
                         const std::vector<Tensor>& final_states) {
    if (static_cast<int64_t>(final_states.size()) != cfg.modalities)
        throw ShapeError("fuse_and_classify: " + std::to_string(final_states.size()) +
                         " states for K=" + std::to_string(cfg.modalities));
    std::vector<Tensor> pooled;
    pooled.reserve(final_states.size());
    for (const Tensor& s : final_states) {
        if (s.cols != cfg.d_model)
            throw ShapeError("fuse_and_classify: state " + s.shape_str() + ", d_model=" +
                             std::to_string(cfg.d_model));
        pooled.push_back(ops::mean_rows(s));
    }
    Tensor fused = cfg.modalities == 1 ? pooled[0] : ops::concat_cols(pooled);
    return ops::add_row_vector(ops::matmul(fused, p.at("head/w")), p.at("head/b"));
}

Tensor forward_plain(const BackboneConfig& cfg, const Bindings& p, const Sample& sample) {
    std::vector<Tensor> states;
    states.reserve(static_cast<size_t>(cfg.modalities));
    for (int64_t m = 0; m < cfg.modalities; ++m)
        states.push_back(embed_modality(cfg, p, sample.features[static_cast<size_t>(m)], m));
    for (int64_t l = 0; l < cfg.n_layers; ++l)
        for (int64_t m = 0; m < cfg.modalities; ++m)
            states[static_cast<size_t>(m)] =
                encoder_layer_forward(cfg, p, states[static_cast<size_t>(m)], l, m);
    return fuse_and_classify(cfg, p, states);
}

Tensor embed_modality_batch(const BackboneConfig& cfg, const Bindings& p,
                            std::span<const Sample> batch, int64_t modality) {
    if (batch.empty()) throw ConfigError("embed_modality_batch: empty batch");
    std::vector<Tensor> raws;
    raws.reserve(batch.size());
    for (const Sample& s : batch) raws.push_back(s.features[static_cast<size_t>(modality)]);
    return embed_modality(cfg, p, ops::concat_rows(raws), modality);
}

Tensor encoder_layer_batch(const BackboneConfig& cfg, const Bindings& p, const Tensor& state,
                           int64_t layer, int64_t modality, int64_t block_rows) {
    if (layer < 0 || layer >= cfg.n_layers)
        throw ConfigError("encoder_layer_batch: layer " + std::to_string(layer) +
                          " out of range (n_layers=" + std::to_string(cfg.n_layers) + ")");
    return encoder_block(cfg, p, state, layer, modality, block_rows);
}

Tensor forward_plain_batch(const BackboneConfig& cfg, const Bindings& p,
                           std::span<const Sample> batch) {
    std::vector<Tensor> pooled;
    pooled.reserve(static_cast<size_t>(cfg.modalities));
    for (int64_t m = 0; m < cfg.modalities; ++m) {
        Tensor state = embed_modality_batch(cfg, p, batch, m);
        for (int64_t l = 0; l < cfg.n_layers; ++l)
            state = encoder_block(cfg, p, state, l, m, cfg.seq_len);
        pooled.push_back(ops::mean_pool_blocks(state, cfg.seq_len));
    }
    Tensor fused = cfg.modalities == 1 ? pooled[0] : ops::concat_cols(pooled);
    return ops::add_row_vector(ops::matmul(fused, p.at("head/w")), p.at("head/b"));
}

}  // namespace backbone

}  // namespace rep
