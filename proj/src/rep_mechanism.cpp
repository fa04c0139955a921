// Copyright 2026 the repkit authors
// SPDX-License-Identifier: Apache-2.0

#include "rep/rep_mechanism.hpp"

#include <cmath>
#include <string>

#include "rep/ops.hpp"

namespace rep {

void RepConfig::validate(const BackboneConfig& backbone) const {
    if (buffer_width < 1)
        throw ConfigError("rep.buffer_width must be >= 1, got " + std::to_string(buffer_width));
    if (replay_depth < 1 || replay_depth > backbone.n_layers)
        throw CompatError("rep.replay_depth " + std::to_string(replay_depth) +
                          " outside [1, n_layers=" + std::to_string(backbone.n_layers) + "]");
    if (noise_eps < 0.0)
        throw ConfigError("rep.noise_eps must be non-negative, got " +
                          std::to_string(noise_eps));
    if (ortho_weight < 0.0)
        throw ConfigError("rep.ortho_weight must be non-negative, got " +
                          std::to_string(ortho_weight));
    if (g_hidden < 1) throw ConfigError("rep.g_hidden must be >= 1");
    if (!compose_prompts && (dual_buffers || replay))
        throw ConfigError("rep: dual_buffers/replay require compose_prompts");
}

namespace repm {

namespace {

Tensor xavier_scaled(Rng& rng, int64_t fan_in, int64_t fan_out, double gain) {
    const double std = gain * std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
    Vec v(static_cast<size_t>(fan_in * fan_out));
    for (auto& x : v) x = std * rng.normal();
    return Tensor::from(fan_in, fan_out, std::move(v));
}

Tensor small_random(Rng& rng, int64_t r, int64_t c, double std) {
    Vec v(static_cast<size_t>(r * c));
    for (auto& x : v) x = std * rng.normal();
    return Tensor::from(r, c, std::move(v));
}

const Tensor& unit_scalar() {
    static const Tensor one = Tensor::scalar(1.0);
    return one;
}

Tensor one_minus(const Tensor& s) {
    return ops::add(unit_scalar(), ops::smul(-1.0, s));
}

bool is_constant_zero(const Tensor& t) {
    if (t.attached()) return false;
    for (const Scalar v : *t.data)
        if (v != 0.0) return false;
    return true;
}

}  // namespace

Tensor PrivateUpdateNet::apply(const Tensor& z) const {
    if (mode == Mode::identity) return z;
    Tensor h = ops::gelu(ops::add_row_vector(ops::matmul(z, w1), b1));
    return ops::add_row_vector(ops::matmul(h, w2), b2);
}

PrivateUpdateNet PrivateUpdateNet::from_bindings(const Bindings& p, int64_t modality) {
    const std::string base = "rep/g" + std::to_string(modality) + "_";
    PrivateUpdateNet net;
    net.mode = Mode::mlp;
    net.w1 = p.at(base + "w1");
    net.b1 = p.at(base + "b1");
    net.w2 = p.at(base + "w2");
    net.b2 = p.at(base + "b2");
    return net;
}

Tensor SharedUpdateNet::apply(std::span<const Tensor> private_buffers) const {
    if (private_buffers.empty()) throw ShapeError("shared update: no private buffers");
    if (mode == Mode::mean) {
        Tensor acc = private_buffers[0];
        for (size_t m = 1; m < private_buffers.size(); ++m)
            acc = ops::add(acc, private_buffers[m]);
        return ops::smul(1.0 / static_cast<double>(private_buffers.size()), acc);
    }
    const Tensor cat = private_buffers.size() == 1
                           ? private_buffers[0]
                           : ops::concat_cols(private_buffers);
    return ops::gelu(ops::add_row_vector(ops::matmul(cat, w), b));
}

SharedUpdateNet SharedUpdateNet::from_bindings(const Bindings& p) {
    SharedUpdateNet net;
    net.mode = Mode::mlp;
    net.w = p.at("rep/h_w");
    net.b = p.at("rep/h_b");
    return net;
}

Tensor init_private_buffer(const Tensor& seed_summary, double noise_eps, NoiseType noise_type,
                           Rng& rng) {
    if (noise_eps < 0.0)
        throw ConfigError("init_private_buffer: negative noise intensity " +
                          std::to_string(noise_eps));
    if (noise_eps == 0.0) return seed_summary.detached();
    Vec v(*seed_summary.data);
    for (auto& x : v) x += noise_eps * rng.noise(noise_type);
    return Tensor::from(seed_summary.rows, seed_summary.cols, std::move(v));
}

Tensor init_shared_buffer(int64_t width, int64_t d_model, Rng& rng) {
    if (width < 1 || d_model < 1)
        throw ConfigError("init_shared_buffer: dimensions must be positive");
    for (;;) {
        Vec v(static_cast<size_t>(width * d_model));
        double sq = 0.0;
        for (auto& x : v) {
            x = rng.normal();
            sq += x * x;
        }
        if (sq == 0.0) continue;  // probability-zero degenerate draw
        const double inv = 1.0 / std::sqrt(sq);
        for (auto& x : v) x *= inv;
        return Tensor::from(width, d_model, std::move(v));
    }
}

std::pair<Tensor, BlockLayout> compose_layer0_input(const Tensor& f_s, const Tensor& f_p,
                                                    const Tensor& e0, const Tensor* theta) {
    if (f_s.cols != e0.cols || f_p.cols != e0.cols)
        throw ShapeError("compose_layer0_input: widths differ (shared " + f_s.shape_str() +
                         ", private " + f_p.shape_str() + ", content " + e0.shape_str() + ")");
    if (f_s.rows != f_p.rows)
        throw ShapeError("compose_layer0_input: buffer widths differ (" + f_s.shape_str() +
                         " vs " + f_p.shape_str() + ")");
    const Tensor projected = theta ? ops::matmul(f_s, *theta) : f_s;
    const std::vector<Tensor> parts{projected, f_p, e0};
    BlockLayout layout;
    layout.width = f_s.rows;
    layout.seq = e0.rows;
    return {ops::concat_rows(parts), layout};
}

Tensor extract_layer_features(const Tensor& hidden, const std::optional<BlockLayout>& layout,
                              BufferBlock block) {
    if (!layout)
        throw Error("extract_layer_features: block positions were never recorded "
                    "(prompts not composed)");
    if (hidden.rows != layout->total())
        throw ShapeError("extract_layer_features: hidden " + hidden.shape_str() +
                         " does not match layout length " + std::to_string(layout->total()));
    const int64_t b0 = block == BufferBlock::shared_block ? layout->shared_begin()
                                                          : layout->private_begin();
    const int64_t b1 = block == BufferBlock::shared_block ? layout->shared_end()
                                                          : layout->private_end();
    return ops::layer_norm(ops::slice_rows(hidden, b0, b1));
}

Tensor update_private_buffer(const Tensor& z, const Tensor& f_prev, const Tensor& alpha,
                             const PrivateUpdateNet& g) {
    const Tensor transformed = g.apply(z);
    if (transformed.rows != f_prev.rows || transformed.cols != f_prev.cols)
        throw ShapeError("update_private_buffer: G(z) " + transformed.shape_str() +
                         " vs previous " + f_prev.shape_str());
    return ops::add(ops::scalar_mul(alpha, transformed),
                    ops::scalar_mul(one_minus(alpha), f_prev));
}

Tensor update_shared_buffer(std::span<const Tensor> f_p_all, const Tensor& f_s_prev,
                            const Tensor& eps, const SharedUpdateNet& h) {
    const Tensor mapped = h.apply(f_p_all);
    if (mapped.rows != f_s_prev.rows || mapped.cols != f_s_prev.cols)
        throw ShapeError("update_shared_buffer: H(C) " + mapped.shape_str() + " vs previous " +
                         f_s_prev.shape_str());
    return ops::add(ops::scalar_mul(eps, mapped), ops::scalar_mul(one_minus(eps), f_s_prev));
}

Tensor replay_inject(const Tensor& x, const Tensor& f_p_prev, const Tensor& f_s_prev,
                     const Tensor& beta_p, const Tensor& beta_s, int64_t layer, int64_t depth,
                     const std::optional<BlockLayout>& layout) {
    if (layer > depth || layer < 1) return x;  // beyond replay depth: untouched
    if (!layout)
        throw Error("replay_inject: block positions were never recorded (prompts not composed)");
    // Forced-zero betas (detached constants) reduce exactly to the identity.
    if (is_constant_zero(beta_p) && is_constant_zero(beta_s)) return x;
    Tensor out = ops::add_rows_scaled(x, f_s_prev, beta_s, layout->shared_begin());
    out = ops::add_rows_scaled(out, f_p_prev, beta_p, layout->private_begin());
    return out;
}

Tensor orthogonality_loss(const Tensor& f_s, std::span<const Tensor> f_p_all, bool* warned) {
    std::vector<const Tensor*> buffers;
    buffers.push_back(&f_s);
    for (const Tensor& t : f_p_all) buffers.push_back(&t);
    for (const Tensor* t : buffers) {
        if (t->rows != f_s.rows || t->cols != f_s.cols)
            throw ShapeError("orthogonality_loss: buffer " + t->shape_str() +
                             " differs from " + f_s.shape_str());
    }
    Tensor loss = Tensor::scalar(0.0);
    auto pair_term = [&](const Tensor& a, const Tensor& b) {
        const Tensor na2 = ops::frobenius_inner_product(a, a);
        const Tensor nb2 = ops::frobenius_inner_product(b, b);
        if (na2.value() == 0.0 || nb2.value() == 0.0) {
            if (warned) *warned = true;
            return;
        }
        const Tensor ip = ops::frobenius_inner_product(a, b);
        const Tensor cos2 = ops::elementwise_mul(
            ops::elementwise_mul(ip, ip), ops::reciprocal(ops::elementwise_mul(na2, nb2)));
        loss = ops::add(loss, cos2);
    };
    const size_t k = f_p_all.size();
    for (size_t m = 0; m < k; ++m) pair_term(f_s, f_p_all[m]);
    for (size_t m = 0; m < k; ++m)
        for (size_t m2 = m + 1; m2 < k; ++m2) pair_term(f_p_all[m], f_p_all[m2]);
    return loss;
}

std::vector<Tensor> modality_embedding_means(const BackboneConfig& cfg, const Bindings& p,
                                             std::span<const Sample> calibration) {
    if (calibration.empty())
        throw ConfigError("modality_embedding_means: empty calibration batch");
    std::vector<Tensor> means;
    means.reserve(static_cast<size_t>(cfg.modalities));
    for (int64_t m = 0; m < cfg.modalities; ++m) {
        Vec acc(static_cast<size_t>(cfg.d_model), 0.0);
        for (const Sample& s : calibration) {
            const Tensor e =
                backbone::embed_modality(cfg, p, s.features[static_cast<size_t>(m)], m);
            for (int64_t i = 0; i < e.rows; ++i)
                for (int64_t j = 0; j < e.cols; ++j) acc[static_cast<size_t>(j)] += e.at(i, j);
        }
        const double inv =
            1.0 / (static_cast<double>(calibration.size()) * static_cast<double>(cfg.seq_len));
        for (auto& v : acc) v *= inv;
        means.push_back(Tensor::from(1, cfg.d_model, std::move(acc)));
    }
    return means;
}

namespace {

Tensor tile_rows(const Tensor& row, int64_t n) {
    Vec v(static_cast<size_t>(n * row.cols));
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < row.cols; ++j) v[i * row.cols + j] = row.at(0, j);
    return Tensor::from(n, row.cols, std::move(v));
}

}  // namespace

void add_rep_params(ParamStore& store, const RepConfig& cfg, const BackboneConfig& backbone,
                    const std::vector<Tensor>& embedding_means, const Rng& root) {
    cfg.validate(backbone);
    if (!cfg.compose_prompts) return;
    const int64_t l = cfg.buffer_width, d = backbone.d_model, k = backbone.modalities;
    if (cfg.dynamic_init && static_cast<int64_t>(embedding_means.size()) != k)
        throw ConfigError("add_rep_params: expected " + std::to_string(k) +
                          " embedding means, got " + std::to_string(embedding_means.size()));

    for (int64_t m = 0; m < k; ++m) {
        Tensor buf;
        if (cfg.dynamic_init) {
            Rng noise = root.substream("noise").substream(static_cast<uint64_t>(m));
            buf = init_private_buffer(tile_rows(embedding_means[static_cast<size_t>(m)], l),
                                      cfg.noise_eps, cfg.noise_type, noise);
        } else {
            Rng stat = root.substream("static_init").substream(static_cast<uint64_t>(m));
            buf = small_random(stat, l, d, 0.02);
        }
        store.add("rep/private_buffer_" + std::to_string(m), std::move(buf));
    }
    if (cfg.dynamic_init) {
        Rng shared = root.substream("shared_init");
        store.add("rep/shared_buffer", init_shared_buffer(l, d, shared));
    } else {
        Rng stat = root.substream("static_init").substream(std::string_view("shared"));
        store.add("rep/shared_buffer", small_random(stat, l, d, 0.02));
    }

    if (cfg.dual_buffers) {
        Rng nets = root.substream("rep_nets");
        if (cfg.theta_learnable) {
            for (int64_t m = 0; m < k; ++m)
                store.add("rep/theta_" + std::to_string(m), Tensor::identity(d));
        }
        for (int64_t m = 0; m < k; ++m) {
            const std::string base = "rep/g" + std::to_string(m) + "_";
            store.add(base + "w1", xavier_scaled(nets, d, cfg.g_hidden, 1.0));
            store.add(base + "b1", Tensor::zeros(1, cfg.g_hidden));
            store.add(base + "w2", xavier_scaled(nets, cfg.g_hidden, d, 0.1));
            store.add(base + "b2", Tensor::zeros(1, d));
        }
        store.add("rep/h_w", xavier_scaled(nets, k * d, d, 0.1));
        store.add("rep/h_b", Tensor::zeros(1, d));
        for (int64_t m = 0; m < k; ++m)
            store.add("rep/gate_a_" + std::to_string(m), Tensor::scalar(0.0));
        store.add("rep/gate_e", Tensor::scalar(0.0));
    }
    if (cfg.replay) {
        store.add("rep/beta_p", Tensor::scalar(0.1));
        store.add("rep/beta_s", Tensor::scalar(0.1));
    }
}

RepBatchResult rep_forward_batch(const BackboneConfig& bb, const RepConfig& cfg,
                                 const Bindings& p, std::span<const Sample> batch) {
    cfg.validate(bb);
    if (batch.empty()) throw ConfigError("rep_forward_batch: empty batch");
    const int64_t k_mod = bb.modalities;
    const auto b_n = static_cast<int64_t>(batch.size());
    const int64_t l = cfg.buffer_width, seq = bb.seq_len;
    const int64_t block = cfg.compose_prompts ? 2 * l + seq : seq;

    const bool mechanism = cfg.compose_prompts;
    const bool updates = mechanism && cfg.dual_buffers;
    const bool inject = mechanism && cfg.replay;

    std::vector<Tensor> states;
    std::vector<Tensor> f_p;  // stacked [B*l, d]
    Tensor f_s;

    for (int64_t m = 0; m < k_mod; ++m) {
        Tensor e = backbone::embed_modality_batch(bb, p, batch, m);
        if (!mechanism) {
            states.push_back(std::move(e));
            continue;
        }
        const Tensor& buf_p = p.at("rep/private_buffer_" + std::to_string(m));
        const Tensor& buf_s = p.at("rep/shared_buffer");
        Tensor projected = buf_s;
        if (cfg.dual_buffers && cfg.theta_learnable)
            projected = ops::matmul(buf_s, p.at("rep/theta_" + std::to_string(m)));
        std::vector<Tensor> parts;
        parts.reserve(static_cast<size_t>(3 * b_n));
        for (int64_t b = 0; b < b_n; ++b) {
            parts.push_back(projected);
            parts.push_back(buf_p);
            parts.push_back(ops::slice_rows(e, b * seq, (b + 1) * seq));
        }
        states.push_back(ops::concat_rows(parts));
        f_p.push_back(ops::repeat_rows(buf_p, b_n));
        if (m == 0) f_s = ops::repeat_rows(buf_s, b_n);
    }

    std::vector<PrivateUpdateNet> g_nets;
    SharedUpdateNet h_net;
    std::vector<Tensor> alphas;
    Tensor eps_gate;
    if (updates) {
        for (int64_t m = 0; m < k_mod; ++m) {
            g_nets.push_back(PrivateUpdateNet::from_bindings(p, m));
            alphas.push_back(ops::sigmoid(p.at("rep/gate_a_" + std::to_string(m))));
        }
        h_net = SharedUpdateNet::from_bindings(p);
        eps_gate = ops::sigmoid(p.at("rep/gate_e"));
    }
    Tensor beta_p, beta_s;
    bool skip_inject = false;
    if (inject) {
        beta_p = p.at("rep/beta_p");
        beta_s = p.at("rep/beta_s");
        skip_inject = is_constant_zero(beta_p) && is_constant_zero(beta_s);
    }

    std::vector<Tensor> f_s_history;
    std::vector<std::vector<Tensor>> f_p_history;

    for (int64_t layer = 1; layer <= bb.n_layers; ++layer) {
        for (int64_t m = 0; m < k_mod; ++m) {
            Tensor x = states[static_cast<size_t>(m)];
            if (inject && !skip_inject && layer <= cfg.replay_depth) {
                x = ops::add_blocks_scaled(x, f_s, beta_s, block, l, 0);
                x = ops::add_blocks_scaled(x, f_p[static_cast<size_t>(m)], beta_p, block, l, l);
            }
            states[static_cast<size_t>(m)] = backbone::encoder_layer_batch(bb, p, x, layer - 1,
                                                                           m, block);
        }
        if (updates && layer <= cfg.replay_depth) {
            for (int64_t m = 0; m < k_mod; ++m) {
                const Tensor z = ops::layer_norm(
                    ops::slice_blocks(states[static_cast<size_t>(m)], block, l, l));
                f_p[static_cast<size_t>(m)] =
                    update_private_buffer(z, f_p[static_cast<size_t>(m)],
                                          alphas[static_cast<size_t>(m)],
                                          g_nets[static_cast<size_t>(m)]);
            }
            f_s = update_shared_buffer(f_p, f_s, eps_gate, h_net);
            if (cfg.ortho_all_layers && cfg.ortho_weight > 0.0) {
                f_s_history.push_back(f_s);
                f_p_history.push_back(f_p);
            }
        }
    }

    RepBatchResult result;
    std::vector<Tensor> pooled;
    pooled.reserve(static_cast<size_t>(k_mod));
    for (int64_t m = 0; m < k_mod; ++m) {
        const Tensor& s = states[static_cast<size_t>(m)];
        const Tensor content = mechanism ? ops::slice_blocks(s, block, 2 * l, seq) : s;
        pooled.push_back(ops::mean_pool_blocks(content, seq));
    }
    Tensor fused = k_mod == 1 ? pooled[0] : ops::concat_cols(pooled);
    result.logits = ops::add_row_vector(ops::matmul(fused, p.at("head/w")), p.at("head/b"));

    if (updates && cfg.ortho_weight > 0.0) {
        Tensor acc = Tensor::scalar(0.0);
        auto add_sample_terms = [&](const Tensor& fs_stack, const std::vector<Tensor>& fp_stack) {
            for (int64_t b = 0; b < b_n; ++b) {
                std::vector<Tensor> fp_b;
                fp_b.reserve(fp_stack.size());
                for (const Tensor& t : fp_stack)
                    fp_b.push_back(ops::slice_rows(t, b * l, (b + 1) * l));
                bool warned = false;
                acc = ops::add(acc, orthogonality_loss(ops::slice_rows(fs_stack, b * l, (b + 1) * l),
                                                       fp_b, &warned));
                result.ortho_warned = result.ortho_warned || warned;
            }
        };
        if (cfg.ortho_all_layers) {
            for (size_t i = 0; i < f_s_history.size(); ++i)
                add_sample_terms(f_s_history[i], f_p_history[i]);
        } else {
            add_sample_terms(f_s, f_p);
        }
        result.ortho_mean = ops::smul(1.0 / static_cast<double>(b_n), acc);
    } else {
        result.ortho_mean = Tensor::scalar(0.0);
    }
    return result;
}

RepForwardResult rep_forward(const BackboneConfig& bb, const RepConfig& cfg, const Bindings& p,
                             const Sample& sample) {
    cfg.validate(bb);
    const int64_t k_mod = bb.modalities;

    std::vector<Tensor> states;
    std::optional<BlockLayout> layout;
    std::vector<Tensor> f_p;
    Tensor f_s;

    for (int64_t m = 0; m < k_mod; ++m) {
        Tensor e0 = backbone::embed_modality(bb, p, sample.features[static_cast<size_t>(m)], m);
        if (!cfg.compose_prompts) {
            states.push_back(std::move(e0));
            continue;
        }
        const Tensor& buf_p = p.at("rep/private_buffer_" + std::to_string(m));
        const Tensor& buf_s = p.at("rep/shared_buffer");
        const Tensor* theta = nullptr;
        Tensor theta_t;
        if (cfg.dual_buffers && cfg.theta_learnable) {
            theta_t = p.at("rep/theta_" + std::to_string(m));
            theta = &theta_t;
        }
        auto [composed, lay] = compose_layer0_input(buf_s, buf_p, e0, theta);
        states.push_back(std::move(composed));
        layout = lay;
        f_p.push_back(buf_p);
        if (m == 0) f_s = buf_s;
    }

    const bool mechanism = cfg.compose_prompts;
    const bool updates = mechanism && cfg.dual_buffers;
    const bool inject = mechanism && cfg.replay;

    std::vector<PrivateUpdateNet> g_nets;
    SharedUpdateNet h_net;
    std::vector<Tensor> alphas;
    Tensor eps_gate;
    if (updates) {
        for (int64_t m = 0; m < k_mod; ++m) {
            g_nets.push_back(PrivateUpdateNet::from_bindings(p, m));
            alphas.push_back(ops::sigmoid(p.at("rep/gate_a_" + std::to_string(m))));
        }
        h_net = SharedUpdateNet::from_bindings(p);
        eps_gate = ops::sigmoid(p.at("rep/gate_e"));
    }
    Tensor beta_p, beta_s;
    if (inject) {
        beta_p = p.at("rep/beta_p");
        beta_s = p.at("rep/beta_s");
    }

    // Per-layer trajectories for the all-layers orthogonality option.
    std::vector<Tensor> f_s_history;
    std::vector<std::vector<Tensor>> f_p_history;

    for (int64_t layer = 1; layer <= bb.n_layers; ++layer) {
        for (int64_t m = 0; m < k_mod; ++m) {
            Tensor x = states[static_cast<size_t>(m)];
            if (inject)
                x = replay_inject(x, f_p[static_cast<size_t>(m)], f_s, beta_p, beta_s, layer,
                                  cfg.replay_depth, layout);
            states[static_cast<size_t>(m)] =
                backbone::encoder_layer_forward(bb, p, x, layer - 1, m);
        }
        if (updates && layer <= cfg.replay_depth) {
            for (int64_t m = 0; m < k_mod; ++m) {
                const Tensor z = extract_layer_features(states[static_cast<size_t>(m)], layout,
                                                        BufferBlock::private_block);
                f_p[static_cast<size_t>(m)] =
                    update_private_buffer(z, f_p[static_cast<size_t>(m)],
                                          alphas[static_cast<size_t>(m)],
                                          g_nets[static_cast<size_t>(m)]);
            }
            f_s = update_shared_buffer(f_p, f_s, eps_gate, h_net);
            if (cfg.ortho_all_layers) {
                f_s_history.push_back(f_s);
                f_p_history.push_back(f_p);
            }
        }
    }

    RepForwardResult result;
    std::vector<Tensor> content;
    content.reserve(static_cast<size_t>(k_mod));
    for (int64_t m = 0; m < k_mod; ++m) {
        const Tensor& s = states[static_cast<size_t>(m)];
        content.push_back(mechanism
                              ? ops::slice_rows(s, layout->content_begin(), layout->content_end())
                              : s);
    }
    result.logits = backbone::fuse_and_classify(bb, p, content);

    if (mechanism) {
        result.private_buffers = f_p;
        result.shared_buffer = f_s;
    }
    if (updates && cfg.ortho_weight > 0.0) {
        if (cfg.ortho_all_layers) {
            Tensor acc = Tensor::scalar(0.0);
            for (size_t i = 0; i < f_s_history.size(); ++i) {
                bool warned = false;
                acc = ops::add(acc,
                               orthogonality_loss(f_s_history[i], f_p_history[i], &warned));
                result.ortho_warned = result.ortho_warned || warned;
            }
            result.ortho_loss = acc;
        } else {
            bool warned = false;
            result.ortho_loss = orthogonality_loss(f_s, f_p, &warned);
            result.ortho_warned = warned;
        }
    } else {
        result.ortho_loss = Tensor::scalar(0.0);
    }
    return result;
}

}  // namespace repm

}  // namespace rep
