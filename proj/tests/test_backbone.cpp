// Copyright 2026 the repkit authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <vector>

#include "rep/backbone.hpp"
#include "rep/missing.hpp"
#include "rep/ops.hpp"
#include "rep/rng.hpp"

using namespace rep;

namespace {

Tensor random_tensor(Rng& rng, int64_t r, int64_t c, double scale = 1.0) {
    Vec v(static_cast<size_t>(r * c));
    for (auto& x : v) x = scale * rng.normal();
    return Tensor::from(r, c, std::move(v));
}

BackboneConfig tiny_config() {
    BackboneConfig cfg;
    cfg.modalities = 2;
    cfg.d_model = 8;
    cfg.n_layers = 3;
    cfg.n_heads = 2;
    cfg.seq_len = 4;
    cfg.n_classes = 3;
    cfg.ffn_mult = 2;
    cfg.feature_widths = {5, 6};
    return cfg;
}

Sample random_sample(const BackboneConfig& cfg, Rng& rng) {
    Sample s;
    for (int64_t m = 0; m < cfg.modalities; ++m)
        s.features.push_back(
            random_tensor(rng, cfg.seq_len, cfg.feature_widths[static_cast<size_t>(m)]));
    s.label = static_cast<int>(rng.uniform_int(cfg.n_classes));
    return s;
}

}  // namespace

TEST_CASE("config validation catches head divisibility and modality counts") {
    BackboneConfig cfg = tiny_config();
    cfg.d_model = 9;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny_config();
    cfg.feature_widths = {5};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny_config();
    cfg.modalities = 5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("embedding is deterministic and placeholder embeddings are fixed") {
    const BackboneConfig cfg = tiny_config();
    const ParamStore store = backbone::init_params(cfg, Rng(3));
    const Bindings p(store, nullptr, nullptr);
    Rng rng(5);
    const Tensor raw = random_tensor(rng, cfg.seq_len, 5);
    CHECK(same_values(backbone::embed_modality(cfg, p, raw, 0),
                      backbone::embed_modality(cfg, p, raw, 0)));

    const Tensor text1 = placeholder_features(ModalityKind::text_like, cfg.seq_len, 6);
    const Tensor text2 = placeholder_features(ModalityKind::text_like, cfg.seq_len, 6);
    CHECK(same_values(text1, text2));
    CHECK(same_values(backbone::embed_modality(cfg, p, text1, 1),
                      backbone::embed_modality(cfg, p, text2, 1)));

    CHECK_THROWS_AS(backbone::embed_modality(cfg, p, raw, 7), ConfigError);
}

TEST_CASE("embedding a stacked batch equals per-sample embeddings stacked") {
    const BackboneConfig cfg = tiny_config();
    const ParamStore store = backbone::init_params(cfg, Rng(7));
    const Bindings p(store, nullptr, nullptr);
    Rng rng(9);
    const Tensor a = random_tensor(rng, cfg.seq_len, 5);
    const Tensor b = random_tensor(rng, cfg.seq_len, 5);
    const std::vector<Tensor> both{a, b};
    const Tensor stacked_raw = ops::concat_rows(both);
    const Tensor batch = backbone::embed_modality(cfg, p, stacked_raw, 0);
    const std::vector<Tensor> separate{backbone::embed_modality(cfg, p, a, 0),
                                       backbone::embed_modality(cfg, p, b, 0)};
    CHECK(same_values(batch, ops::concat_rows(separate)));
}

TEST_CASE("layer with zeroed output projections is the residual identity") {
    const BackboneConfig cfg = tiny_config();
    ParamStore store = backbone::init_params(cfg, Rng(11));
    store.set("backbone/l1_m0_wo", Tensor::zeros(cfg.d_model, cfg.d_model));
    store.set("backbone/l1_m0_ffn_w2", Tensor::zeros(cfg.d_model * cfg.ffn_mult, cfg.d_model));
    const Bindings p(store, nullptr, nullptr);
    Rng rng(13);
    const Tensor x = random_tensor(rng, 6, cfg.d_model);
    const Tensor y = backbone::encoder_layer_forward(cfg, p, x, 1, 0);
    CHECK(same_values(y, x));
}

TEST_CASE("sequence length is preserved through every layer") {
    const BackboneConfig cfg = tiny_config();
    const ParamStore store = backbone::init_params(cfg, Rng(17));
    const Bindings p(store, nullptr, nullptr);
    Rng rng(19);
    for (const int64_t len : {2, 4, 9}) {
        Tensor x = random_tensor(rng, len, cfg.d_model);
        for (int64_t l = 0; l < cfg.n_layers; ++l) {
            x = backbone::encoder_layer_forward(cfg, p, x, l, 1);
            CHECK(x.rows == len);
            CHECK(x.cols == cfg.d_model);
        }
    }
    CHECK_THROWS_AS(backbone::encoder_layer_forward(cfg, p, random_tensor(rng, 2, cfg.d_model),
                                                    cfg.n_layers, 0),
                    ConfigError);
}

TEST_CASE("two-token layer matches a hand-unrolled attention computation") {
    BackboneConfig cfg;
    cfg.modalities = 2;
    cfg.d_model = 2;
    cfg.n_layers = 1;
    cfg.n_heads = 1;
    cfg.seq_len = 2;
    cfg.n_classes = 2;
    cfg.ffn_mult = 2;
    cfg.feature_widths = {2, 2};
    ParamStore store = backbone::init_params(cfg, Rng(23));
    Rng rng(29);
    // Randomize every weight the layer touches so the oracle is not trivial.
    for (const char* w : {"wq", "wk", "wv", "wo"})
        store.set(std::string("backbone/l0_m0_") + w, random_tensor(rng, 2, 2));
    for (const char* b : {"bq", "bk", "bv", "bo"})
        store.set(std::string("backbone/l0_m0_") + b, random_tensor(rng, 1, 2, 0.3));
    store.set("backbone/l0_m0_ffn_w1", random_tensor(rng, 2, 4));
    store.set("backbone/l0_m0_ffn_b1", random_tensor(rng, 1, 4, 0.3));
    store.set("backbone/l0_m0_ffn_w2", random_tensor(rng, 4, 2));
    store.set("backbone/l0_m0_ffn_b2", random_tensor(rng, 1, 2, 0.3));
    const Bindings p(store, nullptr, nullptr);
    const Tensor x = random_tensor(rng, 2, 2);
    const Tensor got = backbone::encoder_layer_forward(cfg, p, x, 0, 0);

    // Hand-unrolled oracle.
    auto get = [&](const char* name) { return store.get(std::string("backbone/l0_m0_") + name); };
    auto ln = [&](const std::vector<double>& row, const Tensor& g, const Tensor& b) {
        const double mu = (row[0] + row[1]) / 2.0;
        const double var = ((row[0] - mu) * (row[0] - mu) + (row[1] - mu) * (row[1] - mu)) / 2.0;
        const double is = 1.0 / std::sqrt(var + 1e-5);
        return std::vector<double>{(row[0] - mu) * is * g.at(0, 0) + b.at(0, 0),
                                   (row[1] - mu) * is * g.at(0, 1) + b.at(0, 1)};
    };
    auto affine = [&](const std::vector<std::vector<double>>& rows, const Tensor& w,
                      const Tensor& b) {
        std::vector<std::vector<double>> out;
        for (const auto& r : rows) {
            std::vector<double> o(static_cast<size_t>(w.cols), 0.0);
            for (int64_t j = 0; j < w.cols; ++j) {
                for (size_t k = 0; k < r.size(); ++k)
                    o[static_cast<size_t>(j)] += r[k] * w.at(static_cast<int64_t>(k), j);
                o[static_cast<size_t>(j)] += b.at(0, j);
            }
            out.push_back(o);
        }
        return out;
    };
    std::vector<std::vector<double>> xr{{x.at(0, 0), x.at(0, 1)}, {x.at(1, 0), x.at(1, 1)}};
    std::vector<std::vector<double>> h{ln(xr[0], get("ln1_g"), get("ln1_b")),
                                       ln(xr[1], get("ln1_g"), get("ln1_b"))};
    auto q = affine(h, get("wq"), get("bq"));
    auto k = affine(h, get("wk"), get("bk"));
    auto v = affine(h, get("wv"), get("bv"));
    const double scale = 1.0 / std::sqrt(2.0);
    std::vector<std::vector<double>> attn(2, std::vector<double>(2, 0.0));
    for (int i = 0; i < 2; ++i) {
        double s0 = scale * (q[i][0] * k[0][0] + q[i][1] * k[0][1]);
        double s1 = scale * (q[i][0] * k[1][0] + q[i][1] * k[1][1]);
        const double mx = std::max(s0, s1);
        const double e0 = std::exp(s0 - mx), e1 = std::exp(s1 - mx);
        const double p0 = e0 / (e0 + e1), p1 = e1 / (e0 + e1);
        attn[i][0] = p0 * v[0][0] + p1 * v[1][0];
        attn[i][1] = p0 * v[0][1] + p1 * v[1][1];
    }
    auto attn_o = affine(attn, get("wo"), get("bo"));
    std::vector<std::vector<double>> x1{{xr[0][0] + attn_o[0][0], xr[0][1] + attn_o[0][1]},
                                        {xr[1][0] + attn_o[1][0], xr[1][1] + attn_o[1][1]}};
    std::vector<std::vector<double>> h2{ln(x1[0], get("ln2_g"), get("ln2_b")),
                                        ln(x1[1], get("ln2_g"), get("ln2_b"))};
    auto f1 = affine(h2, get("ffn_w1"), get("ffn_b1"));
    for (auto& row : f1)
        for (auto& val : row) val = 0.5 * val * (1.0 + std::erf(val / std::sqrt(2.0)));
    auto f2 = affine(f1, get("ffn_w2"), get("ffn_b2"));
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            CHECK(got.at(i, j) ==
                  doctest::Approx(x1[static_cast<size_t>(i)][static_cast<size_t>(j)] +
                                  f2[static_cast<size_t>(i)][static_cast<size_t>(j)])
                      .epsilon(1e-12));
}

TEST_CASE("fuse_and_classify handles zero states and matches the pooling oracle") {
    const BackboneConfig cfg = tiny_config();
    ParamStore store = backbone::init_params(cfg, Rng(31));
    const Bindings p(store, nullptr, nullptr);

    // All-zero states with a zero-bias head give all-zero logits.
    const std::vector<Tensor> zeros{Tensor::zeros(4, cfg.d_model), Tensor::zeros(4, cfg.d_model)};
    const Tensor z = backbone::fuse_and_classify(cfg, p, zeros);
    for (const double v : *z.data) CHECK(v == 0.0);

    // Random states match a manual mean-pool + matmul oracle.
    Rng rng(37);
    const std::vector<Tensor> states{random_tensor(rng, 4, cfg.d_model),
                                     random_tensor(rng, 4, cfg.d_model)};
    const Tensor logits = backbone::fuse_and_classify(cfg, p, states);
    const Tensor w = store.get("head/w");
    for (int64_t c = 0; c < cfg.n_classes; ++c) {
        double expected = 0.0;
        for (int64_t m = 0; m < 2; ++m) {
            for (int64_t j = 0; j < cfg.d_model; ++j) {
                double pool = 0.0;
                for (int64_t t = 0; t < 4; ++t) pool += states[static_cast<size_t>(m)].at(t, j);
                pool /= 4.0;
                expected += pool * w.at(m * cfg.d_model + j, c);
            }
        }
        CHECK(logits.at(0, c) == doctest::Approx(expected).epsilon(1e-12));
    }

    // Permuting tokens inside a modality leaves logits unchanged.
    const Tensor& s0 = states[0];
    Vec permuted(*s0.data);
    for (int64_t j = 0; j < cfg.d_model; ++j) {
        std::swap(permuted[0 * cfg.d_model + j], permuted[3 * cfg.d_model + j]);
        std::swap(permuted[1 * cfg.d_model + j], permuted[2 * cfg.d_model + j]);
    }
    const std::vector<Tensor> shuffled{Tensor::from(4, cfg.d_model, std::move(permuted)),
                                       states[1]};
    const Tensor logits2 = backbone::fuse_and_classify(cfg, p, shuffled);
    for (int64_t c = 0; c < cfg.n_classes; ++c)
        CHECK(logits2.at(0, c) == doctest::Approx(logits.at(0, c)).epsilon(1e-12));

    const std::vector<Tensor> wrong{states[0]};
    CHECK_THROWS_AS(backbone::fuse_and_classify(cfg, p, wrong), ShapeError);
}

TEST_CASE("forward passes are batch-order equivariant") {
    const BackboneConfig cfg = tiny_config();
    const ParamStore store = backbone::init_params(cfg, Rng(41));
    const Bindings p(store, nullptr, nullptr);
    Rng rng(43);
    const Sample a = random_sample(cfg, rng);
    const Sample b = random_sample(cfg, rng);
    const Tensor la = backbone::forward_plain(cfg, p, a);
    const Tensor lb = backbone::forward_plain(cfg, p, b);
    // Processing in the opposite order reproduces the same per-sample logits.
    const Tensor lb2 = backbone::forward_plain(cfg, p, b);
    const Tensor la2 = backbone::forward_plain(cfg, p, a);
    CHECK(same_values(la, la2));
    CHECK(same_values(lb, lb2));
}

TEST_CASE("init_params is deterministic per seed") {
    const BackboneConfig cfg = tiny_config();
    const ParamStore s1 = backbone::init_params(cfg, Rng(55));
    const ParamStore s2 = backbone::init_params(cfg, Rng(55));
    const ParamStore s3 = backbone::init_params(cfg, Rng(56));
    REQUIRE(s1.items().size() == s2.items().size());
    bool all_equal = true, any_diff_seed = false;
    for (size_t i = 0; i < s1.items().size(); ++i) {
        all_equal = all_equal && same_values(s1.items()[i].second, s2.items()[i].second);
        any_diff_seed = any_diff_seed || !same_values(s1.items()[i].second, s3.items()[i].second);
    }
    CHECK(all_equal);
    CHECK(any_diff_seed);
}
