// Copyright 2026 the repkit authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "rep/ops.hpp"
#include "rep/rng.hpp"
#include "rep/tensor.hpp"

using namespace rep;

namespace {

Tensor random_tensor(Rng& rng, int64_t r, int64_t c, double scale = 1.0) {
    Vec v(static_cast<size_t>(r * c));
    for (auto& x : v) x = scale * rng.normal();
    return Tensor::from(r, c, std::move(v));
}

Tensor random_away_from_zero(Rng& rng, int64_t r, int64_t c) {
    Vec v(static_cast<size_t>(r * c));
    for (auto& x : v) {
        const double mag = 0.5 + 1.5 * rng.uniform01();
        x = rng.uniform01() < 0.5 ? -mag : mag;
    }
    return Tensor::from(r, c, std::move(v));
}

double max_rel_err(const Tensor& a, const Tensor& b) {
    REQUIRE(a.rows == b.rows);
    REQUIRE(a.cols == b.cols);
    double worst = 0.0;
    for (size_t i = 0; i < a.data->size(); ++i) {
        const double x = (*a.data)[i], y = (*b.data)[i];
        const double denom = std::max({std::abs(x), std::abs(y), 1e-6});
        worst = std::max(worst, std::abs(x - y) / denom);
    }
    return worst;
}

// One differentiable-op fixture: how to generate inputs and how to apply.
struct OpCase {
    std::string name;
    std::function<std::vector<Tensor>(Rng&)> gen;
    std::function<Tensor(std::span<const Tensor>)> apply;
};

std::vector<OpCase> all_op_cases() {
    std::vector<OpCase> cases;
    auto add_case = [&](std::string name, std::function<std::vector<Tensor>(Rng&)> gen,
                        std::function<Tensor(std::span<const Tensor>)> apply) {
        cases.push_back({std::move(name), std::move(gen), std::move(apply)});
    };

    add_case("matmul",
             [](Rng& r) { return std::vector<Tensor>{random_tensor(r, 3, 4), random_tensor(r, 4, 2)}; },
             [](std::span<const Tensor> in) { return ops::matmul(in[0], in[1]); });
    add_case("matmul_nt",
             [](Rng& r) { return std::vector<Tensor>{random_tensor(r, 3, 4), random_tensor(r, 5, 4)}; },
             [](std::span<const Tensor> in) { return ops::matmul_nt(in[0], in[1]); });
    add_case("transpose",
             [](Rng& r) { return std::vector<Tensor>{random_tensor(r, 3, 5)}; },
             [](std::span<const Tensor> in) { return ops::transpose(in[0]); });
    add_case("add",
             [](Rng& r) { return std::vector<Tensor>{random_tensor(r, 3, 4), random_tensor(r, 3, 4)}; },
             [](std::span<const Tensor> in) { return ops::add(in[0], in[1]); });
    add_case("add_row_vector",
             [](Rng& r) { return std::vector<Tensor>{random_tensor(r, 4, 3), random_tensor(r, 1, 3)}; },
             [](std::span<const Tensor> in) { return ops::add_row_vector(in[0], in[1]); });
    add_case("scalar_mul",
             [](Rng& r) { return std::vector<Tensor>{random_tensor(r, 1, 1), random_tensor(r, 3, 4)}; },
             [](std::span<const Tensor> in) { return ops::scalar_mul(in[0], in[1]); });
    add_case("elementwise_mul",
             [](Rng& r) { return std::vector<Tensor>{random_tensor(r, 3, 4), random_tensor(r, 3, 4)}; },
             [](std::span<const Tensor> in) { return ops::elementwise_mul(in[0], in[1]); });
    add_case("reciprocal",
             [](Rng& r) { return std::vector<Tensor>{random_away_from_zero(r, 3, 4)}; },
             [](std::span<const Tensor> in) { return ops::reciprocal(in[0]); });
    add_case("concat_along_sequence",
             [](Rng& r) {
                 return std::vector<Tensor>{random_tensor(r, 2, 3), random_tensor(r, 3, 3),
                                            random_tensor(r, 1, 3)};
             },
             [](std::span<const Tensor> in) { return ops::concat_rows(in); });
    add_case("concat_cols",
             [](Rng& r) { return std::vector<Tensor>{random_tensor(r, 3, 2), random_tensor(r, 3, 4)}; },
             [](std::span<const Tensor> in) { return ops::concat_cols(in); });
    add_case("slice_rows",
             [](Rng& r) { return std::vector<Tensor>{random_tensor(r, 6, 3)}; },
             [](std::span<const Tensor> in) { return ops::slice_rows(in[0], 1, 4); });
    add_case("slice_cols",
             [](Rng& r) { return std::vector<Tensor>{random_tensor(r, 3, 6)}; },
             [](std::span<const Tensor> in) { return ops::slice_cols(in[0], 2, 5); });
    add_case("layer_norm",
             [](Rng& r) { return std::vector<Tensor>{random_tensor(r, 4, 6, 2.0)}; },
             [](std::span<const Tensor> in) { return ops::layer_norm(in[0]); });
    add_case("layer_norm_affine",
             [](Rng& r) {
                 return std::vector<Tensor>{random_tensor(r, 4, 6, 2.0), random_tensor(r, 1, 6),
                                            random_tensor(r, 1, 6)};
             },
             [](std::span<const Tensor> in) {
                 return ops::layer_norm_affine(in[0], in[1], in[2]);
             });
    add_case("gelu",
             [](Rng& r) { return std::vector<Tensor>{random_tensor(r, 3, 5, 1.5)}; },
             [](std::span<const Tensor> in) { return ops::gelu(in[0]); });
    add_case("softmax",
             [](Rng& r) { return std::vector<Tensor>{random_tensor(r, 3, 5, 2.0)}; },
             [](std::span<const Tensor> in) { return ops::softmax(in[0]); });
    add_case("mean",
             [](Rng& r) { return std::vector<Tensor>{random_tensor(r, 3, 5)}; },
             [](std::span<const Tensor> in) { return ops::mean(in[0]); });
    add_case("mean_rows",
             [](Rng& r) { return std::vector<Tensor>{random_tensor(r, 4, 5)}; },
             [](std::span<const Tensor> in) { return ops::mean_rows(in[0]); });
    add_case("l2_norm",
             [](Rng& r) { return std::vector<Tensor>{random_away_from_zero(r, 3, 4)}; },
             [](std::span<const Tensor> in) { return ops::l2_norm(in[0]); });
    add_case("frobenius_inner_product",
             [](Rng& r) { return std::vector<Tensor>{random_tensor(r, 3, 4), random_tensor(r, 3, 4)}; },
             [](std::span<const Tensor> in) {
                 return ops::frobenius_inner_product(in[0], in[1]);
             });
    add_case("sigmoid",
             [](Rng& r) { return std::vector<Tensor>{random_tensor(r, 3, 5, 2.0)}; },
             [](std::span<const Tensor> in) { return ops::sigmoid(in[0]); });
    add_case("cross_entropy_logits",
             [](Rng& r) {
                 Tensor logits = random_tensor(r, 1, 5, 2.0);
                 Vec y(5, 0.1);
                 y[static_cast<size_t>(r.uniform_int(5))] = 1.0;
                 return std::vector<Tensor>{logits, Tensor::from(1, 5, std::move(y))};
             },
             [](std::span<const Tensor> in) {
                 return ops::cross_entropy_logits(in[0], in[1]);
             });
    add_case("add_rows_scaled",
             [](Rng& r) {
                 return std::vector<Tensor>{random_tensor(r, 6, 3), random_tensor(r, 2, 3),
                                            random_tensor(r, 1, 1)};
             },
             [](std::span<const Tensor> in) {
                 return ops::add_rows_scaled(in[0], in[1], in[2], 1);
             });
    add_case("repeat_rows",
             [](Rng& r) { return std::vector<Tensor>{random_tensor(r, 2, 3)}; },
             [](std::span<const Tensor> in) { return ops::repeat_rows(in[0], 3); });
    add_case("slice_blocks",
             [](Rng& r) { return std::vector<Tensor>{random_tensor(r, 8, 3)}; },
             [](std::span<const Tensor> in) { return ops::slice_blocks(in[0], 4, 1, 2); });
    add_case("add_blocks_scaled",
             [](Rng& r) {
                 return std::vector<Tensor>{random_tensor(r, 10, 3), random_tensor(r, 4, 3),
                                            random_tensor(r, 1, 1)};
             },
             [](std::span<const Tensor> in) {
                 return ops::add_blocks_scaled(in[0], in[1], in[2], 5, 2, 1);
             });
    add_case("mean_pool_blocks",
             [](Rng& r) { return std::vector<Tensor>{random_tensor(r, 9, 4)}; },
             [](std::span<const Tensor> in) { return ops::mean_pool_blocks(in[0], 3); });
    add_case("block_attention",
             [](Rng& r) {
                 return std::vector<Tensor>{random_tensor(r, 6, 4), random_tensor(r, 6, 4),
                                            random_tensor(r, 6, 4)};
             },
             [](std::span<const Tensor> in) {
                 return ops::block_attention(in[0], in[1], in[2], 3, 2, 0.5);
             });
    add_case("cross_entropy_rows",
             [](Rng& r) {
                 Tensor logits = random_tensor(r, 3, 4, 2.0);
                 Vec y(12, 0.0);
                 for (int i = 0; i < 3; ++i) y[static_cast<size_t>(i * 4 + r.uniform_int(4))] = 1.0;
                 return std::vector<Tensor>{logits, Tensor::from(3, 4, std::move(y))};
             },
             [](std::span<const Tensor> in) {
                 return ops::cross_entropy_rows(in[0], in[1]);
             });
    return cases;
}

// Scalar objective: the op output contracted with a fixed weight tensor.
double probe_loss(const OpCase& oc, const std::vector<Tensor>& inputs, const Tensor& w) {
    const Tensor out = oc.apply(inputs);
    if (out.is_scalar()) return out.value();
    return ops::frobenius_inner_product(out, w).value();
}

}  // namespace

TEST_CASE("every op gradient matches central finite differences") {
    const double h = 1e-5;
    const double tol = 1e-4;
    for (const OpCase& oc : all_op_cases()) {
        CAPTURE(oc.name);
        Rng rng(fnv1a64(oc.name) ^ 99);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<Tensor> raw = oc.gen(rng);
            const Tensor probe_shape = oc.apply(raw);
            const Tensor w = probe_shape.is_scalar()
                                 ? Tensor::scalar(1.0)
                                 : random_tensor(rng, probe_shape.rows, probe_shape.cols);

            auto graph = Graph::make();
            std::vector<Tensor> leaves;
            for (const Tensor& t : raw) leaves.push_back(graph->leaf(t));
            Tensor out = oc.apply(leaves);
            Tensor loss = out.is_scalar() ? out : ops::frobenius_inner_product(out, w);
            const GradMap grads = graph->backward(loss);

            for (size_t i = 0; i < raw.size(); ++i) {
                auto f = [&](const Tensor& x) {
                    std::vector<Tensor> probe = raw;
                    probe[i] = x;
                    return probe_loss(oc, probe, w);
                };
                const Tensor fd = ops::finite_difference_grad(f, raw[i], h);
                const Tensor an = grads.grad(leaves[i]);
                const double err = max_rel_err(an, fd);
                CAPTURE(trial);
                CAPTURE(i);
                CHECK(err <= tol);
            }
        }
    }
}

TEST_CASE("sum-style loss gives an exactly all-ones gradient") {
    Rng rng(41);
    const Tensor x = random_tensor(rng, 3, 4);
    auto graph = Graph::make();
    const Tensor xl = graph->leaf(x);
    const Tensor loss = ops::frobenius_inner_product(xl, Tensor::full(3, 4, 1.0));
    const Tensor g = graph->backward(loss).grad(xl);
    for (size_t i = 0; i < g.data->size(); ++i) CHECK((*g.data)[i] == 1.0);
}

TEST_CASE("quadratic-form loss gives gradient exactly 2x") {
    Rng rng(43);
    const Tensor x = random_tensor(rng, 2, 5);
    auto graph = Graph::make();
    const Tensor xl = graph->leaf(x);
    const Tensor loss = ops::frobenius_inner_product(xl, xl);
    const Tensor g = graph->backward(loss).grad(xl);
    for (size_t i = 0; i < g.data->size(); ++i) CHECK((*g.data)[i] == 2.0 * (*x.data)[i]);
}

TEST_CASE("layer_norm gradient matches finite differences at 1e-4") {
    Rng rng(47);
    const Tensor x = random_tensor(rng, 3, 8, 2.0);
    const Tensor w = random_tensor(rng, 3, 8);
    auto graph = Graph::make();
    const Tensor xl = graph->leaf(x);
    const Tensor loss = ops::frobenius_inner_product(ops::layer_norm(xl), w);
    const Tensor an = graph->backward(loss).grad(xl);
    const Tensor fd = ops::finite_difference_grad(
        [&](const Tensor& p) {
            return ops::frobenius_inner_product(ops::layer_norm(p), w).value();
        },
        x, 1e-5);
    CHECK(max_rel_err(an, fd) <= 1e-4);
}

TEST_CASE("finite differences of a constant are zero") {
    Rng rng(53);
    const Tensor x = random_tensor(rng, 2, 3);
    const Tensor fd =
        ops::finite_difference_grad([](const Tensor&) { return 4.25; }, x, 1e-5);
    for (size_t i = 0; i < fd.data->size(); ++i) CHECK((*fd.data)[i] == 0.0);
}

TEST_CASE("finite differences of sum of squares match the analytic derivative") {
    const Tensor x = Tensor::from(1, 2, Vec{1.0, 2.0});
    const Tensor fd = ops::finite_difference_grad(
        [](const Tensor& t) {
            double acc = 0.0;
            for (const double v : *t.data) acc += v * v;
            return acc;
        },
        x, 1e-5);
    CHECK(fd.at(0, 0) == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(fd.at(0, 1) == doctest::Approx(4.0).epsilon(1e-8));
    CHECK_THROWS(ops::finite_difference_grad([](const Tensor&) { return 0.0; }, x, 0.0));
}

namespace {

// A three-stage composition that routes its input through every public op id.
double composition_loss(const Tensor& x, const Tensor& mixer, bool with_graph,
                        Tensor* grad_out = nullptr) {
    GraphPtr graph = with_graph ? Graph::make() : nullptr;
    Tensor xl = with_graph ? graph->leaf(x) : x;

    // stage 1
    Tensor h = ops::matmul(xl, mixer);
    h = ops::add(h, xl);
    h = ops::layer_norm(h);
    h = ops::gelu(h);
    // stage 2
    Tensor s = ops::softmax(h);
    Tensor m = ops::elementwise_mul(s, ops::sigmoid(h));
    const std::vector<Tensor> parts{h, m};
    Tensor cat = ops::concat_rows(parts);
    cat = ops::scalar_mul(Tensor::scalar(0.5), cat);
    // stage 3
    Tensor pooled = ops::mean_rows(cat);
    Tensor norm = ops::l2_norm(cat);
    Tensor loss = ops::add(ops::frobenius_inner_product(pooled, pooled),
                           ops::elementwise_mul(ops::mean(cat), norm));
    if (with_graph && grad_out) {
        *grad_out = graph->backward(loss).grad(xl);
    }
    return loss.value();
}

}  // namespace

TEST_CASE("backward agrees with finite differences on a deep composition") {
    for (const uint64_t seed : {101ull, 202ull, 303ull, 404ull, 505ull}) {
        Rng rng(seed);
        const Tensor x = random_tensor(rng, 4, 4);
        const Tensor mixer = random_tensor(rng, 4, 4, 0.5);
        Tensor analytic;
        composition_loss(x, mixer, true, &analytic);
        const Tensor fd = ops::finite_difference_grad(
            [&](const Tensor& p) { return composition_loss(p, mixer, false); }, x, 1e-5);
        CAPTURE(seed);
        CHECK(max_rel_err(analytic, fd) <= 1e-4);
    }
}

TEST_CASE("backward is bitwise deterministic across repeat runs") {
    Rng rng(59);
    const Tensor x = random_tensor(rng, 4, 4);
    const Tensor mixer = random_tensor(rng, 4, 4, 0.5);
    Tensor g1, g2;
    composition_loss(x, mixer, true, &g1);
    composition_loss(x, mixer, true, &g2);
    CHECK(same_values(g1, g2));

    // And twice on the same graph.
    auto graph = Graph::make();
    const Tensor xl = graph->leaf(x);
    const Tensor loss = ops::frobenius_inner_product(ops::gelu(xl), xl);
    const Tensor a = graph->backward(loss).grad(xl);
    const Tensor b = graph->backward(loss).grad(xl);
    CHECK(same_values(a, b));
}

TEST_CASE("gradients of unused leaves are exactly zero") {
    Rng rng(61);
    const Tensor x = random_tensor(rng, 2, 3);
    auto graph = Graph::make();
    const Tensor used = graph->leaf(x);
    const Tensor unused = graph->leaf(random_tensor(rng, 4, 4));
    const Tensor loss = ops::frobenius_inner_product(used, used);
    const GradMap grads = graph->backward(loss);
    const Tensor gu = grads.grad(unused);
    CHECK(gu.rows == 4);
    for (const double v : *gu.data) CHECK(v == 0.0);
}

TEST_CASE("backward rejects non-scalar and detached losses") {
    Rng rng(67);
    const Tensor x = random_tensor(rng, 2, 2);
    auto graph = Graph::make();
    const Tensor xl = graph->leaf(x);
    const Tensor nonscalar = ops::gelu(xl);
    CHECK_THROWS_AS(graph->backward(nonscalar), ShapeError);
    const Tensor detached = Tensor::scalar(1.0);
    CHECK_THROWS_AS(graph->backward(detached), Error);
    auto other = Graph::make();
    const Tensor foreign = other->leaf(Tensor::scalar(2.0));
    CHECK_THROWS_AS(graph->backward(foreign), Error);
}

TEST_CASE("ops refuse to mix tensors from different graphs") {
    auto g1 = Graph::make();
    auto g2 = Graph::make();
    const Tensor a = g1->leaf(Tensor::full(2, 2, 1.0));
    const Tensor b = g2->leaf(Tensor::full(2, 2, 2.0));
    CHECK_THROWS_AS(ops::add(a, b), Error);
}

TEST_CASE("detached inputs receive no gradient work but values flow") {
    Rng rng(71);
    const Tensor frozen = random_tensor(rng, 3, 3);
    auto graph = Graph::make();
    const Tensor xl = graph->leaf(random_tensor(rng, 2, 3));
    const Tensor out = ops::matmul(xl, frozen);  // frozen is not a leaf
    const Tensor loss = ops::frobenius_inner_product(out, out);
    const GradMap grads = graph->backward(loss);
    const Tensor gx = grads.grad(xl);
    CHECK(gx.rows == 2);
    double norm = 0.0;
    for (const double v : *gx.data) norm += v * v;
    CHECK(norm > 0.0);
}
