// Copyright 2026 the repkit authors
// SPDX-License-Identifier: Apache-2.0

#include "rep/tensor.hpp"

#include <cmath>
#include <cstring>

namespace rep {

Scalar Tensor::value() const {
    if (!is_scalar()) throw ShapeError("value(): tensor " + shape_str() + " is not a scalar");
    return (*data)[0];
}

Tensor Tensor::detached() const {
    Tensor t = *this;
    t.graph.reset();
    t.node = -1;
    return t;
}

std::string Tensor::shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

Tensor Tensor::from(int64_t rows, int64_t cols, Vec values) {
    if (rows <= 0 || cols <= 0)
        throw ShapeError("Tensor::from: non-positive shape " + std::to_string(rows) + "x" +
                         std::to_string(cols));
    if (static_cast<int64_t>(values.size()) != rows * cols)
        throw ShapeError("Tensor::from: " + std::to_string(values.size()) +
                         " values for shape " + std::to_string(rows) + "x" +
                         std::to_string(cols));
    Tensor t;
    t.rows = rows;
    t.cols = cols;
    t.data = std::make_shared<const Vec>(std::move(values));
    return t;
}

Tensor Tensor::zeros(int64_t rows, int64_t cols) { return full(rows, cols, 0.0); }

Tensor Tensor::full(int64_t rows, int64_t cols, Scalar v) {
    return from(rows, cols, Vec(static_cast<size_t>(rows * cols), v));
}

Tensor Tensor::scalar(Scalar v) { return from(1, 1, Vec{v}); }

Tensor Tensor::identity(int64_t n) {
    Vec v(static_cast<size_t>(n * n), 0.0);
    for (int64_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
    return from(n, n, std::move(v));
}

bool same_values(const Tensor& a, const Tensor& b) {
    if (a.rows != b.rows || a.cols != b.cols) return false;
    return std::memcmp(a.data->data(), b.data->data(), a.numel() * sizeof(Scalar)) == 0;
}

Tensor GradMap::grad(const Tensor& t) const {
    if (!t.attached() || t.graph.get() != owner_)
        throw Error("GradMap::grad: tensor does not belong to the graph of this backward pass");
    const auto idx = static_cast<size_t>(t.node);
    Tensor g;
    g.rows = shapes_[idx].first;
    g.cols = shapes_[idx].second;
    if (grads_[idx].empty()) {
        g.data = std::make_shared<const Vec>(Vec(static_cast<size_t>(g.numel()), 0.0));
    } else {
        g.data = std::make_shared<const Vec>(grads_[idx]);
    }
    return g;
}

Tensor Graph::leaf(const Tensor& value) {
    Tensor t = value.detached();
    t.graph = shared_from_this();
    t.node = record("leaf", {}, t.rows, t.cols, [](const Vec&, Sink&) {});
    return t;
}

int32_t Graph::record(const char* op, std::vector<int32_t> inputs, int64_t out_rows,
                      int64_t out_cols, BackwardFn backward) {
    nodes_.push_back(Node{op, std::move(inputs), out_rows, out_cols, std::move(backward)});
    return static_cast<int32_t>(nodes_.size() - 1);
}

Vec* Graph::Sink::input_grad(size_t i) {
    const int32_t id = (*inputs_)[i];
    if (id < 0) return nullptr;
    Vec& buf = (*all_)[static_cast<size_t>(id)];
    if (buf.empty()) {
        const auto& sh = (*shapes_)[static_cast<size_t>(id)];
        buf.assign(static_cast<size_t>(sh.first * sh.second), 0.0);
    }
    return &buf;
}

GradMap Graph::backward(const Tensor& loss) const {
    if (!loss.attached()) throw Error("backward: loss is detached from any graph");
    if (loss.graph.get() != this) throw Error("backward: loss belongs to a different graph");
    if (!loss.is_scalar())
        throw ShapeError("backward: loss must be scalar, got " + loss.shape_str());

    GradMap out;
    out.owner_ = this;
    out.grads_.resize(nodes_.size());
    out.shapes_.reserve(nodes_.size());
    for (const auto& n : nodes_) out.shapes_.emplace_back(n.rows, n.cols);

    out.grads_[static_cast<size_t>(loss.node)] = Vec{1.0};

    for (size_t i = nodes_.size(); i-- > 0;) {
        const Vec& g = out.grads_[i];
        if (g.empty()) continue;  // node does not contribute to the loss
        const Node& n = nodes_[i];
        if (!n.backward) continue;
        Sink sink;
        sink.all_ = &out.grads_;
        sink.inputs_ = &n.inputs;
        sink.shapes_ = &out.shapes_;
        n.backward(g, sink);
    }

    for (size_t i = 0; i < nodes_.size(); ++i) {
        if (!out.grads_[i].empty()) check_finite(nodes_[i].op, out.grads_[i]);
    }
    return out;
}

void check_finite(const char* op, const Vec& v) {
    for (const Scalar x : v) {
        if (!std::isfinite(x))
            throw NumericalError(std::string(op) + ": non-finite value in result");
    }
}

void check_finite(const char* op, const Tensor& t) { check_finite(op, *t.data); }

}  // namespace rep
