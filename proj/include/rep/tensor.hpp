// Copyright 2026 the repkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rep/errors.hpp"

namespace rep {

using Scalar = double;
using Vec = std::vector<Scalar>;

class Graph;
using GraphPtr = std::shared_ptr<Graph>;

// Dense row-major rank-2 tensor. Values are immutable after creation;
// copies share the underlying buffer. A tensor is either detached (plain
// value) or attached to the Graph that produced it via `node`.
struct Tensor {
    int64_t rows = 0;
    int64_t cols = 0;
    std::shared_ptr<const Vec> data;
    GraphPtr graph;
    int32_t node = -1;

    Tensor() = default;

    int64_t numel() const { return rows * cols; }
    bool attached() const { return graph != nullptr && node >= 0; }
    bool is_scalar() const { return numel() == 1; }

    Scalar at(int64_t r, int64_t c) const { return (*data)[r * cols + c]; }
    Scalar value() const;  // scalar tensors only

    Tensor detached() const;

    std::string shape_str() const;

    static Tensor from(int64_t rows, int64_t cols, Vec values);
    static Tensor zeros(int64_t rows, int64_t cols);
    static Tensor full(int64_t rows, int64_t cols, Scalar v);
    static Tensor scalar(Scalar v);
    static Tensor identity(int64_t n);
};

bool same_values(const Tensor& a, const Tensor& b);  // bitwise compare

// Per-node gradients produced by one backward pass.
class GradMap {
public:
    // Gradient of the loss w.r.t. `t` (which must belong to the graph that
    // produced this map). Tensors the loss never touched get exact zeros.
    Tensor grad(const Tensor& t) const;

private:
    friend class Graph;
    std::vector<Vec> grads_;           // empty Vec = untouched
    std::vector<std::pair<int64_t, int64_t>> shapes_;
    const Graph* owner_ = nullptr;
};

// Reverse-mode tape. One graph per training step; single-threaded by
// contract (distinct graphs may live on distinct threads).
class Graph : public std::enable_shared_from_this<Graph> {
public:
    static GraphPtr make() { return std::make_shared<Graph>(); }

    // Registers `value` as a differentiable leaf and returns the attached
    // handle. The value buffer is shared, never copied.
    Tensor leaf(const Tensor& value);

    // Gradients of a scalar loss w.r.t. every recorded node, visiting nodes
    // exactly once in reverse insertion order. Throws on a non-scalar,
    // detached, or foreign loss. Calling twice gives bitwise-equal results.
    GradMap backward(const Tensor& loss) const;

    size_t size() const { return nodes_.size(); }

    // --- recording interface (used by ops) -------------------------------

    // Accumulation sink handed to backward closures.
    class Sink {
    public:
        // Gradient buffer of input slot `i` of the node being processed;
        // allocated zero-filled on first use. Null if that input is either
        // detached or a non-differentiable argument.
        Vec* input_grad(size_t i);

    private:
        friend class Graph;
        std::vector<Vec>* all_ = nullptr;
        const std::vector<int32_t>* inputs_ = nullptr;
        const std::vector<std::pair<int64_t, int64_t>>* shapes_ = nullptr;
    };

    using BackwardFn = std::function<void(const Vec& out_grad, Sink& sink)>;

    // Records one op application. `inputs` lists the node ids of attached
    // inputs (-1 for detached ones, keeping slot positions stable).
    int32_t record(const char* op, std::vector<int32_t> inputs,
                   int64_t out_rows, int64_t out_cols, BackwardFn backward);

private:
    struct Node {
        const char* op;
        std::vector<int32_t> inputs;
        int64_t rows, cols;
        BackwardFn backward;
    };
    std::vector<Node> nodes_;
};

// Throws NumericalError if any element of `t` is NaN or infinite.
void check_finite(const char* op, const Tensor& t);
void check_finite(const char* op, const Vec& v);

}  // namespace rep
