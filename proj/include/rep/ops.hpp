// Copyright 2026 the repkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "rep/tensor.hpp"

namespace rep::ops {

// All operations are differentiable: when any input is attached to a graph,
// the result is recorded there. Shapes are validated strictly; there is no
// broadcasting beyond scalar-times-tensor (scalar_mul) and the row-vector
// bias add (add_row_vector).

Tensor matmul(const Tensor& a, const Tensor& b);      // [m,k]·[k,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);   // [m,k]·[n,k]^T
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor add_row_vector(const Tensor& x, const Tensor& v);  // v is [1,d]
Tensor scalar_mul(const Tensor& s, const Tensor& x);      // s has one element
Tensor elementwise_mul(const Tensor& a, const Tensor& b);
Tensor reciprocal(const Tensor& x);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, int64_t r0, int64_t r1);
Tensor slice_cols(const Tensor& x, int64_t c0, int64_t c1);
Tensor layer_norm(const Tensor& x);
Tensor layer_norm_affine(const Tensor& x, const Tensor& gain, const Tensor& bias);
Tensor gelu(const Tensor& x);
Tensor softmax(const Tensor& x);  // row-wise
Tensor mean(const Tensor& x);       // over all elements, -> [1,1]
Tensor mean_rows(const Tensor& x);  // column means, [n,d] -> [1,d]
Tensor l2_norm(const Tensor& x);    // Frobenius norm, -> [1,1]
Tensor frobenius_inner_product(const Tensor& a, const Tensor& b);  // -> [1,1]
Tensor sigmoid(const Tensor& x);
Tensor cross_entropy_logits(const Tensor& logits, const Tensor& onehot);  // [1,C]x[1,C]
// Returns x with rows [r0, r0+f.rows) incremented by s*f.
Tensor add_rows_scaled(const Tensor& x, const Tensor& f, const Tensor& s, int64_t r0);

// --- block ops for batch-stacked sequences -------------------------------
// A stacked tensor holds n_blocks independent sequences of block_rows rows.

// Whole-matrix tiling: [r,c] -> [times*r, c]; gradient sums the tiles.
Tensor repeat_rows(const Tensor& x, int64_t times);
// Rows [offset, offset+take) of every block, stacked: -> [n_blocks*take, c].
Tensor slice_blocks(const Tensor& x, int64_t block_rows, int64_t offset, int64_t take);
// Per block, rows [offset, offset+f_block_rows) get += s * (f's block).
Tensor add_blocks_scaled(const Tensor& x, const Tensor& f, const Tensor& s,
                         int64_t x_block_rows, int64_t f_block_rows, int64_t offset);
// Row-mean of each block: -> [n_blocks, c].
Tensor mean_pool_blocks(const Tensor& x, int64_t block_rows);
// Multi-head self-attention within each block of q/k/v (all [n*block_rows, d]).
Tensor block_attention(const Tensor& q, const Tensor& k, const Tensor& v, int64_t block_rows,
                       int64_t n_heads, Scalar scale);
// Mean over rows of the per-row cross entropy; logits and onehot are [n, C].
Tensor cross_entropy_rows(const Tensor& logits, const Tensor& onehot);

// Convenience: multiply by a plain constant (no gradient to the constant).
Tensor smul(Scalar c, const Tensor& x);

// String-dispatched entry point covering the public operation set.
Tensor forward_op(std::string_view op_id, std::span<const Tensor> inputs);

// Central finite differences: (f(x + h e_i) - f(x - h e_i)) / 2h per
// coordinate. The test oracle for every gradient in this library.
Tensor finite_difference_grad(const std::function<Scalar(const Tensor&)>& f, const Tensor& x,
                              Scalar h);

}  // namespace rep::ops
