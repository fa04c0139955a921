// Copyright 2026 the repkit authors
// SPDX-License-Identifier: Apache-2.0

#include "rep/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "rep/threading.hpp"

namespace rep::ops {
namespace {

constexpr Scalar kLayerNormEps = 1e-5;

using ConstData = std::shared_ptr<const Vec>;

// Row-range parallelism for the larger kernels. Each output row is produced
// by exactly one thread with identical per-row arithmetic, so results do not
// depend on the thread count.
void parallel_rows(int64_t m, int64_t flops_per_row, const std::function<void(int64_t, int64_t)>& fn) {
    const int threads = thread_count();
    if (threads <= 1 || m < 2 || m * flops_per_row < (1 << 16)) {
        fn(0, m);
        return;
    }
    const int64_t chunks = std::min<int64_t>(threads, m);
    parallel_for(chunks, [&](int64_t c) {
        const int64_t lo = m * c / chunks;
        const int64_t hi = m * (c + 1) / chunks;
        fn(lo, hi);
    });
}

// --- gemm kernels (row-major, accumulate into C) --------------------------

// C[m,n] += A[m,k] · B[k,n]
void gemm_nn(const Scalar* A, const Scalar* B, Scalar* C, int64_t m, int64_t k, int64_t n) {
    parallel_rows(m, 2 * k * n, [=](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) {
            Scalar* c = C + i * n;
            const Scalar* a = A + i * k;
            for (int64_t kk = 0; kk < k; ++kk) {
                const Scalar av = a[kk];
                const Scalar* b = B + kk * n;
                for (int64_t j = 0; j < n; ++j) c[j] += av * b[j];
            }
        }
    });
}

// C[m,n] += A[m,k] · B[n,k]^T
void gemm_nt(const Scalar* A, const Scalar* B, Scalar* C, int64_t m, int64_t k, int64_t n) {
    parallel_rows(m, 2 * k * n, [=](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) {
            const Scalar* a = A + i * k;
            Scalar* c = C + i * n;
            for (int64_t j = 0; j < n; ++j) {
                const Scalar* b = B + j * k;
                Scalar acc = 0.0;
                for (int64_t kk = 0; kk < k; ++kk) acc += a[kk] * b[kk];
                c[j] += acc;
            }
        }
    });
}

// C[k,n] += A[m,k]^T · B[m,n]   (serial: output rows are shared across i)
void gemm_tn(const Scalar* A, const Scalar* B, Scalar* C, int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i) {
        const Scalar* a = A + i * k;
        const Scalar* b = B + i * n;
        for (int64_t kk = 0; kk < k; ++kk) {
            const Scalar av = a[kk];
            Scalar* c = C + kk * n;
            for (int64_t j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

// --- recording helper ------------------------------------------------------

GraphPtr common_graph(const char* op, std::span<const Tensor* const> inputs) {
    GraphPtr g;
    for (const Tensor* t : inputs) {
        if (!t->attached()) continue;
        if (!g) {
            g = t->graph;
        } else if (g != t->graph) {
            throw Error(std::string(op) + ": inputs belong to different graphs");
        }
    }
    return g;
}

Tensor attach(const char* op, std::span<const Tensor* const> inputs, Tensor out,
              Graph::BackwardFn backward) {
    check_finite(op, out);
    GraphPtr g = common_graph(op, inputs);
    if (!g) return out;
    std::vector<int32_t> ids;
    ids.reserve(inputs.size());
    for (const Tensor* t : inputs) ids.push_back(t->attached() ? t->node : -1);
    out.node = g->record(op, std::move(ids), out.rows, out.cols, std::move(backward));
    out.graph = std::move(g);
    return out;
}

Tensor attach(const char* op, std::initializer_list<const Tensor*> inputs, Tensor out,
              Graph::BackwardFn backward) {
    return attach(op, std::span<const Tensor* const>(inputs.begin(), inputs.size()),
                  std::move(out), std::move(backward));
}

void require(bool cond, const char* op, const std::string& detail) {
    if (!cond) throw ShapeError(std::string(op) + ": " + detail);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.cols == b.rows, "matmul", "lhs " + a.shape_str() + ", rhs " + b.shape_str());
    const int64_t m = a.rows, k = a.cols, n = b.cols;
    Vec out(static_cast<size_t>(m * n), 0.0);
    gemm_nn(a.data->data(), b.data->data(), out.data(), m, k, n);
    return attach("matmul", {&a, &b}, Tensor::from(m, n, std::move(out)),
                  [ad = a.data, bd = b.data, m, k, n](const Vec& g, Graph::Sink& s) {
                      if (Vec* ga = s.input_grad(0))
                          gemm_nt(g.data(), bd->data(), ga->data(), m, n, k);
                      if (Vec* gb = s.input_grad(1))
                          gemm_tn(ad->data(), g.data(), gb->data(), m, k, n);
                  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require(a.cols == b.cols, "matmul_nt", "lhs " + a.shape_str() + ", rhs " + b.shape_str());
    const int64_t m = a.rows, k = a.cols, n = b.rows;
    Vec out(static_cast<size_t>(m * n), 0.0);
    gemm_nt(a.data->data(), b.data->data(), out.data(), m, k, n);
    return attach("matmul_nt", {&a, &b}, Tensor::from(m, n, std::move(out)),
                  [ad = a.data, bd = b.data, m, k, n](const Vec& g, Graph::Sink& s) {
                      // out = A·B^T: dA = G·B, dB = G^T·A
                      if (Vec* ga = s.input_grad(0))
                          gemm_nn(g.data(), bd->data(), ga->data(), m, n, k);
                      if (Vec* gb = s.input_grad(1))
                          gemm_tn(g.data(), ad->data(), gb->data(), m, n, k);
                  });
}

Tensor transpose(const Tensor& a) {
    const int64_t m = a.rows, n = a.cols;
    Vec out(static_cast<size_t>(m * n));
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) out[j * m + i] = (*a.data)[i * n + j];
    return attach("transpose", {&a}, Tensor::from(n, m, std::move(out)),
                  [m, n](const Vec& g, Graph::Sink& s) {
                      if (Vec* ga = s.input_grad(0)) {
                          for (int64_t i = 0; i < n; ++i)
                              for (int64_t j = 0; j < m; ++j) (*ga)[j * n + i] += g[i * m + j];
                      }
                  });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require(a.rows == b.rows && a.cols == b.cols, "add",
            a.shape_str() + " vs " + b.shape_str());
    Vec out(*a.data);
    const Vec& bv = *b.data;
    for (size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return attach("add", {&a, &b}, Tensor::from(a.rows, a.cols, std::move(out)),
                  [](const Vec& g, Graph::Sink& s) {
                      for (size_t slot : {size_t{0}, size_t{1}}) {
                          if (Vec* gi = s.input_grad(slot))
                              for (size_t i = 0; i < g.size(); ++i) (*gi)[i] += g[i];
                      }
                  });
}

Tensor add_row_vector(const Tensor& x, const Tensor& v) {
    require(v.rows == 1 && v.cols == x.cols, "add_row_vector",
            "x " + x.shape_str() + ", v " + v.shape_str());
    Vec out(*x.data);
    const Vec& vv = *v.data;
    for (int64_t i = 0; i < x.rows; ++i)
        for (int64_t j = 0; j < x.cols; ++j) out[i * x.cols + j] += vv[j];
    return attach("add_row_vector", {&x, &v}, Tensor::from(x.rows, x.cols, std::move(out)),
                  [n = x.rows, d = x.cols](const Vec& g, Graph::Sink& s) {
                      if (Vec* gx = s.input_grad(0))
                          for (size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
                      if (Vec* gv = s.input_grad(1)) {
                          for (int64_t i = 0; i < n; ++i)
                              for (int64_t j = 0; j < d; ++j) (*gv)[j] += g[i * d + j];
                      }
                  });
}

Tensor scalar_mul(const Tensor& s, const Tensor& x) {
    require(s.is_scalar(), "scalar_mul", "multiplier " + s.shape_str() + " is not a scalar");
    const Scalar sv = (*s.data)[0];
    Vec out(*x.data);
    for (Scalar& o : out) o *= sv;
    return attach("scalar_mul", {&s, &x}, Tensor::from(x.rows, x.cols, std::move(out)),
                  [sv, xd = x.data](const Vec& g, Graph::Sink& sink) {
                      if (Vec* gs = sink.input_grad(0)) {
                          Scalar acc = 0.0;
                          for (size_t i = 0; i < g.size(); ++i) acc += g[i] * (*xd)[i];
                          (*gs)[0] += acc;
                      }
                      if (Vec* gx = sink.input_grad(1))
                          for (size_t i = 0; i < g.size(); ++i) (*gx)[i] += sv * g[i];
                  });
}

Tensor elementwise_mul(const Tensor& a, const Tensor& b) {
    require(a.rows == b.rows && a.cols == b.cols, "elementwise_mul",
            a.shape_str() + " vs " + b.shape_str());
    Vec out(*a.data);
    const Vec& bv = *b.data;
    for (size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    return attach("elementwise_mul", {&a, &b}, Tensor::from(a.rows, a.cols, std::move(out)),
                  [ad = a.data, bd = b.data](const Vec& g, Graph::Sink& s) {
                      if (Vec* ga = s.input_grad(0))
                          for (size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * (*bd)[i];
                      if (Vec* gb = s.input_grad(1))
                          for (size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * (*ad)[i];
                  });
}

Tensor reciprocal(const Tensor& x) {
    Vec out(x.data->size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (*x.data)[i];
    Tensor t = Tensor::from(x.rows, x.cols, std::move(out));
    ConstData od = t.data;
    return attach("reciprocal", {&x}, std::move(t),
                  [od](const Vec& g, Graph::Sink& s) {
                      if (Vec* gx = s.input_grad(0))
                          for (size_t i = 0; i < g.size(); ++i)
                              (*gx)[i] += -g[i] * (*od)[i] * (*od)[i];
                  });
}

namespace {

Tensor concat_impl(std::span<const Tensor> parts, bool along_rows) {
    const char* op = along_rows ? "concat_along_sequence" : "concat_cols";
    require(!parts.empty(), op, "no inputs");
    const int64_t fixed = along_rows ? parts[0].cols : parts[0].rows;
    int64_t total = 0;
    for (const Tensor& p : parts) {
        require((along_rows ? p.cols : p.rows) == fixed, op,
                "mismatched widths: " + parts[0].shape_str() + " vs " + p.shape_str());
        total += along_rows ? p.rows : p.cols;
    }
    const int64_t rows = along_rows ? total : fixed;
    const int64_t cols = along_rows ? fixed : total;
    Vec out(static_cast<size_t>(rows * cols));
    std::vector<int64_t> offsets;
    int64_t off = 0;
    for (const Tensor& p : parts) {
        offsets.push_back(off);
        if (along_rows) {
            std::memcpy(out.data() + off * cols, p.data->data(),
                        static_cast<size_t>(p.numel()) * sizeof(Scalar));
            off += p.rows;
        } else {
            for (int64_t i = 0; i < rows; ++i)
                std::memcpy(out.data() + i * cols + off, p.data->data() + i * p.cols,
                            static_cast<size_t>(p.cols) * sizeof(Scalar));
            off += p.cols;
        }
    }
    std::vector<const Tensor*> ptrs;
    for (const Tensor& p : parts) ptrs.push_back(&p);
    std::vector<int64_t> sizes;
    for (const Tensor& p : parts) sizes.push_back(along_rows ? p.rows : p.cols);
    return attach(op, std::span<const Tensor* const>(ptrs.data(), ptrs.size()),
                  Tensor::from(rows, cols, std::move(out)),
                  [offsets, sizes, rows, cols, along_rows](const Vec& g, Graph::Sink& s) {
                      for (size_t p = 0; p < offsets.size(); ++p) {
                          Vec* gp = s.input_grad(p);
                          if (!gp) continue;
                          if (along_rows) {
                              const size_t n = static_cast<size_t>(sizes[p] * cols);
                              const Scalar* src = g.data() + offsets[p] * cols;
                              for (size_t i = 0; i < n; ++i) (*gp)[i] += src[i];
                          } else {
                              for (int64_t i = 0; i < rows; ++i)
                                  for (int64_t j = 0; j < sizes[p]; ++j)
                                      (*gp)[i * sizes[p] + j] += g[i * cols + offsets[p] + j];
                          }
                      }
                  });
}

}  // namespace

Tensor concat_rows(std::span<const Tensor> parts) { return concat_impl(parts, true); }
Tensor concat_cols(std::span<const Tensor> parts) { return concat_impl(parts, false); }

Tensor slice_rows(const Tensor& x, int64_t r0, int64_t r1) {
    require(0 <= r0 && r0 < r1 && r1 <= x.rows, "slice_rows",
            "[" + std::to_string(r0) + "," + std::to_string(r1) + ") of " + x.shape_str());
    const int64_t n = r1 - r0, d = x.cols;
    Vec out(x.data->begin() + r0 * d, x.data->begin() + r1 * d);
    return attach("slice_rows", {&x}, Tensor::from(n, d, std::move(out)),
                  [r0, n, d](const Vec& g, Graph::Sink& s) {
                      if (Vec* gx = s.input_grad(0)) {
                          Scalar* dst = gx->data() + r0 * d;
                          for (int64_t i = 0; i < n * d; ++i) dst[i] += g[i];
                      }
                  });
}

Tensor slice_cols(const Tensor& x, int64_t c0, int64_t c1) {
    require(0 <= c0 && c0 < c1 && c1 <= x.cols, "slice_cols",
            "[" + std::to_string(c0) + "," + std::to_string(c1) + ") of " + x.shape_str());
    const int64_t n = x.rows, d = c1 - c0;
    Vec out(static_cast<size_t>(n * d));
    for (int64_t i = 0; i < n; ++i)
        std::memcpy(out.data() + i * d, x.data->data() + i * x.cols + c0,
                    static_cast<size_t>(d) * sizeof(Scalar));
    return attach("slice_cols", {&x}, Tensor::from(n, d, std::move(out)),
                  [c0, n, d, xc = x.cols](const Vec& g, Graph::Sink& s) {
                      if (Vec* gx = s.input_grad(0)) {
                          for (int64_t i = 0; i < n; ++i)
                              for (int64_t j = 0; j < d; ++j)
                                  (*gx)[i * xc + c0 + j] += g[i * d + j];
                      }
                  });
}

namespace {

// Shared layer-norm forward; writes normalized values and per-row 1/std.
void layer_norm_forward(const Tensor& x, Vec& xhat, Vec& inv_std) {
    const int64_t n = x.rows, d = x.cols;
    xhat.resize(static_cast<size_t>(n * d));
    inv_std.resize(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        const Scalar* row = x.data->data() + i * d;
        Scalar mu = 0.0;
        for (int64_t j = 0; j < d; ++j) mu += row[j];
        mu /= static_cast<Scalar>(d);
        Scalar var = 0.0;
        for (int64_t j = 0; j < d; ++j) {
            const Scalar c = row[j] - mu;
            var += c * c;
        }
        var /= static_cast<Scalar>(d);
        const Scalar is = 1.0 / std::sqrt(var + kLayerNormEps);
        inv_std[static_cast<size_t>(i)] = is;
        for (int64_t j = 0; j < d; ++j) xhat[i * d + j] = (row[j] - mu) * is;
    }
}

// d xhat -> d x for one row.
void layer_norm_backward_row(const Scalar* gxh, const Scalar* xh, Scalar is, int64_t d,
                             Scalar* gx) {
    Scalar mean_g = 0.0, mean_gx = 0.0;
    for (int64_t j = 0; j < d; ++j) {
        mean_g += gxh[j];
        mean_gx += gxh[j] * xh[j];
    }
    mean_g /= static_cast<Scalar>(d);
    mean_gx /= static_cast<Scalar>(d);
    for (int64_t j = 0; j < d; ++j) gx[j] += is * (gxh[j] - mean_g - xh[j] * mean_gx);
}

}  // namespace

Tensor layer_norm(const Tensor& x) {
    Vec xhat, inv_std;
    layer_norm_forward(x, xhat, inv_std);
    Tensor out = Tensor::from(x.rows, x.cols, xhat);
    ConstData saved = out.data;
    return attach("layer_norm", {&x}, std::move(out),
                  [saved, inv_std, n = x.rows, d = x.cols](const Vec& g, Graph::Sink& s) {
                      if (Vec* gx = s.input_grad(0)) {
                          for (int64_t i = 0; i < n; ++i)
                              layer_norm_backward_row(g.data() + i * d, saved->data() + i * d,
                                                      inv_std[static_cast<size_t>(i)], d,
                                                      gx->data() + i * d);
                      }
                  });
}

Tensor layer_norm_affine(const Tensor& x, const Tensor& gain, const Tensor& bias) {
    require(gain.rows == 1 && gain.cols == x.cols, "layer_norm",
            "gain " + gain.shape_str() + " for x " + x.shape_str());
    require(bias.rows == 1 && bias.cols == x.cols, "layer_norm",
            "bias " + bias.shape_str() + " for x " + x.shape_str());
    Vec xhat, inv_std;
    layer_norm_forward(x, xhat, inv_std);
    const int64_t n = x.rows, d = x.cols;
    Vec out(static_cast<size_t>(n * d));
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < d; ++j)
            out[i * d + j] = xhat[i * d + j] * (*gain.data)[j] + (*bias.data)[j];
    auto xhat_saved = std::make_shared<const Vec>(std::move(xhat));
    return attach(
        "layer_norm", {&x, &gain, &bias}, Tensor::from(n, d, std::move(out)),
        [xhat_saved, inv_std, gd = gain.data, n, d](const Vec& g, Graph::Sink& s) {
            const Vec& xh = *xhat_saved;
            if (Vec* gx = s.input_grad(0)) {
                Vec gxh(static_cast<size_t>(d));
                for (int64_t i = 0; i < n; ++i) {
                    for (int64_t j = 0; j < d; ++j) gxh[j] = g[i * d + j] * (*gd)[j];
                    layer_norm_backward_row(gxh.data(), xh.data() + i * d,
                                            inv_std[static_cast<size_t>(i)], d,
                                            gx->data() + i * d);
                }
            }
            if (Vec* gg = s.input_grad(1)) {
                for (int64_t i = 0; i < n; ++i)
                    for (int64_t j = 0; j < d; ++j) (*gg)[j] += g[i * d + j] * xh[i * d + j];
            }
            if (Vec* gb = s.input_grad(2)) {
                for (int64_t i = 0; i < n; ++i)
                    for (int64_t j = 0; j < d; ++j) (*gb)[j] += g[i * d + j];
            }
        });
}

Tensor gelu(const Tensor& x) {
    constexpr Scalar inv_sqrt2 = 0.7071067811865475244;
    Vec out(x.data->size());
    for (size_t i = 0; i < out.size(); ++i) {
        const Scalar v = (*x.data)[i];
        out[i] = 0.5 * v * (1.0 + std::erf(v * inv_sqrt2));
    }
    return attach("gelu", {&x}, Tensor::from(x.rows, x.cols, std::move(out)),
                  [xd = x.data](const Vec& g, Graph::Sink& s) {
                      if (Vec* gx = s.input_grad(0)) {
                          constexpr Scalar is2 = 0.7071067811865475244;
                          constexpr Scalar inv_sqrt2pi = 0.3989422804014326779;
                          for (size_t i = 0; i < g.size(); ++i) {
                              const Scalar v = (*xd)[i];
                              const Scalar cdf = 0.5 * (1.0 + std::erf(v * is2));
                              const Scalar pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
                              (*gx)[i] += g[i] * (cdf + v * pdf);
                          }
                      }
                  });
}

Tensor softmax(const Tensor& x) {
    const int64_t n = x.rows, d = x.cols;
    Vec out(static_cast<size_t>(n * d));
    for (int64_t i = 0; i < n; ++i) {
        const Scalar* row = x.data->data() + i * d;
        Scalar mx = row[0];
        for (int64_t j = 1; j < d; ++j) mx = std::max(mx, row[j]);
        Scalar sum = 0.0;
        for (int64_t j = 0; j < d; ++j) {
            const Scalar e = std::exp(row[j] - mx);
            out[i * d + j] = e;
            sum += e;
        }
        const Scalar inv = 1.0 / sum;
        for (int64_t j = 0; j < d; ++j) out[i * d + j] *= inv;
    }
    Tensor t = Tensor::from(n, d, std::move(out));
    ConstData probs = t.data;
    return attach("softmax", {&x}, std::move(t),
                  [probs, n, d](const Vec& g, Graph::Sink& s) {
                      if (Vec* gx = s.input_grad(0)) {
                          for (int64_t i = 0; i < n; ++i) {
                              const Scalar* p = probs->data() + i * d;
                              const Scalar* gr = g.data() + i * d;
                              Scalar dot = 0.0;
                              for (int64_t j = 0; j < d; ++j) dot += gr[j] * p[j];
                              for (int64_t j = 0; j < d; ++j)
                                  (*gx)[i * d + j] += p[j] * (gr[j] - dot);
                          }
                      }
                  });
}

Tensor mean(const Tensor& x) {
    Scalar acc = 0.0;
    for (const Scalar v : *x.data) acc += v;
    const Scalar inv_n = 1.0 / static_cast<Scalar>(x.numel());
    return attach("mean", {&x}, Tensor::scalar(acc * inv_n),
                  [inv_n, n = x.data->size()](const Vec& g, Graph::Sink& s) {
                      if (Vec* gx = s.input_grad(0))
                          for (size_t i = 0; i < n; ++i) (*gx)[i] += g[0] * inv_n;
                  });
}

Tensor mean_rows(const Tensor& x) {
    const int64_t n = x.rows, d = x.cols;
    Vec out(static_cast<size_t>(d), 0.0);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < d; ++j) out[j] += (*x.data)[i * d + j];
    const Scalar inv_n = 1.0 / static_cast<Scalar>(n);
    for (Scalar& v : out) v *= inv_n;
    return attach("mean_rows", {&x}, Tensor::from(1, d, std::move(out)),
                  [inv_n, n, d](const Vec& g, Graph::Sink& s) {
                      if (Vec* gx = s.input_grad(0)) {
                          for (int64_t i = 0; i < n; ++i)
                              for (int64_t j = 0; j < d; ++j) (*gx)[i * d + j] += g[j] * inv_n;
                      }
                  });
}

Tensor l2_norm(const Tensor& x) {
    Scalar acc = 0.0;
    for (const Scalar v : *x.data) acc += v * v;
    const Scalar norm = std::sqrt(acc);
    return attach("l2_norm", {&x}, Tensor::scalar(norm),
                  [xd = x.data, norm](const Vec& g, Graph::Sink& s) {
                      if (Vec* gx = s.input_grad(0)) {
                          if (norm == 0.0)
                              throw NumericalError("l2_norm: gradient undefined at zero input");
                          const Scalar scale = g[0] / norm;
                          for (size_t i = 0; i < gx->size(); ++i) (*gx)[i] += scale * (*xd)[i];
                      }
                  });
}

Tensor frobenius_inner_product(const Tensor& a, const Tensor& b) {
    require(a.rows == b.rows && a.cols == b.cols, "frobenius_inner_product",
            a.shape_str() + " vs " + b.shape_str());
    Scalar acc = 0.0;
    for (size_t i = 0; i < a.data->size(); ++i) acc += (*a.data)[i] * (*b.data)[i];
    return attach("frobenius_inner_product", {&a, &b}, Tensor::scalar(acc),
                  [ad = a.data, bd = b.data](const Vec& g, Graph::Sink& s) {
                      if (Vec* ga = s.input_grad(0))
                          for (size_t i = 0; i < ga->size(); ++i) (*ga)[i] += g[0] * (*bd)[i];
                      if (Vec* gb = s.input_grad(1))
                          for (size_t i = 0; i < gb->size(); ++i) (*gb)[i] += g[0] * (*ad)[i];
                  });
}

Tensor sigmoid(const Tensor& x) {
    Vec out(x.data->size());
    for (size_t i = 0; i < out.size(); ++i) {
        const Scalar v = (*x.data)[i];
        out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                          : std::exp(v) / (1.0 + std::exp(v));
    }
    Tensor t = Tensor::from(x.rows, x.cols, std::move(out));
    ConstData sd = t.data;
    return attach("sigmoid", {&x}, std::move(t),
                  [sd](const Vec& g, Graph::Sink& s) {
                      if (Vec* gx = s.input_grad(0))
                          for (size_t i = 0; i < g.size(); ++i) {
                              const Scalar sv = (*sd)[i];
                              (*gx)[i] += g[i] * sv * (1.0 - sv);
                          }
                  });
}

Tensor cross_entropy_logits(const Tensor& logits, const Tensor& onehot) {
    require(logits.rows == 1 && onehot.rows == 1 && logits.cols == onehot.cols,
            "cross_entropy_logits", logits.shape_str() + " vs " + onehot.shape_str());
    const int64_t c = logits.cols;
    const Scalar* lx = logits.data->data();
    Scalar mx = lx[0];
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, lx[j]);
    Scalar sum = 0.0;
    for (int64_t j = 0; j < c; ++j) sum += std::exp(lx[j] - mx);
    const Scalar lse = mx + std::log(sum);
    Scalar y_total = 0.0, dot = 0.0;
    for (int64_t j = 0; j < c; ++j) {
        y_total += (*onehot.data)[j];
        dot += (*onehot.data)[j] * lx[j];
    }
    const Scalar loss = lse * y_total - dot;
    return attach("cross_entropy_logits", {&logits, &onehot}, Tensor::scalar(loss),
                  [ld = logits.data, yd = onehot.data, lse, y_total, c](const Vec& g,
                                                                        Graph::Sink& s) {
                      if (Vec* gl = s.input_grad(0)) {
                          for (int64_t j = 0; j < c; ++j) {
                              const Scalar p = std::exp((*ld)[j] - lse);
                              (*gl)[j] += g[0] * (y_total * p - (*yd)[j]);
                          }
                      }
                      if (Vec* gy = s.input_grad(1)) {
                          for (int64_t j = 0; j < c; ++j) (*gy)[j] += g[0] * (lse - (*ld)[j]);
                      }
                  });
}

Tensor add_rows_scaled(const Tensor& x, const Tensor& f, const Tensor& s, int64_t r0) {
    require(s.is_scalar(), "add_rows_scaled", "scale " + s.shape_str() + " is not a scalar");
    require(f.cols == x.cols && r0 >= 0 && r0 + f.rows <= x.rows, "add_rows_scaled",
            "block " + f.shape_str() + " at row " + std::to_string(r0) + " of " + x.shape_str());
    const Scalar sv = (*s.data)[0];
    const int64_t l = f.rows, d = x.cols;
    Vec out(*x.data);
    for (int64_t i = 0; i < l; ++i)
        for (int64_t j = 0; j < d; ++j) out[(r0 + i) * d + j] += sv * (*f.data)[i * d + j];
    return attach("add_rows_scaled", {&x, &f, &s}, Tensor::from(x.rows, x.cols, std::move(out)),
                  [fd = f.data, sv, r0, l, d](const Vec& g, Graph::Sink& sink) {
                      if (Vec* gx = sink.input_grad(0))
                          for (size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
                      if (Vec* gf = sink.input_grad(1)) {
                          for (int64_t i = 0; i < l; ++i)
                              for (int64_t j = 0; j < d; ++j)
                                  (*gf)[i * d + j] += sv * g[(r0 + i) * d + j];
                      }
                      if (Vec* gs = sink.input_grad(2)) {
                          Scalar acc = 0.0;
                          for (int64_t i = 0; i < l; ++i)
                              for (int64_t j = 0; j < d; ++j)
                                  acc += g[(r0 + i) * d + j] * (*fd)[i * d + j];
                          (*gs)[0] += acc;
                      }
                  });
}

Tensor repeat_rows(const Tensor& x, int64_t times) {
    require(times >= 1, "repeat_rows", "times=" + std::to_string(times));
    const int64_t r = x.rows, c = x.cols;
    Vec out(static_cast<size_t>(times * r * c));
    for (int64_t t = 0; t < times; ++t)
        std::memcpy(out.data() + t * r * c, x.data->data(),
                    static_cast<size_t>(r * c) * sizeof(Scalar));
    return attach("repeat_rows", {&x}, Tensor::from(times * r, c, std::move(out)),
                  [times, n = r * c](const Vec& g, Graph::Sink& s) {
                      if (Vec* gx = s.input_grad(0)) {
                          for (int64_t t = 0; t < times; ++t) {
                              const Scalar* src = g.data() + t * n;
                              for (int64_t i = 0; i < n; ++i) (*gx)[static_cast<size_t>(i)] += src[i];
                          }
                      }
                  });
}

namespace {

int64_t block_count(const char* op, const Tensor& x, int64_t block_rows) {
    if (block_rows < 1 || x.rows % block_rows != 0)
        throw ShapeError(std::string(op) + ": " + x.shape_str() + " not divisible into blocks of " +
                         std::to_string(block_rows) + " rows");
    return x.rows / block_rows;
}

}  // namespace

Tensor slice_blocks(const Tensor& x, int64_t block_rows, int64_t offset, int64_t take) {
    const int64_t nb = block_count("slice_blocks", x, block_rows);
    require(offset >= 0 && take >= 1 && offset + take <= block_rows, "slice_blocks",
            "rows [" + std::to_string(offset) + "," + std::to_string(offset + take) +
                ") of block height " + std::to_string(block_rows));
    const int64_t c = x.cols;
    Vec out(static_cast<size_t>(nb * take * c));
    for (int64_t b = 0; b < nb; ++b)
        std::memcpy(out.data() + b * take * c, x.data->data() + (b * block_rows + offset) * c,
                    static_cast<size_t>(take * c) * sizeof(Scalar));
    return attach("slice_blocks", {&x}, Tensor::from(nb * take, c, std::move(out)),
                  [nb, block_rows, offset, take, c](const Vec& g, Graph::Sink& s) {
                      if (Vec* gx = s.input_grad(0)) {
                          for (int64_t b = 0; b < nb; ++b) {
                              const Scalar* src = g.data() + b * take * c;
                              Scalar* dst = gx->data() + (b * block_rows + offset) * c;
                              for (int64_t i = 0; i < take * c; ++i) dst[i] += src[i];
                          }
                      }
                  });
}

Tensor add_blocks_scaled(const Tensor& x, const Tensor& f, const Tensor& s,
                         int64_t x_block_rows, int64_t f_block_rows, int64_t offset) {
    require(s.is_scalar(), "add_blocks_scaled", "scale " + s.shape_str() + " is not a scalar");
    require(f.cols == x.cols, "add_blocks_scaled",
            "x " + x.shape_str() + " vs f " + f.shape_str());
    const int64_t nb = block_count("add_blocks_scaled", x, x_block_rows);
    const int64_t nf = block_count("add_blocks_scaled", f, f_block_rows);
    require(nb == nf, "add_blocks_scaled",
            std::to_string(nb) + " x-blocks vs " + std::to_string(nf) + " f-blocks");
    require(offset >= 0 && offset + f_block_rows <= x_block_rows, "add_blocks_scaled",
            "f block of " + std::to_string(f_block_rows) + " rows at offset " +
                std::to_string(offset) + " in block height " + std::to_string(x_block_rows));
    const Scalar sv = (*s.data)[0];
    const int64_t c = x.cols;
    Vec out(*x.data);
    for (int64_t b = 0; b < nb; ++b) {
        Scalar* dst = out.data() + (b * x_block_rows + offset) * c;
        const Scalar* src = f.data->data() + b * f_block_rows * c;
        for (int64_t i = 0; i < f_block_rows * c; ++i) dst[i] += sv * src[i];
    }
    return attach(
        "add_blocks_scaled", {&x, &f, &s}, Tensor::from(x.rows, x.cols, std::move(out)),
        [fd = f.data, sv, nb, x_block_rows, f_block_rows, offset, c](const Vec& g,
                                                                     Graph::Sink& sink) {
            if (Vec* gx = sink.input_grad(0))
                for (size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
            if (Vec* gf = sink.input_grad(1)) {
                for (int64_t b = 0; b < nb; ++b) {
                    const Scalar* src = g.data() + (b * x_block_rows + offset) * c;
                    Scalar* dst = gf->data() + b * f_block_rows * c;
                    for (int64_t i = 0; i < f_block_rows * c; ++i) dst[i] += sv * src[i];
                }
            }
            if (Vec* gs = sink.input_grad(2)) {
                Scalar acc = 0.0;
                for (int64_t b = 0; b < nb; ++b) {
                    const Scalar* gsrc = g.data() + (b * x_block_rows + offset) * c;
                    const Scalar* fsrc = fd->data() + b * f_block_rows * c;
                    for (int64_t i = 0; i < f_block_rows * c; ++i) acc += gsrc[i] * fsrc[i];
                }
                (*gs)[0] += acc;
            }
        });
}

Tensor mean_pool_blocks(const Tensor& x, int64_t block_rows) {
    const int64_t nb = block_count("mean_pool_blocks", x, block_rows);
    const int64_t c = x.cols;
    Vec out(static_cast<size_t>(nb * c), 0.0);
    for (int64_t b = 0; b < nb; ++b) {
        Scalar* dst = out.data() + b * c;
        for (int64_t i = 0; i < block_rows; ++i) {
            const Scalar* src = x.data->data() + (b * block_rows + i) * c;
            for (int64_t j = 0; j < c; ++j) dst[j] += src[j];
        }
        const Scalar inv = 1.0 / static_cast<Scalar>(block_rows);
        for (int64_t j = 0; j < c; ++j) dst[j] *= inv;
    }
    return attach("mean_pool_blocks", {&x}, Tensor::from(nb, c, std::move(out)),
                  [nb, block_rows, c](const Vec& g, Graph::Sink& s) {
                      if (Vec* gx = s.input_grad(0)) {
                          const Scalar inv = 1.0 / static_cast<Scalar>(block_rows);
                          for (int64_t b = 0; b < nb; ++b)
                              for (int64_t i = 0; i < block_rows; ++i)
                                  for (int64_t j = 0; j < c; ++j)
                                      (*gx)[(b * block_rows + i) * c + j] += g[b * c + j] * inv;
                      }
                  });
}

Tensor block_attention(const Tensor& q, const Tensor& k, const Tensor& v, int64_t block_rows,
                       int64_t n_heads, Scalar scale) {
    require(q.rows == k.rows && q.rows == v.rows && q.cols == k.cols && q.cols == v.cols,
            "block_attention",
            "q " + q.shape_str() + ", k " + k.shape_str() + ", v " + v.shape_str());
    require(n_heads >= 1 && q.cols % n_heads == 0, "block_attention",
            "width " + std::to_string(q.cols) + " not divisible by " + std::to_string(n_heads) +
                " heads");
    const int64_t nb = block_count("block_attention", q, block_rows);
    const int64_t d = q.cols, hd = d / n_heads, s_rows = block_rows;

    auto probs = std::make_shared<Vec>(static_cast<size_t>(nb * n_heads * s_rows * s_rows));
    Vec out(static_cast<size_t>(q.rows * d), 0.0);
    parallel_rows(nb * n_heads, 4 * s_rows * s_rows * hd, [&](int64_t lo, int64_t hi) {
        for (int64_t bh = lo; bh < hi; ++bh) {
            const int64_t b = bh / n_heads, h = bh % n_heads;
            const int64_t row0 = b * s_rows, col0 = h * hd;
            Scalar* p = probs->data() + bh * s_rows * s_rows;
            for (int64_t i = 0; i < s_rows; ++i) {
                const Scalar* qi = q.data->data() + (row0 + i) * d + col0;
                Scalar* prow = p + i * s_rows;
                Scalar mx = -1e300;
                for (int64_t j = 0; j < s_rows; ++j) {
                    const Scalar* kj = k.data->data() + (row0 + j) * d + col0;
                    Scalar acc = 0.0;
                    for (int64_t t = 0; t < hd; ++t) acc += qi[t] * kj[t];
                    prow[j] = scale * acc;
                    mx = std::max(mx, prow[j]);
                }
                Scalar sum = 0.0;
                for (int64_t j = 0; j < s_rows; ++j) {
                    prow[j] = std::exp(prow[j] - mx);
                    sum += prow[j];
                }
                const Scalar inv = 1.0 / sum;
                for (int64_t j = 0; j < s_rows; ++j) prow[j] *= inv;
                Scalar* orow = out.data() + (row0 + i) * d + col0;
                for (int64_t j = 0; j < s_rows; ++j) {
                    const Scalar pij = prow[j];
                    const Scalar* vj = v.data->data() + (row0 + j) * d + col0;
                    for (int64_t t = 0; t < hd; ++t) orow[t] += pij * vj[t];
                }
            }
        }
    });
    return attach(
        "block_attention", {&q, &k, &v}, Tensor::from(q.rows, d, std::move(out)),
        [qd = q.data, kd = k.data, vd = v.data, probs, nb, n_heads, s_rows, d, hd,
         scale](const Vec& g, Graph::Sink& sink) {
            Vec* gq = sink.input_grad(0);
            Vec* gk = sink.input_grad(1);
            Vec* gv = sink.input_grad(2);
            if (!gq && !gk && !gv) return;
            parallel_rows(nb * n_heads, 8 * s_rows * s_rows * hd, [&](int64_t lo, int64_t hi) {
                Vec dp(static_cast<size_t>(s_rows));
                for (int64_t bh = lo; bh < hi; ++bh) {
                    const int64_t b = bh / n_heads, h = bh % n_heads;
                    const int64_t row0 = b * s_rows, col0 = h * hd;
                    const Scalar* p = probs->data() + bh * s_rows * s_rows;
                    for (int64_t i = 0; i < s_rows; ++i) {
                        const Scalar* gi = g.data() + (row0 + i) * d + col0;
                        const Scalar* prow = p + i * s_rows;
                        // dV[j] += p_ij * g_i ; dp_j = <g_i, v_j>
                        Scalar dot = 0.0;
                        for (int64_t j = 0; j < s_rows; ++j) {
                            const Scalar* vj = vd->data() + (row0 + j) * d + col0;
                            Scalar acc = 0.0;
                            for (int64_t t = 0; t < hd; ++t) acc += gi[t] * vj[t];
                            dp[static_cast<size_t>(j)] = acc;
                            dot += acc * prow[j];
                            if (gv) {
                                Scalar* gvj = gv->data() + (row0 + j) * d + col0;
                                for (int64_t t = 0; t < hd; ++t) gvj[t] += prow[j] * gi[t];
                            }
                        }
                        if (!gq && !gk) continue;
                        for (int64_t j = 0; j < s_rows; ++j) {
                            const Scalar ds = scale * prow[j] * (dp[static_cast<size_t>(j)] - dot);
                            const Scalar* kj = kd->data() + (row0 + j) * d + col0;
                            const Scalar* qi = qd->data() + (row0 + i) * d + col0;
                            if (gq) {
                                Scalar* gqi = gq->data() + (row0 + i) * d + col0;
                                for (int64_t t = 0; t < hd; ++t) gqi[t] += ds * kj[t];
                            }
                            if (gk) {
                                Scalar* gkj = gk->data() + (row0 + j) * d + col0;
                                for (int64_t t = 0; t < hd; ++t) gkj[t] += ds * qi[t];
                            }
                        }
                    }
                }
            });
        });
}

Tensor cross_entropy_rows(const Tensor& logits, const Tensor& onehot) {
    require(logits.rows == onehot.rows && logits.cols == onehot.cols, "cross_entropy_rows",
            logits.shape_str() + " vs " + onehot.shape_str());
    const int64_t n = logits.rows, c = logits.cols;
    Vec lses(static_cast<size_t>(n));
    Scalar total = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const Scalar* lx = logits.data->data() + i * c;
        const Scalar* y = onehot.data->data() + i * c;
        Scalar mx = lx[0];
        for (int64_t j = 1; j < c; ++j) mx = std::max(mx, lx[j]);
        Scalar sum = 0.0;
        for (int64_t j = 0; j < c; ++j) sum += std::exp(lx[j] - mx);
        const Scalar lse = mx + std::log(sum);
        lses[static_cast<size_t>(i)] = lse;
        Scalar y_total = 0.0, dot = 0.0;
        for (int64_t j = 0; j < c; ++j) {
            y_total += y[j];
            dot += y[j] * lx[j];
        }
        total += lse * y_total - dot;
    }
    const Scalar inv_n = 1.0 / static_cast<Scalar>(n);
    return attach("cross_entropy_rows", {&logits, &onehot}, Tensor::scalar(total * inv_n),
                  [ld = logits.data, yd = onehot.data, lses, n, c, inv_n](const Vec& g,
                                                                          Graph::Sink& s) {
                      const Scalar go = g[0] * inv_n;
                      if (Vec* gl = s.input_grad(0)) {
                          for (int64_t i = 0; i < n; ++i) {
                              Scalar y_total = 0.0;
                              for (int64_t j = 0; j < c; ++j) y_total += (*yd)[i * c + j];
                              for (int64_t j = 0; j < c; ++j) {
                                  const Scalar pr =
                                      std::exp((*ld)[i * c + j] - lses[static_cast<size_t>(i)]);
                                  (*gl)[i * c + j] += go * (y_total * pr - (*yd)[i * c + j]);
                              }
                          }
                      }
                      if (Vec* gy = s.input_grad(1)) {
                          for (int64_t i = 0; i < n; ++i)
                              for (int64_t j = 0; j < c; ++j)
                                  (*gy)[i * c + j] +=
                                      go * (lses[static_cast<size_t>(i)] - (*ld)[i * c + j]);
                      }
                  });
}

Tensor smul(Scalar c, const Tensor& x) { return scalar_mul(Tensor::scalar(c), x); }

Tensor forward_op(std::string_view op_id, std::span<const Tensor> in) {
    auto need = [&](size_t n) {
        if (in.size() != n)
            throw ShapeError(std::string(op_id) + ": expected " + std::to_string(n) +
                             " inputs, got " + std::to_string(in.size()));
    };
    if (op_id == "matmul") { need(2); return matmul(in[0], in[1]); }
    if (op_id == "add") { need(2); return add(in[0], in[1]); }
    if (op_id == "scalar_mul") { need(2); return scalar_mul(in[0], in[1]); }
    if (op_id == "elementwise_mul") { need(2); return elementwise_mul(in[0], in[1]); }
    if (op_id == "concat_along_sequence") return concat_rows(in);
    if (op_id == "layer_norm") {
        if (in.size() == 3) return layer_norm_affine(in[0], in[1], in[2]);
        need(1);
        return layer_norm(in[0]);
    }
    if (op_id == "gelu") { need(1); return gelu(in[0]); }
    if (op_id == "softmax") { need(1); return softmax(in[0]); }
    if (op_id == "mean") { need(1); return mean(in[0]); }
    if (op_id == "l2_norm") { need(1); return l2_norm(in[0]); }
    if (op_id == "frobenius_inner_product") { need(2); return frobenius_inner_product(in[0], in[1]); }
    if (op_id == "sigmoid") { need(1); return sigmoid(in[0]); }
    throw ConfigError("forward_op: unknown op id '" + std::string(op_id) + "'");
}

Tensor finite_difference_grad(const std::function<Scalar(const Tensor&)>& f, const Tensor& x,
                              Scalar h) {
    if (h <= 0.0) throw Error("finite_difference_grad: step must be positive");
    Vec grad(x.data->size());
    for (size_t i = 0; i < grad.size(); ++i) {
        Vec plus(*x.data), minus(*x.data);
        plus[i] += h;
        minus[i] -= h;
        const Scalar fp = f(Tensor::from(x.rows, x.cols, std::move(plus)));
        const Scalar fm = f(Tensor::from(x.rows, x.cols, std::move(minus)));
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return Tensor::from(x.rows, x.cols, std::move(grad));
}

}  // namespace rep::ops
