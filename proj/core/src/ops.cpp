#include "unirec/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

UNIREC_NAMESPACE_BEGIN

using detail::make_result;
using detail::Node;

namespace {

void require_2d(const Tensor& t, const char* op) {
    if (t.ndim() != 2) {
        throw ShapeError(std::string(op) + " expects a 2-D tensor, got " + shape_string(t.shape()));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
    }
}

// grad buffer of parent i, or nullptr when the parent does not need one
Real* parent_grad(Node& self, std::size_t i) {
    Node& p = *self.parents[i];
    return p.requires_grad ? p.ensure_grad().data() : nullptr;
}

const Real* parent_value(const Node& self, std::size_t i) { return self.parents[i]->value.data(); }

// C[m x n] += A[m x k] * B[k x n]
void gemm_nn(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        Real* crow = c + i * n;
        const Real* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const Real av = arow[p];
            if (av == Real(0)) continue;
            const Real* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m x k] += A[m x n] * B[k x n]^T
void gemm_nt(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t n, std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) {
        const Real* arow = a + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const Real* brow = b + p * n;
            Real acc = 0;
            for (std::size_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
            c[i * k + p] += acc;
        }
    }
}

// C[k x n] += A[m x k]^T * B[m x n]
void gemm_tn(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const Real* arow = a + i * k;
        const Real* brow = b + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const Real av = arow[p];
            if (av == Real(0)) continue;
            Real* crow = c + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename Fwd, typename Deriv>
Tensor unary(const char* op, const Tensor& a, Fwd fwd, Deriv deriv) {
    std::vector<Real> out(a.numel());
    auto x = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x[i]);
    return make_result(op, a.shape(), std::move(out), {a}, [deriv](Node& self) {
        Real* g = parent_grad(self, 0);
        if (!g) return;
        const Real* x = parent_value(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * deriv(x[i], self.value[i]);
    });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul");
    require_2d(b, "matmul");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw ShapeError("matmul: inner extents differ, " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    }
    std::vector<Real> out(m * n, Real(0));
    gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
    return make_result("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
        const Real* dc = self.grad.data();
        if (Real* da = parent_grad(self, 0)) gemm_nt(dc, parent_value(self, 1), da, m, n, k);
        if (Real* db = parent_grad(self, 1)) gemm_tn(parent_value(self, 0), dc, db, m, k, n);
    });
}

Tensor transpose(const Tensor& a) {
    require_2d(a, "transpose");
    const std::size_t m = a.dim(0), n = a.dim(1);
    std::vector<Real> out(m * n);
    auto x = a.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
    return make_result("transpose", {n, m}, std::move(out), {a}, [m, n](Node& self) {
        Real* g = parent_grad(self, 0);
        if (!g) return;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j * m + i];
    });
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) {
        throw ShapeError("reshape: cannot view " + shape_string(a.shape()) + " as " + shape_string(shape));
    }
    std::vector<Real> out(a.data().begin(), a.data().end());
    return make_result("reshape", std::move(shape), std::move(out), {a}, [](Node& self) {
        Real* g = parent_grad(self, 0);
        if (!g) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) {
        std::vector<Real> out(a.numel());
        auto x = a.data(), y = b.data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
        return make_result("add", a.shape(), std::move(out), {a, b}, [](Node& self) {
            for (std::size_t p = 0; p < 2; ++p) {
                if (Real* g = parent_grad(self, p))
                    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
            }
        });
    }
    const bool row_vector = b.rows() == 1 && b.cols() == a.cols() && b.ndim() <= 2;
    if (!row_vector) {
        throw ShapeError("add: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
    const std::size_t rows = a.rows(), cols = a.cols();
    std::vector<Real> out(a.numel());
    auto x = a.data(), y = b.data();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = x[r * cols + c] + y[c];
    return make_result("add_rows", a.shape(), std::move(out), {a, b}, [rows, cols](Node& self) {
        if (Real* ga = parent_grad(self, 0))
            for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
        if (Real* gb = parent_grad(self, 1))
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cols; ++c) gb[c] += self.grad[r * cols + c];
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<Real> out(a.numel());
    auto x = a.data(), y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
    return make_result("sub", a.shape(), std::move(out), {a, b}, [](Node& self) {
        if (Real* g = parent_grad(self, 0))
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
        if (Real* g = parent_grad(self, 1))
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<Real> out(a.numel());
    auto x = a.data(), y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
    return make_result("mul", a.shape(), std::move(out), {a, b}, [](Node& self) {
        const Real* x = parent_value(self, 0);
        const Real* y = parent_value(self, 1);
        if (Real* g = parent_grad(self, 0))
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * y[i];
        if (Real* g = parent_grad(self, 1))
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * x[i];
    });
}

Tensor scale(const Tensor& a, Real factor) {
    std::vector<Real> out(a.numel());
    auto x = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
    return make_result("scale", a.shape(), std::move(out), {a}, [factor](Node& self) {
        if (Real* g = parent_grad(self, 0))
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * factor;
    });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat of zero tensors");
    if (axis > 1) throw ShapeError("concat axis must be 0 or 1");
    for (const Tensor& t : parts) require_2d(t, "concat");
    std::vector<Tensor> parents(parts.begin(), parts.end());
    if (axis == 0) {
        const std::size_t cols = parts[0].cols();
        std::size_t rows = 0;
        for (const Tensor& t : parts) {
            if (t.cols() != cols) {
                throw ShapeError("concat rows: column mismatch " + shape_string(parts[0].shape()) + " vs " +
                                 shape_string(t.shape()));
            }
            rows += t.rows();
        }
        std::vector<Real> out;
        out.reserve(rows * cols);
        for (const Tensor& t : parts) out.insert(out.end(), t.data().begin(), t.data().end());
        return make_result("concat", {rows, cols}, std::move(out), std::move(parents), [](Node& self) {
            std::size_t offset = 0;
            for (std::size_t p = 0; p < self.parents.size(); ++p) {
                const std::size_t n = self.parents[p]->value.size();
                if (Real* g = parent_grad(self, p))
                    for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[offset + i];
                offset += n;
            }
        });
    }
    const std::size_t rows = parts[0].rows();
    std::size_t cols = 0;
    for (const Tensor& t : parts) {
        if (t.rows() != rows) {
            throw ShapeError("concat columns: row mismatch " + shape_string(parts[0].shape()) + " vs " +
                             shape_string(t.shape()));
        }
        cols += t.cols();
    }
    std::vector<Real> out(rows * cols);
    std::size_t col_offset = 0;
    for (const Tensor& t : parts) {
        const std::size_t w = t.cols();
        auto x = t.data();
        for (std::size_t r = 0; r < rows; ++r)
            std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(r * w), w, out.begin() + static_cast<std::ptrdiff_t>(r * cols + col_offset));
        col_offset += w;
    }
    return make_result("concat", {rows, cols}, std::move(out), std::move(parents), [rows, cols](Node& self) {
        std::size_t col_offset = 0;
        for (std::size_t p = 0; p < self.parents.size(); ++p) {
            const std::size_t w = self.parents[p]->shape.back();
            if (Real* g = parent_grad(self, p))
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < w; ++c) g[r * w + c] += self.grad[r * cols + col_offset + c];
            col_offset += w;
        }
    });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t length) {
    require_2d(a, "slice");
    if (axis > 1) throw ShapeError("slice axis must be 0 or 1");
    const std::size_t rows = a.dim(0), cols = a.dim(1);
    const std::size_t extent = axis == 0 ? rows : cols;
    if (length == 0 || begin + length > extent) {
        throw ShapeError("slice [" + std::to_string(begin) + ", " + std::to_string(begin + length) +
                         ") out of range for " + shape_string(a.shape()));
    }
    const std::size_t out_rows = axis == 0 ? length : rows;
    const std::size_t out_cols = axis == 0 ? cols : length;
    const std::size_t r0 = axis == 0 ? begin : 0;
    const std::size_t c0 = axis == 0 ? 0 : begin;
    std::vector<Real> out(out_rows * out_cols);
    auto x = a.data();
    for (std::size_t r = 0; r < out_rows; ++r)
        for (std::size_t c = 0; c < out_cols; ++c) out[r * out_cols + c] = x[(r0 + r) * cols + c0 + c];
    return make_result("slice", {out_rows, out_cols}, std::move(out), {a},
                       [out_rows, out_cols, r0, c0, cols](Node& self) {
                           Real* g = parent_grad(self, 0);
                           if (!g) return;
                           for (std::size_t r = 0; r < out_rows; ++r)
                               for (std::size_t c = 0; c < out_cols; ++c)
                                   g[(r0 + r) * cols + c0 + c] += self.grad[r * out_cols + c];
                       });
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> indices) {
    if (indices.empty()) throw ShapeError("gather_rows with no indices");
    const std::size_t rows = a.rows(), cols = a.cols();
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    std::vector<Real> out(idx.size() * cols);
    auto x = a.data();
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= rows) {
            throw ShapeError("gather_rows index " + std::to_string(idx[i]) + " out of range for " +
                             shape_string(a.shape()));
        }
        std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(idx[i] * cols), cols,
                    out.begin() + static_cast<std::ptrdiff_t>(i * cols));
    }
    const std::size_t n = idx.size();
    return make_result("gather_rows", {n, cols}, std::move(out), {a},
                       [idx = std::move(idx), cols](Node& self) {
                           Real* g = parent_grad(self, 0);
                           if (!g) return;
                           for (std::size_t i = 0; i < idx.size(); ++i)
                               for (std::size_t c = 0; c < cols; ++c) g[idx[i] * cols + c] += self.grad[i * cols + c];
                       });
}

Tensor segment_mean(const Tensor& a, std::span<const Segment> segments) {
    if (segments.empty()) throw ShapeError("segment_mean with no segments");
    const std::size_t rows = a.rows(), cols = a.cols();
    std::vector<Segment> segs(segments.begin(), segments.end());
    std::vector<Real> out(segs.size() * cols, Real(0));
    auto x = a.data();
    for (std::size_t s = 0; s < segs.size(); ++s) {
        const Segment& seg = segs[s];
        if (seg.length == 0 || seg.begin + seg.length > rows) {
            throw ShapeError("segment_mean: segment out of range for " + shape_string(a.shape()));
        }
        for (std::size_t r = seg.begin; r < seg.begin + seg.length; ++r)
            for (std::size_t c = 0; c < cols; ++c) out[s * cols + c] += x[r * cols + c];
        const Real inv = Real(1) / static_cast<Real>(seg.length);
        for (std::size_t c = 0; c < cols; ++c) out[s * cols + c] *= inv;
    }
    const std::size_t n = segs.size();
    return make_result("segment_mean", {n, cols}, std::move(out), {a},
                       [segs = std::move(segs), cols](Node& self) {
                           Real* g = parent_grad(self, 0);
                           if (!g) return;
                           for (std::size_t s = 0; s < segs.size(); ++s) {
                               const Real inv = Real(1) / static_cast<Real>(segs[s].length);
                               for (std::size_t r = segs[s].begin; r < segs[s].begin + segs[s].length; ++r)
                                   for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += self.grad[s * cols + c] * inv;
                           }
                       });
}

Tensor sum(const Tensor& a) {
    Real total = 0;
    for (Real v : a.data()) total += v;
    return make_result("sum", {1}, {total}, {a}, [](Node& self) {
        Real* g = parent_grad(self, 0);
        if (!g) return;
        const std::size_t n = self.parents[0]->value.size();
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
    });
}

Tensor mean(const Tensor& a) {
    Real total = 0;
    for (Real v : a.data()) total += v;
    const Real inv = Real(1) / static_cast<Real>(a.numel());
    return make_result("mean", {1}, {total * inv}, {a}, [inv](Node& self) {
        Real* g = parent_grad(self, 0);
        if (!g) return;
        const std::size_t n = self.parents[0]->value.size();
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0] * inv;
    });
}

Tensor row_sum(const Tensor& a) {
    const std::size_t rows = a.rows(), cols = a.cols();
    std::vector<Real> out(rows, Real(0));
    auto x = a.data();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[r] += x[r * cols + c];
    return make_result("row_sum", {rows, 1}, std::move(out), {a}, [rows, cols](Node& self) {
        Real* g = parent_grad(self, 0);
        if (!g) return;
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += self.grad[r];
    });
}

Tensor square(const Tensor& a) {
    return unary("square", a, [](Real x) { return x * x; }, [](Real x, Real) { return Real(2) * x; });
}

Tensor sqrt(const Tensor& a) {
    for (Real v : a.data()) {
        if (!(v > Real(0))) throw NumericError("sqrt of non-positive value");
    }
    return unary("sqrt", a, [](Real x) { return std::sqrt(x); }, [](Real, Real y) { return Real(0.5) / y; });
}

Tensor relu(const Tensor& a) {
    return unary("relu", a, [](Real x) { return x > Real(0) ? x : Real(0); },
                 [](Real x, Real) { return x > Real(0) ? Real(1) : Real(0); });
}

Tensor gelu(const Tensor& a) {
    constexpr Real inv_sqrt2 = Real(0.70710678118654752440);
    constexpr Real inv_sqrt_2pi = Real(0.39894228040143267794);
    return unary(
        "gelu", a, [](Real x) { return Real(0.5) * x * (Real(1) + std::erf(x * inv_sqrt2)); },
        [](Real x, Real) {
            const Real cdf = Real(0.5) * (Real(1) + std::erf(x * inv_sqrt2));
            const Real pdf = inv_sqrt_2pi * std::exp(Real(-0.5) * x * x);
            return cdf + x * pdf;
        });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Real eps) {
    const std::size_t rows = x.rows(), cols = x.cols();
    if (gamma.numel() != cols || beta.numel() != cols) {
        throw ShapeError("layer_norm: affine parameters must have " + std::to_string(cols) + " entries");
    }
    auto in = x.data();
    auto g = gamma.data();
    auto b = beta.data();
    auto xhat = std::make_shared<std::vector<Real>>(rows * cols);
    auto inv_std = std::make_shared<std::vector<Real>>(rows);
    std::vector<Real> out(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const Real* row = in.data() + r * cols;
        Real mu = 0;
        for (std::size_t c = 0; c < cols; ++c) mu += row[c];
        mu /= static_cast<Real>(cols);
        Real var = 0;
        for (std::size_t c = 0; c < cols; ++c) var += (row[c] - mu) * (row[c] - mu);
        var /= static_cast<Real>(cols);
        const Real is = Real(1) / std::sqrt(var + eps);
        (*inv_std)[r] = is;
        for (std::size_t c = 0; c < cols; ++c) {
            const Real h = (row[c] - mu) * is;
            (*xhat)[r * cols + c] = h;
            out[r * cols + c] = h * g[c] + b[c];
        }
    }
    return make_result("layer_norm", x.shape(), std::move(out), {x, gamma, beta},
                       [rows, cols, xhat, inv_std](Node& self) {
                           const Real* dy = self.grad.data();
                           const Real* gam = parent_value(self, 1);
                           Real* dx = parent_grad(self, 0);
                           Real* dg = parent_grad(self, 1);
                           Real* db = parent_grad(self, 2);
                           const Real n = static_cast<Real>(cols);
                           for (std::size_t r = 0; r < rows; ++r) {
                               const Real* h = xhat->data() + r * cols;
                               const Real* d = dy + r * cols;
                               if (dg)
                                   for (std::size_t c = 0; c < cols; ++c) dg[c] += d[c] * h[c];
                               if (db)
                                   for (std::size_t c = 0; c < cols; ++c) db[c] += d[c];
                               if (!dx) continue;
                               Real mean_dh = 0, mean_dh_h = 0;
                               for (std::size_t c = 0; c < cols; ++c) {
                                   const Real dh = d[c] * gam[c];
                                   mean_dh += dh;
                                   mean_dh_h += dh * h[c];
                               }
                               mean_dh /= n;
                               mean_dh_h /= n;
                               const Real is = (*inv_std)[r];
                               for (std::size_t c = 0; c < cols; ++c) {
                                   const Real dh = d[c] * gam[c];
                                   dx[r * cols + c] += is * (dh - mean_dh - h[c] * mean_dh_h);
                               }
                           }
                       });
}

Tensor softmax(const Tensor& x) {
    const std::size_t rows = x.rows(), cols = x.cols();
    std::vector<Real> out(rows * cols);
    auto in = x.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const Real* row = in.data() + r * cols;
        const Real mx = *std::max_element(row, row + cols);
        Real z = 0;
        for (std::size_t c = 0; c < cols; ++c) {
            out[r * cols + c] = std::exp(row[c] - mx);
            z += out[r * cols + c];
        }
        for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] /= z;
    }
    return make_result("softmax", x.shape(), std::move(out), {x}, [rows, cols](Node& self) {
        Real* g = parent_grad(self, 0);
        if (!g) return;
        for (std::size_t r = 0; r < rows; ++r) {
            const Real* y = self.value.data() + r * cols;
            const Real* dy = self.grad.data() + r * cols;
            Real dot = 0;
            for (std::size_t c = 0; c < cols; ++c) dot += y[c] * dy[c];
            for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += y[c] * (dy[c] - dot);
        }
    });
}

Tensor l2_normalize(const Tensor& x) {
    const std::size_t rows = x.rows(), cols = x.cols();
    auto norms = std::make_shared<std::vector<Real>>(rows);
    std::vector<Real> out(rows * cols);
    auto in = x.data();
    for (std::size_t r = 0; r < rows; ++r) {
        Real ss = 0;
        for (std::size_t c = 0; c < cols; ++c) ss += in[r * cols + c] * in[r * cols + c];
        const Real n = std::sqrt(ss);
        if (!(n > Real(0))) throw NumericError("l2_normalize of a zero-norm row");
        (*norms)[r] = n;
        for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = in[r * cols + c] / n;
    }
    return make_result("l2_normalize", x.shape(), std::move(out), {x}, [rows, cols, norms](Node& self) {
        Real* g = parent_grad(self, 0);
        if (!g) return;
        for (std::size_t r = 0; r < rows; ++r) {
            const Real* y = self.value.data() + r * cols;
            const Real* dy = self.grad.data() + r * cols;
            Real dot = 0;
            for (std::size_t c = 0; c < cols; ++c) dot += y[c] * dy[c];
            const Real inv = Real(1) / (*norms)[r];
            for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += (dy[c] - y[c] * dot) * inv;
        }
    });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets) {
    const std::size_t rows = logits.rows(), cols = logits.cols();
    if (targets.size() != rows) {
        throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " + std::to_string(rows) +
                         " rows");
    }
    std::vector<std::size_t> tgt(targets.begin(), targets.end());
    auto probs = std::make_shared<std::vector<Real>>(rows * cols);
    auto in = logits.data();
    Real total = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (tgt[r] >= cols) throw ShapeError("cross_entropy: target out of range");
        const Real* row = in.data() + r * cols;
        const Real mx = *std::max_element(row, row + cols);
        Real z = 0;
        for (std::size_t c = 0; c < cols; ++c) {
            (*probs)[r * cols + c] = std::exp(row[c] - mx);
            z += (*probs)[r * cols + c];
        }
        for (std::size_t c = 0; c < cols; ++c) (*probs)[r * cols + c] /= z;
        total += std::log(z) + (mx - row[tgt[r]]);
    }
    const Real inv_rows = Real(1) / static_cast<Real>(rows);
    return make_result("cross_entropy", {1}, {total * inv_rows}, {logits},
                       [rows, cols, inv_rows, probs, tgt = std::move(tgt)](Node& self) {
                           Real* g = parent_grad(self, 0);
                           if (!g) return;
                           const Real scale_grad = self.grad[0] * inv_rows;
                           for (std::size_t r = 0; r < rows; ++r) {
                               for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += scale_grad * (*probs)[r * cols + c];
                               g[r * cols + tgt[r]] -= scale_grad;
                           }
                       });
}

namespace {

struct AttentionPlan {
    std::vector<AttentionSpan> spans;
    // visible key rows per span
    std::vector<std::vector<std::size_t>> keys;
    // offset of each (span, head) probability block
    std::vector<std::size_t> prob_offset;
    std::size_t heads = 1;
    std::size_t head_dim = 0;
    std::size_t width = 0;
    std::size_t total_probs = 0;
};

int lex_compare(const Real* a, const Real* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (a[i] < b[i]) return -1;
        if (b[i] < a[i]) return 1;
    }
    return 0;
}

AttentionPlan plan_attention(const Tensor& q, const Tensor& k, const Tensor* v, std::span<const AttentionSpan> spans,
                             std::size_t heads, std::span<const unsigned char> kv_mask) {
    require_2d(q, "segment_attention");
    require_2d(k, "segment_attention");
    if (v) {
        require_2d(*v, "segment_attention");
        require_same_shape(k, *v, "segment_attention keys/values");
    }
    if (q.cols() != k.cols()) {
        throw ShapeError("segment_attention: query width " + std::to_string(q.cols()) + " differs from key width " +
                         std::to_string(k.cols()));
    }
    if (heads == 0 || q.cols() % heads != 0) {
        throw ShapeError("segment_attention: width " + std::to_string(q.cols()) + " not divisible by " +
                         std::to_string(heads) + " heads");
    }
    if (!kv_mask.empty() && kv_mask.size() != k.rows()) {
        throw ShapeError("segment_attention: mask length differs from key count");
    }
    AttentionPlan plan;
    plan.spans.assign(spans.begin(), spans.end());
    plan.heads = heads;
    plan.width = q.cols();
    plan.head_dim = q.cols() / heads;
    plan.keys.resize(spans.size());
    plan.prob_offset.resize(spans.size() * heads);
    for (std::size_t s = 0; s < spans.size(); ++s) {
        const AttentionSpan& sp = spans[s];
        if (sp.q_begin + sp.q_len > q.rows() || sp.kv_begin + sp.kv_len > k.rows()) {
            throw ShapeError("segment_attention: span out of range");
        }
        for (std::size_t j = sp.kv_begin; j < sp.kv_begin + sp.kv_len; ++j) {
            if (kv_mask.empty() || kv_mask[j]) plan.keys[s].push_back(j);
        }
        if (plan.keys[s].empty()) throw NumericError("segment_attention: every key of a span is masked");
        // Reductions over keys run in a content-defined order, which makes the
        // result bit-identical under any permutation of the key/value rows.
        const Real* kd = k.data().data();
        const Real* vd = v ? v->data().data() : nullptr;
        const std::size_t w = q.cols();
        std::stable_sort(plan.keys[s].begin(), plan.keys[s].end(), [&](std::size_t a, std::size_t b) {
            const int ck = lex_compare(kd + a * w, kd + b * w, w);
            if (ck != 0 || !vd) return ck < 0;
            return lex_compare(vd + a * w, vd + b * w, w) < 0;
        });
        for (std::size_t h = 0; h < heads; ++h) {
            plan.prob_offset[s * heads + h] = plan.total_probs;
            plan.total_probs += sp.q_len * plan.keys[s].size();
        }
    }
    return plan;
}

std::vector<Real> attention_probs(const AttentionPlan& plan, const Real* qd, const Real* kd) {
    std::vector<Real> probs(plan.total_probs);
    const Real inv_scale = Real(1) / std::sqrt(static_cast<Real>(plan.head_dim));
    const std::size_t w = plan.width, hd = plan.head_dim;
    for (std::size_t s = 0; s < plan.spans.size(); ++s) {
        const AttentionSpan& sp = plan.spans[s];
        const auto& keys = plan.keys[s];
        const std::size_t nk = keys.size();
        for (std::size_t h = 0; h < plan.heads; ++h) {
            Real* p = probs.data() + plan.prob_offset[s * plan.heads + h];
            for (std::size_t i = 0; i < sp.q_len; ++i) {
                const Real* qrow = qd + (sp.q_begin + i) * w + h * hd;
                Real* prow = p + i * nk;
                Real mx = -std::numeric_limits<Real>::infinity();
                for (std::size_t j = 0; j < nk; ++j) {
                    const Real* krow = kd + keys[j] * w + h * hd;
                    Real acc = 0;
                    for (std::size_t c = 0; c < hd; ++c) acc += qrow[c] * krow[c];
                    prow[j] = acc * inv_scale;
                    mx = std::max(mx, prow[j]);
                }
                Real z = 0;
                for (std::size_t j = 0; j < nk; ++j) {
                    prow[j] = std::exp(prow[j] - mx);
                    z += prow[j];
                }
                for (std::size_t j = 0; j < nk; ++j) prow[j] /= z;
            }
        }
    }
    return probs;
}

}  // namespace

Tensor segment_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::span<const AttentionSpan> spans,
                         std::size_t heads, std::span<const unsigned char> kv_mask) {
    auto plan = std::make_shared<AttentionPlan>(plan_attention(q, k, &v, spans, heads, kv_mask));
    auto probs = std::make_shared<std::vector<Real>>(attention_probs(*plan, q.data().data(), k.data().data()));
    const std::size_t w = plan->width, hd = plan->head_dim;
    std::vector<Real> out(q.rows() * w, Real(0));
    const Real* vd = v.data().data();
    for (std::size_t s = 0; s < plan->spans.size(); ++s) {
        const AttentionSpan& sp = plan->spans[s];
        const auto& keys = plan->keys[s];
        const std::size_t nk = keys.size();
        for (std::size_t h = 0; h < heads; ++h) {
            const Real* p = probs->data() + plan->prob_offset[s * heads + h];
            for (std::size_t i = 0; i < sp.q_len; ++i) {
                Real* orow = out.data() + (sp.q_begin + i) * w + h * hd;
                for (std::size_t j = 0; j < nk; ++j) {
                    const Real pj = p[i * nk + j];
                    const Real* vrow = vd + keys[j] * w + h * hd;
                    for (std::size_t c = 0; c < hd; ++c) orow[c] += pj * vrow[c];
                }
            }
        }
    }
    return make_result("segment_attention", {q.rows(), w}, std::move(out), {q, k, v}, [plan, probs](Node& self) {
        const std::size_t w = plan->width, hd = plan->head_dim, heads = plan->heads;
        const Real inv_scale = Real(1) / std::sqrt(static_cast<Real>(hd));
        const Real* qd = parent_value(self, 0);
        const Real* kd = parent_value(self, 1);
        const Real* vd = parent_value(self, 2);
        Real* dq = parent_grad(self, 0);
        Real* dk = parent_grad(self, 1);
        Real* dv = parent_grad(self, 2);
        const Real* dout = self.grad.data();
        std::vector<Real> ds;
        for (std::size_t s = 0; s < plan->spans.size(); ++s) {
            const AttentionSpan& sp = plan->spans[s];
            const auto& keys = plan->keys[s];
            const std::size_t nk = keys.size();
            ds.assign(nk, Real(0));
            for (std::size_t h = 0; h < heads; ++h) {
                const Real* p = probs->data() + plan->prob_offset[s * heads + h];
                for (std::size_t i = 0; i < sp.q_len; ++i) {
                    const Real* dorow = dout + (sp.q_begin + i) * w + h * hd;
                    const Real* prow = p + i * nk;
                    Real dot = 0;
                    for (std::size_t j = 0; j < nk; ++j) {
                        const Real* vrow = vd + keys[j] * w + h * hd;
                        Real dp = 0;
                        for (std::size_t c = 0; c < hd; ++c) dp += dorow[c] * vrow[c];
                        ds[j] = dp;
                        dot += prow[j] * dp;
                        if (dv) {
                            Real* dvrow = dv + keys[j] * w + h * hd;
                            for (std::size_t c = 0; c < hd; ++c) dvrow[c] += prow[j] * dorow[c];
                        }
                    }
                    const Real* qrow = qd + (sp.q_begin + i) * w + h * hd;
                    for (std::size_t j = 0; j < nk; ++j) {
                        const Real dsj = prow[j] * (ds[j] - dot) * inv_scale;
                        if (dsj == Real(0)) continue;
                        const Real* krow = kd + keys[j] * w + h * hd;
                        if (dq) {
                            Real* dqrow = dq + (sp.q_begin + i) * w + h * hd;
                            for (std::size_t c = 0; c < hd; ++c) dqrow[c] += dsj * krow[c];
                        }
                        if (dk) {
                            Real* dkrow = dk + keys[j] * w + h * hd;
                            for (std::size_t c = 0; c < hd; ++c) dkrow[c] += dsj * qrow[c];
                        }
                    }
                }
            }
        }
    });
}

std::vector<Real> attention_weights(const Tensor& q, const Tensor& k, std::span<const AttentionSpan> spans,
                                    std::size_t heads, std::span<const unsigned char> kv_mask) {
    const AttentionPlan plan = plan_attention(q, k, nullptr, spans, heads, kv_mask);
    std::vector<Real> probs = attention_probs(plan, q.data().data(), k.data().data());
    // report keys in ascending row order rather than the internal canonical order
    std::vector<Real> out(probs.size());
    for (std::size_t s = 0; s < plan.spans.size(); ++s) {
        const auto& keys = plan.keys[s];
        std::vector<std::size_t> rank(keys.size());
        std::vector<std::size_t> sorted = keys;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t j = 0; j < keys.size(); ++j) {
            rank[j] = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), keys[j]) - sorted.begin());
        }
        for (std::size_t h = 0; h < plan.heads; ++h) {
            const std::size_t off = plan.prob_offset[s * plan.heads + h];
            for (std::size_t i = 0; i < plan.spans[s].q_len; ++i)
                for (std::size_t j = 0; j < keys.size(); ++j)
                    out[off + i * keys.size() + rank[j]] = probs[off + i * keys.size() + j];
        }
    }
    return out;
}

UNIREC_NAMESPACE_END
