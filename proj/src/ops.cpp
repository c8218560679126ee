#include "kge/ops.hpp"

#include "kge/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace kge::ops {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

bool should_record(std::initializer_list<const Tensor*> inputs) {
    if (!grad_enabled()) return false;
    return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_error(op, a, b);
}

void require_matrix(const char* op, const Tensor& x) {
    if (x.dim() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_string(x.shape()));
}

std::span<const float> out_grad(const Tensor& out) { return out.impl()->grad; }

// Elementwise unary op with derivative expressed through input x and output y.
template <typename Fwd, typename Deriv>
Tensor unary(const char* name, const Tensor& x, Fwd fwd, Deriv deriv) {
    Tensor out = Tensor::zeros(x.shape());
    auto xs = x.data();
    auto ys = out.data();
    for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = fwd(xs[i]);
    if (should_record({&x})) {
        Tape::active().record(name, {x}, out, [x, out, deriv]() mutable {
            auto g = out_grad(out);
            auto gx = x.grad_buffer();
            auto xv = x.data();
            auto yv = out.data();
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xv[i], yv[i]);
        });
    }
    return out;
}

void accumulate(const Tensor& target, std::span<const float> g, float factor = 1.0f) {
    auto gt = target.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) gt[i] += factor * g[i];
}

} // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matrix("matmul", a);
    require_matrix("matmul", b);
    const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
    if (b.shape()[0] != k) shape_error("matmul", a, b);
    Tensor out = Tensor::zeros({n, m});
    {
        ConstMatMap A(a.data().data(), n, k);
        ConstMatMap B(b.data().data(), k, m);
        MatMap C(out.data().data(), n, m);
        C.noalias() = A * B;
    }
    if (should_record({&a, &b})) {
        Tape::active().record("matmul", {a, b}, out, [a, b, out, n, k, m]() mutable {
            ConstMatMap G(out_grad(out).data(), n, m);
            if (a.requires_grad()) {
                MatMap GA(a.grad_buffer().data(), n, k);
                GA.noalias() += G * ConstMatMap(b.data().data(), k, m).transpose();
            }
            if (b.requires_grad()) {
                MatMap GB(b.grad_buffer().data(), k, m);
                GB.noalias() += ConstMatMap(a.data().data(), n, k).transpose() * G;
            }
        });
    }
    return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
    require_matrix("linear", x);
    require_matrix("linear", w);
    const std::size_t n = x.shape()[0], k = x.shape()[1], m = w.shape()[1];
    if (w.shape()[0] != k) shape_error("linear", x, w);
    if (bias.numel() != m) shape_error("linear", w, bias);
    Tensor out = Tensor::zeros({n, m});
    {
        MatMap C(out.data().data(), n, m);
        C.noalias() = ConstMatMap(x.data().data(), n, k) * ConstMatMap(w.data().data(), k, m);
        C.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(bias.data().data(), static_cast<Eigen::Index>(m));
    }
    if (should_record({&x, &w, &bias})) {
        Tape::active().record("linear", {x, w, bias}, out, [x, w, bias, out, n, k, m]() mutable {
            ConstMatMap G(out_grad(out).data(), n, m);
            if (x.requires_grad()) {
                MatMap GX(x.grad_buffer().data(), n, k);
                GX.noalias() += G * ConstMatMap(w.data().data(), k, m).transpose();
            }
            if (w.requires_grad()) {
                MatMap GW(w.grad_buffer().data(), k, m);
                GW.noalias() += ConstMatMap(x.data().data(), n, k).transpose() * G;
            }
            if (bias.requires_grad()) {
                Eigen::Map<Eigen::RowVectorXf>(bias.grad_buffer().data(), static_cast<Eigen::Index>(m)) +=
                    G.colwise().sum();
            }
        });
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    Tensor out = Tensor::zeros(a.shape());
    auto av = a.data(), bv = b.data();
    auto ov = out.data();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
    if (should_record({&a, &b})) {
        Tape::active().record("add", {a, b}, out, [a, b, out]() mutable {
            auto g = out_grad(out);
            if (a.requires_grad()) accumulate(a, g);
            if (b.requires_grad()) accumulate(b, g);
        });
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape("sub", a, b);
    Tensor out = Tensor::zeros(a.shape());
    auto av = a.data(), bv = b.data();
    auto ov = out.data();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
    if (should_record({&a, &b})) {
        Tape::active().record("sub", {a, b}, out, [a, b, out]() mutable {
            auto g = out_grad(out);
            if (a.requires_grad()) accumulate(a, g);
            if (b.requires_grad()) accumulate(b, g, -1.0f);
        });
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    Tensor out = Tensor::zeros(a.shape());
    auto av = a.data(), bv = b.data();
    auto ov = out.data();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
    if (should_record({&a, &b})) {
        Tape::active().record("mul", {a, b}, out, [a, b, out]() mutable {
            auto g = out_grad(out);
            if (a.requires_grad()) {
                auto ga = a.grad_buffer();
                auto bv2 = b.data();
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv2[i];
            }
            if (b.requires_grad()) {
                auto gb = b.grad_buffer();
                auto av2 = a.data();
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av2[i];
            }
        });
    }
    return out;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
    const std::size_t n = x.rows(), m = x.cols();
    if (bias.numel() != m) shape_error("add_bias", x, bias);
    Tensor out = Tensor::zeros(x.shape());
    auto xv = x.data(), bv = bias.data();
    auto ov = out.data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) ov[i * m + j] = xv[i * m + j] + bv[j];
    if (should_record({&x, &bias})) {
        Tape::active().record("add_bias", {x, bias}, out, [x, bias, out, n, m]() mutable {
            auto g = out_grad(out);
            if (x.requires_grad()) accumulate(x, g);
            if (bias.requires_grad()) {
                auto gb = bias.grad_buffer();
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < m; ++j) gb[j] += g[i * m + j];
            }
        });
    }
    return out;
}

Tensor group_affine(const Tensor& x, const Tensor& scale, const Tensor& shift, std::size_t group) {
    require_matrix("group_affine", x);
    require_same_shape("group_affine", scale, shift);
    const std::size_t rows = x.rows(), m = x.cols();
    if (group == 0 || scale.dim() != 2 || scale.cols() != m || scale.rows() * group != rows) {
        shape_error("group_affine", x, scale);
    }
    Tensor out = Tensor::zeros(x.shape());
    auto xv = x.data(), sv = scale.data(), hv = shift.data();
    auto ov = out.data();
    for (std::size_t i = 0; i < rows; ++i) {
        const float* s = sv.data() + (i / group) * m;
        const float* h = hv.data() + (i / group) * m;
        for (std::size_t j = 0; j < m; ++j) ov[i * m + j] = xv[i * m + j] * s[j] + h[j];
    }
    if (should_record({&x, &scale, &shift})) {
        Tape::active().record("group_affine", {x, scale, shift}, out, [x, scale, shift, out, group, rows, m]() mutable {
            auto g = out_grad(out);
            auto xv = x.data(), sv = scale.data();
            if (x.requires_grad()) {
                auto gx = x.grad_buffer();
                for (std::size_t i = 0; i < rows; ++i) {
                    const float* s = sv.data() + (i / group) * m;
                    for (std::size_t j = 0; j < m; ++j) gx[i * m + j] += g[i * m + j] * s[j];
                }
            }
            if (scale.requires_grad()) {
                auto gs = scale.grad_buffer();
                for (std::size_t i = 0; i < rows; ++i) {
                    float* d = gs.data() + (i / group) * m;
                    for (std::size_t j = 0; j < m; ++j) d[j] += g[i * m + j] * xv[i * m + j];
                }
            }
            if (shift.requires_grad()) {
                auto gh = shift.grad_buffer();
                for (std::size_t i = 0; i < rows; ++i) {
                    float* d = gh.data() + (i / group) * m;
                    for (std::size_t j = 0; j < m; ++j) d[j] += g[i * m + j];
                }
            }
        });
    }
    return out;
}

Tensor mul_col(const Tensor& x, const Tensor& column) {
    const std::size_t n = x.rows(), m = x.cols();
    if (column.numel() != n) shape_error("mul_col", x, column);
    Tensor out = Tensor::zeros(x.shape());
    auto xv = x.data(), cv = column.data();
    auto ov = out.data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) ov[i * m + j] = xv[i * m + j] * cv[i];
    if (should_record({&x, &column})) {
        Tape::active().record("mul_col", {x, column}, out, [x, column, out, n, m]() mutable {
            auto g = out_grad(out);
            auto cv2 = column.data();
            auto xv2 = x.data();
            if (x.requires_grad()) {
                auto gx = x.grad_buffer();
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < m; ++j) gx[i * m + j] += g[i * m + j] * cv2[i];
            }
            if (column.requires_grad()) {
                auto gc = column.grad_buffer();
                for (std::size_t i = 0; i < n; ++i) {
                    float acc = 0.0f;
                    for (std::size_t j = 0; j < m; ++j) acc += g[i * m + j] * xv2[i * m + j];
                    gc[i] += acc;
                }
            }
        });
    }
    return out;
}

Tensor scale(const Tensor& x, float factor) {
    return unary("scale", x, [factor](float v) { return v * factor; },
                 [factor](float, float) { return factor; });
}

Tensor add_scalar(const Tensor& x, float value) {
    return unary("add_scalar", x, [value](float v) { return v + value; },
                 [](float, float) { return 1.0f; });
}

Tensor relu(const Tensor& x) {
    // NaN passes through so divergence stays visible downstream.
    return unary("relu", x, [](float v) { return v <= 0.0f ? 0.0f : v; },
                 [](float v, float) { return v > 0.0f ? 1.0f : 0.0f; });
}

Tensor sigmoid(const Tensor& x) {
    return unary("sigmoid", x,
                 [](float v) {
                     if (v >= 0.0f) return 1.0f / (1.0f + std::exp(-v));
                     const float e = std::exp(v);
                     return e / (1.0f + e);
                 },
                 [](float, float y) { return y * (1.0f - y); });
}

Tensor log(const Tensor& x) {
    return unary("log", x, [](float v) { return std::log(std::max(v, kLogFloor)); },
                 [](float v, float) { return v > kLogFloor ? 1.0f / v : 0.0f; });
}

Tensor log_sigmoid(const Tensor& x) {
    // log(sigmoid(v)) = min(v, 0) - log1p(exp(-|v|)); derivative sigmoid(-v).
    return unary("log_sigmoid", x,
                 [](float v) { return std::min(v, 0.0f) - std::log1p(std::exp(-std::abs(v))); },
                 [](float v, float) {
                     if (v >= 0.0f) {
                         const float e = std::exp(-v);
                         return e / (1.0f + e);
                     }
                     return 1.0f / (1.0f + std::exp(v));
                 });
}

Tensor cos(const Tensor& x) {
    return unary("cos", x, [](float v) { return std::cos(v); },
                 [](float v, float) { return -std::sin(v); });
}

Tensor sin(const Tensor& x) {
    return unary("sin", x, [](float v) { return std::sin(v); },
                 [](float v, float) { return std::cos(v); });
}

Tensor square(const Tensor& x) {
    return unary("square", x, [](float v) { return v * v; },
                 [](float v, float) { return 2.0f * v; });
}

Tensor sum(const Tensor& x) {
    float acc = 0.0f;
    for (float v : x.data()) acc += v;
    Tensor out = Tensor::scalar(acc);
    if (should_record({&x})) {
        Tape::active().record("sum", {x}, out, [x, out]() mutable {
            const float g = out_grad(out)[0];
            for (float& v : x.grad_buffer()) v += g;
        });
    }
    return out;
}

Tensor mean(const Tensor& x) {
    if (x.numel() == 0) throw ContractError("mean: empty tensor");
    return scale(sum(x), 1.0f / static_cast<float>(x.numel()));
}

Tensor sq_l2(const Tensor& x) {
    float acc = 0.0f;
    for (float v : x.data()) acc += v * v;
    Tensor out = Tensor::scalar(acc);
    if (should_record({&x})) {
        Tape::active().record("sq_l2", {x}, out, [x, out]() mutable {
            const float g = out_grad(out)[0];
            auto gx = x.grad_buffer();
            auto xv = x.data();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += 2.0f * g * xv[i];
        });
    }
    return out;
}

Tensor row_sum(const Tensor& x) {
    const std::size_t n = x.rows(), m = x.cols();
    Tensor out = Tensor::zeros({n, 1});
    auto xv = x.data();
    auto ov = out.data();
    for (std::size_t i = 0; i < n; ++i) {
        float acc = 0.0f;
        for (std::size_t j = 0; j < m; ++j) acc += xv[i * m + j];
        ov[i] = acc;
    }
    if (should_record({&x})) {
        Tape::active().record("row_sum", {x}, out, [x, out, n, m]() mutable {
            auto g = out_grad(out);
            auto gx = x.grad_buffer();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) gx[i * m + j] += g[i];
        });
    }
    return out;
}

Tensor gather_rows(const Tensor& x, std::span<const Index> index) {
    const std::size_t n = x.rows(), m = x.cols();
    for (Index i : index) {
        if (i < 0 || static_cast<std::size_t>(i) >= n) {
            throw IndexError("gather_rows: row " + std::to_string(i) + " out of range for " +
                             shape_string(x.shape()));
        }
    }
    Tensor out = Tensor::zeros({index.size(), m});
    auto xv = x.data();
    auto ov = out.data();
    for (std::size_t k = 0; k < index.size(); ++k) {
        std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(index[k] * m), m,
                    ov.begin() + static_cast<std::ptrdiff_t>(k * m));
    }
    if (should_record({&x})) {
        std::vector<Index> idx(index.begin(), index.end());
        Tape::active().record("gather_rows", {x}, out, [x, out, idx = std::move(idx), m]() mutable {
            auto g = out_grad(out);
            auto gx = x.grad_buffer();
            for (std::size_t k = 0; k < idx.size(); ++k) {
                float* dst = gx.data() + static_cast<std::size_t>(idx[k]) * m;
                const float* src = g.data() + k * m;
                for (std::size_t j = 0; j < m; ++j) dst[j] += src[j];
            }
        });
    }
    return out;
}

Tensor scatter_add_rows(const Tensor& x, std::span<const Index> index, std::size_t out_rows) {
    const std::size_t n = x.rows(), m = x.cols();
    if (index.size() != n) {
        throw ShapeError("scatter_add_rows: " + std::to_string(index.size()) + " indices for " +
                         shape_string(x.shape()));
    }
    for (Index i : index) {
        if (i < 0 || static_cast<std::size_t>(i) >= out_rows) {
            throw IndexError("scatter_add_rows: row " + std::to_string(i) + " out of range " +
                             std::to_string(out_rows));
        }
    }
    Tensor out = Tensor::zeros({out_rows, m});
    auto xv = x.data();
    auto ov = out.data();
    for (std::size_t k = 0; k < n; ++k) {
        float* dst = ov.data() + static_cast<std::size_t>(index[k]) * m;
        const float* src = xv.data() + k * m;
        for (std::size_t j = 0; j < m; ++j) dst[j] += src[j];
    }
    if (should_record({&x})) {
        std::vector<Index> idx(index.begin(), index.end());
        Tape::active().record("scatter_add_rows", {x}, out, [x, out, idx = std::move(idx), m]() mutable {
            auto g = out_grad(out);
            auto gx = x.grad_buffer();
            for (std::size_t k = 0; k < idx.size(); ++k) {
                const float* src = g.data() + static_cast<std::size_t>(idx[k]) * m;
                float* dst = gx.data() + k * m;
                for (std::size_t j = 0; j < m; ++j) dst[j] += src[j];
            }
        });
    }
    return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_rows: no inputs");
    const std::size_t m = parts.front().cols();
    std::size_t n = 0;
    bool record = false;
    for (const auto& p : parts) {
        if (p.cols() != m) shape_error("concat_rows", parts.front(), p);
        n += p.rows();
        record = record || p.requires_grad();
    }
    record = record && grad_enabled();
    Tensor out = Tensor::zeros({n, m});
    auto ov = out.data();
    std::size_t offset = 0;
    for (const auto& p : parts) {
        std::copy(p.data().begin(), p.data().end(), ov.begin() + static_cast<std::ptrdiff_t>(offset));
        offset += p.numel();
    }
    if (record) {
        Tape::active().record("concat_rows", parts, out, [parts, out]() mutable {
            auto g = out_grad(out);
            std::size_t off = 0;
            for (auto& p : parts) {
                if (p.requires_grad()) accumulate(p, g.subspan(off, p.numel()));
                off += p.numel();
            }
        });
    }
    return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    const std::size_t n = a.rows(), ma = a.cols(), mb = b.cols();
    if (b.rows() != n) shape_error("concat_cols", a, b);
    const std::size_t m = ma + mb;
    Tensor out = Tensor::zeros({n, m});
    auto av = a.data(), bv = b.data();
    auto ov = out.data();
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(av.data() + i * ma, ma, ov.data() + i * m);
        std::copy_n(bv.data() + i * mb, mb, ov.data() + i * m + ma);
    }
    if (should_record({&a, &b})) {
        Tape::active().record("concat_cols", {a, b}, out, [a, b, out, n, ma, mb, m]() mutable {
            auto g = out_grad(out);
            if (a.requires_grad()) {
                auto ga = a.grad_buffer();
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < ma; ++j) ga[i * ma + j] += g[i * m + j];
            }
            if (b.requires_grad()) {
                auto gb = b.grad_buffer();
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < mb; ++j) gb[i * mb + j] += g[i * m + ma + j];
            }
        });
    }
    return out;
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
    const std::size_t n = x.rows(), m = x.cols();
    if (begin > end || end > n) {
        throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of range for " + shape_string(x.shape()));
    }
    Tensor out = Tensor::zeros({end - begin, m});
    std::copy_n(x.data().data() + begin * m, (end - begin) * m, out.data().data());
    if (should_record({&x})) {
        Tape::active().record("slice_rows", {x}, out, [x, out, begin, m]() mutable {
            auto g = out_grad(out);
            auto gx = x.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) gx[begin * m + i] += g[i];
        });
    }
    return out;
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
    const std::size_t n = x.rows(), m = x.cols();
    if (begin > end || end > m) {
        throw ShapeError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of range for " + shape_string(x.shape()));
    }
    const std::size_t w = end - begin;
    Tensor out = Tensor::zeros({n, w});
    auto xv = x.data();
    auto ov = out.data();
    for (std::size_t i = 0; i < n; ++i) std::copy_n(xv.data() + i * m + begin, w, ov.data() + i * w);
    if (should_record({&x})) {
        Tape::active().record("slice_cols", {x}, out, [x, out, begin, n, m, w]() mutable {
            auto g = out_grad(out);
            auto gx = x.grad_buffer();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < w; ++j) gx[i * m + begin + j] += g[i * w + j];
        });
    }
    return out;
}

} // namespace kge::ops
