#pragma once

#include "kge/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

// Differentiable tensor ops. Each returns a new tensor and, when grad mode is
// on and some input requires grad, records itself on Tape::active().
//
// Matrices are 2-D row-major; 1-D tensors of length n act as a 1×n row where
// a matrix is expected.
namespace kge::ops {

using Index = std::int32_t;

// Lower bound applied inside log().
inline constexpr float kLogFloor = 1e-12f;

Tensor matmul(const Tensor& a, const Tensor& b);
/// x·w plus a bias broadcast over rows, as one op.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// x (n×m) plus a length-m bias broadcast over rows.
Tensor add_bias(const Tensor& x, const Tensor& bias);
/// x (n×m) times a length-n column broadcast over columns.
Tensor mul_col(const Tensor& x, const Tensor& column);
Tensor scale(const Tensor& x, float factor);
/// Row i of x (n·group × m) becomes x_i * scale_k + shift_k with
/// k = i / group; scale and shift are n×m.
Tensor group_affine(const Tensor& x, const Tensor& scale, const Tensor& shift, std::size_t group);
Tensor add_scalar(const Tensor& x, float value);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
/// Natural log of max(x, kLogFloor).
Tensor log(const Tensor& x);
/// log(sigmoid(x)) evaluated without forming sigmoid(x), so it stays finite
/// where the probability itself would round to 0 in float32.
Tensor log_sigmoid(const Tensor& x);
Tensor cos(const Tensor& x);
Tensor sin(const Tensor& x);
Tensor square(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Squared L2 norm over all elements.
Tensor sq_l2(const Tensor& x);
/// n×m → n×1 sum over each row.
Tensor row_sum(const Tensor& x);

Tensor gather_rows(const Tensor& x, std::span<const Index> index);
/// Output row index[k] accumulates input row k; output has `out_rows` rows.
Tensor scatter_add_rows(const Tensor& x, std::span<const Index> index, std::size_t out_rows);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);

} // namespace kge::ops
