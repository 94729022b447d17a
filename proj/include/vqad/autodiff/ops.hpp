#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <type_traits>

#include "vqad/autodiff/graph.hpp"
#include "vqad/autodiff/tensor.hpp"

// Differentiable operations, instantiated for float and double. Every op
// checks operand shapes and raises a UsageError naming the op when they
// disagree.
namespace vqad::ad {

template <typename T>
BasicVar<T> add(BasicVar<T> a, BasicVar<T> b);
template <typename T>
BasicVar<T> sub(BasicVar<T> a, BasicVar<T> b);
template <typename T>
BasicVar<T> mul(BasicVar<T> a, BasicVar<T> b);
template <typename T>
BasicVar<T> scale(BasicVar<T> a, std::type_identity_t<T> factor);

/// x [N, M] + bias [M] broadcast over rows.
template <typename T>
BasicVar<T> add_bias(BasicVar<T> x, BasicVar<T> bias);
/// x [B*R, M] + rows [R, M], repeating rows for each of the B blocks.
template <typename T>
BasicVar<T> add_tiled(BasicVar<T> x, BasicVar<T> rows);

/// [m, k] x [k, n] -> [m, n]
template <typename T>
BasicVar<T> matmul(BasicVar<T> a, BasicVar<T> b);
template <typename T>
BasicVar<T> transpose(BasicVar<T> a);
template <typename T>
BasicVar<T> reshape(BasicVar<T> a, Shape shape);

template <typename T>
BasicVar<T> relu(BasicVar<T> a);
/// Tanh approximation of the Gaussian error linear unit.
template <typename T>
BasicVar<T> gelu(BasicVar<T> a);

/// Softmax over the last axis.
template <typename T>
BasicVar<T> softmax(BasicVar<T> a);
/// Normalizes each row of x [N, M] then applies gain [M] and bias [M].
template <typename T>
BasicVar<T> layer_norm(BasicVar<T> x, BasicVar<T> gain, BasicVar<T> bias, std::type_identity_t<T> eps = T(1e-5));

/// x [B, C, H, W] conv w [O, C, k, k] + b [O] with zero padding.
template <typename T>
BasicVar<T> conv2d(BasicVar<T> x, BasicVar<T> w, BasicVar<T> b, std::size_t stride, std::size_t pad);
/// Adjoint of conv2d: x [B, C, H, W], w [C, O, k, k], b [O];
/// output extent (H - 1) * stride - 2 * pad + k.
template <typename T>
BasicVar<T> conv_transpose2d(BasicVar<T> x, BasicVar<T> w, BasicVar<T> b, std::size_t stride, std::size_t pad);

/// Rows of table [V, D] selected by ids -> [ids.size(), D].
template <typename T>
BasicVar<T> embedding(BasicVar<T> table, std::span<const std::int32_t> ids);

/// Identity forward, zero gradient backward.
template <typename T>
BasicVar<T> stop_gradient(BasicVar<T> a);
/// Forward value is `quantized` exactly; the gradient arriving at the output
/// is copied unchanged onto `encoded` and nothing flows into `quantized`.
template <typename T>
BasicVar<T> straight_through(BasicVar<T> encoded, BasicVar<T> quantized);

/// Sum over rows i of weights[i] * -log softmax(logits[i])[targets[i]].
/// Rows with zero weight are skipped entirely.
template <typename T>
BasicVar<T> masked_cross_entropy(BasicVar<T> logits, std::span<const std::int32_t> targets,
                         std::span<const float> weights);

/// Multi-head scaled dot-product attention on row-stacked sequences:
/// q, k, v are [batch * L, width]; heads split the width evenly.
template <typename T>
BasicVar<T> attention(BasicVar<T> q, BasicVar<T> k, BasicVar<T> v, std::size_t batch, std::size_t heads, bool causal);
/// Attention probabilities softmax(q k^T / sqrt(d_k)) as [batch * heads * L, L].
template <typename T>
BasicTensor<T> attention_probabilities(const BasicTensor<T>& q, const BasicTensor<T>& k, std::size_t batch,
                               std::size_t heads, bool causal);

template <typename T>
BasicVar<T> sum(BasicVar<T> a);
template <typename T>
BasicVar<T> mean(BasicVar<T> a);
template <typename T>
BasicVar<T> sum_squares(BasicVar<T> a);
/// Mean squared difference.
template <typename T>
BasicVar<T> mse(BasicVar<T> a, BasicVar<T> b);

/// [B, C, H, W] -> [B * H * W, C]
template <typename T>
BasicVar<T> nchw_to_rows(BasicVar<T> x);
/// [B * H * W, C] -> [B, C, H, W]
template <typename T>
BasicVar<T> rows_to_nchw(BasicVar<T> x, std::size_t batch, std::size_t height, std::size_t width);

}  // namespace vqad::ad
