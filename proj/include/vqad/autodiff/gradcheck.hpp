#pragma once

#include <functional>
#include <type_traits>

#include "vqad/autodiff/tensor.hpp"

namespace vqad::ad {

/// Central-difference estimate of the gradient of a scalar function:
/// (f(x + eps e_i) - f(x - eps e_i)) / (2 eps) for every coordinate i.
/// Throws NumericFault if f returns a non-finite value.
template <typename T>
BasicTensor<T> finite_difference_gradient(const std::function<double(const std::type_identity_t<BasicTensor<T>>&)>& f,
                                          const BasicTensor<T>& x, double eps);

/// ||a - b|| / max(||a||, ||b||), with 0 when both are zero.
template <typename T>
double relative_error(const BasicTensor<T>& a, const BasicTensor<T>& b);

}  // namespace vqad::ad
