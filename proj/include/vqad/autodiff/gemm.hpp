#pragma once

#include <cstddef>

namespace vqad::ad {

// Row-major matrix products (float and double) accumulating into C:
//   C[m,n] += op(A) * op(B), where op is identity or transpose.
// Leading dimensions are the row lengths of the stored matrices.

/// C += A * B with A [m,k], B [k,n].
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);
/// C += A * B^T with A [m,k], B [n,k].
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);
/// C += A^T * B with A [k,m], B [k,n].
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);

}  // namespace vqad::ad
