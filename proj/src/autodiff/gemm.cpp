#include "vqad/autodiff/gemm.hpp"

namespace vqad::ad {

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  // Four independent partial sums keep the inner reduction vectorizable.
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const T* brow = b + j * k;
      T s0 = T(0), s1 = T(0), s2 = T(0), s3 = T(0);
      std::size_t p = 0;
      for (; p + 4 <= k; p += 4) {
        s0 += arow[p] * brow[p];
        s1 += arow[p + 1] * brow[p + 1];
        s2 += arow[p + 2] * brow[p + 2];
        s3 += arow[p + 3] * brow[p + 3];
      }
      for (; p < k; ++p) s0 += arow[p] * brow[p];
      crow[j] += (s0 + s1) + (s2 + s3);
    }
  }
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* arow = a + p * m;
    const T* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = arow[i];
      if (av == T(0)) continue;
      T* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

#define VQAD_INSTANTIATE_GEMM(T)                                                    \
  template void gemm_nn(std::size_t, std::size_t, std::size_t, const T*, const T*, T*); \
  template void gemm_nt(std::size_t, std::size_t, std::size_t, const T*, const T*, T*); \
  template void gemm_tn(std::size_t, std::size_t, std::size_t, const T*, const T*, T*);

VQAD_INSTANTIATE_GEMM(float)
VQAD_INSTANTIATE_GEMM(double)

}  // namespace vqad::ad
