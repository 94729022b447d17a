#include "vqad/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "vqad/error.hpp"

namespace vqad::ad {

template <typename T>
BasicTensor<T> finite_difference_gradient(const std::function<double(const std::type_identity_t<BasicTensor<T>>&)>& f,
                                          const BasicTensor<T>& x, double eps) {
  if (!(eps > 0.0)) throw UsageError("finite_difference_gradient: eps must be positive");
  BasicTensor<T> grad(x.shape());
  BasicTensor<T> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T original = probe[i];
    const T hi = static_cast<T>(original + eps);
    const T lo = static_cast<T>(original - eps);
    probe[i] = hi;
    const double up = f(probe);
    probe[i] = lo;
    const double down = f(probe);
    probe[i] = original;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericFault("finite_difference_gradient: non-finite value at coordinate " +
                         std::to_string(i));
    }
    // Divide by the step actually representable in T.
    const double step = static_cast<double>(hi) - static_cast<double>(lo);
    grad[i] = static_cast<T>((up - down) / step);
  }
  return grad;
}

template <typename T>
double relative_error(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) throw UsageError("relative_error: shape mismatch");
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i], y = b[i];
    diff += (x - y) * (x - y);
    na += x * x;
    nb += y * y;
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

template BasicTensor<float> finite_difference_gradient(
    const std::function<double(const BasicTensor<float>&)>&, const BasicTensor<float>&, double);
template BasicTensor<double> finite_difference_gradient(
    const std::function<double(const BasicTensor<double>&)>&, const BasicTensor<double>&, double);
template double relative_error(const BasicTensor<float>&, const BasicTensor<float>&);
template double relative_error(const BasicTensor<double>&, const BasicTensor<double>&);

}  // namespace vqad::ad
