#include "umit/gradcheck.hpp"

#include <cmath>
#include <vector>

namespace umit {

template <typename T>
double finite_diff_check(const std::function<TensorT<T>()>& f, TensorT<T>& x, double eps,
                         double fault) {
  const int64_t n = x.numel();

  std::vector<double> analytic(size_t(n), 0.0);
  {
    TapeScope<T> scope;
    x.set_requires_grad(true);
    x.drop_grad();
    TensorT<T> loss = f();
    backward(loss);
    if (x.has_grad())
      for (int64_t i = 0; i < n; ++i) analytic[size_t(i)] = double(x.grad_vec()[size_t(i)]);
    x.drop_grad();
  }

  // each numeric probe gets a scratch tape (discarded unread) so that
  // functions which call gradient() internally still evaluate
  auto eval = [&f]() {
    TapeScope<T> scratch;
    return double(f().item());
  };
  double max_rel = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const T orig = x.data()[i];
    x.data()[i] = orig + T(eps);
    const double fp = eval();
    x.data()[i] = orig - T(eps);
    const double fm = eval();
    x.data()[i] = orig;
    const double numeric = (fp - fm) / (2.0 * eps);
    double a = analytic[size_t(i)];
    if (fault != 0.0 && i == 0) a *= (1.0 + fault);
    const double rel = std::fabs(a - numeric) / std::max(1e-8, std::fabs(numeric));
    if (rel > max_rel) max_rel = rel;
  }
  return max_rel;
}

template <typename T>
void nudge_from_kinks(TensorT<T>& x, T margin, T kink_at) {
  for (int64_t i = 0; i < x.numel(); ++i) {
    T& v = x.data()[i];
    const T d = v - kink_at;
    if (std::fabs(double(d)) < double(margin)) v = kink_at + (d < T(0) ? -margin : margin);
  }
}

template double finite_diff_check<float>(const std::function<TensorT<float>()>&,
                                         TensorT<float>&, double, double);
template double finite_diff_check<double>(const std::function<TensorT<double>()>&,
                                          TensorT<double>&, double, double);
template void nudge_from_kinks<float>(TensorT<float>&, float, float);
template void nudge_from_kinks<double>(TensorT<double>&, double, double);

}  // namespace umit
