#pragma once

#include <functional>

#include "umit/tensor.hpp"

namespace umit {

// Central-difference gradient verification. f must compute a scalar loss from
// the current contents of x each time it is called; capture x by reference so
// the perturbed values (and the requires_grad flag set here) are visible.
// Returns max over coordinates of |analytic - numeric| / max(1e-8, |numeric|).
//
// fault != 0 corrupts one analytic entry by that relative amount before the
// comparison; it exists so the harness can prove it catches a wrong adjoint.
template <typename T>
double finite_diff_check(const std::function<TensorT<T>()>& f, TensorT<T>& x, double eps,
                         double fault = 0.0);

// Nudges every coordinate of x that sits within margin of a kink location
// (0 by default) away from it, so central differences stay two-sided smooth.
template <typename T>
void nudge_from_kinks(TensorT<T>& x, T margin, T kink_at = T(0));

extern template double finite_diff_check<float>(const std::function<TensorT<float>()>&,
                                                TensorT<float>&, double, double);
extern template double finite_diff_check<double>(const std::function<TensorT<double>()>&,
                                                 TensorT<double>&, double, double);
extern template void nudge_from_kinks<float>(TensorT<float>&, float, float);
extern template void nudge_from_kinks<double>(TensorT<double>&, double, double);

}  // namespace umit
