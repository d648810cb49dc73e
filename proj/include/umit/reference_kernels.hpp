#pragma once

#include <cstdint>

#include "umit/kernels.hpp"

namespace umit {

// Naive single-threaded implementations of the hot kernels, written as the
// plainest possible loops. They exist to pin down what the fast kernels must
// compute: tests compare against these, and the benchmark reports the speed
// gap. Nothing here is reached from the training path.
template <typename T>
struct ref {
  static void conv2d(const T* x, int B, int Ci, int H, int W, const T* w, int Co,
                     int k, const T* bias, const ConvGeom& g, T* y);
  static void conv2d_wgrad(const T* x, int B, int Ci, int H, int W, const T* gy,
                           int Co, int k, const ConvGeom& g, T* dw);
  static void tconv2d(const T* z, int B, int Cz, int H, int W, const T* w, int Co,
                      int k, const T* bias, const ConvGeom& g, int Ho, int Wo, T* y);
  static void gemm_nn(const T* A, const T* B_, T* C, int M, int K, int N);
  static void instance_norm(const T* x, int B, int C, int HW, const T* gamma,
                            const T* beta, T eps, T* y);
  static T softmax_ce(const T* logits, int B, int N, const int* labels);
  static void gram(const T* f, int B, int C, int HW, T* G);
  static void avg_pool2(const T* x, int B, int C, int H, int W, T* y);
  static void global_avg_pool(const T* x, int B, int C, int HW, T* y);
};

extern template struct ref<float>;
extern template struct ref<double>;

}  // namespace umit
