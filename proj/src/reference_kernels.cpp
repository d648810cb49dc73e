#include "umit/reference_kernels.hpp"

#include <cmath>

namespace umit {

template <typename T>
void ref<T>::conv2d(const T* x, int B, int Ci, int H, int W, const T* w, int Co, int k,
                    const T* bias, const ConvGeom& g, T* y) {
  const int Ho = conv_out_dim(H, k, g), Wo = conv_out_dim(W, k, g);
  for (int b = 0; b < B; ++b)
    for (int co = 0; co < Co; ++co)
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          T acc = bias ? bias[co] : T(0);
          for (int ci = 0; ci < Ci; ++ci)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy * g.stride - g.pad + ky * g.dil;
                const int ix = ox * g.stride - g.pad + kx * g.dil;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += x[((int64_t(b) * Ci + ci) * H + iy) * W + ix] *
                       w[((int64_t(co) * Ci + ci) * k + ky) * k + kx];
              }
          y[((int64_t(b) * Co + co) * Ho + oy) * Wo + ox] = acc;
        }
}

template <typename T>
void ref<T>::conv2d_wgrad(const T* x, int B, int Ci, int H, int W, const T* gy, int Co,
                          int k, const ConvGeom& g, T* dw) {
  const int Ho = conv_out_dim(H, k, g), Wo = conv_out_dim(W, k, g);
  for (int co = 0; co < Co; ++co)
    for (int ci = 0; ci < Ci; ++ci)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          T acc = 0;
          for (int b = 0; b < B; ++b)
            for (int oy = 0; oy < Ho; ++oy)
              for (int ox = 0; ox < Wo; ++ox) {
                const int iy = oy * g.stride - g.pad + ky * g.dil;
                const int ix = ox * g.stride - g.pad + kx * g.dil;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += x[((int64_t(b) * Ci + ci) * H + iy) * W + ix] *
                       gy[((int64_t(b) * Co + co) * Ho + oy) * Wo + ox];
              }
          dw[((int64_t(co) * Ci + ci) * k + ky) * k + kx] = acc;
        }
}

template <typename T>
void ref<T>::tconv2d(const T* z, int B, int Cz, int H, int W, const T* w, int Co, int k,
                     const T* bias, const ConvGeom& g, int Ho, int Wo, T* y) {
  for (int64_t i = 0; i < int64_t(B) * Co * Ho * Wo; ++i) y[i] = 0;
  for (int b = 0; b < B; ++b)
    for (int cz = 0; cz < Cz; ++cz)
      for (int iy = 0; iy < H; ++iy)
        for (int ix = 0; ix < W; ++ix) {
          const T v = z[((int64_t(b) * Cz + cz) * H + iy) * W + ix];
          for (int co = 0; co < Co; ++co)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int oy = iy * g.stride - g.pad + ky * g.dil;
                const int ox = ix * g.stride - g.pad + kx * g.dil;
                if (oy < 0 || oy >= Ho || ox < 0 || ox >= Wo) continue;
                y[((int64_t(b) * Co + co) * Ho + oy) * Wo + ox] +=
                    v * w[((int64_t(cz) * Co + co) * k + ky) * k + kx];
              }
        }
  if (bias)
    for (int b = 0; b < B; ++b)
      for (int co = 0; co < Co; ++co)
        for (int64_t i = 0; i < int64_t(Ho) * Wo; ++i)
          y[(int64_t(b) * Co + co) * Ho * Wo + i] += bias[co];
}

template <typename T>
void ref<T>::gemm_nn(const T* A, const T* B_, T* C, int M, int K, int N) {
  for (int m = 0; m < M; ++m)
    for (int n = 0; n < N; ++n) {
      T acc = 0;
      for (int kk = 0; kk < K; ++kk) acc += A[int64_t(m) * K + kk] * B_[int64_t(kk) * N + n];
      C[int64_t(m) * N + n] = acc;
    }
}

template <typename T>
void ref<T>::instance_norm(const T* x, int B, int C, int HW, const T* gamma,
                           const T* beta, T eps, T* y) {
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      const T* p = x + (int64_t(b) * C + c) * HW;
      T mu = 0;
      for (int i = 0; i < HW; ++i) mu += p[i];
      mu /= T(HW);
      T var = 0;
      for (int i = 0; i < HW; ++i) var += (p[i] - mu) * (p[i] - mu);
      var /= T(HW);
      const T inv = T(1) / std::sqrt(var + eps);
      const T gm = gamma ? gamma[c] : T(1);
      const T bt = beta ? beta[c] : T(0);
      T* q = y + (int64_t(b) * C + c) * HW;
      for (int i = 0; i < HW; ++i) q[i] = (p[i] - mu) * inv * gm + bt;
    }
}

template <typename T>
T ref<T>::softmax_ce(const T* logits, int B, int N, const int* labels) {
  T total = 0;
  for (int b = 0; b < B; ++b) {
    const T* row = logits + int64_t(b) * N;
    T mx = row[0];
    for (int n = 1; n < N; ++n) mx = std::max(mx, row[n]);
    T denom = 0;
    for (int n = 0; n < N; ++n) denom += std::exp(row[n] - mx);
    total += std::log(denom) - (row[labels[b]] - mx);
  }
  return total / T(B);
}

template <typename T>
void ref<T>::gram(const T* f, int B, int C, int HW, T* G) {
  for (int b = 0; b < B; ++b)
    for (int i = 0; i < C; ++i)
      for (int j = 0; j < C; ++j) {
        T acc = 0;
        for (int s = 0; s < HW; ++s)
          acc += f[(int64_t(b) * C + i) * HW + s] * f[(int64_t(b) * C + j) * HW + s];
        G[(int64_t(b) * C + i) * C + j] = acc / (T(C) * T(HW));
      }
}

template <typename T>
void ref<T>::avg_pool2(const T* x, int B, int C, int H, int W, T* y) {
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c)
      for (int oy = 0; oy < H / 2; ++oy)
        for (int ox = 0; ox < W / 2; ++ox) {
          const T* p = x + ((int64_t(b) * C + c) * H + 2 * oy) * W + 2 * ox;
          y[((int64_t(b) * C + c) * (H / 2) + oy) * (W / 2) + ox] =
              (p[0] + p[1] + p[W] + p[W + 1]) * T(0.25);
        }
}

template <typename T>
void ref<T>::global_avg_pool(const T* x, int B, int C, int HW, T* y) {
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      T acc = 0;
      for (int i = 0; i < HW; ++i) acc += x[(int64_t(b) * C + c) * HW + i];
      y[int64_t(b) * C + c] = acc / T(HW);
    }
}

template struct ref<float>;
template struct ref<double>;

}  // namespace umit
