#include "umit/kernels.hpp"

#include <cmath>
#include <cstring>
#include <vector>

namespace umit {

// Serial building blocks used inside parallel-over-batch regions (nesting a
// parallel kernel there would be illegal-by-surprise if OMP_NESTED is set).
namespace {

template <typename T>
void im2colSerial(const T* x, int C, int H, int W, int k, const ConvGeom& g, int Ho,
                  int Wo, T* col) {
  const int64_t plane = int64_t(Ho) * Wo;
  for (int c = 0; c < C; ++c) {
    const T* xc = x + int64_t(c) * H * W;
    T* colc = col + int64_t(c) * k * k * plane;
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        T* row = colc + int64_t(ky * k + kx) * plane;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky * g.dil;
          T* dst = row + int64_t(oy) * Wo;
          if (iy < 0 || iy >= H) {
            for (int ox = 0; ox < Wo; ++ox) dst[ox] = T(0);
            continue;
          }
          const T* src = xc + int64_t(iy) * W;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx * g.dil;
            dst[ox] = (ix >= 0 && ix < W) ? src[ix] : T(0);
          }
        }
      }
  }
}

template <typename T>
void col2imSerial(const T* col, int C, int H, int W, int k, const ConvGeom& g, int Ho,
                  int Wo, T* x) {
  const int64_t plane = int64_t(Ho) * Wo;
  for (int c = 0; c < C; ++c) {
    T* xc = x + int64_t(c) * H * W;
    const T* colc = col + int64_t(c) * k * k * plane;
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const T* row = colc + int64_t(ky * k + kx) * plane;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky * g.dil;
          if (iy < 0 || iy >= H) continue;
          T* dst = xc + int64_t(iy) * W;
          const T* src = row + int64_t(oy) * Wo;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx * g.dil;
            if (ix >= 0 && ix < W) dst[ix] += src[ox];
          }
        }
      }
  }
}

template <typename T>
void gemmSerialNN(const T* A, const T* B, T* C, int M, int K, int N) {
  const int MR = 4;
  int m0 = 0;
  for (; m0 + MR <= M; m0 += MR) {
    const T* a0 = A + int64_t(m0 + 0) * K;
    const T* a1 = A + int64_t(m0 + 1) * K;
    const T* a2 = A + int64_t(m0 + 2) * K;
    const T* a3 = A + int64_t(m0 + 3) * K;
    T* c0 = C + int64_t(m0 + 0) * N;
    T* c1 = C + int64_t(m0 + 1) * N;
    T* c2 = C + int64_t(m0 + 2) * N;
    T* c3 = C + int64_t(m0 + 3) * N;
    std::memset(c0, 0, sizeof(T) * N);
    std::memset(c1, 0, sizeof(T) * N);
    std::memset(c2, 0, sizeof(T) * N);
    std::memset(c3, 0, sizeof(T) * N);
    for (int kk = 0; kk < K; ++kk) {
      const T* b = B + int64_t(kk) * N;
      const T w0 = a0[kk], w1 = a1[kk], w2 = a2[kk], w3 = a3[kk];
      for (int n = 0; n < N; ++n) {
        const T bv = b[n];
        c0[n] += w0 * bv;
        c1[n] += w1 * bv;
        c2[n] += w2 * bv;
        c3[n] += w3 * bv;
      }
    }
  }
  for (; m0 < M; ++m0) {
    const T* a = A + int64_t(m0) * K;
    T* c = C + int64_t(m0) * N;
    std::memset(c, 0, sizeof(T) * N);
    for (int kk = 0; kk < K; ++kk) {
      const T w = a[kk];
      const T* b = B + int64_t(kk) * N;
      for (int n = 0; n < N; ++n) c[n] += w * b[n];
    }
  }
}

template <typename T>
void gemmSerialTN(const T* A, const T* B, T* C, int K, int M, int N) {
  for (int m = 0; m < M; ++m) std::memset(C + int64_t(m) * N, 0, sizeof(T) * N);
  for (int kk = 0; kk < K; ++kk) {
    const T* b = B + int64_t(kk) * N;
    const T* a = A + int64_t(kk) * M;
    for (int m = 0; m < M; ++m) {
      const T w = a[m];
      T* c = C + int64_t(m) * N;
      for (int n = 0; n < N; ++n) c[n] += w * b[n];
    }
  }
}

}  // namespace

template <typename T>
void kernels<T>::im2col(const T* x, int C, int H, int W, int k, const ConvGeom& g,
                        int Ho, int Wo, T* col) {
  const int64_t plane = int64_t(Ho) * Wo;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c) {
    const T* xc = x + int64_t(c) * H * W;
    T* colc = col + int64_t(c) * k * k * plane;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = colc + int64_t(ky * k + kx) * plane;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky * g.dil;
          T* dst = row + int64_t(oy) * Wo;
          if (iy < 0 || iy >= H) {
            for (int ox = 0; ox < Wo; ++ox) dst[ox] = T(0);
            continue;
          }
          const T* src = xc + int64_t(iy) * W;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx * g.dil;
            dst[ox] = (ix >= 0 && ix < W) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void kernels<T>::col2im(const T* col, int C, int H, int W, int k, const ConvGeom& g,
                        int Ho, int Wo, T* x) {
  const int64_t plane = int64_t(Ho) * Wo;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c) {
    T* xc = x + int64_t(c) * H * W;
    const T* colc = col + int64_t(c) * k * k * plane;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = colc + int64_t(ky * k + kx) * plane;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky * g.dil;
          if (iy < 0 || iy >= H) continue;
          T* dst = xc + int64_t(iy) * W;
          const T* src = row + int64_t(oy) * Wo;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx * g.dil;
            if (ix >= 0 && ix < W) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

// 4-row register blocking; the n loop is contiguous and auto-vectorizes.
template <typename T>
void kernels<T>::gemm_nn(const T* A, const T* B, T* C, int M, int K, int N, bool acc) {
  const int MR = 4;
#pragma omp parallel for schedule(static)
  for (int m0 = 0; m0 < M; m0 += MR) {
    const int mend = (m0 + MR <= M) ? m0 + MR : M;
    if (!acc)
      for (int m = m0; m < mend; ++m) std::memset(C + int64_t(m) * N, 0, sizeof(T) * N);
    if (mend - m0 == MR) {
      const T* a0 = A + int64_t(m0 + 0) * K;
      const T* a1 = A + int64_t(m0 + 1) * K;
      const T* a2 = A + int64_t(m0 + 2) * K;
      const T* a3 = A + int64_t(m0 + 3) * K;
      T* c0 = C + int64_t(m0 + 0) * N;
      T* c1 = C + int64_t(m0 + 1) * N;
      T* c2 = C + int64_t(m0 + 2) * N;
      T* c3 = C + int64_t(m0 + 3) * N;
      for (int kk = 0; kk < K; ++kk) {
        const T* b = B + int64_t(kk) * N;
        const T w0 = a0[kk], w1 = a1[kk], w2 = a2[kk], w3 = a3[kk];
        for (int n = 0; n < N; ++n) {
          const T bv = b[n];
          c0[n] += w0 * bv;
          c1[n] += w1 * bv;
          c2[n] += w2 * bv;
          c3[n] += w3 * bv;
        }
      }
    } else {
      for (int m = m0; m < mend; ++m) {
        const T* a = A + int64_t(m) * K;
        T* c = C + int64_t(m) * N;
        for (int kk = 0; kk < K; ++kk) {
          const T w = a[kk];
          const T* b = B + int64_t(kk) * N;
          for (int n = 0; n < N; ++n) c[n] += w * b[n];
        }
      }
    }
  }
}

// dot-product formulation, 4x4 blocks of independent accumulators
template <typename T>
void kernels<T>::gemm_nt(const T* A, const T* B, T* C, int M, int K, int N, bool acc) {
  const int MR = 4, NR = 4;
#pragma omp parallel for schedule(static)
  for (int m0 = 0; m0 < M; m0 += MR) {
    const int mend = (m0 + MR <= M) ? m0 + MR : M;
    for (int n0 = 0; n0 < N; n0 += NR) {
      const int nend = (n0 + NR <= N) ? n0 + NR : N;
      for (int m = m0; m < mend; ++m) {
        const T* a = A + int64_t(m) * K;
        for (int n = n0; n < nend; ++n) {
          const T* b = B + int64_t(n) * K;
          T s = 0;
          for (int kk = 0; kk < K; ++kk) s += a[kk] * b[kk];
          T* c = C + int64_t(m) * N + n;
          *c = acc ? *c + s : s;
        }
      }
    }
  }
}

template <typename T>
void kernels<T>::gemm_tn(const T* A, const T* B, T* C, int K, int M, int N, bool acc) {
  const int MR = 4;
#pragma omp parallel for schedule(static)
  for (int m0 = 0; m0 < M; m0 += MR) {
    const int mend = (m0 + MR <= M) ? m0 + MR : M;
    for (int m = m0; m < mend; ++m) {
      T* c = C + int64_t(m) * N;
      if (!acc) std::memset(c, 0, sizeof(T) * N);
      for (int kk = 0; kk < K; ++kk) {
        const T w = A[int64_t(kk) * M + m];
        const T* b = B + int64_t(kk) * N;
        for (int n = 0; n < N; ++n) c[n] += w * b[n];
      }
    }
  }
}

template <typename T>
void kernels<T>::conv2d(const T* x, int B, int Ci, int H, int W, const T* w, int Co,
                        int k, const T* bias, const ConvGeom& g, T* y) {
  const int Ho = conv_out_dim(H, k, g);
  const int Wo = conv_out_dim(W, k, g);
  const int64_t K = int64_t(Ci) * k * k;
  const int64_t N = int64_t(Ho) * Wo;
#pragma omp parallel
  {
    std::vector<T> col(size_t(K * N));
#pragma omp for schedule(static)
    for (int b = 0; b < B; ++b) {
      im2colSerial(x + int64_t(b) * Ci * H * W, Ci, H, W, k, g, Ho, Wo, col.data());
      gemmSerialNN(w, col.data(), y + int64_t(b) * Co * N, Co, int(K), int(N));
    }
  }
  if (bias) add_channel_bias(y, B, Co, int(N), bias);
}

template <typename T>
void kernels<T>::conv2d_wgrad(const T* x, int B, int Ci, int H, int W, const T* gy,
                              int Co, int k, const ConvGeom& g, T* dw) {
  const int Ho = conv_out_dim(H, k, g);
  const int Wo = conv_out_dim(W, k, g);
  const int64_t K = int64_t(Ci) * k * k;
  const int64_t N = int64_t(Ho) * Wo;
  std::vector<T> col(size_t(K * N));
  std::memset(dw, 0, sizeof(T) * size_t(Co) * K);
  // batch accumulation stays serial so the sum order is fixed
  for (int b = 0; b < B; ++b) {
    im2col(x + int64_t(b) * Ci * H * W, Ci, H, W, k, g, Ho, Wo, col.data());
    gemm_nt(gy + int64_t(b) * Co * N, col.data(), dw, Co, int(N), int(K), true);
  }
}

template <typename T>
void kernels<T>::tconv2d(const T* z, int B, int Cz, int H, int W, const T* w, int Co,
                         int k, const T* bias, const ConvGeom& g, int Ho, int Wo, T* y) {
  const int64_t M = int64_t(Co) * k * k;
  const int64_t N = int64_t(H) * W;
#pragma omp parallel
  {
    std::vector<T> tmp(size_t(M * N));
#pragma omp for schedule(static)
    for (int b = 0; b < B; ++b) {
      // tmp[(co,ky,kx),(y,x)] = sum_cz w[cz,(co,ky,kx)] * z[b,cz,(y,x)]
      gemmSerialTN(w, z + int64_t(b) * Cz * N, tmp.data(), Cz, int(M), int(N));
      T* yb = y + int64_t(b) * Co * Ho * Wo;
      std::memset(yb, 0, sizeof(T) * size_t(Co) * Ho * Wo);
      col2imSerial(tmp.data(), Co, Ho, Wo, k, g, H, W, yb);
    }
  }
  if (bias) add_channel_bias(y, B, Co, Ho * Wo, bias);
}

template <typename T>
void kernels<T>::add_channel_bias(T* y, int B, int C, int HW, const T* bias) {
#pragma omp parallel for schedule(static)
  for (int bc = 0; bc < B * C; ++bc) {
    T* p = y + int64_t(bc) * HW;
    const T v = bias[bc % C];
    for (int i = 0; i < HW; ++i) p[i] += v;
  }
}

template <typename T>
void kernels<T>::channel_sum(const T* g, int B, int C, int HW, T* out) {
#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c) {
    T s = 0;
    for (int b = 0; b < B; ++b) {
      const T* p = g + (int64_t(b) * C + c) * HW;
      for (int i = 0; i < HW; ++i) s += p[i];
    }
    out[c] = s;
  }
}

template <typename T>
void kernels<T>::broadcast_channel(const T* c, int B, int C, int HW, T* out) {
#pragma omp parallel for schedule(static)
  for (int bc = 0; bc < B * C; ++bc) {
    T* p = out + int64_t(bc) * HW;
    const T v = c[bc % C];
    for (int i = 0; i < HW; ++i) p[i] = v;
  }
}

template <typename T>
void kernels<T>::add_row_bias(T* y, int B, int N, const T* bias) {
#pragma omp parallel for schedule(static)
  for (int b = 0; b < B; ++b) {
    T* p = y + int64_t(b) * N;
    for (int n = 0; n < N; ++n) p[n] += bias[n];
  }
}

template <typename T>
void kernels<T>::col_sum(const T* g, int B, int N, T* out) {
  for (int n = 0; n < N; ++n) out[n] = 0;
  for (int b = 0; b < B; ++b) {
    const T* p = g + int64_t(b) * N;
    for (int n = 0; n < N; ++n) out[n] += p[n];
  }
}

template <typename T>
void kernels<T>::broadcast_rows(const T* row, int B, int N, T* out) {
#pragma omp parallel for schedule(static)
  for (int b = 0; b < B; ++b) std::memcpy(out + int64_t(b) * N, row, sizeof(T) * N);
}

template <typename T>
void kernels<T>::row_sum(const T* x, int B, int N, T* out) {
#pragma omp parallel for schedule(static)
  for (int b = 0; b < B; ++b) {
    const T* p = x + int64_t(b) * N;
    T s = 0;
    for (int n = 0; n < N; ++n) s += p[n];
    out[b] = s;
  }
}

template <typename T>
void kernels<T>::broadcast_row_scalar(const T* per_row, int B, int N, T* out) {
#pragma omp parallel for schedule(static)
  for (int b = 0; b < B; ++b) {
    T* p = out + int64_t(b) * N;
    const T v = per_row[b];
    for (int n = 0; n < N; ++n) p[n] = v;
  }
}

template <typename T>
void kernels<T>::transpose2(const T* a, int M, int N, T* out) {
#pragma omp parallel for schedule(static)
  for (int m = 0; m < M; ++m)
    for (int n = 0; n < N; ++n) out[int64_t(n) * M + m] = a[int64_t(m) * N + n];
}

template <typename T>
void kernels<T>::instance_norm(const T* x, int B, int C, int HW, const T* gamma,
                               const T* beta, T eps, T* y, T* xhat, T* invstd) {
#pragma omp parallel for schedule(static)
  for (int bc = 0; bc < B * C; ++bc) {
    const T* p = x + int64_t(bc) * HW;
    T mean = 0;
    for (int i = 0; i < HW; ++i) mean += p[i];
    mean /= T(HW);
    T var = 0;
    for (int i = 0; i < HW; ++i) {
      const T d = p[i] - mean;
      var += d * d;
    }
    var /= T(HW);
    const T is = T(1) / std::sqrt(var + eps);
    invstd[bc] = is;
    const int c = bc % C;
    const T ga = gamma ? gamma[c] : T(1);
    const T be = beta ? beta[c] : T(0);
    T* xh = xhat + int64_t(bc) * HW;
    T* yo = y + int64_t(bc) * HW;
    for (int i = 0; i < HW; ++i) {
      const T v = (p[i] - mean) * is;
      xh[i] = v;
      yo[i] = ga * v + be;
    }
  }
}

template <typename T>
void kernels<T>::instance_norm_backward(const T* g, const T* xhat, const T* invstd,
                                        const T* gamma, int B, int C, int HW, T* dx,
                                        T* dgamma, T* dbeta) {
  if (dx) {
#pragma omp parallel for schedule(static)
    for (int bc = 0; bc < B * C; ++bc) {
      const T* gp = g + int64_t(bc) * HW;
      const T* xh = xhat + int64_t(bc) * HW;
      const int c = bc % C;
      const T ga = gamma ? gamma[c] : T(1);
      T gsum = 0, gxsum = 0;
      for (int i = 0; i < HW; ++i) {
        gsum += gp[i];
        gxsum += gp[i] * xh[i];
      }
      const T gmean = gsum / T(HW);
      const T gxmean = gxsum / T(HW);
      const T scale = ga * invstd[bc];
      T* d = dx + int64_t(bc) * HW;
      for (int i = 0; i < HW; ++i) d[i] = scale * (gp[i] - gmean - xh[i] * gxmean);
    }
  }
  if (dgamma) {
#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
      T sg = 0, sb = 0;
      for (int b = 0; b < B; ++b) {
        const int64_t off = (int64_t(b) * C + c) * HW;
        for (int i = 0; i < HW; ++i) {
          sg += g[off + i] * xhat[off + i];
          sb += g[off + i];
        }
      }
      dgamma[c] = sg;
      dbeta[c] = sb;
    }
  }
}

template <typename T>
T kernels<T>::softmax_ce(const T* logits, int B, int N, const int* labels, T* probs) {
  T loss = 0;
  for (int b = 0; b < B; ++b) {
    const T* l = logits + int64_t(b) * N;
    T mx = l[0];
    for (int n = 1; n < N; ++n) mx = l[n] > mx ? l[n] : mx;
    T z = 0;
    T* p = probs + int64_t(b) * N;
    for (int n = 0; n < N; ++n) {
      p[n] = std::exp(l[n] - mx);
      z += p[n];
    }
    for (int n = 0; n < N; ++n) p[n] /= z;
    loss += std::log(z) + mx - l[labels[b]];
  }
  return loss / T(B);
}

template <typename T>
void kernels<T>::softmax_ce_backward(const T* probs, const int* labels, int B, int N,
                                     T gscale, T* dlogits) {
#pragma omp parallel for schedule(static)
  for (int b = 0; b < B; ++b) {
    const T* p = probs + int64_t(b) * N;
    T* d = dlogits + int64_t(b) * N;
    for (int n = 0; n < N; ++n) d[n] = p[n] * gscale;
    d[labels[b]] -= gscale;
  }
}

#define UMIT_EW_LOOP(expr)                      \
  _Pragma("omp parallel for schedule(static)")  \
  for (int64_t i = 0; i < n; ++i) {             \
    expr;                                       \
  }

template <typename T>
void kernels<T>::relu(const T* x, int64_t n, T* y) {
  UMIT_EW_LOOP(y[i] = x[i] > T(0) ? x[i] : T(0))
}
template <typename T>
void kernels<T>::leaky_relu(const T* x, int64_t n, T slope, T* y) {
  UMIT_EW_LOOP(y[i] = x[i] > T(0) ? x[i] : slope * x[i])
}
template <typename T>
void kernels<T>::tanh_(const T* x, int64_t n, T* y) {
  UMIT_EW_LOOP(y[i] = std::tanh(x[i]))
}
template <typename T>
void kernels<T>::slope_mask(const T* x, int64_t n, T neg_slope, T* m) {
  UMIT_EW_LOOP(m[i] = x[i] > T(0) ? T(1) : neg_slope)
}
template <typename T>
void kernels<T>::add(const T* a, const T* b, int64_t n, T* y) {
  UMIT_EW_LOOP(y[i] = a[i] + b[i])
}
template <typename T>
void kernels<T>::sub(const T* a, const T* b, int64_t n, T* y) {
  UMIT_EW_LOOP(y[i] = a[i] - b[i])
}
template <typename T>
void kernels<T>::mul(const T* a, const T* b, int64_t n, T* y) {
  UMIT_EW_LOOP(y[i] = a[i] * b[i])
}
template <typename T>
void kernels<T>::neg(const T* a, int64_t n, T* y) {
  UMIT_EW_LOOP(y[i] = -a[i])
}
template <typename T>
void kernels<T>::scalar_mul(const T* a, T c, int64_t n, T* y) {
  UMIT_EW_LOOP(y[i] = a[i] * c)
}
template <typename T>
void kernels<T>::scalar_add(const T* a, T c, int64_t n, T* y) {
  UMIT_EW_LOOP(y[i] = a[i] + c)
}
template <typename T>
void kernels<T>::square(const T* a, int64_t n, T* y) {
  UMIT_EW_LOOP(y[i] = a[i] * a[i])
}
template <typename T>
void kernels<T>::abs_(const T* a, int64_t n, T* y) {
  UMIT_EW_LOOP(y[i] = a[i] < T(0) ? -a[i] : a[i])
}
template <typename T>
void kernels<T>::sign(const T* a, int64_t n, T* y) {
  UMIT_EW_LOOP(y[i] = a[i] > T(0) ? T(1) : (a[i] < T(0) ? T(-1) : T(0)))
}
template <typename T>
void kernels<T>::reciprocal(const T* a, int64_t n, T* y) {
  UMIT_EW_LOOP(y[i] = T(1) / a[i])
}
template <typename T>
void kernels<T>::sqrt_eps(const T* a, T eps, int64_t n, T* y) {
  UMIT_EW_LOOP(y[i] = std::sqrt(a[i] + eps))
}
template <typename T>
void kernels<T>::accumulate(T* dst, const T* src, int64_t n) {
  UMIT_EW_LOOP(dst[i] += src[i])
}

#undef UMIT_EW_LOOP

template <typename T>
void kernels<T>::lerp(const T* a, const T* b, const T* t_per_row, int B, int64_t per,
                      T* y) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < B; ++r) {
    const T t = t_per_row[r];
    const T* pa = a + int64_t(r) * per;
    const T* pb = b + int64_t(r) * per;
    T* py = y + int64_t(r) * per;
    for (int64_t i = 0; i < per; ++i) py[i] = t * pa[i] + (T(1) - t) * pb[i];
  }
}

template <typename T>
T kernels<T>::sum(const T* x, int64_t n) {
  T s = 0;
  for (int64_t i = 0; i < n; ++i) s += x[i];
  return s;
}
template <typename T>
T kernels<T>::asum(const T* x, int64_t n) {
  T s = 0;
  for (int64_t i = 0; i < n; ++i) s += x[i] < T(0) ? -x[i] : x[i];
  return s;
}

template <typename T>
void kernels<T>::avg_pool2(const T* x, int B, int C, int H, int W, T* y) {
  const int Ho = H / 2, Wo = W / 2;
#pragma omp parallel for schedule(static)
  for (int bc = 0; bc < B * C; ++bc) {
    const T* p = x + int64_t(bc) * H * W;
    T* q = y + int64_t(bc) * Ho * Wo;
    for (int oy = 0; oy < Ho; ++oy)
      for (int ox = 0; ox < Wo; ++ox) {
        const T* r0 = p + int64_t(2 * oy) * W + 2 * ox;
        const T* r1 = r0 + W;
        q[int64_t(oy) * Wo + ox] = (r0[0] + r0[1] + r1[0] + r1[1]) * T(0.25);
      }
  }
}

template <typename T>
void kernels<T>::un_avg_pool2(const T* g, int B, int C, int H, int W, T* dx) {
  const int Ho = H / 2, Wo = W / 2;
#pragma omp parallel for schedule(static)
  for (int bc = 0; bc < B * C; ++bc) {
    const T* q = g + int64_t(bc) * Ho * Wo;
    T* p = dx + int64_t(bc) * H * W;
    for (int oy = 0; oy < Ho; ++oy)
      for (int ox = 0; ox < Wo; ++ox) {
        const T v = q[int64_t(oy) * Wo + ox] * T(0.25);
        T* r0 = p + int64_t(2 * oy) * W + 2 * ox;
        T* r1 = r0 + W;
        r0[0] = v;
        r0[1] = v;
        r1[0] = v;
        r1[1] = v;
      }
  }
}

template <typename T>
void kernels<T>::global_avg_pool(const T* x, int B, int C, int HW, T* y) {
#pragma omp parallel for schedule(static)
  for (int bc = 0; bc < B * C; ++bc) {
    const T* p = x + int64_t(bc) * HW;
    T s = 0;
    for (int i = 0; i < HW; ++i) s += p[i];
    y[bc] = s / T(HW);
  }
}

template <typename T>
void kernels<T>::broadcast_spatial(const T* g, int B, int C, int HW, T scale, T* dx) {
#pragma omp parallel for schedule(static)
  for (int bc = 0; bc < B * C; ++bc) {
    const T v = g[bc] * scale;
    T* p = dx + int64_t(bc) * HW;
    for (int i = 0; i < HW; ++i) p[i] = v;
  }
}

template <typename T>
void kernels<T>::gram(const T* f, int B, int C, int HW, T* G) {
  const T inv = T(1) / (T(C) * T(HW));
  for (int b = 0; b < B; ++b) {
    const T* F = f + int64_t(b) * C * HW;
    T* Gb = G + int64_t(b) * C * C;
    gemm_nt(F, F, Gb, C, HW, C, false);
    scalar_mul(Gb, inv, int64_t(C) * C, Gb);
  }
}

template <typename T>
void kernels<T>::gram_backward(const T* g, const T* f, int B, int C, int HW, T* df) {
  const T inv = T(1) / (T(C) * T(HW));
  std::vector<T> gs(size_t(C) * C);
  for (int b = 0; b < B; ++b) {
    const T* gb = g + int64_t(b) * C * C;
    // symmetrize: dF = (g + g^T) F / (C*HW)
    for (int i = 0; i < C; ++i)
      for (int j = 0; j < C; ++j)
        gs[size_t(i) * C + j] = (gb[int64_t(i) * C + j] + gb[int64_t(j) * C + i]) * inv;
    gemm_nn(gs.data(), f + int64_t(b) * C * HW, df + int64_t(b) * C * HW, C, C, HW,
            false);
  }
}

template <typename T>
void kernels<T>::place_slots(const T* x, int B, int C, int H, int W, const int* slot,
                             int N, T* y) {
  const int64_t plane = int64_t(C) * H * W;
#pragma omp parallel for schedule(static)
  for (int b = 0; b < B; ++b) {
    T* yb = y + int64_t(b) * N * plane;
    std::memset(yb, 0, sizeof(T) * size_t(N) * plane);
    std::memcpy(yb + int64_t(slot[b]) * plane, x + int64_t(b) * plane,
                sizeof(T) * size_t(plane));
  }
}

template <typename T>
void kernels<T>::select_slots(const T* y, int B, int C, int H, int W, const int* slot,
                              int N, T* x) {
  const int64_t plane = int64_t(C) * H * W;
#pragma omp parallel for schedule(static)
  for (int b = 0; b < B; ++b)
    std::memcpy(x + int64_t(b) * plane, y + int64_t(b) * N * plane + int64_t(slot[b]) * plane,
                sizeof(T) * size_t(plane));
}

template <typename T>
void kernels<T>::pad_channels(const T* x, int B, int Cin, int HW, int from, int Cout,
                              T* y) {
#pragma omp parallel for schedule(static)
  for (int b = 0; b < B; ++b) {
    T* yb = y + int64_t(b) * Cout * HW;
    std::memset(yb, 0, sizeof(T) * size_t(Cout) * HW);
    std::memcpy(yb + int64_t(from) * HW, x + int64_t(b) * Cin * HW,
                sizeof(T) * size_t(Cin) * HW);
  }
}

template <typename T>
void kernels<T>::slice_channels(const T* x, int B, int Cin, int HW, int from, int to,
                                T* y) {
  const int Cs = to - from;
#pragma omp parallel for schedule(static)
  for (int b = 0; b < B; ++b)
    std::memcpy(y + int64_t(b) * Cs * HW, x + (int64_t(b) * Cin + from) * HW,
                sizeof(T) * size_t(Cs) * HW);
}

template <typename T>
void kernels<T>::adam(T* p, const T* g, T* m, T* v, int64_t n, T lr, T b1, T b2, T eps,
                      T b1t, T b2t) {
  const T c1 = T(1) / (T(1) - b1t);
  const T c2 = T(1) / (T(1) - b2t);
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (T(1) - b1) * g[i];
    v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
    const T mh = m[i] * c1;
    const T vh = v[i] * c2;
    p[i] -= lr * mh / (std::sqrt(vh) + eps);
  }
}

template struct kernels<float>;
template struct kernels<double>;

}  // namespace umit
