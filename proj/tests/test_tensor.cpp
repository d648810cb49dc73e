#include <omp.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "umit/ops.hpp"
#include "umit/reference_kernels.hpp"

using namespace umit;

namespace {

Tensor rand_t(Shape s, uint64_t key, float scale = 1.f) {
  Rng rng(key);
  return randn<float>(s, rng, scale);
}

TensorD rand_d(Shape s, uint64_t key, double scale = 1.0) {
  Rng rng(key);
  return randn<double>(s, rng, scale);
}

float dot(const Tensor& a, const Tensor& b) {
  double acc = 0;
  for (int64_t i = 0; i < a.numel(); ++i) acc += double(a.data()[i]) * b.data()[i];
  return float(acc);
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  float m = 0;
  for (int64_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace

TEST_CASE("shape: bounds and equality") {
  Shape s{2, 3, 4, 5};
  CHECK(s.rank() == 4);
  CHECK(s.numel() == 120);
  CHECK(s[0] == 2);
  CHECK_THROWS_AS(s[4], std::out_of_range);
  CHECK(Shape{2, 3} == Shape{2, 3});
  CHECK(Shape{2, 3} != Shape{3, 2});
  CHECK_THROWS_AS(Shape::of({1, 1, 1, 1, 1}), std::invalid_argument);
}

TEST_CASE("conv2d: output size law matches a position-counting oracle") {
  // oracle: count output rows by walking the anchor until the receptive field
  // falls off the padded input
  auto count = [](int H, int k, int s, int p, int d) {
    int n = 0;
    for (int oy = 0;; ++oy) {
      const int lo = oy * s - p;
      const int hi = lo + d * (k - 1);
      if (hi >= H + p) break;
      if (lo < -p) break;
      ++n;
    }
    return n;
  };
  for (int k : {1, 3, 4})
    for (int s : {1, 2})
      for (int p : {0, 1, 2})
        for (int d : {1, 2, 3}) {
          const int H = 9;
          if (H + 2 * p < d * (k - 1) + 1) continue;
          const ConvGeom g{s, p, d};
          const int law = conv_out_dim(H, k, g);
          CHECK_MESSAGE(law == count(H, k, s, p, d),
                        "k=" << k << " s=" << s << " p=" << p << " d=" << d);
          if (law <= 0) continue;
          Tensor x = rand_t(Shape{1, 2, H, H}, stream_key(7, "convlaw", k, s * 10 + p));
          Tensor w = rand_t(Shape{3, 2, k, k}, stream_key(8, "convlaw", k, d));
          Tensor y = conv2d(x, w, Tensor{}, s, p, d);
          CHECK(y.shape() == Shape{1, 3, law, law});
          // transposed conv restores the original size by construction
          Tensor z = transposed_conv2d(y, rand_t(Shape{3, 2, k, k}, 99), Tensor{}, s, p,
                                       d, H, H);
          CHECK(z.shape() == Shape{1, 2, H, H});
        }
}

TEST_CASE("conv2d: all-ones 3x3 over 3x3 sums to 9") {
  Tensor x = Tensor::full(Shape{1, 1, 3, 3}, 1.f);
  Tensor w = Tensor::full(Shape{1, 1, 3, 3}, 1.f);
  Tensor b = Tensor::zeros(Shape{1});
  Tensor y = conv2d(x, w, b, 1, 0);
  CHECK(y.shape() == Shape{1, 1, 1, 1});
  CHECK(y.item() == doctest::Approx(9.f));
}

TEST_CASE("conv2d: dilation 2 over a constant 5x5 field still sums nine taps") {
  Tensor x = Tensor::full(Shape{1, 1, 5, 5}, 1.f);
  Tensor w = Tensor::full(Shape{1, 1, 3, 3}, 1.f);
  Tensor y = conv2d(x, w, Tensor{}, 1, 0, 2);
  CHECK(y.shape() == Shape{1, 1, 1, 1});
  CHECK(y.item() == doctest::Approx(9.f));
}

TEST_CASE("conv2d: random case matches the quadruple-loop oracle") {
  Tensor x = rand_t(Shape{2, 3, 8, 8}, stream_key(11, "convref"));
  Tensor w = rand_t(Shape{4, 3, 4, 4}, stream_key(12, "convref"));
  Tensor b = rand_t(Shape{4}, stream_key(13, "convref"));
  Tensor y = conv2d(x, w, b, 2, 1);
  CHECK(y.shape() == Shape{2, 4, 4, 4});
  Tensor want = Tensor::zeros(y.shape());
  ref<float>::conv2d(x.data(), 2, 3, 8, 8, w.data(), 4, 4, b.data(), ConvGeom{2, 1, 1},
                     want.data());
  CHECK(max_abs_diff(y, want) < 1e-5f);
}

TEST_CASE("conv2d: dilated case matches the oracle") {
  Tensor x = rand_t(Shape{2, 2, 10, 10}, stream_key(21, "dilref"));
  Tensor w = rand_t(Shape{3, 2, 3, 3}, stream_key(22, "dilref"));
  const ConvGeom g{1, 2, 2};
  Tensor y = conv2d(x, w, Tensor{}, 1, 2, 2);
  Tensor want = Tensor::zeros(y.shape());
  ref<float>::conv2d(x.data(), 2, 2, 10, 10, w.data(), 3, 3, nullptr, g, want.data());
  CHECK(max_abs_diff(y, want) < 1e-5f);
}

TEST_CASE("conv2d: linearity in the input") {
  Tensor x = rand_t(Shape{1, 2, 6, 6}, 31);
  Tensor y = rand_t(Shape{1, 2, 6, 6}, 32);
  Tensor w = rand_t(Shape{2, 2, 3, 3}, 33);
  Tensor lhs = conv2d(add(scalar_mul(x, 1.7f), scalar_mul(y, -0.4f)), w, Tensor{}, 1, 1);
  Tensor rhs = add(scalar_mul(conv2d(x, w, Tensor{}, 1, 1), 1.7f),
                   scalar_mul(conv2d(y, w, Tensor{}, 1, 1), -0.4f));
  CHECK(max_abs_diff(lhs, rhs) < 1e-5f);
}

TEST_CASE("conv2d: rejects mismatched channels and degenerate geometry") {
  Tensor x = Tensor::zeros(Shape{1, 3, 8, 8});
  Tensor w = Tensor::zeros(Shape{4, 2, 3, 3});
  CHECK_THROWS_AS(conv2d(x, w, Tensor{}, 1, 1), std::invalid_argument);
  Tensor w2 = Tensor::zeros(Shape{4, 3, 3, 3});
  Tensor tiny = Tensor::zeros(Shape{1, 3, 2, 2});
  CHECK_THROWS_AS(conv2d(tiny, w2, Tensor{}, 1, 0), std::invalid_argument);
}

TEST_CASE("transposed_conv2d: unit impulse under k4 s2 p1 fills a 2x2 of ones") {
  Tensor z = Tensor::full(Shape{1, 1, 1, 1}, 1.f);
  Tensor w = Tensor::full(Shape{1, 1, 4, 4}, 1.f);
  Tensor y = transposed_conv2d(z, w, Tensor{}, 2, 1);
  CHECK(y.shape() == Shape{1, 1, 2, 2});
  for (int i = 0; i < 4; ++i) CHECK(y.data()[i] == doctest::Approx(1.f));
}

TEST_CASE("transposed_conv2d: zero input leaves only the bias broadcast") {
  Tensor z = Tensor::zeros(Shape{2, 2, 3, 3});
  Tensor w = rand_t(Shape{2, 3, 4, 4}, 41);
  Tensor b = Tensor::from(Shape{3}, {0.5f, -1.f, 2.f});
  Tensor y = transposed_conv2d(z, w, b, 2, 1);
  CHECK(y.shape() == Shape{2, 3, 6, 6});
  for (int bb = 0; bb < 2; ++bb)
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 36; ++i)
        CHECK(y.data()[(bb * 3 + c) * 36 + i] == doctest::Approx(b.data()[c]));
}

TEST_CASE("transposed_conv2d: matches the scatter oracle") {
  Tensor z = rand_t(Shape{2, 3, 5, 5}, 43);
  Tensor w = rand_t(Shape{3, 2, 4, 4}, 44);
  Tensor y = transposed_conv2d(z, w, Tensor{}, 2, 1);
  Tensor want = Tensor::zeros(y.shape());
  ref<float>::tconv2d(z.data(), 2, 3, 5, 5, w.data(), 2, 4, nullptr, ConvGeom{2, 1, 1},
                      y.shape()[2], y.shape()[3], want.data());
  CHECK(max_abs_diff(y, want) < 1e-5f);
}

TEST_CASE("conv/tconv are adjoint: <conv(x,w), dy> == <x, tconv(dy,w)>") {
  // pins the convention: the same weight array serves both maps, so the
  // gradient of conv2d w.r.t. its input IS a transposed_conv2d forward
  for (int s : {1, 2}) {
    Tensor x = rand_t(Shape{2, 3, 8, 8}, stream_key(51, "adj", s));
    Tensor w = rand_t(Shape{4, 3, 4, 4}, stream_key(52, "adj", s));
    Tensor y = conv2d(x, w, Tensor{}, s, 1);
    Tensor dy = rand_t(y.shape(), stream_key(53, "adj", s));
    Tensor xbar = transposed_conv2d(dy, w, Tensor{}, s, 1, 1, 8, 8);
    CHECK(dot(y, dy) == doctest::Approx(dot(x, xbar)).epsilon(1e-4));
  }
}

TEST_CASE("instance_norm: constant input maps to beta") {
  Tensor x = Tensor::full(Shape{2, 3, 4, 4}, 7.25f);
  Tensor gamma = Tensor::full(Shape{3}, 1.f);
  Tensor beta = Tensor::zeros(Shape{3});
  Tensor y = instance_norm(x, gamma, beta);
  for (int64_t i = 0; i < y.numel(); ++i) CHECK(std::fabs(y.data()[i]) < 1e-4f);
}

TEST_CASE("instance_norm: normalized input is a fixed point") {
  // build x with exact per-(b,c) mean 0 and variance 1
  Tensor x = Tensor::zeros(Shape{1, 2, 2, 2});
  const float u = 1.f;
  float vals[8] = {u, -u, u, -u, u, u, -u, -u};
  for (int i = 0; i < 8; ++i) x.data()[i] = vals[i];
  Tensor y = instance_norm(x, Tensor{}, Tensor{}, 1e-5f);
  CHECK(max_abs_diff(x, y) < 1e-4f);
}

TEST_CASE("instance_norm: output statistics and oracle agreement") {
  TensorD x = rand_d(Shape{2, 3, 4, 4}, 61, 2.0);
  TensorD gamma = TensorD::full(Shape{3}, 1.0);
  TensorD beta = TensorD::zeros(Shape{3});
  TensorD y = instance_norm(x, gamma, beta, 1e-5);
  for (int b = 0; b < 2; ++b)
    for (int c = 0; c < 3; ++c) {
      double mu = 0, var = 0;
      const double* p = y.data() + (b * 3 + c) * 16;
      for (int i = 0; i < 16; ++i) mu += p[i];
      mu /= 16;
      for (int i = 0; i < 16; ++i) var += (p[i] - mu) * (p[i] - mu);
      var /= 16;
      CHECK(std::fabs(mu) < 1e-6);
      CHECK(var > 1.0 - 1e-3);
      CHECK(var <= 1.0 + 1e-9);
    }
  TensorD want = TensorD::zeros(y.shape());
  ref<double>::instance_norm(x.data(), 2, 3, 16, gamma.data(), beta.data(), 1e-5,
                             want.data());
  for (int64_t i = 0; i < y.numel(); ++i)
    CHECK(y.data()[i] == doctest::Approx(want.data()[i]).epsilon(1e-9));
}

TEST_CASE("activation: pinned point values") {
  Tensor x = Tensor::from(Shape{3}, {0.f, -1.f, 0.5f});
  CHECK(activation(x, Act::Tanh).data()[0] == doctest::Approx(0.f));
  CHECK(activation(x, Act::Relu).data()[1] == doctest::Approx(0.f));
  CHECK(activation(x, Act::LeakyRelu, 0.2f).data()[1] == doctest::Approx(-0.2f));
  CHECK(activation(x, Act::Linear).data()[2] == doctest::Approx(0.5f));
}

TEST_CASE("fully_connected: identity weight and pure-bias cases") {
  Tensor x = rand_t(Shape{2, 3}, 71);
  Tensor eye = Tensor::zeros(Shape{3, 3});
  for (int i = 0; i < 3; ++i) eye.data()[i * 3 + i] = 1.f;
  CHECK(max_abs_diff(fully_connected(x, eye, Tensor::zeros(Shape{3})), x) < 1e-6f);

  Tensor w0 = Tensor::zeros(Shape{3, 4});
  Tensor b = Tensor::from(Shape{4}, {1.f, 2.f, 3.f, 4.f});
  Tensor y = fully_connected(x, w0, b);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 4; ++c) CHECK(y.data()[r * 4 + c] == doctest::Approx(b.data()[c]));
}

TEST_CASE("fully_connected: random case matches the triple-loop oracle") {
  Tensor x = rand_t(Shape{2, 3}, 73);
  Tensor w = rand_t(Shape{3, 4}, 74);
  Tensor b = rand_t(Shape{4}, 75);
  Tensor y = fully_connected(x, w, b);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 4; ++c) {
      float acc = b.data()[c];
      for (int k = 0; k < 3; ++k) acc += x.data()[r * 3 + k] * w.data()[k * 4 + c];
      CHECK(y.data()[r * 4 + c] == doctest::Approx(acc).epsilon(1e-5));
    }
  CHECK_THROWS_AS(matmul(x, rand_t(Shape{4, 2}, 76)), std::invalid_argument);
}

TEST_CASE("concat/slice: roundtrip is bit-exact") {
  Tensor a = rand_t(Shape{2, 1, 3, 3}, 81);
  Tensor b = rand_t(Shape{2, 2, 3, 3}, 82);
  Tensor cat = concat_channels<float>({a, b});
  CHECK(cat.shape() == Shape{2, 3, 3, 3});
  Tensor a2 = slice_channels(cat, 0, 1);
  Tensor b2 = slice_channels(cat, 1, 3);
  CHECK(std::memcmp(a2.data(), a.data(), sizeof(float) * size_t(a.numel())) == 0);
  CHECK(std::memcmp(b2.data(), b.data(), sizeof(float) * size_t(b.numel())) == 0);
  Tensor full = slice_channels(cat, 0, 3);
  CHECK(std::memcmp(full.data(), cat.data(), sizeof(float) * size_t(cat.numel())) == 0);
  CHECK_THROWS_AS(slice_channels(cat, 2, 2), std::out_of_range);
  CHECK_THROWS_AS(slice_channels(cat, 0, 4), std::out_of_range);
}

TEST_CASE("gram_matrix: constant and zero fields") {
  Tensor f1 = Tensor::full(Shape{1, 1, 3, 5}, 1.f);
  Tensor g1 = gram_matrix(f1);
  CHECK(g1.shape() == Shape{1, 1, 1});
  CHECK(g1.item() == doctest::Approx(1.f));  // (H*W)/(1*H*W)
  Tensor g0 = gram_matrix(Tensor::zeros(Shape{2, 3, 4, 4}));
  for (int64_t i = 0; i < g0.numel(); ++i) CHECK(g0.data()[i] == 0.f);
}

TEST_CASE("gram_matrix: explicit 1x2x2x2 case, symmetry, PSD") {
  Tensor f = rand_t(Shape{1, 2, 2, 2}, 91);
  Tensor g = gram_matrix(f);
  const float* F = f.data();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      float acc = 0;
      for (int s = 0; s < 4; ++s) acc += F[i * 4 + s] * F[j * 4 + s];
      CHECK(g.data()[i * 2 + j] == doctest::Approx(acc / 8.f).epsilon(1e-5));
    }
  CHECK(g.data()[1] == doctest::Approx(g.data()[2]));

  // PSD: min eigenvalue of G via power iteration on (c*I - G)
  Tensor big = gram_matrix(rand_t(Shape{1, 4, 3, 3}, 92));
  const int C = 4;
  double trace = 0;
  for (int i = 0; i < C; ++i) trace += big.data()[i * C + i];
  const double c = trace + 1.0;
  std::vector<double> v(C, 1.0), nv(C);
  for (int it = 0; it < 200; ++it) {
    for (int i = 0; i < C; ++i) {
      nv[i] = c * v[i];
      for (int j = 0; j < C; ++j) nv[i] -= double(big.data()[i * C + j]) * v[j];
    }
    double norm = 0;
    for (int i = 0; i < C; ++i) norm += nv[i] * nv[i];
    norm = std::sqrt(norm);
    for (int i = 0; i < C; ++i) v[i] = nv[i] / norm;
  }
  double lam = 0;
  for (int i = 0; i < C; ++i) {
    double row = c * v[i];
    for (int j = 0; j < C; ++j) row -= double(big.data()[i * C + j]) * v[j];
    lam += v[i] * row;
  }
  const double min_eig = c - lam;
  CHECK(min_eig >= -1e-6);
}

TEST_CASE("softmax_cross_entropy: pinned values and direct formula") {
  Tensor u = Tensor::zeros(Shape{2, 4});
  CHECK(softmax_cross_entropy(u, {0, 3}).item() == doctest::Approx(std::log(4.f)));

  Tensor conf = Tensor::zeros(Shape{1, 4});
  conf.data()[2] = 100.f;
  CHECK(softmax_cross_entropy(conf, {2}).item() < 1e-8f);

  TensorD logits = rand_d(Shape{3, 5}, 95, 2.0);
  std::vector<int> labels{4, 0, 2};
  const double got = softmax_cross_entropy(logits, labels).item();
  const double want = ref<double>::softmax_ce(logits.data(), 3, 5, labels.data());
  CHECK(got == doctest::Approx(want).epsilon(1e-9));
  CHECK_THROWS_AS(softmax_cross_entropy(logits, {0, 1, 5}), std::out_of_range);
}

TEST_CASE("reduce: pinned values") {
  Tensor x = Tensor::from(Shape{4}, {-1.f, 1.f, -1.f, 1.f});
  CHECK(reduce(x, Reduce::L1Mean).item() == doctest::Approx(1.f));
  CHECK(reduce(Tensor::zeros(Shape{5}), Reduce::L2Norm).item() == doctest::Approx(0.f));
  CHECK(reduce(x, Reduce::Sum).item() == doctest::Approx(0.f));
  CHECK(reduce(Tensor::from(Shape{2}, {1.f, 3.f}), Reduce::Mean).item() ==
        doctest::Approx(2.f));
}

TEST_CASE("drawer slots: place/select are mutually inverse on their window") {
  Tensor x = rand_t(Shape{3, 2, 4, 4}, 101);
  std::vector<int> slot{2, 0, 1};
  Tensor placed = place_slots(x, slot, 3);
  CHECK(placed.shape() == Shape{3, 6, 4, 4});
  // selected window returns the payload, everything else is zero
  Tensor back = select_slots(placed, slot, 3);
  CHECK(max_abs_diff(back, x) == 0.f);
  double total = 0, payload = 0;
  for (int64_t i = 0; i < placed.numel(); ++i) total += std::fabs(placed.data()[i]);
  for (int64_t i = 0; i < x.numel(); ++i) payload += std::fabs(x.data()[i]);
  CHECK(total == doctest::Approx(payload));
  CHECK_THROWS_AS(place_slots(x, {0, 1, 3}, 3), std::out_of_range);
  CHECK_THROWS_AS(select_slots(placed, {0, 1}, 3), std::invalid_argument);
}

TEST_CASE("pools: ref oracle agreement") {
  Tensor x = rand_t(Shape{2, 3, 6, 6}, 111);
  Tensor p = avg_pool2(x);
  Tensor want = Tensor::zeros(p.shape());
  ref<float>::avg_pool2(x.data(), 2, 3, 6, 6, want.data());
  CHECK(max_abs_diff(p, want) < 1e-6f);
  Tensor gp = global_avg_pool(x);
  Tensor want2 = Tensor::zeros(gp.shape());
  ref<float>::global_avg_pool(x.data(), 2, 3, 36, want2.data());
  CHECK(max_abs_diff(gp, want2) < 1e-6f);
}

TEST_CASE("gemm: blocked kernel matches the naive loop, all variants") {
  const int M = 17, K = 23, N = 13;
  Tensor A = rand_t(Shape{M, K}, 121);
  Tensor B = rand_t(Shape{K, N}, 122);
  Tensor C = Tensor::zeros(Shape{M, N});
  kernels<float>::gemm_nn(A.data(), B.data(), C.data(), M, K, N, false);
  Tensor want = Tensor::zeros(Shape{M, N});
  ref<float>::gemm_nn(A.data(), B.data(), want.data(), M, K, N);
  CHECK(max_abs_diff(C, want) < 1e-4f);

  // nt: C = A * Bt^T with Bt = B^T gives the same product
  Tensor Bt = transpose2(B);
  Tensor C2 = Tensor::zeros(Shape{M, N});
  kernels<float>::gemm_nt(A.data(), Bt.data(), C2.data(), M, K, N, false);
  CHECK(max_abs_diff(C2, want) < 1e-4f);

  // tn: C = At^T * B
  Tensor At = transpose2(A);
  Tensor C3 = Tensor::zeros(Shape{M, N});
  kernels<float>::gemm_tn(At.data(), B.data(), C3.data(), K, M, N, false);
  CHECK(max_abs_diff(C3, want) < 1e-4f);
}

TEST_CASE("im2col/col2im are adjoint") {
  const int C = 3, H = 7, W = 6, k = 3;
  const ConvGeom g{2, 1, 1};
  const int Ho = conv_out_dim(H, k, g), Wo = conv_out_dim(W, k, g);
  Tensor x = rand_t(Shape{1, C, H, W}, 131);
  Tensor col = Tensor::zeros(Shape{C * k * k, Ho * Wo});
  kernels<float>::im2col(x.data(), C, H, W, k, g, Ho, Wo, col.data());
  Tensor A = rand_t(col.shape(), 132);
  Tensor xbar = Tensor::zeros(x.shape());
  kernels<float>::col2im(A.data(), C, H, W, k, g, Ho, Wo, xbar.data());
  CHECK(dot(col, A) == doctest::Approx(dot(x, xbar)).epsilon(1e-4));
}

TEST_CASE("kernels are bitwise deterministic across thread counts") {
  const int saved = omp_get_max_threads();
  Tensor x = rand_t(Shape{3, 4, 16, 16}, 141);
  Tensor w = rand_t(Shape{8, 4, 4, 4}, 142);
  Tensor b = rand_t(Shape{8}, 143);

  omp_set_num_threads(1);
  Tensor y1 = conv2d(x, w, b, 2, 1);
  Tensor n1 = instance_norm(y1, Tensor{}, Tensor{});
  Tensor g1 = gram_matrix(n1);

  omp_set_num_threads(3);
  Tensor y3 = conv2d(x, w, b, 2, 1);
  Tensor n3 = instance_norm(y3, Tensor{}, Tensor{});
  Tensor g3 = gram_matrix(n3);
  omp_set_num_threads(saved);

  CHECK(std::memcmp(y1.data(), y3.data(), sizeof(float) * size_t(y1.numel())) == 0);
  CHECK(std::memcmp(n1.data(), n3.data(), sizeof(float) * size_t(n1.numel())) == 0);
  CHECK(std::memcmp(g1.data(), g3.data(), sizeof(float) * size_t(g1.numel())) == 0);
}

TEST_CASE("seeded streams reproduce bit-identical tensors") {
  Tensor a = rand_t(Shape{2, 3, 5, 5}, stream_key(17, "data", 3, 1));
  Tensor b = rand_t(Shape{2, 3, 5, 5}, stream_key(17, "data", 3, 1));
  Tensor c = rand_t(Shape{2, 3, 5, 5}, stream_key(17, "data", 3, 2));
  CHECK(std::memcmp(a.data(), b.data(), sizeof(float) * size_t(a.numel())) == 0);
  CHECK(max_abs_diff(a, c) > 0.f);
}
