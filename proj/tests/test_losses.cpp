#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "umit/gradcheck.hpp"
#include "umit/losses.hpp"
#include "umit/ops.hpp"

using namespace umit;

namespace {

TensorD rand_d(Shape s, uint64_t key, double scale = 1.0) {
  Rng rng(key);
  return randn<double>(s, rng, scale);
}

TensorD scalar_d(double v) { return TensorD::from(Shape{1}, {v}); }

}  // namespace

TEST_CASE("gradient penalty: unit-norm linear critic gives zero") {
  // critic(x) = w.x with ||w|| = 1 has gradient w everywhere, so the
  // penalty mean((||grad|| - 1)^2) vanishes for any mix points
  TapeScope<double> tape;
  TensorD w = rand_d(Shape{6, 1}, 31);
  double nrm = 0;
  for (double v : w.vec()) nrm += v * v;
  nrm = std::sqrt(nrm);
  for (double& v : w.vec()) v /= nrm;
  w.set_requires_grad(true);
  auto critic = [&](const TensorD& x) { return matmul(x, w); };
  TensorD real = rand_d(Shape{5, 6}, 32);
  TensorD fake = rand_d(Shape{5, 6}, 33);
  Rng rng(34);
  TensorD gp = gradient_penalty<double>(critic, real, fake, rng);
  CHECK(gp.item() == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("gradient penalty: doubled-sum critic on 4 dims gives 9") {
  // critic(x) = 2 * sum(x): gradient is (2,2,2,2), norm 4, penalty (4-1)^2
  TapeScope<double> tape;
  TensorD w = TensorD::full(Shape{4, 1}, 2.0).set_requires_grad(true);
  auto critic = [&](const TensorD& x) { return matmul(x, w); };
  TensorD real = rand_d(Shape{3, 4}, 35);
  TensorD fake = rand_d(Shape{3, 4}, 36);
  Rng rng(37);
  TensorD gp = gradient_penalty<double>(critic, real, fake, rng);
  CHECK(gp.item() == doctest::Approx(9.0).epsilon(1e-4));
}

TEST_CASE("gradient penalty: nonnegative for a random nonlinear critic") {
  TapeScope<double> tape;
  TensorD w1 = rand_d(Shape{6, 8}, 38, 0.7).set_requires_grad(true);
  TensorD w2 = rand_d(Shape{8, 1}, 39, 0.7).set_requires_grad(true);
  auto critic = [&](const TensorD& x) {
    return matmul(activation(matmul(x, w1), Act::Tanh), w2);
  };
  TensorD real = rand_d(Shape{4, 6}, 40);
  TensorD fake = rand_d(Shape{4, 6}, 41);
  Rng rng(42);
  TensorD gp = gradient_penalty<double>(critic, real, fake, rng);
  CHECK(gp.item() >= 0.0);
}

TEST_CASE("gradient penalty: differentiable in the critic parameters") {
  // the penalty sits on the live tape: finite differences on the critic
  // weight must match the backpropagated second-order gradient
  TensorD w = rand_d(Shape{5, 1}, 43, 0.5);
  TensorD real = rand_d(Shape{4, 5}, 44);
  TensorD fake = rand_d(Shape{4, 5}, 45);
  double err = finite_diff_check<double>(
      [&] {
        auto critic = [&](const TensorD& x) {
          return matmul(activation(matmul(x, w), Act::Tanh),
                        TensorD::full(Shape{1, 1}, 1.0));
        };
        Rng rng(46);
        return gradient_penalty<double>(critic, real, fake, rng);
      },
      w, 1e-5);
  CHECK(err < 1e-3);
}

TEST_CASE("adversarial losses: critic difference and generator negation") {
  TensorD real = TensorD::from(Shape{2, 1}, {3.0, 5.0});   // mean 4
  TensorD fake = TensorD::from(Shape{2, 1}, {1.0, 2.0});   // mean 1.5
  TensorD gp = scalar_d(0.25);
  TensorD d = d_adversarial_loss<double>(real, fake, gp, 10.0);
  CHECK(d.item() == doctest::Approx(1.5 - 4.0 + 2.5).epsilon(1e-12));
  TensorD g = g_adversarial_loss<double>(fake);
  CHECK(g.item() == doctest::Approx(-1.5).epsilon(1e-12));
}

TEST_CASE("classification loss equals softmax cross-entropy") {
  TensorD logits = rand_d(Shape{5, 3}, 47);
  std::vector<int> labels{0, 2, 1, 1, 0};
  TensorD a = classification_loss(logits, labels);
  TensorD b = softmax_cross_entropy(logits, labels);
  CHECK(a.item() == doctest::Approx(b.item()).epsilon(1e-12));
  // uniform logits: ln N regardless of labels
  TensorD zero = TensorD::zeros(Shape{4, 5});
  CHECK(classification_loss(zero, std::vector<int>{0, 1, 2, 3}).item() ==
        doctest::Approx(std::log(5.0)).epsilon(1e-9));
}

TEST_CASE("perceptual loss: zero against itself, positive across domains") {
  auto fe = build_extractor<float>(3, {8, 16, 32});
  Rng rng(48);
  Tensor x = randn<float>(Shape{2, 3, 16, 16}, rng, 0.4f);
  Tensor y = randn<float>(Shape{2, 3, 16, 16}, rng, 0.4f);
  auto same = perceptual_loss(fe, x, x, x);
  CHECK(same.content.item() == doctest::Approx(0.f).epsilon(1e-6));
  CHECK(same.style.item() == doctest::Approx(0.f).epsilon(1e-6));
  auto diff = perceptual_loss(fe, x, y, y);
  CHECK(diff.content.item() > 1e-6);
  CHECK(diff.style.item() > 1e-6);
}

TEST_CASE("perceptual loss: content tracks the content image only") {
  auto fe = build_extractor<float>(3, {8, 16, 32});
  Rng rng(49);
  Tensor x = randn<float>(Shape{1, 3, 16, 16}, rng, 0.4f);
  Tensor c = randn<float>(Shape{1, 3, 16, 16}, rng, 0.4f);
  Tensor s1 = randn<float>(Shape{1, 3, 16, 16}, rng, 0.4f);
  Tensor s2 = randn<float>(Shape{1, 3, 16, 16}, rng, 0.4f);
  auto a = perceptual_loss(fe, x, c, s1);
  auto b = perceptual_loss(fe, x, c, s2);
  CHECK(a.content.item() == doctest::Approx(b.content.item()).epsilon(1e-9));
  CHECK(a.style.item() != b.style.item());
  auto cst = perceptual_loss(fe, x, s1, c);
  CHECK(cst.style.item() != a.style.item());
}

TEST_CASE("perceptual loss: gradients reach only the translated image") {
  auto fe = build_extractor<float>(3, {8, 16, 32});
  TapeScope<float> tape;
  Rng rng(50);
  Tensor x = randn<float>(Shape{1, 3, 16, 16}, rng, 0.4f).set_requires_grad(true);
  Tensor c = randn<float>(Shape{1, 3, 16, 16}, rng, 0.4f).set_requires_grad(true);
  Tensor s = randn<float>(Shape{1, 3, 16, 16}, rng, 0.4f).set_requires_grad(true);
  auto pt = perceptual_loss(fe, x, c, s);
  backward(add(pt.content, pt.style));
  CHECK(x.has_grad());
  CHECK_FALSE(c.has_grad());
  CHECK_FALSE(s.has_grad());
  bool nonzero = false;
  for (float g : x.grad_vec()) nonzero |= (g != 0.f);
  CHECK(nonzero);
}

TEST_CASE("perceptual loss: mean/std statistic is an accepted alternative") {
  auto fe = build_extractor<float>(3, {8, 16, 32});
  Rng rng(51);
  Tensor x = randn<float>(Shape{1, 3, 16, 16}, rng, 0.4f);
  Tensor y = randn<float>(Shape{1, 3, 16, 16}, rng, 0.4f);
  auto ms = perceptual_loss(fe, x, y, y, StyleStat::MeanStd);
  CHECK(ms.style.item() > 0.f);
  auto self_ms = perceptual_loss(fe, x, x, x, StyleStat::MeanStd);
  CHECK(self_ms.style.item() == doctest::Approx(0.f).epsilon(1e-6));
}

TEST_CASE("identity loss: vanishes only for a perfect reconstruction") {
  GeneratorConfig cfg;
  cfg.image_size = 16;
  auto p = init_generator_params<float>(cfg, 7);
  Rng rng(52);
  Tensor x = randn<float>(Shape{2, 3, 16, 16}, rng, 0.3f);
  for (int64_t i = 0; i < x.numel(); ++i) x.data()[i] = std::tanh(x.data()[i]);
  Tensor idl = identity_loss(cfg, p, x, {0, 2});
  CHECK(idl.item() > 0.f);
  CHECK(std::isfinite(idl.item()));
  CHECK_THROWS_AS(identity_loss(cfg, p, x, std::vector<int>{0, 5}), std::out_of_range);
}

TEST_CASE("totals: unit components with default weights give 13.5 and 2.5") {
  LossWeights<double> w;
  TensorD one = scalar_d(1.0);
  TensorD g = total_g_loss<double>(one, one, one, one, one, one, w);
  CHECK(g.item() == doctest::Approx(13.5).epsilon(1e-12));
  TensorD d = total_d_loss<double>(one, one, one, w);
  CHECK(d.item() == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("totals: each component lands on its own weight") {
  // distinct primes isolate every term in the weighted sum
  LossWeights<double> w;
  TensorD adv = scalar_d(2), c1 = scalar_d(3), c2 = scalar_d(5);
  TensorD content = scalar_d(7), style = scalar_d(11), id = scalar_d(13);
  TensorD g = total_g_loss<double>(adv, c1, c2, content, style, id, w);
  // adv + 1*c1 + 0.5*c2 + 10*id + 0.5*(content + 1*style)
  CHECK(g.item() == doctest::Approx(2 + 3 + 2.5 + 130 + 0.5 * 18).epsilon(1e-12));
  TensorD d = total_d_loss<double>(adv, c1, c2, w);
  CHECK(d.item() == doctest::Approx(2 + 3 + 2.5).epsilon(1e-12));
  // zeroing one lambda removes exactly that contribution
  LossWeights<double> w0 = w;
  w0.identity = 0;
  TensorD g0 = total_g_loss<double>(adv, c1, c2, content, style, id, w0);
  CHECK(g.item() - g0.item() == doctest::Approx(130).epsilon(1e-12));
}
