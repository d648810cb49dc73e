#include "umit/losses.hpp"

#include <stdexcept>

#include "umit/ops.hpp"

namespace umit {

template <typename T>
TensorT<T> gradient_penalty(const std::function<TensorT<T>(const TensorT<T>&)>& critic,
                            const TensorT<T>& real, const TensorT<T>& fake, Rng& rng) {
  if (real.shape() != fake.shape())
    throw std::invalid_argument("gradient_penalty: real " + real.shape().str() +
                                " vs fake " + fake.shape().str());
  const int B = real.shape()[0];
  std::vector<T> t(size_t(B), T(0));
  for (auto& v : t) v = T(rng.next_uniform());

  // the mix is a fresh leaf: the penalty reaches the critic's parameters,
  // never the generator that produced `fake`
  TensorT<T> xhat;
  {
    NoRecordScope<T> plain;
    xhat = lerp_rows(real, fake, t);
  }
  xhat.set_requires_grad(true);

  auto scores = critic(xhat);
  auto gx = gradient(sum(scores), {xhat}, /*create_graph=*/true)[0];
  auto flat = reshape(gx, Shape{B, int(gx.numel() / B)});
  auto norms = sqrt_eps(row_sum(square(flat)), T(1e-12));
  return mean(square(scalar_add(norms, T(-1))));
}

template <typename T>
TensorT<T> d_adversarial_loss(const TensorT<T>& real_scores, const TensorT<T>& fake_scores,
                              const TensorT<T>& gp, T lambda_gp) {
  auto loss = sub(mean(fake_scores), mean(real_scores));
  if (gp.defined()) loss = add(loss, scalar_mul(gp, lambda_gp));
  return loss;
}

template <typename T>
TensorT<T> g_adversarial_loss(const TensorT<T>& fake_scores) {
  return neg(mean(fake_scores));
}

template <typename T>
TensorT<T> classification_loss(const TensorT<T>& logits, const std::vector<int>& labels) {
  return softmax_cross_entropy(logits, labels);
}

namespace {

template <typename T>
TensorT<T> style_stat_distance(const TensorT<T>& f_t, const TensorT<T>& f_s, StyleStat stat) {
  if (stat == StyleStat::Gram)
    return reduce(sub(gram_matrix(f_t), gram_matrix(f_s)), Reduce::L2Norm);
  // mean/std variant: squared distance of per-channel statistics
  auto moments = [](const TensorT<T>& f) {
    const int B = f.shape()[0], C = f.shape()[1];
    const T inv_hw = T(1) / T(f.shape()[2] * f.shape()[3]);
    auto flat = reshape(f, Shape{B * C, f.shape()[2] * f.shape()[3]});
    auto mu = scalar_mul(row_sum(flat), inv_hw);
    auto centered = sub(flat, broadcast_row(mu, f.shape()[2] * f.shape()[3]));
    auto var = scalar_mul(row_sum(square(centered)), inv_hw);
    auto sd = sqrt_eps(var, T(1e-8));
    return std::pair{mu, sd};
  };
  auto [mu_t, sd_t] = moments(f_t);
  auto [mu_s, sd_s] = moments(f_s);
  return add(sum(square(sub(mu_t, mu_s))), sum(square(sub(sd_t, sd_s))));
}

}  // namespace

template <typename T>
PerceptualTerms<T> perceptual_loss(const FeatureExtractor<T>& fe, const TensorT<T>& x_t,
                                   const TensorT<T>& x_content, const TensorT<T>& x_style,
                                   StyleStat stat) {
  if (x_t.shape() != x_content.shape() || x_t.shape() != x_style.shape())
    throw std::invalid_argument("perceptual_loss: input shapes differ");

  auto f_t = extract(fe, x_t);
  std::array<TensorT<T>, 3> f_c, f_s;
  {
    NoRecordScope<T> plain;
    f_c = extract(fe, x_content.detached());
    f_s = extract(fe, x_style.detached());
  }

  PerceptualTerms<T> out;
  out.content = scalar_mul(reduce(sub(f_t[2], f_c[2]), Reduce::L2Norm),
                           T(1) / T(f_t[2].numel()));
  out.style = style_stat_distance(f_t[0], f_s[0], stat);
  for (int i = 1; i < 3; ++i)
    out.style = add(out.style, style_stat_distance(f_t[size_t(i)], f_s[size_t(i)], stat));
  return out;
}

template <typename T>
TensorT<T> identity_loss(const GeneratorConfig& cfg, const ParamMap<T>& gparams,
                         const TensorT<T>& x, const std::vector<int>& labels_self) {
  auto recon = translate_batch(cfg, gparams, x, labels_self, labels_self);
  return reduce(sub(recon, x), Reduce::L1Mean);
}

template <typename T>
TensorT<T> total_d_loss(const TensorT<T>& d_adv_with_gp, const TensorT<T>& d_cls1,
                        const TensorT<T>& d_cls2, const LossWeights<T>& w) {
  return add(d_adv_with_gp,
             add(scalar_mul(d_cls1, w.cls1), scalar_mul(d_cls2, w.cls2)));
}

template <typename T>
TensorT<T> total_g_loss(const TensorT<T>& g_adv, const TensorT<T>& g_cls1,
                        const TensorT<T>& g_cls2, const TensorT<T>& content,
                        const TensorT<T>& style, const TensorT<T>& identity,
                        const LossWeights<T>& w) {
  auto perceptual = add(content, scalar_mul(style, w.style_inner));
  auto loss = add(g_adv, add(scalar_mul(g_cls1, w.cls1), scalar_mul(g_cls2, w.cls2)));
  loss = add(loss, scalar_mul(identity, w.identity));
  return add(loss, scalar_mul(perceptual, w.vgg));
}

#define UMIT_INSTANTIATE_LOSSES(T)                                                           \
  template TensorT<T> gradient_penalty<T>(                                                   \
      const std::function<TensorT<T>(const TensorT<T>&)>&, const TensorT<T>&,                \
      const TensorT<T>&, Rng&);                                                              \
  template TensorT<T> d_adversarial_loss<T>(const TensorT<T>&, const TensorT<T>&,            \
                                            const TensorT<T>&, T);                           \
  template TensorT<T> g_adversarial_loss<T>(const TensorT<T>&);                              \
  template TensorT<T> classification_loss<T>(const TensorT<T>&, const std::vector<int>&);    \
  template PerceptualTerms<T> perceptual_loss<T>(const FeatureExtractor<T>&,                 \
                                                 const TensorT<T>&, const TensorT<T>&,       \
                                                 const TensorT<T>&, StyleStat);              \
  template TensorT<T> identity_loss<T>(const GeneratorConfig&, const ParamMap<T>&,           \
                                       const TensorT<T>&, const std::vector<int>&);          \
  template TensorT<T> total_d_loss<T>(const TensorT<T>&, const TensorT<T>&,                  \
                                      const TensorT<T>&, const LossWeights<T>&);             \
  template TensorT<T> total_g_loss<T>(const TensorT<T>&, const TensorT<T>&,                  \
                                      const TensorT<T>&, const TensorT<T>&,                  \
                                      const TensorT<T>&, const TensorT<T>&,                  \
                                      const LossWeights<T>&);

UMIT_INSTANTIATE_LOSSES(float)
UMIT_INSTANTIATE_LOSSES(double)

}  // namespace umit
