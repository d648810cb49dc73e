#pragma once

#include <functional>
#include <vector>

#include "umit/features.hpp"
#include "umit/model.hpp"
#include "umit/rng.hpp"

namespace umit {

enum class StyleStat { Gram, MeanStd };

template <typename T>
struct LossWeights {
  T gp = T(10);
  T cls1 = T(1);
  T cls2 = T(0.5);
  T identity = T(10);
  T vgg = T(0.5);
  T style_inner = T(1);
};

template <typename T>
struct LossReport {
  T d_adv = 0, gp = 0, d_cls1 = 0, d_cls2 = 0, d_total = 0;
  T g_adv = 0, g_cls1 = 0, g_cls2 = 0, content = 0, style = 0, identity = 0, g_total = 0;
};

// mean over samples of (||d critic(xhat)/d xhat||_2 - 1)^2 with xhat the
// per-sample convex mix t*real + (1-t)*fake, t ~ U(0,1). The result stays on
// the live tape and is differentiable w.r.t. the critic's parameters.
template <typename T>
TensorT<T> gradient_penalty(const std::function<TensorT<T>(const TensorT<T>&)>& critic,
                            const TensorT<T>& real, const TensorT<T>& fake, Rng& rng);

// mean(fake) - mean(real) + lambda_gp * gp  (minimized critic objective)
template <typename T>
TensorT<T> d_adversarial_loss(const TensorT<T>& real_scores, const TensorT<T>& fake_scores,
                              const TensorT<T>& gp, T lambda_gp);
template <typename T>
TensorT<T> g_adversarial_loss(const TensorT<T>& fake_scores);

template <typename T>
TensorT<T> classification_loss(const TensorT<T>& logits, const std::vector<int>& labels);

template <typename T>
struct PerceptualTerms {
  TensorT<T> content;  // distance between deepest-tap features, / element count
  TensorT<T> style;    // summed tap statistic distances (gram or mean/std)
};

// Gradients flow only into x_t; the two reference images enter detached.
template <typename T>
PerceptualTerms<T> perceptual_loss(const FeatureExtractor<T>& fe, const TensorT<T>& x_t,
                                   const TensorT<T>& x_content, const TensorT<T>& x_style,
                                   StyleStat stat = StyleStat::Gram);

// mean L1 between x and its own-domain reconstruction through the generator
template <typename T>
TensorT<T> identity_loss(const GeneratorConfig& cfg, const ParamMap<T>& gparams,
                         const TensorT<T>& x, const std::vector<int>& labels_self);

template <typename T>
TensorT<T> total_d_loss(const TensorT<T>& d_adv_with_gp, const TensorT<T>& d_cls1,
                        const TensorT<T>& d_cls2, const LossWeights<T>& w);
template <typename T>
TensorT<T> total_g_loss(const TensorT<T>& g_adv, const TensorT<T>& g_cls1,
                        const TensorT<T>& g_cls2, const TensorT<T>& content,
                        const TensorT<T>& style, const TensorT<T>& identity,
                        const LossWeights<T>& w);

}  // namespace umit
