#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "umit/features.hpp"
#include "umit/params.hpp"

namespace umit {

struct FeatureStats {
  std::vector<double> mu;     // length dim
  std::vector<double> sigma;  // dim*dim row-major, symmetric
  int dim = 0;
  long long n = 0;
};

// Small supervised conv classifier (3 stride-2 blocks + FC over pooled
// features), trained on real images and frozen; the independent judge of
// domain membership for every metric here.
struct Probe {
  ParamMap<float> params;
  int domains = 0;
  int image_size = 0;
  std::vector<int> widths = {16, 32, 64};
};

ParamMap<float> init_probe_params(int domains, int image_size, uint64_t seed,
                                  const std::vector<int>& widths = {16, 32, 64});

// Trains on a deterministic 80/20 split; throws if held-out accuracy < 0.95
// (the dataset is not separable enough for downstream metrics to mean much).
Probe train_probe(const std::vector<Tensor>& images, const std::vector<int>& labels,
                  int domains, uint64_t seed);

Tensor probe_logits(const Probe& p, const Tensor& batch);  // [B,N]
double classification_accuracy(const Probe& p, const std::vector<Tensor>& images,
                               const std::vector<int>& target_labels);

// features = global-average-pooled deepest extractor tap; population
// covariance with +1e-6 diagonal shrinkage
FeatureStats feature_stats(const FeatureExtractor<float>& fe,
                           const std::vector<Tensor>& images);
double frechet_distance(const FeatureStats& a, const FeatureStats& b);

double inception_like_score(const Probe& p, const std::vector<Tensor>& images);
// probs[i] is one image's posterior over domains; exposed so the closed-form
// oracle cases run without a trained probe
double inception_score_from_probs(const std::vector<std::vector<double>>& probs);

// row-major tiling with 2-pixel white gutters (border included)
void image_grid(const std::vector<Tensor>& images, int cols, const std::string& path);

// cyclic Jacobi eigensolver for dense symmetric matrices; a is row-major
// n*n and is not modified. vectors[j*n+i] = component i of eigenvector j.
void sym_eig(const std::vector<double>& a, int n, std::vector<double>& values,
             std::vector<double>& vectors);

}  // namespace umit
