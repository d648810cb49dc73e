#include "umit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "umit/data.hpp"
#include "umit/kernels.hpp"
#include "umit/ops.hpp"
#include "umit/png_io.hpp"
#include "umit/rng.hpp"

namespace umit {

namespace {

std::string probe_stage(int j, const char* leaf) {
  return "probe.s" + std::to_string(j) + "." + leaf;
}

Tensor probe_forward(const ParamMap<float>& params, const Tensor& batch) {
  Tensor h = batch;
  for (int j = 1; j <= 3; ++j)
    h = activation(conv2d(h, params.at(probe_stage(j, "w")), params.at(probe_stage(j, "b")),
                          2, 1),
                   Act::Relu);
  return fully_connected(global_avg_pool(h), params.at("probe.fc.w"),
                         params.at("probe.fc.b"));
}

std::vector<std::vector<double>> probe_probs(const Probe& p,
                                             const std::vector<Tensor>& images) {
  std::vector<std::vector<double>> probs;
  probs.reserve(images.size());
  const size_t chunk = 64;
  for (size_t from = 0; from < images.size(); from += chunk) {
    size_t count = std::min(chunk, images.size() - from);
    Tensor logits = probe_logits(p, stack_images(images, from, count));
    const float* row = logits.data();
    const int n = p.domains;
    for (size_t i = 0; i < count; ++i, row += n) {
      double mx = row[0];
      for (int c = 1; c < n; ++c) mx = std::max(mx, double(row[c]));
      std::vector<double> pr(size_t(n), 0.0);
      double z = 0;
      for (int c = 0; c < n; ++c) z += (pr[size_t(c)] = std::exp(double(row[c]) - mx));
      for (auto& v : pr) v /= z;
      probs.push_back(std::move(pr));
    }
  }
  return probs;
}

}  // namespace

ParamMap<float> init_probe_params(int domains, int image_size, uint64_t seed,
                                  const std::vector<int>& widths) {
  (void)image_size;  // the head pools globally, so weights are size-agnostic
  if (domains < 1) throw std::invalid_argument("init_probe_params: domains must be >= 1");
  if (widths.size() != 3) throw std::invalid_argument("init_probe_params: need 3 widths");
  ParamMap<float> p;
  int in_c = 3;
  for (int j = 1; j <= 3; ++j) {
    int out_c = widths[size_t(j - 1)];
    Rng rng = stream(seed, "probe_init", uint64_t(j));
    p[probe_stage(j, "w")] =
        randn<float>(Shape{out_c, in_c, 4, 4}, rng, 0.05f).set_requires_grad(true);
    p[probe_stage(j, "b")] = Tensor::zeros(Shape{out_c}).set_requires_grad(true);
    in_c = out_c;
  }
  Rng rng = stream(seed, "probe_init", 99);
  p["probe.fc.w"] =
      randn<float>(Shape{in_c, domains}, rng, 0.05f).set_requires_grad(true);
  p["probe.fc.b"] = Tensor::zeros(Shape{domains}).set_requires_grad(true);
  return p;
}

Tensor probe_logits(const Probe& p, const Tensor& batch) {
  const Shape& s = batch.shape();
  if (s.rank() != 4 || s[1] != 3 || s[2] != p.image_size || s[3] != p.image_size)
    throw std::invalid_argument("probe_logits: expected [B,3," +
                                std::to_string(p.image_size) + "," +
                                std::to_string(p.image_size) + "], got " + s.str());
  return probe_forward(p.params, batch);
}

Probe train_probe(const std::vector<Tensor>& images, const std::vector<int>& labels,
                  int domains, uint64_t seed) {
  if (images.size() != labels.size() || images.empty())
    throw std::invalid_argument("train_probe: images/labels mismatch");
  std::vector<long long> per_domain(size_t(domains), 0);
  for (int l : labels) {
    if (l < 0 || l >= domains) throw std::out_of_range("train_probe: label out of range");
    ++per_domain[size_t(l)];
  }
  for (long long c : per_domain)
    if (c < 100)
      throw std::invalid_argument("train_probe: need at least 100 images per domain, got " +
                                  std::to_string(c));

  // every 5th index per domain is held out
  std::vector<int> train_idx, held_idx;
  std::vector<int> seen(size_t(domains), 0);
  for (size_t i = 0; i < images.size(); ++i) {
    int k = seen[size_t(labels[i])]++;
    (k % 5 == 4 ? held_idx : train_idx).push_back(int(i));
  }

  Probe probe;
  probe.domains = domains;
  probe.image_size = images[0].shape()[1];
  probe.params = init_probe_params(domains, probe.image_size, seed, probe.widths);

  // plain Adam supervised training, fixed budget
  const int steps = 500, batch = 32;
  const float lr = 1e-3f, b1 = 0.9f, b2 = 0.999f, eps = 1e-8f;
  std::map<std::string, std::pair<std::vector<float>, std::vector<float>>> mv;
  for (int step = 0; step < steps; ++step) {
    Rng rng = stream(seed, "probe_batch", uint64_t(step));
    std::vector<Tensor> chunk;
    std::vector<int> y;
    for (int i = 0; i < batch; ++i) {
      int idx = train_idx[size_t(rng.next_below(int(train_idx.size())))];
      chunk.push_back(images[size_t(idx)]);
      y.push_back(labels[size_t(idx)]);
    }
    TapeScope<float> tape;
    auto loss = softmax_cross_entropy(probe_forward(probe.params,
                                                    stack_images(chunk, 0, chunk.size())),
                                      y);
    backward(loss);
    float b1t = std::pow(b1, float(step + 1)), b2t = std::pow(b2, float(step + 1));
    for (auto& [name, t] : probe.params) {
      if (!t.has_grad()) throw std::logic_error("train_probe: missing gradient for " + name);
      auto& [m, v] = mv[name];
      size_t n = size_t(t.numel());
      if (m.empty()) {
        m.assign(n, 0.f);
        v.assign(n, 0.f);
      }
      kernels<float>::adam(t.data(), t.grad_vec().data(), m.data(), v.data(), int64_t(n), lr,
                           b1, b2, eps, b1t, b2t);
      t.drop_grad();
    }
  }

  std::vector<Tensor> held;
  std::vector<int> held_y;
  for (int i : held_idx) {
    held.push_back(images[size_t(i)]);
    held_y.push_back(labels[size_t(i)]);
  }
  double acc = held.empty() ? 1.0 : classification_accuracy(probe, held, held_y);
  if (acc < 0.95)
    throw std::runtime_error("train_probe: held-out accuracy " + std::to_string(acc) +
                             " below 0.95; domains are not separable enough");
  return probe;
}

double classification_accuracy(const Probe& p, const std::vector<Tensor>& images,
                               const std::vector<int>& target_labels) {
  if (images.empty())
    throw std::invalid_argument("classification_accuracy: empty image set");
  if (images.size() != target_labels.size())
    throw std::invalid_argument("classification_accuracy: images/labels mismatch");
  auto probs = probe_probs(p, images);
  long long hits = 0;
  for (size_t i = 0; i < probs.size(); ++i) {
    int arg = int(std::max_element(probs[i].begin(), probs[i].end()) - probs[i].begin());
    if (arg == target_labels[i]) ++hits;
  }
  return double(hits) / double(images.size());
}

FeatureStats feature_stats(const FeatureExtractor<float>& fe,
                           const std::vector<Tensor>& images) {
  if (images.size() < 2)
    throw std::invalid_argument("feature_stats: need at least 2 images");
  FeatureStats st;
  st.n = (long long)(images.size());
  const size_t chunk = 64;
  std::vector<double> sum, outer;
  for (size_t from = 0; from < images.size(); from += chunk) {
    size_t count = std::min(chunk, images.size() - from);
    auto taps = extract(fe, stack_images(images, from, count));
    Tensor feat = global_avg_pool(taps[2]);  // [count, D]
    const int D = feat.shape()[1];
    if (sum.empty()) {
      st.dim = D;
      sum.assign(size_t(D), 0.0);
      outer.assign(size_t(D) * size_t(D), 0.0);
    }
    const float* row = feat.data();
    for (size_t i = 0; i < count; ++i, row += D) {
      for (int a = 0; a < D; ++a) {
        sum[size_t(a)] += row[a];
        for (int b = a; b < D; ++b) outer[size_t(a) * size_t(D) + size_t(b)] += double(row[a]) * double(row[b]);
      }
    }
  }
  const int D = st.dim;
  st.mu.assign(size_t(D), 0.0);
  st.sigma.assign(size_t(D) * size_t(D), 0.0);
  for (int a = 0; a < D; ++a) st.mu[size_t(a)] = sum[size_t(a)] / double(st.n);
  for (int a = 0; a < D; ++a)
    for (int b = a; b < D; ++b) {
      double cov = outer[size_t(a) * size_t(D) + size_t(b)] / double(st.n) -
                   st.mu[size_t(a)] * st.mu[size_t(b)];
      if (a == b) cov += 1e-6;  // shrinkage: small-n covariances are near-singular
      st.sigma[size_t(a) * size_t(D) + size_t(b)] = cov;
      st.sigma[size_t(b) * size_t(D) + size_t(a)] = cov;
    }
  return st;
}

void sym_eig(const std::vector<double>& a, int n, std::vector<double>& values,
             std::vector<double>& vectors) {
  if (int(a.size()) != n * n) throw std::invalid_argument("sym_eig: size mismatch");
  std::vector<double> A = a;
  vectors.assign(size_t(n) * size_t(n), 0.0);
  for (int i = 0; i < n; ++i) vectors[size_t(i) * size_t(n) + size_t(i)] = 1.0;

  auto at = [&](int r, int c) -> double& { return A[size_t(r) * size_t(n) + size_t(c)]; };
  double scale = 0;
  for (double v : a) scale += v * v;
  const double stop = std::max(scale, 1e-300) * 1e-26;

  for (int sweep = 0; sweep < 128; ++sweep) {
    double off = 0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += at(p, q) * at(p, q);
    if (off <= stop) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        double apq = at(p, q);
        if (std::fabs(apq) < 1e-300) continue;
        double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (int k = 0; k < n; ++k) {
          double akp = at(k, p), akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          double apk = at(p, k), aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          double vkp = vectors[size_t(k) * size_t(n) + size_t(p)];
          double vkq = vectors[size_t(k) * size_t(n) + size_t(q)];
          vectors[size_t(k) * size_t(n) + size_t(p)] = c * vkp - s * vkq;
          vectors[size_t(k) * size_t(n) + size_t(q)] = s * vkp + c * vkq;
        }
      }
  }
  values.assign(size_t(n), 0.0);
  for (int i = 0; i < n; ++i) values[size_t(i)] = at(i, i);
  // vectors are stored with eigenvector j in column j; transpose into rows
  std::vector<double> rows(size_t(n) * size_t(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) rows[size_t(j) * size_t(n) + size_t(i)] = vectors[size_t(i) * size_t(n) + size_t(j)];
  vectors.swap(rows);
}

namespace {

// Q diag(sqrt(max(lambda,0))) Q^T
std::vector<double> sym_sqrt(const std::vector<double>& a, int n) {
  std::vector<double> vals, vecs;
  sym_eig(a, n, vals, vecs);
  std::vector<double> out(size_t(n) * size_t(n), 0.0);
  for (int k = 0; k < n; ++k) {
    double r = std::sqrt(std::max(vals[size_t(k)], 0.0));
    if (r == 0) continue;
    const double* v = vecs.data() + size_t(k) * size_t(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out[size_t(i) * size_t(n) + size_t(j)] += r * v[i] * v[j];
  }
  return out;
}

std::vector<double> mat_mul(const std::vector<double>& a, const std::vector<double>& b,
                            int n) {
  std::vector<double> c(size_t(n) * size_t(n), 0.0);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      double v = a[size_t(i) * size_t(n) + size_t(k)];
      if (v == 0) continue;
      for (int j = 0; j < n; ++j) c[size_t(i) * size_t(n) + size_t(j)] += v * b[size_t(k) * size_t(n) + size_t(j)];
    }
  return c;
}

}  // namespace

double frechet_distance(const FeatureStats& a, const FeatureStats& b) {
  if (a.dim != b.dim || a.dim < 1)
    throw std::invalid_argument("frechet_distance: dimension mismatch");
  const int n = a.dim;
  double d2 = 0;
  for (int i = 0; i < n; ++i) {
    double d = a.mu[size_t(i)] - b.mu[size_t(i)];
    d2 += d * d;
  }
  double tr = 0;
  for (int i = 0; i < n; ++i)
    tr += a.sigma[size_t(i) * size_t(n) + size_t(i)] + b.sigma[size_t(i) * size_t(n) + size_t(i)];

  // tr((Sa Sb)^(1/2)) via the symmetrized product Sa^(1/2) Sb Sa^(1/2)
  auto ra = sym_sqrt(a.sigma, n);
  auto m = mat_mul(mat_mul(ra, b.sigma, n), ra, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double v = 0.5 * (m[size_t(i) * size_t(n) + size_t(j)] + m[size_t(j) * size_t(n) + size_t(i)]);
      m[size_t(i) * size_t(n) + size_t(j)] = m[size_t(j) * size_t(n) + size_t(i)] = v;
    }
  std::vector<double> vals, vecs;
  sym_eig(m, n, vals, vecs);
  double tr_sqrt = 0;
  for (double v : vals) tr_sqrt += std::sqrt(std::max(v, 0.0));

  double out = d2 + tr - 2.0 * tr_sqrt;
  if (!std::isfinite(out)) throw std::runtime_error("frechet_distance: non-finite result");
  return out;
}

double inception_score_from_probs(const std::vector<std::vector<double>>& probs) {
  if (probs.size() < 2)
    throw std::invalid_argument("inception_score: need at least 2 samples");
  const size_t n = probs[0].size();
  std::vector<double> marginal(n, 0.0);
  for (const auto& p : probs) {
    if (p.size() != n) throw std::invalid_argument("inception_score: ragged probabilities");
    for (size_t c = 0; c < n; ++c) marginal[c] += p[c];
  }
  for (auto& v : marginal) v /= double(probs.size());

  double kl_sum = 0;
  for (const auto& p : probs) {
    double kl = 0;
    for (size_t c = 0; c < n; ++c)
      if (p[c] > 0) kl += p[c] * (std::log(p[c]) - std::log(std::max(marginal[c], 1e-300)));
    kl_sum += kl;
  }
  return std::exp(kl_sum / double(probs.size()));
}

double inception_like_score(const Probe& p, const std::vector<Tensor>& images) {
  if (images.size() < 2)
    throw std::invalid_argument("inception_like_score: need at least 2 images");
  return inception_score_from_probs(probe_probs(p, images));
}

void image_grid(const std::vector<Tensor>& images, int cols, const std::string& path) {
  if (images.empty()) throw std::invalid_argument("image_grid: no images");
  if (cols < 1) throw std::invalid_argument("image_grid: cols must be >= 1");
  const Shape& s = images[0].shape();
  if (s.rank() != 3 || s[0] != 3)
    throw std::invalid_argument("image_grid: expected [3,H,W] tiles");
  for (const Tensor& t : images)
    if (t.shape() != s) throw std::invalid_argument("image_grid: mixed sizes");

  const int h = s[1], w = s[2];
  const int rows = int((images.size() + size_t(cols) - 1) / size_t(cols));
  const int gw = cols * w + 2 * (cols + 1);
  const int gh = rows * h + 2 * (rows + 1);
  std::vector<unsigned char> rgb(size_t(gw) * size_t(gh) * 3, 255);
  for (size_t idx = 0; idx < images.size(); ++idx) {
    const int r = int(idx) / cols, c = int(idx) % cols;
    const int oy = 2 + r * (h + 2), ox = 2 + c * (w + 2);
    const float* d = images[idx].data();
    const size_t plane = size_t(h) * size_t(w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        size_t o = (size_t(oy + y) * size_t(gw) + size_t(ox + x)) * 3;
        size_t i = size_t(y) * size_t(w) + size_t(x);
        for (int ch = 0; ch < 3; ++ch) rgb[o + size_t(ch)] = byte_from_unit(d[size_t(ch) * plane + i]);
      }
  }
  save_png_rgb8(path, rgb, gw, gh);
}

}  // namespace umit
