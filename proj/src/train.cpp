#include "umit/train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "umit/checkpoint.hpp"
#include "umit/eval.hpp"
#include "umit/kernels.hpp"
#include "umit/ops.hpp"
#include "umit/rng.hpp"

namespace umit {

void adam_step(ParamMap<float>& params, AdamState& st, float lr, float b1, float b2,
               float eps) {
  ++st.t;
  const float b1t = std::pow(b1, float(st.t));
  const float b2t = std::pow(b2, float(st.t));
  for (auto& [name, p] : params) {
    if (!p.has_grad()) throw std::logic_error("adam_step: missing gradient for " + name);
    auto& m = st.m[name];
    auto& v = st.v[name];
    const size_t n = size_t(p.numel());
    if (m.empty()) {
      m.assign(n, 0.f);
      v.assign(n, 0.f);
    }
    if (m.size() != n || v.size() != n)
      throw std::logic_error("adam_step: moment size mismatch for " + name);
    kernels<float>::adam(p.data(), p.grad_vec().data(), m.data(), v.data(), int64_t(n), lr,
                         b1, b2, eps, b1t, b2t);
  }
}

void zero_grads(ParamMap<float>& params) {
  for (auto& [name, p] : params) p.drop_grad();
}

float lr_schedule(const TrainConfig& cfg, long long iter) {
  double lr = cfg.lr;
  if (iter >= cfg.effective_decay_point()) lr /= cfg.decay_factor;
  return float(lr);
}

Models init_models(const TrainConfig& cfg) {
  Models m;
  m.gcfg = cfg.generator_config();
  m.dcfg = cfg.discriminator_config();
  m.g = init_generator_params<float>(m.gcfg, cfg.seed);
  m.d = init_discriminator_params<float>(m.dcfg, cfg.seed);
  m.fe = build_extractor<float>(cfg.seed, cfg.fe_channels);
  return m;
}

namespace {

void check_finite(const char* term, float v, long long iter) {
  if (!std::isfinite(v))
    throw std::runtime_error("train: non-finite " + std::string(term) + " at iteration " +
                             std::to_string(iter));
}

}  // namespace

LossReport<float> train_step(Models& m, AdamState& opt_g, AdamState& opt_d,
                             const Dataset& ds, const TrainConfig& cfg, long long iter) {
  LossReport<float> rep;
  const float lr = lr_schedule(cfg, iter);
  const LossWeights<float> w = cfg.loss_weights();
  const float b1 = float(cfg.beta1), b2 = float(cfg.beta2), eps = float(cfg.adam_eps);

  // critic updates
  for (int k = 0; k < cfg.d_steps_per_g; ++k) {
    Batch b = make_batch(ds, cfg.batch, stream_key(cfg.seed, "batch", uint64_t(iter),
                                                   uint64_t(k)));
    Rng perm_rng = stream(cfg.seed, "perm", uint64_t(iter), uint64_t(k));
    std::vector<int> perm = random_permutation(int(b.src.size()), perm_rng);
    std::vector<int> tgt(b.src.size());
    for (size_t i = 0; i < b.src.size(); ++i) tgt[i] = b.src[size_t(perm[i])];

    TapeScope<float> tape;
    Tensor fake;
    {
      NoRecordScope<float> nr;
      fake = translate_batch(m.gcfg, m.g, b.images, b.src, tgt);
    }
    DiscOut<float> real_out = discriminator_forward(m.dcfg, m.d, b.images);
    DiscOut<float> fake_out = discriminator_forward(m.dcfg, m.d, fake);

    Rng gp_rng = stream(cfg.seed, "gp", uint64_t(iter), uint64_t(k));
    auto critic = [&](const Tensor& x) { return discriminator_forward(m.dcfg, m.d, x).adv; };
    Tensor gp = gradient_penalty<float>(critic, b.images, fake, gp_rng);

    Tensor d_adv = sub(mean(fake_out.adv), mean(real_out.adv));
    Tensor d_adv_gp = d_adversarial_loss(real_out.adv, fake_out.adv, gp, w.gp);
    Tensor d_cls1 = classification_loss(real_out.cls1, b.src);
    Tensor d_cls2 = classification_loss(real_out.cls2, b.src);
    if (cfg.cls_fake_to_d) {
      d_cls1 = add(d_cls1, classification_loss(fake_out.cls1, tgt));
      d_cls2 = add(d_cls2, classification_loss(fake_out.cls2, tgt));
    }
    Tensor d_total = total_d_loss(d_adv_gp, d_cls1, d_cls2, w);

    rep.d_adv = d_adv.item();
    rep.gp = gp.item();
    rep.d_cls1 = d_cls1.item();
    rep.d_cls2 = d_cls2.item();
    rep.d_total = d_total.item();
    check_finite("d_adv", rep.d_adv, iter);
    check_finite("gp", rep.gp, iter);
    check_finite("d_cls1", rep.d_cls1, iter);
    check_finite("d_cls2", rep.d_cls2, iter);
    check_finite("d_total", rep.d_total, iter);

    backward(d_total);
    adam_step(m.d, opt_d, lr, b1, b2, eps);
    zero_grads(m.d);
    zero_grads(m.g);
  }

  // generator update on the first critic batch, fakes regenerated
  Batch b = make_batch(ds, cfg.batch, stream_key(cfg.seed, "batch", uint64_t(iter), 0));
  Rng perm_rng = stream(cfg.seed, "perm", uint64_t(iter), 0);
  std::vector<int> perm = random_permutation(int(b.src.size()), perm_rng);
  std::vector<int> tgt(b.src.size());
  for (size_t i = 0; i < b.src.size(); ++i) tgt[i] = b.src[size_t(perm[i])];

  {
    TapeScope<float> tape;
    Tensor x_t = translate_batch(m.gcfg, m.g, b.images, b.src, tgt);
    DiscOut<float> fake_out = discriminator_forward(m.dcfg, m.d, x_t);

    Tensor g_adv = g_adversarial_loss(fake_out.adv);
    Tensor g_cls1 = classification_loss(fake_out.cls1, tgt);
    Tensor g_cls2 = classification_loss(fake_out.cls2, tgt);
    // style references come from the same rows the targets were drawn from,
    // so each reference really is a target-domain image
    Tensor x_style = gather_rows(b.images, perm);
    PerceptualTerms<float> pt = perceptual_loss(m.fe, x_t, b.images, x_style, cfg.style());
    Tensor identity = cfg.identity_on_target
                          ? reduce(sub(x_t, b.images), Reduce::L1Mean)
                          : identity_loss(m.gcfg, m.g, b.images, b.src);
    Tensor g_total = total_g_loss(g_adv, g_cls1, g_cls2, pt.content, pt.style, identity, w);

    rep.g_adv = g_adv.item();
    rep.g_cls1 = g_cls1.item();
    rep.g_cls2 = g_cls2.item();
    rep.content = pt.content.item();
    rep.style = pt.style.item();
    rep.identity = identity.item();
    rep.g_total = g_total.item();
    check_finite("g_adv", rep.g_adv, iter);
    check_finite("g_cls1", rep.g_cls1, iter);
    check_finite("g_cls2", rep.g_cls2, iter);
    check_finite("content", rep.content, iter);
    check_finite("style", rep.style, iter);
    check_finite("identity", rep.identity, iter);
    check_finite("g_total", rep.g_total, iter);

    backward(g_total);
    adam_step(m.g, opt_g, lr, b1, b2, eps);
    zero_grads(m.g);
    zero_grads(m.d);
  }
  return rep;
}

namespace {

Tensor meta_scalar(float v) { return Tensor::from(Shape{1}, {v}); }

void append_moments(std::vector<std::pair<std::string, Tensor>>& out,
                    const std::string& prefix, const AdamState& st) {
  for (const auto& [name, m] : st.m)
    out.emplace_back(prefix + ".m." + name, Tensor::from(Shape{int(m.size())}, m));
  for (const auto& [name, v] : st.v)
    out.emplace_back(prefix + ".v." + name, Tensor::from(Shape{int(v.size())}, v));
}

// overwrite values of an initialized map from the checkpoint, keeping the
// requires_grad markings of the fresh tensors
void fill_params(ParamMap<float>& params, const Checkpoint& ck) {
  for (auto& [name, p] : params) {
    const Tensor* t = ck.find(name);
    if (!t) throw std::runtime_error("checkpoint: missing tensor " + name);
    if (t->shape() != p.shape())
      throw std::runtime_error("checkpoint: shape mismatch for " + name + ": " +
                               t->shape().str() + " vs " + p.shape().str());
    std::copy(t->data(), t->data() + t->numel(), p.data());
  }
}

void fill_moments(AdamState& st, const std::string& prefix, const ParamMap<float>& params,
                  const Checkpoint& ck) {
  for (const auto& [name, p] : params) {
    const Tensor* m = ck.find(prefix + ".m." + name);
    const Tensor* v = ck.find(prefix + ".v." + name);
    if (!m || !v) throw std::runtime_error("checkpoint: missing moments for " + name);
    if (m->numel() != p.numel() || v->numel() != p.numel())
      throw std::runtime_error("checkpoint: moment size mismatch for " + name);
    st.m[name] = m->vec();
    st.v[name] = v->vec();
  }
}

}  // namespace

void write_train_checkpoint(const std::string& path, const Models& m,
                            const AdamState& opt_g, const AdamState& opt_d,
                            long long next_iter, const TrainConfig& cfg) {
  std::vector<std::pair<std::string, Tensor>> out;
  for (const auto& [name, t] : m.g) out.emplace_back(name, t);
  for (const auto& [name, t] : m.d) out.emplace_back(name, t);
  for (const auto& [name, t] : m.fe.params) out.emplace_back(name, t);
  append_moments(out, "opt.g", opt_g);
  append_moments(out, "opt.d", opt_d);

  out.emplace_back("meta.image_size", meta_scalar(float(cfg.image_size)));
  out.emplace_back("meta.channels", meta_scalar(float(cfg.channels)));
  out.emplace_back("meta.domains", meta_scalar(float(cfg.domains)));
  out.emplace_back("meta.base_width_g", meta_scalar(float(cfg.base_width_g)));
  out.emplace_back("meta.base_width_d", meta_scalar(float(cfg.base_width_d)));
  out.emplace_back("meta.res_stages", meta_scalar(float(cfg.res_stages)));
  out.emplace_back("meta.drawer", meta_scalar(cfg.drawer ? 1.f : 0.f));
  out.emplace_back("meta.dilation_count", meta_scalar(float(cfg.dilation_count)));
  out.emplace_back("meta.fc_width_mult", meta_scalar(float(cfg.fc_width_mult)));
  out.emplace_back("meta.cls_tap1", meta_scalar(float(cfg.cls_tap1)));
  out.emplace_back("meta.cls_tap2", meta_scalar(float(cfg.cls_tap2)));
  out.emplace_back("meta.adam_t_g", meta_scalar(float(opt_g.t)));
  out.emplace_back("meta.adam_t_d", meta_scalar(float(opt_d.t)));
  std::vector<float> fc(m.fe.channels.begin(), m.fe.channels.end());
  out.emplace_back("meta.fe_channels", Tensor::from(Shape{int(fc.size())}, fc));

  save_checkpoint(path, uint64_t(next_iter), out);
}

LoadedTrain load_train_checkpoint(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  TrainConfig cfg;
  cfg.image_size = int(ck.meta("meta.image_size"));
  cfg.channels = int(ck.meta("meta.channels"));
  cfg.domains = int(ck.meta("meta.domains"));
  cfg.base_width_g = int(ck.meta("meta.base_width_g"));
  cfg.base_width_d = int(ck.meta("meta.base_width_d"));
  cfg.res_stages = int(ck.meta("meta.res_stages"));
  cfg.drawer = ck.meta("meta.drawer") != 0.f;
  cfg.dilation_count = int(ck.meta("meta.dilation_count"));
  cfg.fc_width_mult = int(ck.meta("meta.fc_width_mult"));
  cfg.cls_tap1 = int(ck.meta("meta.cls_tap1"));
  cfg.cls_tap2 = int(ck.meta("meta.cls_tap2"));
  const Tensor* fc = ck.find("meta.fe_channels");
  if (!fc) throw std::runtime_error("checkpoint: missing tensor meta.fe_channels");
  cfg.fe_channels.assign(fc->numel(), 0);
  for (int i = 0; i < fc->numel(); ++i) cfg.fe_channels[size_t(i)] = int(fc->data()[i]);

  LoadedTrain lt;
  lt.models = init_models(cfg);
  fill_params(lt.models.g, ck);
  fill_params(lt.models.d, ck);
  fill_params(lt.models.fe.params, ck);
  fill_moments(lt.opt_g, "opt.g", lt.models.g, ck);
  fill_moments(lt.opt_d, "opt.d", lt.models.d, ck);
  lt.opt_g.t = (long long)(ck.meta("meta.adam_t_g"));
  lt.opt_d.t = (long long)(ck.meta("meta.adam_t_d"));
  lt.next_iter = (long long)(ck.iter);
  return lt;
}

std::string format_log_line(long long iter, const LossReport<float>& rep, float lr) {
  char buf[512];
  int n = std::snprintf(
      buf, sizeof buf,
      "%lld\t%.7g\t%.7g\t%.7g\t%.7g\t%.7g\t%.7g\t%.7g\t%.7g\t%.7g\t%.7g\t%.7g\t%.7g",
      iter, double(rep.d_adv), double(rep.gp), double(rep.d_cls1), double(rep.d_cls2),
      double(rep.g_adv), double(rep.g_cls1), double(rep.g_cls2), double(rep.content),
      double(rep.style), double(rep.identity), double(rep.g_total), double(lr));
  return std::string(buf, size_t(n));
}

namespace {

void check_meta_matches(const TrainConfig& want, const Models& got) {
  GeneratorConfig g = want.generator_config();
  DiscriminatorConfig d = want.discriminator_config();
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("resume: checkpoint does not match config (" + what + ")");
  };
  if (g.image_size != got.gcfg.image_size) fail("image_size");
  if (g.channels != got.gcfg.channels) fail("channels");
  if (g.domains != got.gcfg.domains) fail("domains");
  if (g.base_width != got.gcfg.base_width) fail("base_width_g");
  if (g.res_stages != got.gcfg.res_stages) fail("res_stages");
  if (g.drawer != got.gcfg.drawer) fail("drawer");
  if (d.base_width != got.dcfg.base_width) fail("base_width_d");
  if (d.dilation_count != got.dcfg.dilation_count) fail("dilation_count");
  if (d.fc_width_mult != got.dcfg.fc_width_mult) fail("fc_width_mult");
  if (d.cls_tap1 != got.dcfg.cls_tap1) fail("cls_tap1");
  if (d.cls_tap2 != got.dcfg.cls_tap2) fail("cls_tap2");
  std::vector<int> fe = want.fe_channels;
  while (fe.size() < got.fe.channels.size()) fe.push_back(fe.back());
  if (fe != got.fe.channels) fail("fe_channels");
}

void emit_samples(const std::string& out_dir, const Models& m, const Dataset& ds,
                  long long iter) {
  NoRecordScope<float> nr;
  const int n = ds.domains();
  const int hw = ds.image_size;
  std::vector<Tensor> tiles;
  for (int s = 0; s < n; ++s) {
    Tensor x = stack_images(ds.images, size_t(s) * size_t(ds.per_domain), 1);
    for (int t = 0; t < n; ++t) {
      Tensor y = translate_batch(m.gcfg, m.g, x, {s}, {t});
      tiles.push_back(Tensor::from(Shape{3, hw, hw}, y.vec()));
    }
  }
  image_grid(tiles, n, out_dir + "/samples-" + std::to_string(iter) + ".png");
}

}  // namespace

void train(const TrainConfig& cfg, const std::string& out_dir,
           const std::string& resume_ckpt, std::ostream* progress) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  Dataset ds(domain_specs(cfg.domains), cfg.per_domain, cfg.image_size, cfg.seed);

  Models m;
  AdamState opt_g, opt_d;
  long long start = 0;
  if (!resume_ckpt.empty()) {
    LoadedTrain lt = load_train_checkpoint(resume_ckpt);
    check_meta_matches(cfg, lt.models);
    m = std::move(lt.models);
    opt_g = std::move(lt.opt_g);
    opt_d = std::move(lt.opt_d);
    start = lt.next_iter;
  } else {
    m = init_models(cfg);
  }

  std::ofstream log(out_dir + "/train.log",
                    start > 0 ? (std::ios::out | std::ios::app)
                              : (std::ios::out | std::ios::trunc));
  if (!log) throw std::runtime_error("train: cannot write " + out_dir + "/train.log");

  for (long long iter = start; iter < cfg.total_iters; ++iter) {
    LossReport<float> rep = train_step(m, opt_g, opt_d, ds, cfg, iter);
    log << format_log_line(iter, rep, lr_schedule(cfg, iter)) << "\n";
    log.flush();
    if (progress && (iter % 100 == 0 || iter + 1 == cfg.total_iters))
      (*progress) << "iter " << iter + 1 << "/" << cfg.total_iters << " d_total "
                  << rep.d_total << " g_total " << rep.g_total << "\n";

    const long long done = iter + 1;
    if (cfg.ckpt_interval > 0 && done % cfg.ckpt_interval == 0 && done < cfg.total_iters) {
      char name[64];
      std::snprintf(name, sizeof name, "/checkpoint-%06lld.ckpt", done);
      write_train_checkpoint(out_dir + name, m, opt_g, opt_d, done, cfg);
    }
    if (cfg.sample_interval > 0 && (done % cfg.sample_interval == 0 || done == cfg.total_iters))
      emit_samples(out_dir, m, ds, done);
  }
  write_train_checkpoint(out_dir + "/checkpoint-final.ckpt", m, opt_g, opt_d,
                         cfg.total_iters, cfg);
}

}  // namespace umit
