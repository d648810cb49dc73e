#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "umit/config.hpp"
#include "umit/data.hpp"
#include "umit/eval.hpp"
#include "umit/gradcheck_suite.hpp"
#include "umit/model.hpp"
#include "umit/params.hpp"
#include "umit/png_io.hpp"
#include "umit/train.hpp"

namespace {

using namespace umit;

void run_gen_data(const std::string& out, int domains, int per_domain, int size,
                  uint64_t seed) {
  Dataset ds(domain_specs(domains), per_domain, size, seed);
  write_dataset_dir(ds, out);
  std::cerr << "wrote " << ds.images.size() << " images to " << out << "\n";
}

void run_train(const std::string& config, const std::string& out,
               const std::string& resume) {
  TrainConfig cfg = TrainConfig::from_file(config);
  train(cfg, out, resume, &std::cerr);
}

void run_translate(const std::string& ckpt, const std::string& in, int src, int tgt,
                   const std::string& out) {
  LoadedTrain lt = load_train_checkpoint(ckpt);
  const int n = lt.models.gcfg.domains;
  if (src < 0 || src >= n)
    throw std::out_of_range("translate: src " + std::to_string(src) +
                            " outside [0," + std::to_string(n) + ")");
  if (tgt < 0 || tgt >= n)
    throw std::out_of_range("translate: tgt " + std::to_string(tgt) +
                            " outside [0," + std::to_string(n) + ")");
  Tensor img = load_png(in);
  const int hw = lt.models.gcfg.image_size;
  if (img.shape()[1] != hw || img.shape()[2] != hw)
    throw std::invalid_argument("translate: image is " + img.shape().str() +
                                " but the model expects " + std::to_string(hw) + "x" +
                                std::to_string(hw));
  NoRecordScope<float> nr;
  Tensor batch = stack_images({img}, 0, 1);
  Tensor y = translate_batch(lt.models.gcfg, lt.models.g, batch, {src}, {tgt});
  save_png(out, Tensor::from(Shape{3, hw, hw}, y.vec()));
}

std::vector<Tensor> translate_chunked(const Models& m, const std::vector<Tensor>& xs,
                                      int src, int tgt) {
  NoRecordScope<float> nr;
  std::vector<Tensor> out;
  const size_t chunk = 32;
  const int hw = m.gcfg.image_size;
  for (size_t from = 0; from < xs.size(); from += chunk) {
    const size_t count = std::min(chunk, xs.size() - from);
    Tensor batch = stack_images(xs, from, count);
    std::vector<int> s(count, src), t(count, tgt);
    Tensor y = translate_batch(m.gcfg, m.g, batch, s, t);
    const float* d = y.data();
    const size_t per = size_t(3) * size_t(hw) * size_t(hw);
    for (size_t i = 0; i < count; ++i) {
      std::vector<float> v(d + i * per, d + (i + 1) * per);
      out.push_back(Tensor::from(Shape{3, hw, hw}, std::move(v)));
    }
  }
  return out;
}

void run_eval(const std::string& ckpt, const std::string& data, int n, uint64_t seed) {
  if (n < 2) throw std::invalid_argument("eval: --n must be >= 2");
  DiskDataset dd = load_dataset_dir(data);
  std::vector<std::vector<Tensor>> by_dom(size_t(dd.domains));
  for (size_t i = 0; i < dd.images.size(); ++i)
    by_dom[size_t(dd.labels[i])].push_back(dd.images[i]);
  for (int d = 0; d < dd.domains; ++d)
    if (int(by_dom[size_t(d)].size()) < n)
      throw std::invalid_argument("eval: domain " + std::to_string(d) + " has " +
                                  std::to_string(by_dom[size_t(d)].size()) +
                                  " images, need " + std::to_string(n));

  Probe probe = train_probe(dd.images, dd.labels, dd.domains, seed);
  std::cerr << "probe trained on " << dd.images.size() << " images\n";

  double ca = 0, fid = 0, is = 0;
  if (ckpt.empty()) {
    // no model: score the real data itself; fid becomes the inter-domain baseline
    FeatureExtractor<float> fe = build_extractor<float>(seed, {16, 32, 64});
    std::vector<Tensor> pool;
    std::vector<int> pool_lab;
    double fid_sum = 0;
    int pairs = 0;
    std::vector<FeatureStats> per_dom_all(size_t(dd.domains));
    for (int d = 0; d < dd.domains; ++d)
      per_dom_all[size_t(d)] = feature_stats(fe, by_dom[size_t(d)]);
    for (int s = 0; s < dd.domains; ++s) {
      std::vector<Tensor> head(by_dom[size_t(s)].begin(), by_dom[size_t(s)].begin() + n);
      for (const Tensor& t : head) pool.push_back(t);
      pool_lab.insert(pool_lab.end(), size_t(n), s);
      FeatureStats st = feature_stats(fe, head);
      for (int t = 0; t < dd.domains; ++t) {
        if (t == s) continue;
        fid_sum += frechet_distance(st, per_dom_all[size_t(t)]);
        ++pairs;
      }
    }
    ca = classification_accuracy(probe, pool, pool_lab);
    fid = pairs > 0 ? fid_sum / pairs : 0.0;
    is = inception_like_score(probe, pool);
  } else {
    LoadedTrain lt = load_train_checkpoint(ckpt);
    if (lt.models.gcfg.domains != dd.domains)
      throw std::invalid_argument("eval: checkpoint expects " +
                                  std::to_string(lt.models.gcfg.domains) +
                                  " domains, data has " + std::to_string(dd.domains));
    if (lt.models.gcfg.image_size != dd.image_size)
      throw std::invalid_argument("eval: checkpoint image size " +
                                  std::to_string(lt.models.gcfg.image_size) +
                                  " does not match data " + std::to_string(dd.image_size));
    std::vector<FeatureStats> real_stats(size_t(dd.domains));
    for (int d = 0; d < dd.domains; ++d)
      real_stats[size_t(d)] = feature_stats(lt.models.fe, by_dom[size_t(d)]);

    std::vector<Tensor> pool;
    std::vector<int> pool_tgt;
    double fid_sum = 0;
    int pairs = 0;
    for (int s = 0; s < dd.domains; ++s)
      for (int t = 0; t < dd.domains; ++t) {
        if (t == s) continue;
        std::vector<Tensor> xs(by_dom[size_t(s)].begin(), by_dom[size_t(s)].begin() + n);
        std::vector<Tensor> ys = translate_chunked(lt.models, xs, s, t);
        fid_sum += frechet_distance(feature_stats(lt.models.fe, ys), real_stats[size_t(t)]);
        ++pairs;
        for (Tensor& y : ys) pool.push_back(std::move(y));
        pool_tgt.insert(pool_tgt.end(), size_t(n), t);
      }
    ca = classification_accuracy(probe, pool, pool_tgt);
    fid = pairs > 0 ? fid_sum / pairs : 0.0;
    is = inception_like_score(probe, pool);
  }

  nlohmann::json j;
  j["ca"] = ca;
  j["fid"] = fid;
  j["is"] = is;
  j["n"] = n;
  j["seed"] = seed;
  std::cout << j.dump() << "\n";
}

int run_gradcheck(uint64_t seed, const std::string& op, bool inject_fault) {
  auto rows = run_gradchecks(seed, inject_fault ? 0.02 : 0.0, op);
  if (rows.empty()) {
    std::cerr << "gradcheck: no check matches '" << op << "'\n";
    return 1;
  }
  int fails = 0;
  for (const auto& r : rows) {
    std::printf("%-28s  %11.3e  tol %7.0e  %s\n", r.name.c_str(), r.err, r.tol,
                r.pass ? "pass" : "FAIL");
    fails += !r.pass;
  }
  std::printf("%zu checks, %d failures\n", rows.size(), fails);
  return fails == 0 ? 0 : 2;
}

void print_counts(const char* title, const ParamCount& pc) {
  std::printf("%s\n", title);
  for (const auto& [name, count] : pc.breakdown)
    std::printf("  %-24s %10zu\n", name.c_str(), count);
  std::printf("  %-24s %10zu\n", "total", pc.total);
}

void run_describe(const std::string& config) {
  TrainConfig cfg = TrainConfig::from_file(config);
  cfg.validate();
  Models m = init_models(cfg);
  ParamMap<float> probe = init_probe_params(cfg.domains, cfg.image_size, cfg.seed);
  auto g = count_parameters(m.g), d = count_parameters(m.d),
       fe = count_parameters(m.fe.params), pr = count_parameters(probe);
  print_counts("generator", g);
  print_counts("discriminator", d);
  print_counts("feature extractor", fe);
  print_counts("probe", pr);
  std::printf("grand total %zu\n", g.total + d.total + fe.total + pr.total);
  std::printf("generator depth %d, discriminator receptive field %d\n",
              m.gcfg.depth(), discriminator_receptive_field(m.dcfg));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-domain image translation with a drawer-routed generator"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "render a synthetic multi-domain dataset");
  std::string gen_out;
  int gen_domains = 3, gen_per = 200, gen_size = 32;
  uint64_t gen_seed = 17;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--domains", gen_domains, "number of domains (1..9)");
  gen->add_option("--per-domain", gen_per, "images per domain");
  gen->add_option("--size", gen_size, "image side length");
  gen->add_option("--seed", gen_seed, "rng seed");

  auto* tr = app.add_subcommand("train", "train the translation model");
  std::string tr_config, tr_out, tr_resume;
  tr->add_option("--config", tr_config, "key=value config file")->required();
  tr->add_option("--out", tr_out, "run directory")->required();
  tr->add_option("--resume", tr_resume, "checkpoint to continue from");

  auto* tl = app.add_subcommand("translate", "translate one image between domains");
  std::string tl_ckpt, tl_in, tl_out;
  int tl_src = 0, tl_tgt = 0;
  tl->add_option("--ckpt", tl_ckpt, "training checkpoint")->required();
  tl->add_option("--in", tl_in, "input PNG")->required();
  tl->add_option("--src", tl_src, "source domain index")->required();
  tl->add_option("--tgt", tl_tgt, "target domain index")->required();
  tl->add_option("--out", tl_out, "output PNG")->required();

  auto* ev = app.add_subcommand("eval", "metrics over translated domain pairs");
  std::string ev_ckpt, ev_data;
  int ev_n = 32;
  uint64_t ev_seed = 17;
  ev->add_option("--ckpt", ev_ckpt, "training checkpoint (omit to score real data)");
  ev->add_option("--data", ev_data, "dataset directory")->required();
  ev->add_option("--n", ev_n, "images per ordered domain pair");
  ev->add_option("--seed", ev_seed, "probe seed");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference operator verification");
  uint64_t gc_seed = 17;
  std::string gc_op;
  bool gc_fault = false;
  gc->add_option("--seed", gc_seed, "rng seed");
  gc->add_option("--op", gc_op, "restrict to checks whose name contains this");
  gc->add_flag("--inject-fault", gc_fault, "corrupt one adjoint per check (self-test)");

  auto* de = app.add_subcommand("describe", "parameter counts for a config");
  std::string de_config;
  de->add_option("--config", de_config, "key=value config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (gen->parsed()) run_gen_data(gen_out, gen_domains, gen_per, gen_size, gen_seed);
    if (tr->parsed()) run_train(tr_config, tr_out, tr_resume);
    if (tl->parsed()) run_translate(tl_ckpt, tl_in, tl_src, tl_tgt, tl_out);
    if (ev->parsed()) run_eval(ev_ckpt, ev_data, ev_n, ev_seed);
    if (gc->parsed()) return run_gradcheck(gc_seed, gc_op, gc_fault);
    if (de->parsed()) run_describe(de_config);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
