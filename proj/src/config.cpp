#include "umit/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace umit {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw std::invalid_argument("expected a boolean, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw std::invalid_argument("empty entry in list '" + v + "'");
    out.push_back(std::stoi(item));
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& value) {
  using Setter = std::function<void(TrainConfig&, const std::string&)>;
  static const std::map<std::string, Setter> table = {
      {"total_iters", [](TrainConfig& c, const std::string& v) { c.total_iters = std::stoll(v); }},
      {"batch", [](TrainConfig& c, const std::string& v) { c.batch = std::stoi(v); }},
      {"lr", [](TrainConfig& c, const std::string& v) { c.lr = std::stod(v); }},
      {"beta1", [](TrainConfig& c, const std::string& v) { c.beta1 = std::stod(v); }},
      {"beta2", [](TrainConfig& c, const std::string& v) { c.beta2 = std::stod(v); }},
      {"adam_eps", [](TrainConfig& c, const std::string& v) { c.adam_eps = std::stod(v); }},
      {"decay_point", [](TrainConfig& c, const std::string& v) { c.decay_point = std::stoll(v); }},
      {"decay_factor", [](TrainConfig& c, const std::string& v) { c.decay_factor = std::stod(v); }},
      {"d_steps_per_g", [](TrainConfig& c, const std::string& v) { c.d_steps_per_g = std::stoi(v); }},
      {"seed", [](TrainConfig& c, const std::string& v) { c.seed = std::stoull(v); }},
      {"lambda_gp", [](TrainConfig& c, const std::string& v) { c.lambda_gp = std::stod(v); }},
      {"lambda_1", [](TrainConfig& c, const std::string& v) { c.lambda_1 = std::stod(v); }},
      {"lambda_2", [](TrainConfig& c, const std::string& v) { c.lambda_2 = std::stod(v); }},
      {"lambda_identity", [](TrainConfig& c, const std::string& v) { c.lambda_identity = std::stod(v); }},
      {"lambda_vgg", [](TrainConfig& c, const std::string& v) { c.lambda_vgg = std::stod(v); }},
      {"lambda_style_inner", [](TrainConfig& c, const std::string& v) { c.lambda_style_inner = std::stod(v); }},
      {"style_stat", [](TrainConfig& c, const std::string& v) { c.style_stat = v; }},
      {"cls_fake_to_d", [](TrainConfig& c, const std::string& v) { c.cls_fake_to_d = parse_bool(v); }},
      {"identity_on_target", [](TrainConfig& c, const std::string& v) { c.identity_on_target = parse_bool(v); }},
      {"image_size", [](TrainConfig& c, const std::string& v) { c.image_size = std::stoi(v); }},
      {"channels", [](TrainConfig& c, const std::string& v) { c.channels = std::stoi(v); }},
      {"domains", [](TrainConfig& c, const std::string& v) { c.domains = std::stoi(v); }},
      {"base_width_g", [](TrainConfig& c, const std::string& v) { c.base_width_g = std::stoi(v); }},
      {"base_width_d", [](TrainConfig& c, const std::string& v) { c.base_width_d = std::stoi(v); }},
      {"res_stages", [](TrainConfig& c, const std::string& v) { c.res_stages = std::stoi(v); }},
      {"drawer", [](TrainConfig& c, const std::string& v) { c.drawer = parse_bool(v); }},
      {"dilation_count", [](TrainConfig& c, const std::string& v) { c.dilation_count = std::stoi(v); }},
      {"fc_width_mult", [](TrainConfig& c, const std::string& v) { c.fc_width_mult = std::stoi(v); }},
      {"cls_tap1", [](TrainConfig& c, const std::string& v) { c.cls_tap1 = std::stoi(v); }},
      {"cls_tap2", [](TrainConfig& c, const std::string& v) { c.cls_tap2 = std::stoi(v); }},
      {"fe_channels", [](TrainConfig& c, const std::string& v) { c.fe_channels = parse_int_list(v); }},
      {"per_domain", [](TrainConfig& c, const std::string& v) { c.per_domain = std::stoi(v); }},
      {"ckpt_interval", [](TrainConfig& c, const std::string& v) { c.ckpt_interval = std::stoll(v); }},
      {"sample_interval", [](TrainConfig& c, const std::string& v) { c.sample_interval = std::stoll(v); }},
  };
  auto it = table.find(key);
  if (it == table.end()) throw std::invalid_argument("config: unknown key '" + key + "'");
  try {
    it->second(*this, value);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("config: key '" + key + "': " + e.what());
  } catch (const std::out_of_range&) {
    throw std::invalid_argument("config: key '" + key + "': value '" + value + "' out of range");
  }
}

TrainConfig TrainConfig::from_string(const std::string& text) {
  TrainConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  ": expected key=value, got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  ": empty key or value");
    try {
      cfg.set(key, value);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config: line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

TrainConfig TrainConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("config: cannot open " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return from_string(buf.str());
}

void TrainConfig::validate() const {
  if (total_iters < 1) throw std::invalid_argument("config: total_iters must be >= 1");
  if (batch < 2) throw std::invalid_argument("config: batch must be >= 2");
  if (d_steps_per_g < 1) throw std::invalid_argument("config: d_steps_per_g must be >= 1");
  if (effective_decay_point() > total_iters)
    throw std::invalid_argument("config: decay_point exceeds total_iters");
  if (decay_factor <= 0) throw std::invalid_argument("config: decay_factor must be > 0");
  for (double v : {lambda_gp, lambda_1, lambda_2, lambda_identity, lambda_vgg, lambda_style_inner})
    if (v < 0) throw std::invalid_argument("config: loss weights must be >= 0");
  if (style_stat != "gram" && style_stat != "meanstd")
    throw std::invalid_argument("config: style_stat must be gram or meanstd, got '" + style_stat + "'");
  if (fe_channels.size() < 3 || fe_channels.size() > 6)
    throw std::invalid_argument("config: fe_channels needs 3 to 6 entries");
  for (int c : fe_channels)
    if (c < 1) throw std::invalid_argument("config: fe_channels entries must be >= 1");
  if (per_domain < 1) throw std::invalid_argument("config: per_domain must be >= 1");
  if (ckpt_interval < 1 || sample_interval < 1)
    throw std::invalid_argument("config: intervals must be >= 1");
  generator_config().validate();
  discriminator_config().validate();
}

GeneratorConfig TrainConfig::generator_config() const {
  GeneratorConfig g;
  g.image_size = image_size;
  g.channels = channels;
  g.domains = domains;
  g.base_width = base_width_g;
  g.res_stages = res_stages;
  g.drawer = drawer;
  return g;
}

DiscriminatorConfig TrainConfig::discriminator_config() const {
  DiscriminatorConfig d;
  d.image_size = image_size;
  d.channels = channels;
  d.domains = domains;
  d.base_width = base_width_d;
  d.dilation_count = dilation_count;
  d.fc_width_mult = fc_width_mult;
  d.cls_tap1 = cls_tap1;
  d.cls_tap2 = cls_tap2;
  return d;
}

LossWeights<float> TrainConfig::loss_weights() const {
  LossWeights<float> w;
  w.gp = float(lambda_gp);
  w.cls1 = float(lambda_1);
  w.cls2 = float(lambda_2);
  w.identity = float(lambda_identity);
  w.vgg = float(lambda_vgg);
  w.style_inner = float(lambda_style_inner);
  return w;
}

StyleStat TrainConfig::style() const {
  return style_stat == "gram" ? StyleStat::Gram : StyleStat::MeanStd;
}

}  // namespace umit
