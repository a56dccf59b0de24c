#include "pdm/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "pdm/error.hpp"

namespace pdm {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

// Registry of every accepted key with its default value.
const std::map<std::string, std::string>& RunConfig::registry() {
  static const std::map<std::string, std::string> keys = {
      // forward-chain schedule
      {"schedule.kind", "cosine"},
      {"schedule.T", "1000"},
      {"schedule.beta_start", "0.0001"},
      {"schedule.beta_end", "0.02"},
      {"schedule.cosine_s", "0.008"},
      // denoiser architecture
      {"model.hidden_widths", "128,128"},
      {"model.time_embed_dim", "32"},
      {"model.learned_variance", "false"},
      {"model.conditioning", "none"},  // none | class_label | low_res
      {"model.num_classes", "0"},
      {"model.class_embed_dim", "16"},
      {"model.sr_factor", "2"},
      {"model.init_seed", "1"},
      // training loop
      {"train.epochs", "10"},
      {"train.batch", "32"},
      {"train.lr", "0.001"},
      {"train.lambda", "0.001"},
      {"train.importance_sampling", "false"},
      {"train.seed", "0"},
      {"train.holdout_fraction", "0.1"},
      {"train.log_every", "1"},
      {"train.checkpoint_every", "10"},
      // sampling
      {"sample.method", "ancestral"},  // ancestral | ddim
      {"sample.variance_mode", "fixed_beta_tilde"},  // fixed_beta | fixed_beta_tilde | learned
      {"sample.steps", ""},      // empty = all T; integer count; or explicit t1,t2,...
      {"sample.eta", "0"},
      {"sample.clamp_x0", "auto"},  // auto | true | false
      {"sample.count", "16"},
      {"sample.seed", "0"},
      {"sample.snapshot_at", ""},  // percents of completed steps, e.g. 0,25,50,75,100
      {"sample.checkpoint", ""},
      {"sample.oracle", ""},  // mu0=<v>,sigma0=<v>; bypasses the checkpoint
      {"sample.shape", ""},   // CxHxW, oracle mode only
      {"sample.class_id", "-1"},
      {"sample.lowres", ""},  // PDMT path with one low-res input per sample
      {"sample.ledger", ""},  // rescale generated output via this ledger
      // evaluation
      {"eval.metrics", "fid,pr,variogram"},
      {"eval.k", "3"},
      {"eval.feature_method", "flatten"},  // flatten | flatten_pca
      {"eval.feature_dim", "0"},
      {"eval.variogram_max_lag", "0"},  // 0 = half the grid diagonal
      {"eval.variogram_delta", "0.5"},
      {"eval.variogram_pair_budget", "1000000"},
      {"eval.seed", "0"},
      {"eval.real", ""},
      {"eval.gen", ""},
      {"eval.real_features", ""},
      {"eval.gen_features", ""},
      // datasets
      {"data.path", ""},
      {"data.labels", ""},
      {"data.normalization", "none"},  // none | unit_interval | symmetric
      // synthesis
      {"synth.kind", ""},  // grf | gaussian | idx
      {"synth.n", "100"},
      {"synth.side", "32"},
      {"synth.sigma2", "1"},
      {"synth.rho", "4"},
      {"synth.shape", "1x8x8"},
      {"synth.mu0", "0"},
      {"synth.sigma0", "1"},
      {"synth.seed", "0"},
      {"synth.images", ""},
      {"synth.labels", ""},
      {"synth.normalize", "none"},  // none | unit_interval | symmetric
  };
  return keys;
}

RunConfig::RunConfig() = default;

void RunConfig::set(const std::string& key, const std::string& value) {
  if (registry().find(key) == registry().end())
    throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
}

bool RunConfig::is_set(const std::string& key) const {
  return values_.find(key) != values_.end();
}

RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    cfg.set(key, value);
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  return from_text(buf.str());
}

std::string RunConfig::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it != values_.end()) return it->second;
  auto def = registry().find(key);
  if (def == registry().end()) throw ConfigError("unknown config key '" + key + "'");
  return def->second;
}

std::int64_t RunConfig::get_int(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    size_t pos = 0;
    std::int64_t n = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return n;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not an integer");
  }
}

double RunConfig::get_double(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
  }
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string v = get_string(key);
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean");
}

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
  const std::string v = get_string(key);
  std::vector<int> out;
  if (trim(v).empty()) return out;
  std::istringstream is(v);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    tok = trim(tok);
    try {
      size_t pos = 0;
      out.push_back(std::stoi(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': '" + tok + "' is not an integer");
    }
  }
  return out;
}

std::string RunConfig::resolved_text() const {
  std::ostringstream os;
  for (const auto& [key, def] : registry()) {
    auto it = values_.find(key);
    os << key << " = " << (it != values_.end() ? it->second : def) << "\n";
  }
  return os.str();
}

}  // namespace pdm
