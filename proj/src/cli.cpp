#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cli_common.hpp"
#include "pdm/cli.hpp"
#include "pdm/config.hpp"
#include "pdm/dataio.hpp"
#include "pdm/denoiser.hpp"
#include "pdm/diffusion.hpp"
#include "pdm/error.hpp"
#include "pdm/eval.hpp"
#include "pdm/rng.hpp"
#include "pdm/sampler.hpp"
#include "pdm/schedule.hpp"

namespace pdm {

namespace fs = std::filesystem;

namespace {

double parse_double_strict(const std::string& text, const std::string& what) {
  try {
    size_t used = 0;
    double value = std::stod(text, &used);
    if (used != text.size() || !std::isfinite(value))
      throw ConfigError(what + ": '" + text + "' is not a finite number");
    return value;
  } catch (const std::logic_error&) {
    throw ConfigError(what + ": '" + text + "' is not a finite number");
  }
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, ',')) parts.push_back(item);
  return parts;
}

// "CxHxW", e.g. "1x8x8".
std::array<int, 3> parse_shape(const std::string& text) {
  std::array<int, 3> shape{};
  size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    size_t next = i < 2 ? text.find('x', pos) : text.size();
    if (next == std::string::npos)
      throw ConfigError("shape '" + text + "' must look like CxHxW");
    int v = 0;
    auto [p, ec] = std::from_chars(text.data() + pos, text.data() + next, v);
    if (ec != std::errc{} || p != text.data() + next || v < 1)
      throw ConfigError("shape '" + text + "' must be three positive integers CxHxW");
    shape[static_cast<size_t>(i)] = v;
    pos = next + 1;
  }
  return shape;
}

// "mu0=0,sigma0=1" -> (mu0, sigma0). sigma0 is the standard deviation.
std::pair<double, double> parse_oracle(const std::string& text) {
  double mu0 = 0.0, sigma0 = 0.0;
  bool have_mu = false, have_sigma = false;
  for (const std::string& part : split_list(text)) {
    size_t eq = part.find('=');
    if (eq == std::string::npos)
      throw ConfigError("oracle spec '" + text + "' must look like mu0=M,sigma0=S");
    std::string key = part.substr(0, eq);
    std::string value = part.substr(eq + 1);
    if (key == "mu0") {
      mu0 = parse_double_strict(value, "oracle mu0");
      have_mu = true;
    } else if (key == "sigma0") {
      sigma0 = parse_double_strict(value, "oracle sigma0");
      have_sigma = true;
    } else {
      throw ConfigError("oracle spec: unknown key '" + key + "'");
    }
  }
  if (!have_mu || !have_sigma)
    throw ConfigError("oracle spec '" + text + "' must set both mu0 and sigma0");
  if (sigma0 < 0.0) throw ConfigError("oracle sigma0 must be non-negative");
  return {mu0, sigma0};
}

SampleMethod method_from(const std::string& name) {
  if (name == "ancestral") return SampleMethod::ancestral;
  if (name == "ddim") return SampleMethod::ddim;
  throw ConfigError("sample.method must be ancestral or ddim, got '" + name + "'");
}

VarianceMode variance_mode_from(const std::string& name) {
  if (name == "fixed_beta") return VarianceMode::fixed_beta;
  if (name == "fixed_beta_tilde") return VarianceMode::fixed_beta_tilde;
  if (name == "learned") return VarianceMode::learned;
  throw ConfigError("sample.variance_mode must be fixed_beta, fixed_beta_tilde or learned, got '" +
                    name + "'");
}

// Single integer -> uniform respacing to that many steps; comma list ->
// explicit kept timesteps; empty -> the full chain.
std::vector<int> steps_from(const std::string& text, int T) {
  if (text.empty()) return {};
  std::vector<int> values;
  for (const std::string& part : split_list(text)) {
    int v = 0;
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc{} || p != part.data() + part.size())
      throw ConfigError("sample.steps: '" + part + "' is not an integer");
    values.push_back(v);
  }
  if (values.size() == 1) {
    if (values[0] < 1 || values[0] > T)
      throw ConfigError("sample.steps: step count must be in 1.." + std::to_string(T));
    return uniform_respacing(T, values[0]);
  }
  return values;
}

void write_metric_row(std::ostream& os, const std::string& name, double value) {
  os << name << "," << std::setprecision(17) << value << "\n";
}

std::string grid_path(const std::string& out_dir, const char* name) {
  return (fs::path(out_dir) / name).string();
}

}  // namespace

int cmd_sample(const RunConfig& cfg, const std::string& out_dir, bool quiet) {
  write_resolved_config(cfg, out_dir);
  const BetaSchedule schedule = schedule_from_config(cfg);
  const int T = schedule.num_steps();

  SamplerConfig sc;
  sc.method = method_from(cfg.get_string("sample.method"));
  sc.variance_mode = variance_mode_from(cfg.get_string("sample.variance_mode"));
  sc.steps = steps_from(cfg.get_string("sample.steps"), T);
  sc.eta = cfg.get_double("sample.eta");
  sc.seed = static_cast<std::uint64_t>(cfg.get_int("sample.seed"));

  const std::string oracle_spec = cfg.get_string("sample.oracle");
  const std::string checkpoint_path = cfg.get_string("sample.checkpoint");
  if (oracle_spec.empty() == checkpoint_path.empty())
    throw ConfigError("sample needs exactly one of sample.oracle and sample.checkpoint");

  // Ledger first: the clamp_x0 auto rule depends on it.
  const std::string ledger_path = cfg.get_string("sample.ledger");
  std::vector<NormalizationRecord> ledger;
  if (!ledger_path.empty()) ledger = load_ledger(ledger_path);

  const std::string clamp = cfg.get_string("sample.clamp_x0");
  if (clamp == "on") {
    sc.clamp_x0 = true;
  } else if (clamp == "off") {
    sc.clamp_x0 = false;
  } else if (clamp == "auto") {
    // Clamping assumes the model's data lives in [-1, 1]; that is knowable
    // only when a symmetric normalization ledger is in play.
    sc.clamp_x0 = !ledger.empty() &&
                  std::all_of(ledger.begin(), ledger.end(), [](const NormalizationRecord& r) {
                    return r.mode == NormalizationMode::symmetric;
                  });
  } else {
    throw ConfigError("sample.clamp_x0 must be auto, on or off, got '" + clamp + "'");
  }

  DenoiseFn denoiser;
  std::array<int, 3> shape{};
  DenoiserNet* net_ptr = nullptr;
  std::optional<DenoiserNet> net;
  std::string source;
  if (!oracle_spec.empty()) {
    auto [mu0, sigma0] = parse_oracle(oracle_spec);
    const std::string shape_text = cfg.get_string("sample.shape");
    if (shape_text.empty()) throw ConfigError("sample.shape is required in oracle mode");
    shape = parse_shape(shape_text);
    if (sc.variance_mode == VarianceMode::learned)
      throw ConfigError("the oracle predicts no variance; use a fixed variance mode");
    double sigma0_sq = sigma0 * sigma0;
    denoiser = [&schedule, mu0, sigma0_sq](const ImageTensor& x_t, int t, const Condition&) {
      return oracle_predict(x_t, t, schedule, mu0, sigma0_sq);
    };
    source = "oracle " + oracle_spec;
  } else {
    Checkpoint ck = load_checkpoint(checkpoint_path);
    net.emplace(ck.restore_net());
    net_ptr = &*net;
    shape = {net_ptr->config().channels, net_ptr->config().height, net_ptr->config().width};
    if (sc.variance_mode == VarianceMode::learned && !net_ptr->config().learned_variance)
      throw ConfigError("checkpoint has no variance head; use a fixed variance mode");
    denoiser = [net_ptr](const ImageTensor& x_t, int t, const Condition& cond) {
      return net_forward(*net_ptr, x_t, t, cond);
    };
    source = "checkpoint " + checkpoint_path;
  }

  std::vector<int> snapshot_percents = cfg.get_int_list("sample.snapshot_at");

  const int class_id = static_cast<int>(cfg.get_int("sample.class_id"));
  const std::string lowres_path = cfg.get_string("sample.lowres");
  if (class_id >= 0 && !lowres_path.empty())
    throw ConfigError("sample.class_id and sample.lowres are mutually exclusive");

  SampleResult result;
  if (!lowres_path.empty()) {
    // One reverse chain per conditioning image, each on its own substream.
    Dataset lowres = load_tensor(lowres_path);
    if (lowres.count() == 0) throw DataError("low-res file '" + lowres_path + "' is empty");
    for (int i = 0; i < lowres.count(); ++i) {
      SamplerConfig per = sc;
      per.seed = derive_stream(sc.seed, static_cast<std::uint64_t>(i));
      SampleResult one =
          sample(denoiser, schedule, per, 1, shape,
                 Condition::for_low_res(lowres.images[static_cast<size_t>(i)]),
                 snapshot_percents);
      result.images.push_back(std::move(one.images[0]));
      if (!one.snapshots.empty()) result.snapshots.push_back(std::move(one.snapshots[0]));
    }
  } else {
    Condition cond = class_id >= 0 ? Condition::for_class(class_id) : Condition::none();
    const int n = static_cast<int>(cfg.get_int("sample.count"));
    if (n < 1) throw ConfigError("sample.count must be positive");
    result = sample(denoiser, schedule, sc, n, shape, cond, snapshot_percents);
  }

  const int n = static_cast<int>(result.images.size());
  Dataset out;
  out.meta.name = "samples";
  out.meta.source = source;

  if (!ledger.empty()) {
    RescaledImages rescaled = rescale_generated(result.images, ledger, sc.seed);
    out.images = std::move(rescaled.images);
    std::ofstream rs(fs::path(out_dir) / "rescale.csv");
    if (!rs) throw DataError("cannot write rescale.csv in '" + out_dir + "'");
    rs << "image,record\n";
    for (size_t i = 0; i < rescaled.record_indices.size(); ++i)
      rs << i << "," << rescaled.record_indices[i] << "\n";
  } else {
    out.images = std::move(result.images);
  }

  save_tensor(grid_path(out_dir, "samples.pdmt"), out);

  if (out.images[0].channels == 1) {
    int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
    int rows = (n + cols - 1) / cols;
    export_pgm(grid_path(out_dir, "grid.pgm"), out.images, rows, cols);
  }

  if (!result.snapshots.empty() && out.images[0].channels == 1) {
    std::vector<ImageTensor> panels;
    panels.reserve(result.snapshots.size() * snapshot_percents.size());
    for (auto& row : result.snapshots)
      for (auto& img : row) panels.push_back(std::move(img));
    export_pgm(grid_path(out_dir, "trajectory.pgm"), panels,
               static_cast<int>(result.snapshots.size()),
               static_cast<int>(snapshot_percents.size()));
  }

  if (!quiet)
    std::cout << "wrote " << n << " samples from " << source << " to "
              << grid_path(out_dir, "samples.pdmt") << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& out_dir, bool quiet) {
  write_resolved_config(cfg, out_dir);

  const std::string real_path = cfg.get_string("eval.real");
  const std::string gen_path = cfg.get_string("eval.gen");
  if (real_path.empty() || gen_path.empty())
    throw ConfigError("eval.real and eval.gen are both required");
  Dataset real = load_tensor(real_path);
  Dataset gen = load_tensor(gen_path);
  if (real.count() == 0 || gen.count() == 0) throw DataError("eval: empty dataset");
  if (!real.images[0].same_shape(gen.images[0]))
    throw DataError("eval: real and generated image shapes differ");

  std::vector<std::string> metrics = split_list(cfg.get_string("eval.metrics"));
  for (const std::string& m : metrics)
    if (m != "fid" && m != "pr" && m != "variogram")
      throw ConfigError("eval.metrics: unknown metric '" + m + "'");
  const bool want_fid = std::count(metrics.begin(), metrics.end(), "fid") > 0;
  const bool want_pr = std::count(metrics.begin(), metrics.end(), "pr") > 0;
  const bool want_vario = std::count(metrics.begin(), metrics.end(), "variogram") > 0;

  std::ofstream results(fs::path(out_dir) / "results.csv");
  if (!results) throw DataError("cannot write results.csv in '" + out_dir + "'");
  results << "metric,value\n";

  if (want_fid || want_pr) {
    const std::string rf = cfg.get_string("eval.real_features");
    const std::string gf = cfg.get_string("eval.gen_features");
    if (rf.empty() != gf.empty())
      throw ConfigError("eval.real_features and eval.gen_features must be given together");
    FeatureSet real_feat, gen_feat;
    if (!rf.empty()) {
      real_feat = load_features(rf);
      gen_feat = load_features(gf);
      if (real_feat.dim() != gen_feat.dim())
        throw DataError("eval: feature dimensions differ between the two files");
    } else {
      const std::string method_name = cfg.get_string("eval.feature_method");
      FeatureMethod method;
      if (method_name == "flatten") {
        method = FeatureMethod::flatten;
      } else if (method_name == "pca" || method_name == "flatten_pca") {
        method = FeatureMethod::flatten_pca;
      } else {
        throw ConfigError("eval.feature_method must be flatten or pca, got '" + method_name +
                          "'");
      }
      int dim = static_cast<int>(cfg.get_int("eval.feature_dim"));
      real_feat = feature_extract(real.images, method, dim, &real.images);
      gen_feat = feature_extract(gen.images, method, dim, &real.images);
    }
    if (want_fid) write_metric_row(results, "fid", fid(real_feat, gen_feat));
    if (want_pr) {
      PrecisionRecall pr =
          improved_pr(real_feat, gen_feat, static_cast<int>(cfg.get_int("eval.k")));
      write_metric_row(results, "precision", pr.precision);
      write_metric_row(results, "recall", pr.recall);
    }
  }

  if (want_vario) {
    VariogramOptions vo;
    vo.max_lag = cfg.get_double("eval.variogram_max_lag");
    vo.delta = cfg.get_double("eval.variogram_delta");
    vo.pair_budget = cfg.get_int("eval.variogram_pair_budget");
    vo.seed = static_cast<std::uint64_t>(cfg.get_int("eval.seed"));
    Variogram vr = semivariogram(real.images, vo);
    Variogram vg = semivariogram(gen.images, vo);
    save_variogram_csv(grid_path(out_dir, "variogram_real.csv"), vr);
    save_variogram_csv(grid_path(out_dir, "variogram_gen.csv"), vg);

    // Mean absolute gamma gap over the lag bins populated in both sets.
    double gap = 0.0;
    int shared = 0;
    for (Eigen::Index i = 0; i < vr.bin_centers.size(); ++i)
      for (Eigen::Index j = 0; j < vg.bin_centers.size(); ++j)
        if (vr.bin_centers[i] == vg.bin_centers[j]) {
          gap += std::abs(vr.gamma[i] - vg.gamma[j]);
          ++shared;
        }
    if (shared == 0) throw DataError("eval: variograms share no populated lag bins");
    write_metric_row(results, "variogram_distance", gap / shared);
  }

  if (!quiet) std::cout << "wrote " << grid_path(out_dir, "results.csv") << "\n";
  return 0;
}

int cmd_synth(const RunConfig& cfg, const std::string& out_dir, bool quiet) {
  write_resolved_config(cfg, out_dir);
  const std::string kind = cfg.get_string("synth.kind");
  const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("synth.seed"));
  const int n = static_cast<int>(cfg.get_int("synth.n"));

  Dataset data;
  if (kind == "grf") {
    data = synth_grf(n, static_cast<int>(cfg.get_int("synth.side")),
                     cfg.get_double("synth.sigma2"), cfg.get_double("synth.rho"), seed);
  } else if (kind == "gaussian") {
    std::array<int, 3> shape = parse_shape(cfg.get_string("synth.shape"));
    double sigma0 = cfg.get_double("synth.sigma0");
    if (sigma0 < 0.0) throw ConfigError("synth.sigma0 must be non-negative");
    data = synth_gaussian(n, shape[0], shape[1], shape[2], cfg.get_double("synth.mu0"),
                          sigma0 * sigma0, seed);
  } else if (kind == "idx") {
    const std::string images = cfg.get_string("synth.images");
    if (images.empty()) throw ConfigError("synth.images is required for idx conversion");
    data = load_idx(images, cfg.get_string("synth.labels"));
  } else {
    throw ConfigError("synth kind must be grf, gaussian or idx, got '" + kind + "'");
  }

  const std::string norm = cfg.get_string("synth.normalize");
  if (norm != "none") {
    data = normalize(data, normalization_mode_from(norm));
    save_ledger(grid_path(out_dir, "ledger.csv"), data.ledger);
  }
  save_tensor(grid_path(out_dir, "data.pdmt"), data);

  if (!quiet)
    std::cout << "wrote " << data.count() << " samples to " << grid_path(out_dir, "data.pdmt")
              << "\n";
  return 0;
}

namespace {

void inspect_one(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path + "'");
  char magic[4] = {};
  is.read(magic, 4);
  if (is.gcount() != 4) throw DataError("'" + path + "' is shorter than a magic header");
  std::string tag(magic, 4);
  is.close();

  std::cout << path << ":\n";
  if (tag == "PDMT") {
    Dataset d = load_tensor(path);
    std::cout << "  PDMT tensor file, " << d.count() << " images of shape " << d.images[0].channels
              << "x" << d.images[0].height << "x" << d.images[0].width << "\n";
    double lo = 0.0, hi = 0.0, mean = 0.0;
    std::int64_t total = 0;
    for (int i = 0; i < d.count(); ++i) {
      const auto& a = d.images[static_cast<size_t>(i)].data;
      if (i == 0) {
        lo = a.minCoeff();
        hi = a.maxCoeff();
      } else {
        lo = std::min(lo, a.minCoeff());
        hi = std::max(hi, a.maxCoeff());
      }
      mean += a.sum();
      total += a.size();
    }
    std::cout << "  pixel range [" << lo << ", " << hi << "], mean "
              << mean / static_cast<double>(total) << "\n";
    if (!d.labels.empty()) {
      auto [mn, mx] = std::minmax_element(d.labels.begin(), d.labels.end());
      std::cout << "  labels present, values " << *mn << ".." << *mx << "\n";
    }
  } else if (tag == "PDMF") {
    FeatureSet f = load_features(path);
    std::cout << "  PDMF feature file, " << f.count() << " vectors of dim " << f.dim() << "\n";
    std::cout << "  value range [" << f.matrix.minCoeff() << ", " << f.matrix.maxCoeff()
              << "], mean " << f.matrix.mean() << "\n";
  } else if (tag == "PDMW") {
    Checkpoint ck = load_checkpoint(path);
    std::cout << "  PDMW checkpoint, " << ck.params.size() << " parameters\n";
    std::cout << "  net " << ck.config.input_size();
    for (int w : ck.config.hidden_widths) std::cout << " -> " << w;
    std::cout << " -> " << ck.config.output_size() << " (image " << ck.config.channels << "x"
              << ck.config.height << "x" << ck.config.width << ")\n";
    std::cout << "  learned_variance " << (ck.config.learned_variance ? "yes" : "no")
              << ", conditioning ";
    switch (ck.config.conditioning) {
      case ConditionKind::none: std::cout << "none"; break;
      case ConditionKind::class_label:
        std::cout << "class_label (" << ck.config.num_classes << " classes)";
        break;
      case ConditionKind::low_res: std::cout << "low_res"; break;
    }
    std::cout << "\n  optimizer state " << (ck.adam ? "yes" : "no");
    if (!ck.blocks.empty()) {
      std::cout << ", blocks";
      for (const auto& [k, v] : ck.blocks) std::cout << " " << k;
    }
    std::cout << "\n";
  } else {
    throw DataError("'" + path + "' has unrecognized magic '" + tag + "'");
  }
}

}  // namespace

int cmd_inspect(const std::vector<std::string>& paths) {
  if (paths.empty()) throw ConfigError("inspect needs at least one path");
  for (const std::string& p : paths) inspect_one(p);
  return 0;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Probabilistic diffusion model toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir = "run", seed_text;
  bool quiet = false;
  app.add_option("--config", config_path, "Run configuration file (key=value lines)");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  auto* seed_opt = app.add_option("--seed", seed_text, "Seed override for the command");
  app.add_flag("--quiet", quiet, "Suppress progress output");

  // Each CLI flag maps onto one config key; values stay text so the config
  // layer does all validation in one place.
  struct Binding {
    CLI::Option* opt;
    std::string key;
    std::string* value;
  };
  std::vector<Binding> bindings;
  std::vector<std::unique_ptr<std::string>> storage;
  auto bind = [&](CLI::App* cmd, const std::string& flag, const std::string& key,
                  const std::string& help) {
    storage.push_back(std::make_unique<std::string>());
    bindings.push_back({cmd->add_option(flag, *storage.back(), help), key, storage.back().get()});
  };

  CLI::App* train = app.add_subcommand("train", "Train a denoiser");
  std::string resume_path;
  train->add_option("--resume", resume_path, "Continue from a training checkpoint");
  bind(train, "--data", "data.path", "Dataset file (PDMT or IDX)");
  bind(train, "--labels", "data.labels", "IDX label file");
  bind(train, "--normalize", "data.normalization", "none, unit_interval or symmetric");

  CLI::App* sample = app.add_subcommand("sample", "Sample a trained or oracle denoiser");
  bind(sample, "--checkpoint", "sample.checkpoint", "Model checkpoint (PDMW)");
  bind(sample, "--oracle", "sample.oracle", "Closed-form denoiser spec mu0=M,sigma0=S");
  bind(sample, "--method", "sample.method", "ancestral or ddim");
  bind(sample, "--steps", "sample.steps", "Step count or comma list of kept timesteps");
  bind(sample, "--eta", "sample.eta", "DDIM noise scale");
  bind(sample, "--count", "sample.count", "Number of samples");
  bind(sample, "--shape", "sample.shape", "CxHxW (oracle mode)");
  bind(sample, "--snapshot-at", "sample.snapshot_at", "Percent checkpoints for the trajectory strip");
  bind(sample, "--variance-mode", "sample.variance_mode",
       "fixed_beta, fixed_beta_tilde or learned");
  bind(sample, "--clamp-x0", "sample.clamp_x0", "auto, on or off");
  bind(sample, "--ledger", "sample.ledger", "Normalization ledger for rescaling");
  bind(sample, "--class-id", "sample.class_id", "Class condition");
  bind(sample, "--lowres", "sample.lowres", "Low-resolution conditioning images (PDMT)");

  CLI::App* eval = app.add_subcommand("eval", "Compare generated samples against real data");
  bind(eval, "--real", "eval.real", "Real dataset (PDMT)");
  bind(eval, "--gen", "eval.gen", "Generated dataset (PDMT)");
  bind(eval, "--real-features", "eval.real_features", "Precomputed real features (PDMF)");
  bind(eval, "--gen-features", "eval.gen_features", "Precomputed generated features (PDMF)");
  bind(eval, "--metrics", "eval.metrics", "Comma list from fid, pr, variogram");
  bind(eval, "--k", "eval.k", "Neighborhood size for precision/recall");

  CLI::App* synth = app.add_subcommand("synth", "Generate or convert datasets");
  std::string synth_kind;
  synth->add_option("kind", synth_kind, "grf, gaussian or idx")->required();
  bind(synth, "--n", "synth.n", "Number of samples");
  bind(synth, "--side", "synth.side", "GRF grid side");
  bind(synth, "--sigma2", "synth.sigma2", "GRF marginal variance");
  bind(synth, "--rho", "synth.rho", "GRF correlation range");
  bind(synth, "--shape", "synth.shape", "CxHxW (gaussian)");
  bind(synth, "--mu0", "synth.mu0", "Gaussian mean");
  bind(synth, "--sigma0", "synth.sigma0", "Gaussian standard deviation");
  bind(synth, "--images", "synth.images", "IDX image file to convert");
  bind(synth, "--labels", "synth.labels", "IDX label file to convert");
  bind(synth, "--normalize", "synth.normalize", "none, unit_interval or symmetric");

  CLI::App* inspect = app.add_subcommand("inspect", "Print headers and stats of data files");
  std::vector<std::string> inspect_paths;
  inspect->add_option("paths", inspect_paths, "PDMT/PDMF/PDMW files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg =
        config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path);
    for (const Binding& b : bindings)
      if (b.opt->count() > 0) cfg.set(b.key, *b.value);

    if (train->parsed()) {
      if (seed_opt->count() > 0) cfg.set("train.seed", seed_text);
      return cmd_train(cfg, out_dir, quiet, resume_path);
    }
    if (sample->parsed()) {
      if (seed_opt->count() > 0) cfg.set("sample.seed", seed_text);
      return cmd_sample(cfg, out_dir, quiet);
    }
    if (eval->parsed()) {
      if (seed_opt->count() > 0) cfg.set("eval.seed", seed_text);
      return cmd_eval(cfg, out_dir, quiet);
    }
    if (synth->parsed()) {
      cfg.set("synth.kind", synth_kind);
      if (seed_opt->count() > 0) cfg.set("synth.seed", seed_text);
      return cmd_synth(cfg, out_dir, quiet);
    }
    if (inspect->parsed()) return cmd_inspect(inspect_paths);
    throw ConfigError("no command given");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace pdm
