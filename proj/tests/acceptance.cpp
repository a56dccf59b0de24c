// Acceptance suite: one check per numbered criterion, each printing a single
// [PASS]/[FAIL] line. Runs everything through the public library and command
// interfaces; no internal shortcuts.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

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

namespace fs = std::filesystem;
using pdm::BetaSchedule;
using pdm::Condition;
using pdm::DenoiserNet;
using pdm::ImageTensor;
using pdm::NetConfig;
using pdm::NoisePrediction;
using pdm::RunConfig;
using pdm::SamplerConfig;
using pdm::ScheduleKind;
using pdm::VarianceMode;

namespace {

fs::path g_work;
int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

RunConfig config_from(std::initializer_list<std::pair<const char*, std::string>> kv) {
  RunConfig cfg;
  for (const auto& [k, v] : kv) cfg.set(k, v);
  return cfg;
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

// heldout.csv rows: epoch,step,total,mse,vlb.
struct HeldoutRow {
  int epoch;
  double total, mse, vlb;
};

std::vector<HeldoutRow> read_heldout(const std::string& path) {
  std::ifstream is(path);
  std::vector<HeldoutRow> rows;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    HeldoutRow r{};
    long long step;
    if (std::sscanf(line.c_str(), "%d,%lld,%lf,%lf,%lf", &r.epoch, &step, &r.total, &r.mse,
                    &r.vlb) == 5)
      rows.push_back(r);
  }
  return rows;
}

pdm::DenoiseFn oracle_fn(const BetaSchedule& schedule, double mu0, double sigma0_sq) {
  return [&schedule, mu0, sigma0_sq](const ImageTensor& x_t, int t, const Condition&) {
    return pdm::oracle_predict(x_t, t, schedule, mu0, sigma0_sq);
  };
}

// ---------------------------------------------------------------- criterion 1

bool schedule_identities() {
  for (auto kind : {ScheduleKind::linear, ScheduleKind::cosine}) {
    for (int T : {10, 100, 1000}) {
      auto s = pdm::make_schedule(kind, T);
      double prev_bar = 1.0;
      for (int t = 1; t <= T; ++t) {
        if (s.alpha_bar_at(t) != s.alpha_at(t) * prev_bar) return false;
        if (s.posterior_variance_at(t) > s.beta_at(t)) return false;
        prev_bar = s.alpha_bar_at(t);
      }
      if (s.posterior_variance_at(1) != 0.0) return false;

      // Respace identity: kept alpha_bar values are copied exactly.
      auto keep = pdm::uniform_respacing(T, std::max(1, T / 4));
      auto r = pdm::respace(s, keep);
      for (int i = 1; i <= r.num_steps(); ++i) {
        if (r.alpha_bar_at(i) != s.alpha_bar_at(keep[static_cast<size_t>(i - 1)])) return false;
        if (r.alpha_at(i) != r.alpha_bar_at(i) / r.alpha_bar_before(i)) return false;
      }
    }
  }
  return true;
}

void criterion_1() {
  bool ok = schedule_identities();

  // Worst-case prior mismatch for x0 in [-1, 1]: KL(q(x_T | x0) || N(0, I))
  // per element, maximized at |x0| = 1.
  auto s = pdm::make_schedule(ScheduleKind::cosine, 1000);
  double a = s.alpha_bar_at(1000);
  double lt = 0.5 * ((1.0 - a) + a * 1.0 - 1.0 - std::log(1.0 - a));
  ok = ok && lt < 1e-3;
  report(1, ok, "schedule identities exact, cosine T=1000 worst-case L_T = " + fmt(lt) +
                    " nats/element");
}

// ---------------------------------------------------------------- criterion 2

void criterion_2() {
  const int T = 100;
  const int trials = 100000;
  auto s = pdm::make_schedule(ScheduleKind::linear, T);
  ImageTensor x0(1, 1, 1);
  x0.data[0] = 0.8;

  pdm::Rng rng(20240814);
  double sum = 0.0, sum_sq = 0.0;
  ImageTensor noise(1, 1, 1);
  for (int i = 0; i < trials; ++i) {
    ImageTensor x = x0;
    for (int t = 1; t <= T; ++t) {
      noise.data[0] = rng.normal();
      x = pdm::forward_step(x, t, s, noise);
    }
    sum += x.data[0];
    sum_sq += x.data[0] * x.data[0];
  }
  double mean = sum / trials;
  double var = sum_sq / trials - mean * mean;

  auto m = pdm::forward_marginal_moments(x0, T, s);
  double expect_mean = m.mean.data[0];
  double expect_var = m.variance_at(0);

  // 3 standard errors of the mean and of the sample variance.
  double se_mean = std::sqrt(expect_var / trials);
  double se_var = expect_var * std::sqrt(2.0 / (trials - 1));
  double dm = std::abs(mean - expect_mean);
  double dv = std::abs(var - expect_var);
  bool ok = dm < 3.0 * se_mean && dv < 3.0 * se_var;
  report(2, ok, "composed chain vs marginal: |dmean| = " + fmt(dm / se_mean) +
                    " SE, |dvar| = " + fmt(dv / se_var) + " SE over 1e5 trials");
}

// ---------------------------------------------------------------- criterion 3

struct SampleStats {
  double mean, sd;
};

SampleStats scalar_stats(const std::vector<ImageTensor>& images) {
  double sum = 0.0, sum_sq = 0.0;
  for (const auto& img : images) {
    sum += img.data[0];
    sum_sq += img.data[0] * img.data[0];
  }
  double n = static_cast<double>(images.size());
  double mean = sum / n;
  return {mean, std::sqrt(sum_sq / n - mean * mean)};
}

void criterion_3() {
  const int n = 10000;
  auto s = pdm::make_schedule(ScheduleKind::cosine, 1000);
  bool ok = true;
  std::string detail;

  int case_id = 0;
  for (auto [mu0, sigma0] : {std::pair{0.0, 1.0}, std::pair{3.0, 0.5}}) {
    auto fn = oracle_fn(s, mu0, sigma0 * sigma0);

    SamplerConfig anc;
    anc.seed = 1000 + static_cast<std::uint64_t>(case_id);
    auto a = pdm::sample(fn, s, anc, n, {1, 1, 1});

    SamplerConfig ddim;
    ddim.method = pdm::SampleMethod::ddim;
    ddim.steps = pdm::uniform_respacing(1000, 50);
    ddim.eta = 0.0;
    ddim.seed = 2000 + static_cast<std::uint64_t>(case_id);
    auto d = pdm::sample(fn, s, ddim, n, {1, 1, 1});

    for (auto* r : {&a, &d}) {
      auto st = scalar_stats(r->images);
      double mean_se = std::abs(st.mean - mu0) / (sigma0 / std::sqrt(double(n)));
      double sd_rel = std::abs(st.sd - sigma0) / sigma0;
      ok = ok && mean_se < 3.0 && sd_rel < 0.05;
      detail += (r == &a ? " anc" : " ddim50") + std::string("(") + fmt(mu0) + "," + fmt(sigma0) +
                "): " + fmt(mean_se) + " SE, sd " + fmt(100.0 * sd_rel) + "%;";
    }
    ++case_id;
  }
  report(3, ok, "oracle recovery over 1e4 samples:" + detail);
}

// ---------------------------------------------------------------- criterion 4

void criterion_4() {
  auto s = pdm::make_schedule(ScheduleKind::cosine, 100);
  auto with_v = [&](double v_value) {
    return [&s, v_value](const ImageTensor& x_t, int t, const Condition&) {
      auto pred = pdm::oracle_predict(x_t, t, s, 0.0, 1.0);
      ImageTensor v = x_t;
      v.data.setConstant(v_value);
      return NoisePrediction(pred.eps, v);
    };
  };
  auto plain = oracle_fn(s, 0.0, 1.0);

  bool ok = true;
  for (auto [v_value, mode] : {std::pair{0.0, VarianceMode::fixed_beta_tilde},
                               std::pair{1.0, VarianceMode::fixed_beta}}) {
    SamplerConfig learned;
    learned.variance_mode = VarianceMode::learned;
    learned.seed = 99;
    auto lv = pdm::sample(with_v(v_value), s, learned, 4, {1, 4, 4});

    SamplerConfig fixed;
    fixed.variance_mode = mode;
    fixed.seed = 99;
    auto fx = pdm::sample(plain, s, fixed, 4, {1, 4, 4});

    for (size_t i = 0; i < 4; ++i)
      for (Eigen::Index k = 0; k < 16; ++k)
        ok = ok && lv.images[i].data[k] == fx.images[i].data[k];
  }
  report(4, ok, "v=0 / v=1 trajectories bitwise equal to fixed beta_tilde / beta");
}

// ---------------------------------------------------------------- criterion 5

void criterion_5() {
  double worst = 0.0;
  bool ok = true;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    NetConfig cfg;
    cfg.channels = 1;
    cfg.height = 2;
    cfg.width = 2;
    cfg.hidden_widths = {6};
    cfg.time_embed_dim = 4;
    cfg.learned_variance = seed % 2 == 1;

    DenoiserNet net(cfg, seed);
    pdm::Rng rng(seed + 500);
    ImageTensor x(1, 2, 2);
    rng.fill_normal(x.data);
    Eigen::ArrayXd d_eps(4), d_v;
    rng.fill_normal(d_eps);
    if (cfg.learned_variance) {
      d_v.resize(4);
      rng.fill_normal(d_v);
    }

    auto grad = pdm::net_backward(net, x, 3, Condition::none(), d_eps, d_v);
    for (Eigen::Index i = 0; i < grad.size(); ++i) {
      auto probe = [&](double h) {
        Eigen::ArrayXd p = net.parameters();
        p[i] += h;
        DenoiserNet copy(cfg, 0);
        copy.set_parameters(p);
        auto pred = pdm::net_forward(copy, x, 3, Condition::none());
        double v = (d_eps * pred.eps.data).sum();
        if (d_v.size() > 0) v += (d_v * pred.v->data).sum();
        return v;
      };
      // Fourth-order central stencil keeps the finite-difference truncation
      // error well below the 1e-4 gate.
      const double h = 1e-4;
      double fd =
          (probe(-2 * h) - 8 * probe(-h) + 8 * probe(h) - probe(2 * h)) / (12.0 * h);
      double rel = std::abs(grad[i] - fd) / std::max({std::abs(fd), std::abs(grad[i]), 1e-8});
      worst = std::max(worst, rel);
      ok = ok && rel < 1e-4;
    }
  }
  report(5, ok, "analytic vs central-difference gradients, worst relative error = " + fmt(worst) +
                    " over 10 seeds");
}

// ---------------------------------------------------------------- criteria 6+9 shared

struct TrainedRun {
  std::string dir;
  std::vector<HeldoutRow> heldout;
};

TrainedRun train_run(const std::string& name, const std::string& data_path, bool learned_variance,
                     bool importance, int epochs) {
  std::string dir = (g_work / name).string();
  auto cfg = config_from({
      {"schedule.kind", "cosine"},
      {"schedule.T", "100"},
      {"data.path", data_path},
      {"model.hidden_widths", "64,64"},
      {"model.learned_variance", learned_variance ? "true" : "false"},
      {"model.init_seed", "11"},
      {"train.epochs", std::to_string(epochs)},
      {"train.batch", "32"},
      {"train.lr", "0.001"},
      {"train.importance_sampling", importance ? "true" : "false"},
      {"train.seed", "7"},
      {"train.holdout_fraction", "0.1"},
      {"train.checkpoint_every", "0"},
  });
  pdm::cmd_train(cfg, dir, true);
  return {dir, read_heldout(dir + "/heldout.csv")};
}

double best_mse(const std::vector<HeldoutRow>& rows) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : rows)
    if (r.epoch >= 1) best = std::min(best, r.mse);
  return best;
}

// ---------------------------------------------------------------- criterion 6

void criterion_6() {
  // Real textures: per-sample symmetric normalization of smooth GRFs.
  auto raw = pdm::synth_grf(256, 8, 1.0, 2.0, 101);
  auto data = pdm::normalize(raw, pdm::NormalizationMode::symmetric);
  std::string data_path = (g_work / "grf8.pdmt").string();
  pdm::save_tensor(data_path, data);

  auto run = train_run("c6_train", data_path, true, false, 80);
  double init = run.heldout.empty() ? 0.0 : run.heldout.front().total;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : run.heldout)
    if (r.epoch >= 1) best = std::min(best, r.total);
  double drop = 1.0 - best / init;

  // Sample the trained model at increasing step counts and track the
  // variogram gap to the training distribution.
  auto ck = pdm::load_checkpoint(run.dir + "/model.pdmw");
  DenoiserNet net = ck.restore_net();
  auto schedule = pdm::make_schedule(ScheduleKind::cosine, 100);
  pdm::DenoiseFn fn = [&net](const ImageTensor& x, int t, const Condition& c) {
    return pdm::net_forward(net, x, t, c);
  };

  auto real_v = pdm::semivariogram(data.images);
  std::vector<double> gaps;
  for (int steps : {5, 20, 100}) {
    SamplerConfig sc;
    sc.variance_mode = VarianceMode::learned;
    sc.steps = pdm::uniform_respacing(100, steps);
    sc.clamp_x0 = true;
    sc.seed = 424242;
    auto out = pdm::sample(fn, schedule, sc, 192, {1, 8, 8});
    auto gen_v = pdm::semivariogram(out.images);

    double gap = 0.0;
    int shared = 0;
    for (Eigen::Index i = 0; i < real_v.bin_centers.size(); ++i)
      for (Eigen::Index j = 0; j < gen_v.bin_centers.size(); ++j)
        if (real_v.bin_centers[i] == gen_v.bin_centers[j]) {
          gap += std::abs(real_v.gamma[i] - gen_v.gamma[j]);
          ++shared;
        }
    gaps.push_back(gap / shared);
  }

  bool ok = drop >= 0.30 && gaps[0] >= gaps[1] && gaps[1] >= gaps[2];
  report(6, ok, "heldout drop " + fmt(100.0 * drop) + "%, variogram gap at 5/20/100 steps = " +
                    fmt(gaps[0]) + "/" + fmt(gaps[1]) + "/" + fmt(gaps[2]));
}

// ---------------------------------------------------------------- criterion 7

pdm::PrecisionRecall brute_force_pr(const pdm::FeatureSet& real, const pdm::FeatureSet& gen,
                                    int k) {
  auto radii = [&](const Eigen::MatrixXd& pts) {
    Eigen::VectorXd out(pts.rows());
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      std::vector<double> d;
      for (Eigen::Index j = 0; j < pts.rows(); ++j)
        if (i != j) d.push_back((pts.row(i) - pts.row(j)).squaredNorm());
      std::sort(d.begin(), d.end());
      out[i] = d[static_cast<size_t>(k - 1)];
    }
    return out;
  };
  auto covered = [&](const Eigen::MatrixXd& pts, const Eigen::MatrixXd& centers,
                     const Eigen::VectorXd& r_sq) {
    int inside = 0;
    for (Eigen::Index i = 0; i < pts.rows(); ++i)
      for (Eigen::Index j = 0; j < centers.rows(); ++j)
        if ((pts.row(i) - centers.row(j)).squaredNorm() <= r_sq[j]) {
          ++inside;
          break;
        }
    return static_cast<double>(inside) / static_cast<double>(pts.rows());
  };
  return {covered(gen.matrix, real.matrix, radii(real.matrix)),
          covered(real.matrix, gen.matrix, radii(gen.matrix))};
}

void criterion_7() {
  bool ok = true;

  // Hand-computed Frechet distances on exact moments.
  Eigen::VectorXd mr1(1), mg1(1);
  mr1 << 0.0;
  mg1 << 1.0;
  Eigen::MatrixXd eye1 = Eigen::MatrixXd::Identity(1, 1);
  ok = ok && std::abs(pdm::fid_from_moments(mr1, eye1, mg1, eye1) - 1.0) < 1e-8;

  Eigen::VectorXd mr2(2), mg2(2);
  mr2 << 0.0, 0.0;
  mg2 << 1.0, 0.0;
  Eigen::MatrixXd cr = Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd cg = Eigen::MatrixXd::Zero(2, 2);
  cg(0, 0) = 4.0;
  cg(1, 1) = 1.0;
  ok = ok && std::abs(pdm::fid_from_moments(mr2, cr, mg2, cg) - 2.0) < 1e-8;

  // fid(A, A) on a sampled feature set.
  pdm::Rng rng(321);
  pdm::FeatureSet self;
  self.matrix.resize(64, 5);
  for (Eigen::Index i = 0; i < self.matrix.size(); ++i) self.matrix.data()[i] = rng.normal();
  ok = ok && pdm::fid(self, self) < 1e-8;

  // Brute-force agreement on 50 random instances.
  int mismatches = 0;
  for (int trial = 0; trial < 50; ++trial) {
    int n_real = 10 + static_cast<int>(rng.uniform_int(190));
    int n_gen = 10 + static_cast<int>(rng.uniform_int(190));
    int d = 1 + static_cast<int>(rng.uniform_int(4));
    pdm::FeatureSet real, gen;
    real.matrix.resize(n_real, d);
    gen.matrix.resize(n_gen, d);
    for (Eigen::Index i = 0; i < real.matrix.size(); ++i) real.matrix.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < gen.matrix.size(); ++i)
      gen.matrix.data()[i] = 0.7 * rng.normal() + 0.3;
    for (int k : {1, 3, 5}) {
      auto fast = pdm::improved_pr(real, gen, k);
      auto slow = brute_force_pr(real, gen, k);
      if (fast.precision != slow.precision || fast.recall != slow.recall) ++mismatches;
    }
  }
  ok = ok && mismatches == 0;
  report(7, ok, "fid closed forms to 1e-8, improved_pr exact on 150 instance/k combinations (" +
                    std::to_string(mismatches) + " mismatches)");
}

// ---------------------------------------------------------------- criterion 8

// Expected value of the binned estimator: the pair-count weighted average of
// gamma(dist) over every lattice offset falling in bin (h - delta, h + delta].
// Comparing the band against this (rather than gamma at the bin center) avoids
// the discretization artifact of bins that mix several lattice distances.
double binned_analytic(int side, double sigma2, double rho, double center, double delta) {
  double weighted = 0.0, count = 0.0;
  auto add = [&](int dy, int dx) {
    double dist = std::hypot(double(dy), double(dx));
    if (dist <= center - delta || dist > center + delta) return;
    double pairs = double((side - dy) * (side - std::abs(dx)));
    weighted += pairs * sigma2 * (1.0 - std::exp(-dist / rho));
    count += pairs;
  };
  for (int dx = 1; dx < side; ++dx) add(0, dx);
  for (int dy = 1; dy < side; ++dy)
    for (int dx = -(side - 1); dx < side; ++dx) add(dy, dx);
  return weighted / count;
}

void criterion_8() {
  // GRF fields against the analytic exponential-covariance curve.
  auto grf = pdm::synth_grf(100, 32, 1.0, 4.0, 2718);
  auto v = pdm::semivariogram(grf.images);
  bool grf_ok = true;
  int bins_checked = 0;
  for (Eigen::Index i = 0; i < v.bin_centers.size(); ++i) {
    double h = v.bin_centers[i];
    if (h > 16.0) continue;
    ++bins_checked;
    double analytic = binned_analytic(32, 1.0, 4.0, h, v.delta);
    grf_ok = grf_ok && v.band_low[i] <= analytic && analytic <= v.band_high[i];
  }
  grf_ok = grf_ok && bins_checked >= 16;
  bool ok = grf_ok;

  // White-noise plateau at sigma^2 within 5%.
  pdm::Rng rng(1414);
  std::vector<ImageTensor> white;
  const double sigma2 = 2.0;
  for (int i = 0; i < 100; ++i) {
    ImageTensor img(1, 32, 32);
    rng.fill_normal(img.data);
    img.data *= std::sqrt(sigma2);
    white.push_back(std::move(img));
  }
  auto w = pdm::semivariogram(white);
  bool white_ok = true;
  for (Eigen::Index i = 0; i < w.gamma.size(); ++i)
    white_ok = white_ok && std::abs(w.gamma[i] - sigma2) / sigma2 < 0.05;
  ok = ok && white_ok;

  // Constant fields give an identically zero curve.
  std::vector<ImageTensor> flat;
  for (int i = 0; i < 3; ++i) {
    ImageTensor img(1, 16, 16);
    img.data.setConstant(4.2);
    flat.push_back(std::move(img));
  }
  auto f = pdm::semivariogram(flat);
  bool flat_ok = true;
  for (Eigen::Index i = 0; i < f.gamma.size(); ++i) flat_ok = flat_ok && f.gamma[i] == 0.0;
  ok = ok && flat_ok;

  report(8, ok, std::string("binned analytic GRF curve inside the 95% band over ") +
                    std::to_string(bins_checked) + " bins (" + (grf_ok ? "ok" : "violated") +
                    "), white-noise plateau within 5% (" + (white_ok ? "ok" : "violated") +
                    "), constant fields at zero (" + (flat_ok ? "ok" : "violated") + ")");
}

// ---------------------------------------------------------------- criterion 9

void criterion_9() {
  // Same toy set in [-1, 1] and scaled by 100 to [-100, 100].
  auto raw = pdm::synth_grf(256, 8, 1.0, 2.0, 2024);
  auto normalized = pdm::normalize(raw, pdm::NormalizationMode::symmetric);
  std::string norm_path = (g_work / "grf8_norm.pdmt").string();
  pdm::save_tensor(norm_path, normalized);

  auto scaled = normalized;
  scaled.ledger.clear();
  for (auto& img : scaled.images) img.data *= 100.0;
  std::string scaled_path = (g_work / "grf8_x100.pdmt").string();
  pdm::save_tensor(scaled_path, scaled);

  const int epochs = 30;
  double scaled_fixed = best_mse(train_run("c9_scaled_fixed", scaled_path, false, true, epochs).heldout);
  double scaled_learned =
      best_mse(train_run("c9_scaled_learned", scaled_path, true, true, epochs).heldout);
  double norm_fixed = best_mse(train_run("c9_norm_fixed", norm_path, false, true, epochs).heldout);
  double norm_learned = best_mse(train_run("c9_norm_learned", norm_path, true, true, epochs).heldout);

  double scaled_ratio = scaled_fixed / scaled_learned;
  double norm_ratio = std::max(norm_fixed, norm_learned) / std::min(norm_fixed, norm_learned);
  bool ok = scaled_ratio >= 2.0 && norm_ratio <= 1.5;
  report(9, ok, "x100 data best-MSE ratio fixed/learned = " + fmt(scaled_ratio) +
                    " (need >= 2), normalized ratio = " + fmt(norm_ratio) + " (need <= 1.5)");
}

// --------------------------------------------------------------- criterion 10

int run_cli_args(std::vector<std::string> args) {
  args.insert(args.begin(), "pdm");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return pdm::run_cli(static_cast<int>(argv.size()), argv.data());
}

void criterion_10() {
  bool ok = true;
  auto dir = [&](const std::string& name) { return (g_work / name).string(); };

  // synth twice: bitwise identical artifacts.
  ok = ok && run_cli_args({"synth", "grf", "--n", "16", "--side", "8", "--sigma2", "1", "--rho",
                           "2", "--seed", "5", "--normalize", "symmetric", "--out", dir("c10_s1"),
                           "--quiet"}) == 0;
  ok = ok && run_cli_args({"synth", "grf", "--config", dir("c10_s1") + "/config.txt", "--out",
                           dir("c10_s2"), "--quiet"}) == 0;
  for (const char* f : {"/data.pdmt", "/ledger.csv", "/config.txt"})
    ok = ok && read_file(dir("c10_s1") + f) == read_file(dir("c10_s2") + f);

  // sample twice from the persisted config, including PGM artifacts.
  ok = ok && run_cli_args({"sample", "--oracle", "mu0=0,sigma0=1", "--shape", "1x8x8", "--count",
                           "9", "--steps", "10", "--snapshot-at", "0,50,100", "--ledger",
                           dir("c10_s1") + "/ledger.csv", "--seed", "21", "--out", dir("c10_a1"),
                           "--quiet"}) == 0;
  ok = ok && run_cli_args({"sample", "--config", dir("c10_a1") + "/config.txt", "--out",
                           dir("c10_a2"), "--quiet"}) == 0;
  for (const char* f :
       {"/samples.pdmt", "/grid.pgm", "/trajectory.pgm", "/rescale.csv", "/config.txt"})
    ok = ok && read_file(dir("c10_a1") + f) == read_file(dir("c10_a2") + f);

  // eval twice over the same inputs.
  ok = ok && run_cli_args({"eval", "--real", dir("c10_s1") + "/data.pdmt", "--gen",
                           dir("c10_a1") + "/samples.pdmt", "--out", dir("c10_e1"), "--quiet"}) ==
             0;
  ok = ok && run_cli_args({"eval", "--config", dir("c10_e1") + "/config.txt", "--out",
                           dir("c10_e2"), "--quiet"}) == 0;
  for (const char* f : {"/results.csv", "/variogram_real.csv", "/variogram_gen.csv"})
    ok = ok && read_file(dir("c10_e1") + f) == read_file(dir("c10_e2") + f);

  // train twice, then interrupted-and-resumed, all bit-identical.
  auto train_cfg = config_from({
      {"schedule.kind", "cosine"},
      {"schedule.T", "10"},
      {"data.path", dir("c10_s1") + "/data.pdmt"},
      {"model.hidden_widths", "16"},
      {"model.learned_variance", "true"},
      {"train.epochs", "4"},
      {"train.batch", "8"},
      {"train.importance_sampling", "true"},
      {"train.seed", "3"},
      {"train.checkpoint_every", "2"},
  });
  pdm::cmd_train(train_cfg, dir("c10_t1"), true);
  pdm::cmd_train(train_cfg, dir("c10_t2"), true);
  ok = ok && read_file(dir("c10_t1") + "/model.pdmw") == read_file(dir("c10_t2") + "/model.pdmw");
  ok = ok && read_file(dir("c10_t1") + "/loss.csv") == read_file(dir("c10_t2") + "/loss.csv");

  // Resuming from the epoch-2 checkpoint reproduces the 4-epoch run.
  pdm::cmd_train(train_cfg, dir("c10_t3"), true, dir("c10_t1") + "/checkpoint_ep2.pdmw");
  ok = ok && read_file(dir("c10_t3") + "/model.pdmw") == read_file(dir("c10_t1") + "/model.pdmw");

  // Format round-trips.
  auto data = pdm::load_tensor(dir("c10_s1") + "/data.pdmt");
  pdm::save_tensor(dir("c10_rt.pdmt"), data);
  ok = ok && read_file(dir("c10_s1") + "/data.pdmt") == read_file(dir("c10_rt.pdmt"));
  auto ledger = pdm::load_ledger(dir("c10_s1") + "/ledger.csv");
  pdm::save_ledger(dir("c10_rt.csv"), ledger);
  ok = ok && read_file(dir("c10_s1") + "/ledger.csv") == read_file(dir("c10_rt.csv"));
  auto feats = pdm::feature_extract(data.images, pdm::FeatureMethod::flatten);
  pdm::save_features(dir("c10_f1.pdmf"), feats);
  auto feats2 = pdm::load_features(dir("c10_f1.pdmf"));
  pdm::save_features(dir("c10_f2.pdmf"), feats2);
  ok = ok && read_file(dir("c10_f1.pdmf")) == read_file(dir("c10_f2.pdmf"));

  // Malformed fixtures map onto the structured error taxonomy. The commands
  // legitimately print to the standard streams; capture that noise so the
  // acceptance log stays one line per criterion.
  std::ostringstream sink;
  auto* cout_buf = std::cout.rdbuf(sink.rdbuf());
  auto* cerr_buf = std::cerr.rdbuf(sink.rdbuf());
  std::ofstream(dir("c10_junk.pdmt"), std::ios::binary) << "PDMX junk";
  ok = ok && run_cli_args({"inspect", dir("c10_junk.pdmt")}) == 3;
  ok = ok && run_cli_args({"synth", "grf", "--side", "999", "--out", dir("c10_x"), "--quiet"}) ==
             2;
  ok = ok && run_cli_args({"sample", "--oracle", "mu0=0,sigma0=nope", "--shape", "1x1x1", "--out",
                           dir("c10_x"), "--quiet"}) == 2;
  ok = ok &&
       run_cli_args({"train", "--data", dir("c10_absent.pdmt"), "--out", dir("c10_x"), "--quiet"}) ==
           3;
  std::cout.rdbuf(cout_buf);
  std::cerr.rdbuf(cerr_buf);

  report(10, ok, "command re-runs byte-identical (synth/sample/eval/train/resume), format "
                 "round-trips bit-exact, malformed inputs map to exit codes 2/3");
}

void guarded(int criterion, void (*fn)()) {
  try {
    fn();
  } catch (const std::exception& e) {
    report(criterion, false, std::string("unexpected exception: ") + e.what());
  }
}

}  // namespace

int main(int, char**) {
  g_work = fs::current_path() / "acceptance_work";
  fs::remove_all(g_work);
  fs::create_directories(g_work);

  auto t0 = std::chrono::steady_clock::now();
  guarded(1, criterion_1);
  guarded(2, criterion_2);
  guarded(3, criterion_3);
  guarded(4, criterion_4);
  guarded(5, criterion_5);
  guarded(6, criterion_6);
  guarded(7, criterion_7);
  guarded(8, criterion_8);
  guarded(9, criterion_9);
  guarded(10, criterion_10);
  auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::printf("%d/10 criteria passed in %.1f s\n", 10 - g_failures, dt);
  return g_failures == 0 ? 0 : 1;
}
