#include "pdm/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "pdm/error.hpp"

namespace pdm {

std::pair<ImageTensor, ImageTensor> reverse_mean_from_eps(const ImageTensor& x_t,
                                                          const ImageTensor& eps_hat, int t,
                                                          const BetaSchedule& schedule,
                                                          bool clamp_x0) {
  require_same_shape(x_t, eps_hat, "reverse_mean_from_eps");
  const double bar = schedule.alpha_bar_at(t);
  ImageTensor x0_hat = x_t;
  x0_hat.data = (x_t.data - std::sqrt(1.0 - bar) * eps_hat.data) / std::sqrt(bar);
  if (clamp_x0) x0_hat.data = x0_hat.data.min(1.0).max(-1.0);
  GaussianMoments post = posterior(x0_hat, x_t, t, schedule);
  return {std::move(post.mean), std::move(x0_hat)};
}

GaussianMoments reverse_moments(const ImageTensor& x_t, const NoisePrediction& prediction, int t,
                                const BetaSchedule& schedule, VarianceMode mode, bool clamp_x0) {
  GaussianMoments m;
  m.mean = reverse_mean_from_eps(x_t, prediction.eps, t, schedule, clamp_x0).first;

  switch (mode) {
    case VarianceMode::fixed_beta:
      m.variance = Eigen::ArrayXd::Constant(1, schedule.beta_at(t));
      break;
    case VarianceMode::fixed_beta_tilde:
      m.variance = Eigen::ArrayXd::Constant(1, schedule.posterior_variance_at(t));
      break;
    case VarianceMode::learned: {
      if (!prediction.learned_variance || !prediction.v)
        throw std::invalid_argument("reverse_moments: learned mode needs a v prediction");
      require_same_shape(x_t, *prediction.v, "reverse_moments");
      const double b = schedule.beta_at(t);
      const double btc = schedule.clipped_posterior_variance_at(t);
      m.variance.resize(x_t.size());
      for (Eigen::Index i = 0; i < x_t.size(); ++i) {
        double v = prediction.v->data[i];
        if (!(v >= 0.0 && v <= 1.0))
          throw std::invalid_argument("reverse_moments: v outside [0, 1]");
        // Log-space interpolation; explicit endpoints keep v = 0 / v = 1
        // bitwise equal to the fixed variances.
        if (v == 0.0)
          m.variance[i] = btc;
        else if (v == 1.0)
          m.variance[i] = b;
        else
          m.variance[i] = std::pow(b, v) * std::pow(btc, 1.0 - v);
      }
      break;
    }
  }
  return m;
}

ImageTensor ancestral_step(const ImageTensor& x_t, const NoisePrediction& prediction, int t,
                           const BetaSchedule& schedule, VarianceMode mode, bool clamp_x0,
                           Rng& rng) {
  GaussianMoments m = reverse_moments(x_t, prediction, t, schedule, mode, clamp_x0);
  if (t == 1) return m.mean;  // deterministic final transition, no draw

  ImageTensor out = std::move(m.mean);
  for (Eigen::Index i = 0; i < out.size(); ++i)
    out.data[i] += std::sqrt(m.variance_at(i)) * rng.normal();
  return out;
}

ImageTensor ddim_step(const ImageTensor& x_t, const ImageTensor& eps_hat, int t, int t_prev,
                      const BetaSchedule& schedule, double eta, Rng& rng, bool clamp_x0) {
  require_same_shape(x_t, eps_hat, "ddim_step");
  if (t_prev < 0 || t_prev >= t)
    throw std::invalid_argument("ddim_step: need 0 <= t_prev < t");
  if (!(eta >= 0.0)) throw std::invalid_argument("ddim_step: eta must be non-negative");

  const double bar = schedule.alpha_bar_at(t);
  const double bar_prev = t_prev == 0 ? 1.0 : schedule.alpha_bar_at(t_prev);

  ImageTensor x0_hat = x_t;
  x0_hat.data = (x_t.data - std::sqrt(1.0 - bar) * eps_hat.data) / std::sqrt(bar);
  if (clamp_x0) x0_hat.data = x0_hat.data.min(1.0).max(-1.0);

  const double sigma =
      eta * std::sqrt((1.0 - bar_prev) / (1.0 - bar)) * std::sqrt(1.0 - bar / bar_prev);
  const double dir_sq = 1.0 - bar_prev - sigma * sigma;
  if (dir_sq < 0.0)
    throw std::invalid_argument("ddim_step: sigma^2 exceeds 1 - alpha_bar_prev (eta too large)");

  ImageTensor out = x_t;
  out.data = std::sqrt(bar_prev) * x0_hat.data + std::sqrt(dir_sq) * eps_hat.data;
  if (sigma > 0.0)
    for (Eigen::Index i = 0; i < out.size(); ++i) out.data[i] += sigma * rng.normal();
  return out;
}

namespace {

std::vector<int> snapshot_steps(int total_steps, const std::vector<int>& percents) {
  std::vector<int> at;
  at.reserve(percents.size());
  for (int p : percents) {
    if (p < 0 || p > 100)
      throw std::invalid_argument("sample: snapshot percent outside 0..100");
    at.push_back(static_cast<int>(std::lround(p / 100.0 * total_steps)));
  }
  return at;
}

}  // namespace

SampleResult sample(const DenoiseFn& denoiser, const BetaSchedule& schedule,
                    const SamplerConfig& config, int n, std::array<int, 3> shape,
                    const Condition& cond, const std::vector<int>& snapshot_percents) {
  if (n < 0) throw std::invalid_argument("sample: n must be non-negative");

  // Respaced view of the chain; identity when no subset is requested.
  const bool subset = !config.steps.empty();
  const BetaSchedule respaced = subset ? respace(schedule, config.steps) : BetaSchedule{};
  const BetaSchedule& chain = subset ? respaced : schedule;
  const int len = chain.num_steps();

  const std::vector<int> snap_at = snapshot_steps(len, snapshot_percents);

  SampleResult result;
  result.images.reserve(static_cast<size_t>(n));
  if (!snapshot_percents.empty()) result.snapshots.resize(static_cast<size_t>(n));

  for (int i = 0; i < n; ++i) {
    Rng rng(derive_stream(config.seed, static_cast<std::uint64_t>(i)));
    ImageTensor x(shape[0], shape[1], shape[2]);
    rng.fill_normal(x.data);

    // snapshots[i][j] pairs with snapshot_percents[j] regardless of order.
    auto maybe_snapshot = [&](int steps_done) {
      if (snapshot_percents.empty()) return;
      for (size_t j = 0; j < snap_at.size(); ++j)
        if (snap_at[j] == steps_done) result.snapshots[static_cast<size_t>(i)][j] = x;
    };
    if (!snapshot_percents.empty()) {
      result.snapshots[static_cast<size_t>(i)].resize(snap_at.size());
      maybe_snapshot(0);
    }

    for (int s = len; s >= 1; --s) {
      NoisePrediction pred = denoiser(x, chain.original_timestep(s), cond);
      require_same_shape(pred.eps, x, "sample: denoiser output");
      if (config.method == SampleMethod::ancestral) {
        x = ancestral_step(x, pred, s, chain, config.variance_mode, config.clamp_x0, rng);
      } else {
        x = ddim_step(x, pred.eps, s, s - 1, chain, config.eta, rng, config.clamp_x0);
      }
      if (!all_finite(x))
        throw NumericError("sample: non-finite state after step " + std::to_string(s) +
                           " (original timestep " + std::to_string(chain.original_timestep(s)) +
                           ")");
      maybe_snapshot(len - s + 1);
    }
    result.images.push_back(std::move(x));
  }
  return result;
}

}  // namespace pdm
