#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "pdm/diffusion.hpp"
#include "pdm/image.hpp"
#include "pdm/prediction.hpp"
#include "pdm/rng.hpp"
#include "pdm/schedule.hpp"

namespace pdm {

enum class SampleMethod { ancestral, ddim };
enum class VarianceMode { fixed_beta, fixed_beta_tilde, learned };

struct SamplerConfig {
  SampleMethod method = SampleMethod::ancestral;
  VarianceMode variance_mode = VarianceMode::fixed_beta_tilde;
  std::vector<int> steps;  // kept subset of 1..T; empty means all T steps
  double eta = 0.0;        // ddim noise scale
  bool clamp_x0 = false;   // clamp the x0 estimate to [-1, 1] before reuse
  std::uint64_t seed = 0;
};

// Reverse mean through the x0 estimate: recovers x0_hat from (x_t, eps_hat),
// optionally clamps it, and feeds it through the forward posterior. Returns
// (mean, x0_hat).
std::pair<ImageTensor, ImageTensor> reverse_mean_from_eps(const ImageTensor& x_t,
                                                          const ImageTensor& eps_hat, int t,
                                                          const BetaSchedule& schedule,
                                                          bool clamp_x0 = false);

// Mean and variance of the predicted reverse transition p(x_{t-1} | x_t).
// Fixed modes use beta_t or beta_tilde_t; learned mode interpolates between
// beta_tilde (clipped at t = 1) and beta_t per pixel in log space:
//   sigma^2 = beta_t^v * beta_tilde_clipped^(1-v)
// The v = 0 and v = 1 endpoints reproduce the fixed variances bitwise.
GaussianMoments reverse_moments(const ImageTensor& x_t, const NoisePrediction& prediction, int t,
                                const BetaSchedule& schedule, VarianceMode mode,
                                bool clamp_x0 = false);

// One ancestral transition x_t -> x_{t-1}. Draws no noise at t = 1, where the
// transition is deterministic.
ImageTensor ancestral_step(const ImageTensor& x_t, const NoisePrediction& prediction, int t,
                           const BetaSchedule& schedule, VarianceMode mode, bool clamp_x0,
                           Rng& rng);

// One DDIM transition from step t to step t_prev (0 means all the way to x0).
// eta scales the stochastic share of the posterior noise; eta = 0 draws
// nothing and is fully deterministic.
ImageTensor ddim_step(const ImageTensor& x_t, const ImageTensor& eps_hat, int t, int t_prev,
                      const BetaSchedule& schedule, double eta, Rng& rng, bool clamp_x0 = false);

// Denoiser evaluated at (x_t, original timestep, condition).
using DenoiseFn =
    std::function<NoisePrediction(const ImageTensor& x_t, int t_original, const Condition&)>;

struct SampleResult {
  std::vector<ImageTensor> images;
  // snapshots[i][j] is sample i after snapshot_percents[j] percent of the
  // reverse steps; empty when no snapshots were requested.
  std::vector<std::vector<ImageTensor>> snapshots;
};

// Runs the full reverse chain for n samples of the given [c, h, w] shape.
// Every sample uses its own substream derive_stream(config.seed, i), so
// results are independent of batch order and count. The denoiser is called
// exactly once per kept step per sample, with original-chain timesteps.
SampleResult sample(const DenoiseFn& denoiser, const BetaSchedule& schedule,
                    const SamplerConfig& config, int n, std::array<int, 3> shape,
                    const Condition& cond = Condition::none(),
                    const std::vector<int>& snapshot_percents = {});

}  // namespace pdm
