#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <utility>
#include <vector>

#include "pdm/image.hpp"
#include "pdm/prediction.hpp"
#include "pdm/rng.hpp"
#include "pdm/schedule.hpp"

namespace pdm {

// Diagonal Gaussian over an image: per-pixel mean plus a variance array that
// is either a single shared scalar (size 1) or one entry per pixel.
struct GaussianMoments {
  ImageTensor mean;
  Eigen::ArrayXd variance;

  double variance_at(Eigen::Index i) const {
    return variance.size() == 1 ? variance[0] : variance[i];
  }
};

// One step of the forward chain: q(x_t | x_{t-1}) sampled with the given
// standard-normal noise field.
ImageTensor forward_step(const ImageTensor& x_prev, int t, const BetaSchedule& schedule,
                         const ImageTensor& noise);

// Closed-form marginal q(x_t | x_0), sampled with the given noise field.
// Also returns the noise scale pair via the moments overload below.
ImageTensor forward_marginal(const ImageTensor& x0, int t, const BetaSchedule& schedule,
                             const ImageTensor& noise);

// Mean and (shared scalar) variance of q(x_t | x_0).
GaussianMoments forward_marginal_moments(const ImageTensor& x0, int t,
                                         const BetaSchedule& schedule);

// Moments of the forward posterior q(x_{t-1} | x_t, x_0). Variance is the
// shared scalar beta_tilde_t; it is exactly zero at t = 1.
GaussianMoments posterior(const ImageTensor& x0, const ImageTensor& x_t, int t,
                          const BetaSchedule& schedule);

// KL(p || q) in nats between diagonal Gaussians, summed over elements.
// All variances must be strictly positive.
double gaussian_kl(const GaussianMoments& p, const GaussianMoments& q);

// One term of the variational bound, in nats per element (mean over pixels):
//   t = 0       Gaussian NLL of x0 under `predicted` (the data term)
//   1 <= t < T  KL(q(x_{t-1} | x_t, x0) || predicted)
//   t = T       KL(q(x_T | x0) || N(0, I)); `predicted` is ignored
// The t = 1 posterior is deterministic: the KL is zero when `predicted` is
// also deterministic with the identical mean, infinite otherwise.
double vlb_term(int t, const ImageTensor& x0, const ImageTensor& x_t,
                const GaussianMoments& predicted, const BetaSchedule& schedule);

struct HybridLoss {
  double total = 0.0;
  double mse = 0.0;
  double vlb = 0.0;
};

// Training loss at timestep t: mean squared noise error plus lambda times the
// VLB term for the predicted reverse transition (the data term when t = 1).
// Per the hybrid objective, the VLB term treats the reverse mean as fixed;
// only the variance channel feeds it in the gradient version below.
HybridLoss hybrid_loss(const ImageTensor& eps_true, const NoisePrediction& prediction,
                       const ImageTensor& x0, const ImageTensor& x_t, int t,
                       const BetaSchedule& schedule, double lambda);

struct HybridLossGrad {
  HybridLoss value;
  Eigen::ArrayXd d_eps;  // d total / d eps_hat (MSE path only: mean is stop-gradient)
  Eigen::ArrayXd d_v;    // d total / d v (VLB path; zero-sized when variance is fixed)
};

HybridLossGrad hybrid_loss_grad(const ImageTensor& eps_true, const NoisePrediction& prediction,
                                const ImageTensor& x0, const ImageTensor& x_t, int t,
                                const BetaSchedule& schedule, double lambda);

// Loss-aware timestep sampler. Keeps the last `history` squared losses per
// timestep; once every timestep has a full window, draws t with probability
// proportional to sqrt(mean of stored squared losses) and returns the
// importance weight 1 / (T * p_t). Uniform with weight 1 during warm-up.
class ImportanceSampler {
 public:
  explicit ImportanceSampler(int num_steps, int history = 10);

  std::pair<int, double> draw(Rng& rng);
  void record(int t, double loss);
  bool warmed_up() const { return warm_; }
  Eigen::ArrayXd probabilities() const;

  void save(std::ostream& os) const;
  static ImportanceSampler load(std::istream& is);

 private:
  int num_steps_;
  int history_;
  bool warm_ = false;
  std::vector<std::deque<double>> window_;  // squared losses, newest last
  Eigen::ArrayXd sum_sq_;                   // running sums of window_ entries
};

}  // namespace pdm
