#include "pdm/diffusion.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>

#include "pdm/sampler.hpp"

namespace pdm {

ImageTensor forward_step(const ImageTensor& x_prev, int t, const BetaSchedule& schedule,
                         const ImageTensor& noise) {
  require_same_shape(x_prev, noise, "forward_step");
  const double beta = schedule.beta_at(t);
  ImageTensor out = x_prev;
  out.data = std::sqrt(1.0 - beta) * x_prev.data + std::sqrt(beta) * noise.data;
  return out;
}

GaussianMoments forward_marginal_moments(const ImageTensor& x0, int t,
                                         const BetaSchedule& schedule) {
  const double bar = schedule.alpha_bar_at(t);
  GaussianMoments m;
  m.mean = x0;
  m.mean.data = std::sqrt(bar) * x0.data;
  m.variance = Eigen::ArrayXd::Constant(1, 1.0 - bar);
  return m;
}

ImageTensor forward_marginal(const ImageTensor& x0, int t, const BetaSchedule& schedule,
                             const ImageTensor& noise) {
  require_same_shape(x0, noise, "forward_marginal");
  const double bar = schedule.alpha_bar_at(t);
  ImageTensor out = x0;
  out.data = std::sqrt(bar) * x0.data + std::sqrt(1.0 - bar) * noise.data;
  return out;
}

GaussianMoments posterior(const ImageTensor& x0, const ImageTensor& x_t, int t,
                          const BetaSchedule& schedule) {
  require_same_shape(x0, x_t, "posterior");
  const double beta = schedule.beta_at(t);
  const double bar = schedule.alpha_bar_at(t);
  const double bar_prev = schedule.alpha_bar_before(t);
  const double c0 = std::sqrt(bar_prev) * beta / (1.0 - bar);
  const double ct = std::sqrt(schedule.alpha_at(t)) * (1.0 - bar_prev) / (1.0 - bar);
  GaussianMoments m;
  m.mean = x0;
  m.mean.data = c0 * x0.data + ct * x_t.data;
  m.variance = Eigen::ArrayXd::Constant(1, schedule.posterior_variance_at(t));
  return m;
}

namespace {

// KL between scalar Gaussians, in nats.
double kl_scalar(double mu1, double var1, double mu2, double var2) {
  double d = mu1 - mu2;
  return 0.5 * (std::log(var2 / var1) + (var1 + d * d) / var2 - 1.0);
}

void require_positive_variance(const GaussianMoments& g, const char* who) {
  for (Eigen::Index i = 0; i < g.variance.size(); ++i)
    if (!(g.variance[i] > 0.0))
      throw std::invalid_argument(std::string(who) + ": variance must be strictly positive, got " +
                                  std::to_string(g.variance[i]));
}

// Gaussian NLL of x0 under `predicted`, nats per element.
double data_term(const ImageTensor& x0, const GaussianMoments& predicted) {
  require_same_shape(x0, predicted.mean, "vlb_term");
  require_positive_variance(predicted, "vlb_term: data term");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    double var = predicted.variance_at(i);
    double d = x0.data[i] - predicted.mean.data[i];
    acc += 0.5 * std::log(2.0 * std::numbers::pi * var) + d * d / (2.0 * var);
  }
  return acc / static_cast<double>(x0.size());
}

// KL(q(x_{t-1} | x_t, x0) || predicted), nats per element, for 1 <= t <= T.
// Handles the deterministic t = 1 posterior.
double posterior_vs_predicted(int t, const ImageTensor& x0, const ImageTensor& x_t,
                              const GaussianMoments& predicted, const BetaSchedule& schedule) {
  GaussianMoments post = posterior(x0, x_t, t, schedule);
  require_same_shape(post.mean, predicted.mean, "vlb_term");
  const double n = static_cast<double>(post.mean.size());

  if (schedule.posterior_variance_at(t) == 0.0) {
    // Deterministic target: zero KL iff the prediction is the same point mass.
    bool same_mean = (post.mean.data == predicted.mean.data).all();
    bool zero_var = (predicted.variance == 0.0).all();
    if (same_mean && zero_var) return 0.0;
    return std::numeric_limits<double>::infinity();
  }

  require_positive_variance(predicted, "vlb_term");
  const double var1 = post.variance[0];
  double acc = 0.0;
  for (Eigen::Index i = 0; i < post.mean.size(); ++i)
    acc += kl_scalar(post.mean.data[i], var1, predicted.mean.data[i], predicted.variance_at(i));
  return acc / n;
}

}  // namespace

double gaussian_kl(const GaussianMoments& p, const GaussianMoments& q) {
  require_same_shape(p.mean, q.mean, "gaussian_kl");
  require_positive_variance(p, "gaussian_kl");
  require_positive_variance(q, "gaussian_kl");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.mean.size(); ++i)
    acc += kl_scalar(p.mean.data[i], p.variance_at(i), q.mean.data[i], q.variance_at(i));
  return acc;
}

double vlb_term(int t, const ImageTensor& x0, const ImageTensor& x_t,
                const GaussianMoments& predicted, const BetaSchedule& schedule) {
  const int T = schedule.num_steps();
  if (t < 0 || t > T)
    throw std::invalid_argument("vlb_term: t outside 0.." + std::to_string(T));

  if (t == 0) return data_term(x0, predicted);

  if (t == T) {
    // Prior term: KL(q(x_T | x0) || N(0, I)).
    const double bar = schedule.alpha_bar_at(T);
    const double var1 = 1.0 - bar;
    const double scale = std::sqrt(bar);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < x0.size(); ++i)
      acc += kl_scalar(scale * x0.data[i], var1, 0.0, 1.0);
    return acc / static_cast<double>(x0.size());
  }

  return posterior_vs_predicted(t, x0, x_t, predicted, schedule);
}

HybridLoss hybrid_loss(const ImageTensor& eps_true, const NoisePrediction& prediction,
                       const ImageTensor& x0, const ImageTensor& x_t, int t,
                       const BetaSchedule& schedule, double lambda) {
  return hybrid_loss_grad(eps_true, prediction, x0, x_t, t, schedule, lambda).value;
}

HybridLossGrad hybrid_loss_grad(const ImageTensor& eps_true, const NoisePrediction& prediction,
                                const ImageTensor& x0, const ImageTensor& x_t, int t,
                                const BetaSchedule& schedule, double lambda) {
  require_same_shape(eps_true, prediction.eps, "hybrid_loss");
  require_same_shape(x0, x_t, "hybrid_loss");
  if (t < 1 || t > schedule.num_steps())
    throw std::invalid_argument("hybrid_loss: t outside 1..T");
  if (!(lambda >= 0.0)) throw std::invalid_argument("hybrid_loss: lambda must be non-negative");

  const double n = static_cast<double>(eps_true.size());

  HybridLossGrad out;
  out.d_eps = 2.0 / n * (prediction.eps.data - eps_true.data);
  out.value.mse = (prediction.eps.data - eps_true.data).square().mean();

  GaussianMoments predicted = reverse_moments(x_t, prediction, t, schedule,
                                              prediction.learned_variance
                                                  ? VarianceMode::learned
                                                  : VarianceMode::fixed_beta_tilde);
  if (t == 1 && !prediction.learned_variance) {
    // beta_tilde_1 = 0 cannot price the data term; use the clipped value,
    // the same floor the learned interpolation stands on.
    predicted.variance = Eigen::ArrayXd::Constant(1, schedule.clipped_posterior_variance_at(1));
  }

  if (t == 1) {
    // Data term: NLL of x0 under the predicted final transition.
    out.value.vlb = data_term(x0, predicted);
  } else {
    out.value.vlb = posterior_vs_predicted(t, x0, x_t, predicted, schedule);
  }
  out.value.total = out.value.mse + lambda * out.value.vlb;

  if (prediction.learned_variance) {
    // d vlb / d sigma2, then through sigma2 = beta^v * beta_tilde_c^(1-v).
    // The mean path is stop-gradient, so d_eps stays MSE-only.
    const double log_ratio =
        std::log(schedule.beta_at(t)) - std::log(schedule.clipped_posterior_variance_at(t));
    GaussianMoments target =
        t == 1 ? GaussianMoments{x0, Eigen::ArrayXd()} : posterior(x0, x_t, t, schedule);
    const double var1 = t == 1 ? 0.0 : target.variance[0];
    out.d_v.resize(eps_true.size());
    for (Eigen::Index i = 0; i < eps_true.size(); ++i) {
      double s2 = predicted.variance_at(i);
      double d = target.mean.data[i] - predicted.mean.data[i];
      // Both the KL (t >= 2) and the NLL (t = 1) have the same derivative
      // shape in the predicted variance.
      double d_s2 = 0.5 / s2 - (var1 + d * d) / (2.0 * s2 * s2);
      out.d_v[i] = lambda / n * d_s2 * s2 * log_ratio;
    }
  } else {
    out.d_v.resize(0);
  }
  return out;
}

ImportanceSampler::ImportanceSampler(int num_steps, int history)
    : num_steps_(num_steps), history_(history), window_(static_cast<size_t>(num_steps)) {
  if (num_steps < 1) throw std::invalid_argument("ImportanceSampler: num_steps must be positive");
  if (history < 1) throw std::invalid_argument("ImportanceSampler: history must be positive");
  sum_sq_ = Eigen::ArrayXd::Zero(num_steps);
}

Eigen::ArrayXd ImportanceSampler::probabilities() const {
  if (!warm_) return Eigen::ArrayXd::Constant(num_steps_, 1.0 / num_steps_);
  Eigen::ArrayXd p(num_steps_);
  for (int i = 0; i < num_steps_; ++i)
    p[i] = std::sqrt(sum_sq_[i] / static_cast<double>(window_[i].size()));
  double total = p.sum();
  if (!(total > 0.0)) return Eigen::ArrayXd::Constant(num_steps_, 1.0 / num_steps_);
  return p / total;
}

std::pair<int, double> ImportanceSampler::draw(Rng& rng) {
  if (!warm_) {
    int t = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(num_steps_))) + 1;
    return {t, 1.0};
  }
  Eigen::ArrayXd p = probabilities();
  double u = rng.uniform();
  double acc = 0.0;
  int t = num_steps_;  // guard against accumulated rounding
  for (int i = 0; i < num_steps_; ++i) {
    acc += p[i];
    if (u < acc) {
      t = i + 1;
      break;
    }
  }
  return {t, 1.0 / (num_steps_ * p[t - 1])};
}

void ImportanceSampler::record(int t, double loss) {
  if (t < 1 || t > num_steps_) throw std::invalid_argument("ImportanceSampler: t outside 1..T");
  auto& w = window_[static_cast<size_t>(t - 1)];
  w.push_back(loss * loss);
  if (static_cast<int>(w.size()) > history_) w.pop_front();
  // Fresh left-to-right sum: keeps the value a pure function of the window
  // contents, so a reloaded checkpoint reproduces it bitwise.
  double s = 0.0;
  for (double v : w) s += v;
  sum_sq_[t - 1] = s;
  if (!warm_) {
    warm_ = true;
    for (const auto& q : window_)
      if (static_cast<int>(q.size()) < history_) {
        warm_ = false;
        break;
      }
  }
}

void ImportanceSampler::save(std::ostream& os) const {
  os << num_steps_ << " " << history_ << "\n";
  os.precision(17);
  for (const auto& w : window_) {
    os << w.size();
    for (double v : w) os << " " << std::hexfloat << v << std::defaultfloat;
    os << "\n";
  }
}

ImportanceSampler ImportanceSampler::load(std::istream& is) {
  int n = 0, h = 0;
  is >> n >> h;
  if (is.fail() || n < 1 || h < 1)
    throw std::invalid_argument("ImportanceSampler::load: malformed header");
  ImportanceSampler s(n, h);
  for (int t = 1; t <= n; ++t) {
    size_t count = 0;
    is >> count;
    for (size_t i = 0; i < count; ++i) {
      std::string tok;
      is >> tok;
      double sq = std::strtod(tok.c_str(), nullptr);
      auto& w = s.window_[static_cast<size_t>(t - 1)];
      w.push_back(sq);
      s.sum_sq_[t - 1] += sq;
    }
  }
  if (is.fail()) throw std::invalid_argument("ImportanceSampler::load: truncated state");
  s.warm_ = true;
  for (const auto& q : s.window_)
    if (static_cast<int>(q.size()) < s.history_) {
      s.warm_ = false;
      break;
    }
  return s;
}

}  // namespace pdm
