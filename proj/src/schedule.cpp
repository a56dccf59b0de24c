#include "pdm/schedule.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace pdm {

int BetaSchedule::check(int t) const {
  if (t < 1 || t > num_steps())
    throw std::invalid_argument("BetaSchedule: timestep " + std::to_string(t) +
                                " outside 1.." + std::to_string(num_steps()));
  return t - 1;
}

namespace {

// Fills alpha, alpha_bar and posterior_variance from beta so that the
// recursion alpha_bar[i] = alpha[i] * alpha_bar[i-1] holds exactly.
void derive_from_beta(BetaSchedule& s) {
  const Eigen::Index n = s.beta.size();
  s.alpha = 1.0 - s.beta;
  s.alpha_bar.resize(n);
  s.posterior_variance.resize(n);
  double running = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double prev = running;
    running *= s.alpha[i];
    s.alpha_bar[i] = running;
    s.posterior_variance[i] = s.beta[i] * (1.0 - prev) / (1.0 - running);
  }
}

void check_betas(const Eigen::ArrayXd& beta) {
  for (Eigen::Index i = 0; i < beta.size(); ++i) {
    if (!(beta[i] > 0.0 && beta[i] < 1.0))
      throw std::invalid_argument("schedule: beta[" + std::to_string(i + 1) +
                                  "] = " + std::to_string(beta[i]) + " outside (0, 1)");
  }
}

}  // namespace

BetaSchedule make_schedule(ScheduleKind kind, int T, const ScheduleParams& params) {
  if (T < 1) throw std::invalid_argument("make_schedule: T must be at least 1");

  BetaSchedule s;
  s.kind = kind;
  s.beta.resize(T);

  if (kind == ScheduleKind::linear) {
    if (!(params.beta_start > 0.0) || !(params.beta_end < 1.0) ||
        !(params.beta_start <= params.beta_end))
      throw std::invalid_argument("make_schedule: need 0 < beta_start <= beta_end < 1");
    if (T == 1) {
      s.beta[0] = params.beta_start;
    } else {
      for (int t = 0; t < T; ++t)
        s.beta[t] = params.beta_start +
                    (params.beta_end - params.beta_start) * t / static_cast<double>(T - 1);
    }
  } else {
    if (!(params.cosine_s > 0.0))
      throw std::invalid_argument("make_schedule: cosine offset s must be positive");
    const double s_off = params.cosine_s;
    auto f = [&](double t) {
      double u = (t / T + s_off) / (1.0 + s_off) * std::numbers::pi / 2.0;
      double c = std::cos(u);
      return c * c;
    };
    double f_prev = f(0.0);
    for (int t = 1; t <= T; ++t) {
      double f_t = f(static_cast<double>(t));
      s.beta[t - 1] = std::min(1.0 - f_t / f_prev, 0.999);
      f_prev = f_t;
    }
  }

  check_betas(s.beta);
  derive_from_beta(s);
  s.timestep_map.resize(T);
  std::iota(s.timestep_map.begin(), s.timestep_map.end(), 1);
  return s;
}

BetaSchedule respace(const BetaSchedule& source, const std::vector<int>& steps) {
  if (steps.empty()) throw std::invalid_argument("respace: kept subset is empty");
  const int T = source.num_steps();
  int prev = 0;
  for (int t : steps) {
    if (t < 1 || t > T)
      throw std::invalid_argument("respace: kept step " + std::to_string(t) +
                                  " outside 1.." + std::to_string(T));
    if (t <= prev) throw std::invalid_argument("respace: kept steps must be strictly increasing");
    prev = t;
  }

  const int m = static_cast<int>(steps.size());
  BetaSchedule s;
  s.kind = source.kind;
  s.beta.resize(m);
  s.alpha.resize(m);
  s.alpha_bar.resize(m);
  s.posterior_variance.resize(m);
  s.timestep_map.resize(m);

  // alpha_bar is copied bitwise; alpha/beta are re-derived so the respaced
  // chain has exactly the same marginals at the kept steps.
  double prev_bar = 1.0;
  for (int i = 0; i < m; ++i) {
    double bar = source.alpha_bar_at(steps[i]);
    s.alpha_bar[i] = bar;
    s.alpha[i] = bar / prev_bar;
    s.beta[i] = 1.0 - s.alpha[i];
    s.posterior_variance[i] = s.beta[i] * (1.0 - prev_bar) / (1.0 - bar);
    s.timestep_map[i] = source.original_timestep(steps[i]);
    prev_bar = bar;
  }

  check_betas(s.beta);
  return s;
}

std::vector<int> uniform_respacing(int T, int count) {
  if (count < 1 || count > T)
    throw std::invalid_argument("uniform_respacing: count must be in 1..T");
  std::vector<int> steps(count);
  for (int j = 1; j <= count; ++j)
    steps[j - 1] = static_cast<int>((static_cast<long long>(j) * T) / count);
  return steps;
}

}  // namespace pdm
