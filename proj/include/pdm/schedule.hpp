#pragma once

#include <Eigen/Dense>
#include <vector>

namespace pdm {

enum class ScheduleKind { linear, cosine };

struct ScheduleParams {
  double beta_start = 1e-4;  // linear only
  double beta_end = 0.02;    // linear only
  double cosine_s = 0.008;   // cosine offset
};

// Forward-chain noise rates beta_t and the quantities every loss and sampler
// derives from them. Accessors are 1-based: t runs over 1..num_steps(), with
// alpha_bar_before(1) == 1 standing in for alpha_bar_0.
//
// Invariants kept by construction:
//   alpha[t] == 1 - beta[t]
//   fresh schedules:    alpha_bar[t] == alpha[t] * alpha_bar[t-1] exactly
//   respaced schedules: alpha_bar values are copied bitwise from the source
//                       and alpha[i] == alpha_bar[i] / alpha_bar[i-1] exactly
//   posterior_variance[1] == 0 (the t=1 posterior is deterministic)
struct BetaSchedule {
  ScheduleKind kind = ScheduleKind::linear;
  Eigen::ArrayXd beta;
  Eigen::ArrayXd alpha;
  Eigen::ArrayXd alpha_bar;
  Eigen::ArrayXd posterior_variance;
  std::vector<int> timestep_map;  // original timestep behind each index

  int num_steps() const { return static_cast<int>(beta.size()); }

  double beta_at(int t) const { return beta[check(t)]; }
  double alpha_at(int t) const { return alpha[check(t)]; }
  double alpha_bar_at(int t) const { return alpha_bar[check(t)]; }
  double alpha_bar_before(int t) const { return check(t) == 0 ? 1.0 : alpha_bar[t - 2]; }
  double posterior_variance_at(int t) const { return posterior_variance[check(t)]; }

  // Posterior variance with the zero t=1 entry replaced by the t=2 value, for
  // contexts that need a strictly positive variance (log-space interpolation).
  double clipped_posterior_variance_at(int t) const {
    if (check(t) == 0) return num_steps() > 1 ? posterior_variance[1] : beta[0];
    return posterior_variance[t - 1];
  }

  int original_timestep(int t) const { return timestep_map[check(t)]; }

 private:
  int check(int t) const;  // validates 1 <= t <= num_steps(), returns t-1
};

// Builds a fresh length-T schedule. Linear: beta interpolates
// [beta_start, beta_end] inclusive. Cosine: beta_t = 1 - f(t)/f(t-1) with
// f(t) = cos^2(((t/T + s)/(1 + s)) * pi/2), clipped to at most 0.999.
BetaSchedule make_schedule(ScheduleKind kind, int T, const ScheduleParams& params = {});

// Restriction of `source` to the kept subset `steps` (1-based, strictly
// increasing). The respaced chain visits exactly the kept alpha_bar values.
BetaSchedule respace(const BetaSchedule& source, const std::vector<int>& steps);

// The `count` kept timesteps {floor(j*T/count) : j = 1..count}; always
// includes T, strictly increasing when count <= T.
std::vector<int> uniform_respacing(int T, int count);

}  // namespace pdm
