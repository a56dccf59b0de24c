#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "pdm/diffusion.hpp"
#include "pdm/rng.hpp"
#include "pdm/schedule.hpp"

using pdm::BetaSchedule;
using pdm::GaussianMoments;
using pdm::ImageTensor;
using pdm::NoisePrediction;
using pdm::ScheduleKind;
using pdm::ScheduleParams;

namespace {

BetaSchedule flat_schedule(int T, double beta) {
  ScheduleParams p;
  p.beta_start = beta;
  p.beta_end = beta;
  return pdm::make_schedule(ScheduleKind::linear, T, p);
}

ImageTensor constant(int c, int h, int w, double value) {
  ImageTensor img(c, h, w);
  img.data.setConstant(value);
  return img;
}

ImageTensor gaussian(int c, int h, int w, pdm::Rng& rng) {
  ImageTensor img(c, h, w);
  rng.fill_normal(img.data);
  return img;
}

GaussianMoments scalar_gaussian(double mean, double variance) {
  GaussianMoments g{constant(1, 1, 1, mean), Eigen::ArrayXd::Constant(1, variance)};
  return g;
}

}  // namespace

TEST_CASE("forward step and marginal match the closed forms") {
  auto s = flat_schedule(2, 0.5);
  auto x = constant(1, 2, 2, 1.0);
  auto zero = constant(1, 2, 2, 0.0);
  auto one = constant(1, 2, 2, 1.0);

  CHECK(pdm::forward_step(x, 1, s, zero).data[0] == doctest::Approx(std::sqrt(0.5)));
  CHECK(pdm::forward_step(zero, 1, s, one).data[0] == doctest::Approx(std::sqrt(0.5)));

  // alpha_bar_2 = 0.25: signal halves, noise scale is sqrt(0.75).
  CHECK(pdm::forward_marginal(x, 2, s, zero).data[0] == doctest::Approx(0.5));
  CHECK(pdm::forward_marginal(zero, 2, s, one).data[0] ==
        doctest::Approx(std::sqrt(0.75)).epsilon(1e-12));

  auto m = pdm::forward_marginal_moments(x, 2, s);
  CHECK(m.mean.data[0] == doctest::Approx(0.5));
  CHECK(m.variance_at(0) == doctest::Approx(0.75));

  ImageTensor wrong(1, 1, 1);
  wrong.data.setZero();
  CHECK_THROWS_AS(pdm::forward_step(x, 1, s, wrong), std::invalid_argument);
  CHECK_THROWS_AS(pdm::forward_marginal(x, 3, s, zero), std::invalid_argument);
}

TEST_CASE("posterior moments at the flat T=2 example") {
  auto s = flat_schedule(2, 0.5);
  auto x0 = constant(1, 1, 1, 1.0);
  auto x_t = constant(1, 1, 1, 2.0);

  auto post = pdm::posterior(x0, x_t, 2, s);
  const double coef = 0.47140452079103173;  // sqrt(0.5)*0.5/0.75 for both terms
  CHECK(post.mean.data[0] == doctest::Approx(coef * 1.0 + coef * 2.0).epsilon(1e-15));
  CHECK(post.variance_at(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  // t = 1 collapses onto x0 deterministically.
  auto first = pdm::posterior(x0, x_t, 1, s);
  CHECK(first.mean.data[0] == 1.0);
  CHECK(first.variance_at(0) == 0.0);
}

TEST_CASE("posterior coefficients satisfy c0 + sqrt(alpha_bar_t) * ct = sqrt(alpha_bar_prev)") {
  // Probing with x0 = (1, 0) and x_t = (0, 1) reads off both coefficients.
  for (auto kind : {ScheduleKind::linear, ScheduleKind::cosine}) {
    auto s = pdm::make_schedule(kind, 100);
    for (int t : {2, 17, 55, 100}) {
      ImageTensor e0(1, 1, 2), et(1, 1, 2);
      e0.data << 1.0, 0.0;
      et.data << 0.0, 1.0;
      auto post = pdm::posterior(e0, et, t, s);
      double c0 = post.mean.data[0];
      double ct = post.mean.data[1];
      CHECK(c0 + std::sqrt(s.alpha_bar_at(t)) * ct ==
            doctest::Approx(std::sqrt(s.alpha_bar_before(t))).epsilon(1e-13));
    }
  }
}

TEST_CASE("gaussian_kl closed forms") {
  CHECK(pdm::gaussian_kl(scalar_gaussian(0, 1), scalar_gaussian(0, 1)) == 0.0);
  CHECK(pdm::gaussian_kl(scalar_gaussian(0, 1), scalar_gaussian(1, 1)) ==
        doctest::Approx(0.5).epsilon(1e-15));
  CHECK(pdm::gaussian_kl(scalar_gaussian(0, 1), scalar_gaussian(0, 4)) ==
        doctest::Approx(0.3181471805599453).epsilon(1e-15));

  // KL sums over elements.
  GaussianMoments p{constant(1, 1, 2, 0.0), Eigen::ArrayXd::Constant(1, 1.0)};
  GaussianMoments q{constant(1, 1, 2, 1.0), Eigen::ArrayXd::Constant(1, 1.0)};
  CHECK(pdm::gaussian_kl(p, q) == doctest::Approx(1.0).epsilon(1e-15));

  CHECK_THROWS_AS(pdm::gaussian_kl(scalar_gaussian(0, 0), scalar_gaussian(0, 1)),
                  std::invalid_argument);
}

TEST_CASE("vlb_term covers data term, interior KL, and prior KL") {
  auto s = flat_schedule(2, 0.5);
  auto x0 = constant(1, 1, 1, 0.0);
  auto x2 = constant(1, 1, 1, 0.5);

  // Prior KL at t = T: q(x_2 | x0 = 0) = N(0, 0.75) against N(0, 1).
  double prior = pdm::vlb_term(2, x0, x2, scalar_gaussian(0, 1), s);
  CHECK(prior == doctest::Approx(0.018841036225890395).epsilon(1e-12));

  // Data term at t = 0: NLL of x0 = 0 under N(0.5, 0.25).
  double nll = pdm::vlb_term(0, x0, x2, scalar_gaussian(0.5, 0.25), s);
  double expect = 0.5 * (std::log(2.0 * std::numbers::pi * 0.25) + 0.25 / 0.25);
  CHECK(nll == doctest::Approx(expect).epsilon(1e-12));

  // Interior t: KL between the true posterior and the prediction vanishes
  // when the prediction equals the posterior (t = 2 of T = 4 avoids the
  // deterministic t = 1 slot).
  auto s4 = flat_schedule(4, 0.25);
  auto xt = constant(1, 1, 1, 0.3);
  auto post = pdm::posterior(x0, xt, 2, s4);
  CHECK(pdm::vlb_term(2, x0, xt, post, s4) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("vlb_term at the deterministic t=1 posterior") {
  auto s = flat_schedule(2, 0.5);
  auto x0 = constant(1, 1, 1, 0.7);
  auto x1 = constant(1, 1, 1, 0.2);

  GaussianMoments exact{x0, Eigen::ArrayXd::Constant(1, 0.0)};
  CHECK(pdm::vlb_term(1, x0, x1, exact, s) == 0.0);

  GaussianMoments off{constant(1, 1, 1, 0.7000001), Eigen::ArrayXd::Constant(1, 0.0)};
  CHECK(pdm::vlb_term(1, x0, x1, off, s) == std::numeric_limits<double>::infinity());
  GaussianMoments wide{x0, Eigen::ArrayXd::Constant(1, 0.1)};
  CHECK(pdm::vlb_term(1, x0, x1, wide, s) == std::numeric_limits<double>::infinity());
}

TEST_CASE("hybrid loss splits into MSE and scaled VLB") {
  auto s = flat_schedule(4, 0.25);
  pdm::Rng rng(7);
  auto x0 = gaussian(1, 2, 2, rng);
  auto eps = gaussian(1, 2, 2, rng);
  auto x_t = pdm::forward_marginal(x0, 3, s, eps);

  NoisePrediction pred(gaussian(1, 2, 2, rng));
  auto loss = pdm::hybrid_loss(eps, pred, x0, x_t, 3, s, 0.001);
  double mse = ((pred.eps.data - eps.data).square().sum()) / 4.0;
  CHECK(loss.mse == doctest::Approx(mse).epsilon(1e-13));
  CHECK(loss.total == doctest::Approx(loss.mse + 0.001 * loss.vlb).epsilon(1e-13));
  CHECK(loss.vlb > 0.0);

  // Perfect noise prediction with fixed variance: MSE 0, VLB only.
  NoisePrediction exact(eps);
  auto at_truth = pdm::hybrid_loss(eps, exact, x0, x_t, 3, s, 0.001);
  CHECK(at_truth.mse == 0.0);
  CHECK(at_truth.vlb == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("hybrid_loss_grad d_eps matches finite differences of the MSE path") {
  auto s = flat_schedule(4, 0.25);
  pdm::Rng rng(11);
  auto x0 = gaussian(1, 2, 2, rng);
  auto eps = gaussian(1, 2, 2, rng);
  auto x_t = pdm::forward_marginal(x0, 2, s, eps);
  NoisePrediction pred(gaussian(1, 2, 2, rng));

  auto g = pdm::hybrid_loss_grad(eps, pred, x0, x_t, 2, s, 0.001);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < 4; ++i) {
    NoisePrediction up = pred, dn = pred;
    up.eps.data[i] += h;
    dn.eps.data[i] -= h;
    // The mean path is stop-gradient in the hybrid objective, so the
    // reference derivative is of the MSE component alone.
    double fd = (pdm::hybrid_loss(eps, up, x0, x_t, 2, s, 0.001).mse -
                 pdm::hybrid_loss(eps, dn, x0, x_t, 2, s, 0.001).mse) /
                (2.0 * h);
    CHECK(g.d_eps[i] == doctest::Approx(fd).epsilon(1e-6));
  }
  CHECK(g.d_v.size() == 0);
}

TEST_CASE("hybrid_loss_grad d_v matches finite differences of the total") {
  auto s = flat_schedule(4, 0.25);
  pdm::Rng rng(13);
  auto x0 = gaussian(1, 2, 2, rng);
  auto eps = gaussian(1, 2, 2, rng);

  for (int t : {1, 2, 4}) {
    auto x_t = pdm::forward_marginal(x0, t, s, eps);
    ImageTensor v(1, 2, 2);
    v.data << 0.2, 0.5, 0.7, 0.9;
    NoisePrediction pred(gaussian(1, 2, 2, rng), v);

    auto g = pdm::hybrid_loss_grad(eps, pred, x0, x_t, t, s, 0.001);
    REQUIRE(g.d_v.size() == 4);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < 4; ++i) {
      NoisePrediction up = pred, dn = pred;
      up.v->data[i] += h;
      dn.v->data[i] -= h;
      double fd = (pdm::hybrid_loss(eps, up, x0, x_t, t, s, 0.001).total -
                   pdm::hybrid_loss(eps, dn, x0, x_t, t, s, 0.001).total) /
                  (2.0 * h);
      CHECK(g.d_v[i] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("importance sampler is uniform during warm-up, weighted after") {
  pdm::ImportanceSampler sampler(2, 2);
  pdm::Rng rng(3);

  auto [t0, w0] = sampler.draw(rng);
  CHECK((t0 == 1 || t0 == 2));
  CHECK(w0 == 1.0);
  CHECK_FALSE(sampler.warmed_up());

  // Fill both windows: losses 1 at t=1, 3 at t=2 give sqrt-mean ratio 1:3.
  sampler.record(1, 1.0);
  sampler.record(1, 1.0);
  sampler.record(2, 3.0);
  CHECK_FALSE(sampler.warmed_up());
  sampler.record(2, 3.0);
  CHECK(sampler.warmed_up());

  auto p = sampler.probabilities();
  CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-15));

  // Weights unbias the draw: p_t * w_t = 1/T for every t.
  for (int i = 0; i < 50; ++i) {
    auto [t, w] = sampler.draw(rng);
    double expect = t == 1 ? 2.0 : 2.0 / 3.0;
    CHECK(w == doctest::Approx(expect).epsilon(1e-15));
  }

  // The window is a ring: flooding t=2 with zeros drives its share down.
  for (int i = 0; i < 2; ++i) sampler.record(2, 0.0);
  CHECK(sampler.probabilities()[1] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("importance sampler state round-trips bit-exactly") {
  pdm::ImportanceSampler sampler(3, 2);
  sampler.record(1, 0.1);
  sampler.record(1, 1.0 / 3.0);
  sampler.record(2, 0.7);
  sampler.record(3, 1e-30);
  sampler.record(3, 12.5);

  std::stringstream buf;
  sampler.save(buf);
  auto restored = pdm::ImportanceSampler::load(buf);

  CHECK(restored.warmed_up() == sampler.warmed_up());
  auto pa = sampler.probabilities();
  auto pb = restored.probabilities();
  REQUIRE(pa.size() == pb.size());
  for (Eigen::Index i = 0; i < pa.size(); ++i) CHECK(pa[i] == pb[i]);

  // Continuing both from here stays in lockstep.
  sampler.record(2, 0.3);
  restored.record(2, 0.3);
  pdm::Rng ra(5), rb(5);
  for (int i = 0; i < 20; ++i) {
    auto [ta, wa] = sampler.draw(ra);
    auto [tb, wb] = restored.draw(rb);
    CHECK(ta == tb);
    CHECK(wa == wb);
  }
}
