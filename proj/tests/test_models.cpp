#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "nebula/calibrate.hpp"
#include "nebula/jointopt.hpp"
#include "nebula/models.hpp"
#include "nebula/rng.hpp"

#include <cmath>

using namespace nebula;
using model::DistortionParams;
using model::MtpParams;
using model::NetworkState;

namespace {

// Independent evaluation on long double with a different association order.
long double dist_oracle(long double re, long double r0, long double t1, long double t2,
                        long double t3, long double pi, long double beta) {
  return t1 / (re - r0) + pi * (t2 + t3 / beta);
}

DistortionParams example_params() {
  DistortionParams p;
  p.theta1 = 1000.0;
  p.r0_kbps = 100.0;
  p.theta2 = 500.0;
  p.theta3 = 3000.0;
  return p;
}

}  // namespace

TEST_CASE("lossless distortion collapses to the encoder term") {
  const auto p = example_params();
  const auto d = model::end_to_end_distortion(1000.0, 0.0, 3.0, p);
  CHECK(d.channel == 0.0);
  CHECK(d.propagation == 0.0);
  CHECK(d.total() == doctest::Approx(1000.0 / 900.0).epsilon(1e-12));
}

TEST_CASE("distortion spot check against independent evaluation") {
  const auto p = example_params();
  const auto d = model::end_to_end_distortion(1000.0, 0.01, 3.0, p);
  CHECK(d.encoder == doctest::Approx(1000.0 / 900.0).epsilon(1e-12));
  CHECK(d.channel == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(d.propagation == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(d.total() == doctest::Approx(16.1111111111).epsilon(1e-9));

  rng::Engine e(11);
  for (int i = 0; i < 200; ++i) {
    const double re = 300.0 + rng::uniform(e, 0.0, 6000.0);
    const double pi = rng::uniform(e, 0.0, 1.0);
    const double beta = rng::uniform(e, 0.5, 6.0);
    const double got = model::end_to_end_distortion(re, pi, beta, p).total();
    const long double want = dist_oracle(re, p.r0_kbps, p.theta1, p.theta2, p.theta3, pi, beta);
    CHECK(std::fabs(got - static_cast<double>(want)) <=
          1e-9 * std::fabs(static_cast<double>(want)));
  }
}

TEST_CASE("distortion rejects the encoder-term pole and bad beta") {
  const auto p = example_params();
  CHECK_THROWS_AS(model::end_to_end_distortion(100.0, 0.0, 3.0, p), std::domain_error);
  CHECK_THROWS_AS(model::end_to_end_distortion(50.0, 0.0, 3.0, p), std::domain_error);
  CHECK_THROWS_AS(model::end_to_end_distortion(1000.0, 0.0, 0.0, p), std::invalid_argument);
}

TEST_CASE("distortion monotonicity") {
  const auto p = example_params();
  // strictly decreasing in Re at pi = 0
  double prev = 1e100;
  for (double re = 200; re <= 6500; re += 100) {
    const double d = model::end_to_end_distortion(re, 0.0, 3.0, p).total();
    CHECK(d < prev);
    prev = d;
  }
  // strictly increasing in pi at fixed Re, beta
  prev = -1;
  for (double pi = 0.0; pi <= 1.0; pi += 0.05) {
    const double d = model::end_to_end_distortion(1000.0, pi, 3.0, p).total();
    CHECK(d > prev);
    prev = d;
  }
  // propagation term strictly decreasing in beta
  prev = 1e100;
  for (double beta = 1.0; beta <= 30.0; beta += 1.0) {
    const double d = model::end_to_end_distortion(1000.0, 0.1, beta, p).propagation;
    CHECK(d < prev);
    prev = d;
  }
}

TEST_CASE("model psnr") {
  DistortionParams p;
  CHECK(model::model_psnr_db(255.0 * 255.0, p) == doctest::Approx(0.0).epsilon(1e-12));

  const double psnr = model::model_psnr_db(42.3, p);
  const long double want = 20.0L * std::log10(255.0L) - 10.0L * std::log10(42.3L);
  CHECK(psnr == doctest::Approx(static_cast<double>(want)).epsilon(1e-9));
  CHECK(psnr == doctest::Approx(31.87).epsilon(1e-3));

  // halving distortion adds exactly 10*log10(2)
  CHECK(model::model_psnr_db(21.15, p) - psnr ==
        doctest::Approx(10.0 * std::log10(2.0)).epsilon(1e-12));

  // strictly decreasing in d
  double prev = 1e9;
  for (double d = 0.5; d < 100.0; d += 0.5) {
    const double v = model::model_psnr_db(d, p);
    CHECK(v < prev);
    prev = v;
  }
  CHECK_THROWS_AS(model::model_psnr_db(0.0, p), std::domain_error);
}

TEST_CASE("mtp estimate") {
  MtpParams p;
  p.alpha1 = 0.5;
  p.alpha2 = 0.3;
  p.alpha3 = 1.0;
  p.alpha4 = 0.04;
  CHECK(model::mtp_estimate_s(10.0, 5.0, 0.015, p) == doctest::Approx(0.165).epsilon(1e-12));

  // pipeline floor in the limit
  CHECK(model::mtp_estimate_s(1e12, 1e12, 0.0, p) == doctest::Approx(p.alpha4).epsilon(1e-9));

  // linear in Qd with slope alpha3
  const double delta = 0.013;
  CHECK(model::mtp_estimate_s(10.0, 5.0, 0.015 + delta, p) -
            model::mtp_estimate_s(10.0, 5.0, 0.015, p) ==
        doctest::Approx(p.alpha3 * delta).epsilon(1e-12));

  CHECK_THROWS_AS(model::mtp_estimate_s(0.0, 5.0, 0.0, p), std::domain_error);
  CHECK_THROWS_AS(model::mtp_estimate_s(10.0, 0.0, 0.0, p), std::domain_error);
}

TEST_CASE("frame loss rate") {
  CHECK(model::frame_loss_rate(0.0, 10) == 0.0);
  CHECK(model::frame_loss_rate(1.0, 3) == 1.0);
  CHECK(model::frame_loss_rate(0.01, 1) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(model::frame_loss_rate(0.1, 2) == doctest::Approx(0.19).epsilon(1e-12));
  CHECK_THROWS_AS(model::frame_loss_rate(-0.1, 1), std::invalid_argument);
  CHECK_THROWS_AS(model::frame_loss_rate(0.1, 0), std::invalid_argument);
}

TEST_CASE("network state derives and checks qd") {
  const auto s = model::NetworkState::make(5.0, 0.01, 0.035, 0.020, 0.1);
  CHECK(s.qd_s == doctest::Approx(0.015));
  CHECK_THROWS_AS(model::NetworkState::make(5.0, 1.5, 0.03, 0.02, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(model::NetworkState::make(5.0, 0.1, 0.01, 0.02, 0.1), std::invalid_argument);
}

TEST_CASE("shipped defaults reproduce the calibration fits") {
  const auto dfit = calib::fit_distortion();
  const auto dp = DistortionParams::defaults();
  CHECK(dp.theta1 == doctest::Approx(dfit.theta1).epsilon(1e-9));
  CHECK(dp.r0_kbps == doctest::Approx(dfit.r0_kbps).epsilon(1e-9));

  const auto mfit = calib::fit_mtp(1);
  const auto mp = MtpParams::defaults();
  CHECK(mp.alpha1 == doctest::Approx(mfit.params.alpha1).epsilon(1e-9));
  CHECK(mp.alpha2 == doctest::Approx(mfit.params.alpha2).epsilon(1e-9));
  CHECK(mp.alpha3 == doctest::Approx(mfit.params.alpha3).epsilon(1e-9));
  CHECK(mp.alpha4 == doctest::Approx(mfit.params.alpha4).epsilon(1e-9));
  CHECK(mfit.r2 > 0.5);
  CHECK(mfit.samples > 500);
}

TEST_CASE("calibrated defaults keep the ladder distortion non-monotone at pi=0.001") {
  // Defaults reproduce the calibration fit.
  const auto fit = calib::fit_distortion();
  const auto p = DistortionParams::defaults();
  CHECK(p.theta1 == doctest::Approx(fit.theta1).epsilon(1e-9));
  CHECK(p.r0_kbps == doctest::Approx(fit.r0_kbps).epsilon(1e-9));

  const auto ladder = ctrl::RateLadder::default_ladder();
  const double pi = 0.001, payload = 1500.0, fps = 30.0, beta = 3.0;
  std::vector<double> d;
  for (int lvl = 0; lvl < ladder.size(); ++lvl) {
    const int k = static_cast<int>(std::ceil(ladder.rate(lvl) * 1e6 / (8.0 * fps) / payload));
    const double pi_frame = model::frame_loss_rate(pi, k);
    d.push_back(
        model::end_to_end_distortion(ladder.rate(lvl) * 1000.0, pi_frame, beta, p).total());
  }
  // strictly decreasing, then strictly increasing, minimum interior
  int min_idx = 0;
  for (size_t i = 1; i < d.size(); ++i)
    if (d[i] < d[static_cast<size_t>(min_idx)]) min_idx = static_cast<int>(i);
  CHECK(min_idx > 0);
  CHECK(min_idx < static_cast<int>(d.size()) - 1);
  for (int i = 1; i <= min_idx; ++i)
    CHECK(d[static_cast<size_t>(i)] < d[static_cast<size_t>(i - 1)]);
  for (size_t i = static_cast<size_t>(min_idx) + 1; i < d.size(); ++i) CHECK(d[i] > d[i - 1]);
}

TEST_CASE("joint grid: lossless with slack picks the top level at zero redundancy") {
  ctrl::ControllerConfig cfg;
  const auto ladder = ctrl::RateLadder::default_ladder();
  const auto state = NetworkState::make(100.0, 0.0, 0.020, 0.020, 0.05);
  const auto sol = jointopt::solve_joint_grid(state, ladder, DistortionParams::defaults(),
                                              MtpParams::defaults(), cfg);
  REQUIRE(sol.feasible);
  CHECK(sol.best.level == ladder.top());
  CHECK(sol.best.rr_mbps == 0.0);
}

TEST_CASE("joint grid: starved link is infeasible") {
  ctrl::ControllerConfig cfg;
  const auto ladder = ctrl::RateLadder::default_ladder();
  const auto state = NetworkState::make(0.1, 0.05, 0.020, 0.020, 0.05);
  const auto sol = jointopt::solve_joint_grid(state, ladder, DistortionParams::defaults(),
                                              MtpParams::defaults(), cfg);
  CHECK_FALSE(sol.feasible);
}

TEST_CASE("joint grid optimum beats every feasible grid point (100 seeded states)") {
  ctrl::ControllerConfig cfg;
  const auto ladder = ctrl::RateLadder::default_ladder();
  const auto dp = DistortionParams::defaults();
  const auto mp = MtpParams::defaults();

  rng::Engine e(99);
  int feasible_states = 0;
  for (int i = 0; i < 100; ++i) {
    const double rtt_min = rng::uniform(e, 0.005, 0.05);
    const auto state = NetworkState::make(rng::uniform(e, 0.3, 12.0), rng::uniform(e, 0.0, 0.2),
                                          rtt_min + rng::uniform(e, 0.0, 0.1), rtt_min,
                                          rng::uniform(e, 0.02, 0.3));
    const auto sol = jointopt::solve_joint_grid(state, ladder, dp, mp, cfg);
    // Full re-scan: the reported best must satisfy both constraints and
    // weakly dominate every feasible point.
    for (const auto& pt : sol.grid) {
      if (!pt.feasible) continue;
      REQUIRE(sol.feasible);
      CHECK(sol.best.objective <= pt.objective + 1e-12);
    }
    if (sol.feasible) {
      ++feasible_states;
      CHECK(sol.best.mtp_s <= cfg.td_s);
      CHECK(sol.best.re_mbps + sol.best.rr_mbps <= state.mu_mbps);
    }
  }
  CHECK(feasible_states > 10);  // the state generator must exercise both outcomes
  CHECK(feasible_states < 100);
}
