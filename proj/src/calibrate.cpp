#include "nebula/calibrate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

#include "nebula/controller.hpp"
#include "nebula/harness.hpp"
#include "nebula/pipeline.hpp"
#include "nebula/synthetic_encoder.hpp"

namespace nebula::calib {

DistortionFit fit_distortion() {
  const auto ladder = ctrl::RateLadder::default_ladder();
  std::vector<double> re_kbps, mse;
  for (int lvl = 0; lvl < ladder.size(); ++lvl) {
    re_kbps.push_back(ladder.rate(lvl) * 1000.0);
    const double psnr = synth::SyntheticEncoder::reference_psnr_db(lvl);
    mse.push_back(255.0 * 255.0 / std::pow(10.0, psnr / 10.0));
  }

  // theta1 is closed-form for a fixed R0; scan R0 >= 0 below the lowest rate.
  DistortionFit best;
  best.sse = -1.0;
  best.points = static_cast<int>(re_kbps.size());
  const double r0_max = *std::min_element(re_kbps.begin(), re_kbps.end()) - 1.0;
  for (double r0 = 0.0; r0 <= r0_max; r0 += 0.25) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < re_kbps.size(); ++i) {
      const double x = 1.0 / (re_kbps[i] - r0);
      num += mse[i] * x;
      den += x * x;
    }
    const double theta1 = num / den;
    double sse = 0.0;
    for (size_t i = 0; i < re_kbps.size(); ++i) {
      const double e = mse[i] - theta1 / (re_kbps[i] - r0);
      sse += e * e;
    }
    if (best.sse < 0 || sse < best.sse) {
      best.theta1 = theta1;
      best.r0_kbps = r0;
      best.sse = sse;
    }
  }
  return best;
}

namespace {

// 4x4 linear solve, partial pivoting. Small enough to keep local.
std::array<double, 4> solve4(std::array<std::array<double, 4>, 4> a, std::array<double, 4> b) {
  for (int col = 0; col < 4; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    if (std::fabs(a[col][col]) < 1e-12)
      throw std::runtime_error("calibrate: singular regression system");
    for (int r = col + 1; r < 4; ++r) {
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < 4; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::array<double, 4> x{};
  for (int r = 3; r >= 0; --r) {
    double acc = b[r];
    for (int c = r + 1; c < 4; ++c) acc -= a[r][c] * x[c];
    x[r] = acc / a[r][r];
  }
  return x;
}

struct Row {
  double inv_mu, inv_r, qd, mtp;
};

void collect_rows(const harness::ExperimentConfig& cfg, uint64_t seed, std::vector<Row>& rows) {
  const auto out = harness::run_one(cfg, seed, "");
  const auto& r = out.session;

  double rtt_min = 0.0;
  for (const auto& npr : r.nprs) {
    const double rtt = npr.pkt.rtt_us / 1e6;
    if (rtt > 0 && (rtt_min == 0.0 || rtt < rtt_min)) rtt_min = rtt;
  }

  const double rate =
      cfg.ladder.rate(cfg.fixed_level < 0 ? cfg.ladder.top() : cfg.fixed_level);
  size_t npr_idx = 0;
  for (const auto& disp : r.displays) {
    if (!disp.mtp_s) continue;
    while (npr_idx < r.nprs.size() && r.nprs[npr_idx].t <= disp.display_t) ++npr_idx;
    if (npr_idx == 0) continue;
    const auto& npr = r.nprs[npr_idx - 1].pkt;
    const double mu = npr.mu_mbps();
    const double rtt = npr.rtt_us / 1e6;
    if (mu <= 0 || rtt <= 0) continue;
    rows.push_back({1.0 / mu, 1.0 / rate, std::max(0.0, rtt - rtt_min), *disp.mtp_s});
  }
}

}  // namespace

MtpFit fit_mtp(uint64_t seed) {
  std::vector<Row> rows;

  // Fixed-rate runs across the bandwidth range: every comfortably feasible
  // ladder level per bandwidth (decorrelating 1/mu from 1/R) plus one run at
  // or above the line rate so queue pressure puts spread into Qd.
  const auto ladder = ctrl::RateLadder::default_ladder();
  for (double bw : {2.0, 4.0, 6.0, 8.0, 10.0}) {
    std::vector<int> levels;
    int pressure = -1;
    for (int lvl = 0; lvl < ladder.size(); ++lvl) {
      if (ladder.rate(lvl) + 0.4 <= bw) levels.push_back(lvl);
      if (pressure < 0 && ladder.rate(lvl) >= 0.95 * bw) pressure = lvl;
    }
    if (pressure >= 0) levels.push_back(pressure);
    for (int lvl : levels) {
      harness::ExperimentConfig cfg;
      cfg.mode = pipeline::Mode::fixed;
      cfg.duration_s = 12.0;
      cfg.fixed_level = lvl;
      cfg.event_rate_hz = 4.0;
      cfg.link.schedule = {{0.0, bw}};
      cfg.link.loss = netlab::GilbertParams{};  // lossless for the latency fit
      cfg.link.seed = 0;
      collect_rows(cfg, rng::derive_seed(seed, static_cast<uint64_t>(bw * 16 + lvl)), rows);
    }
  }
  if (rows.size() < 16) throw std::runtime_error("calibrate: too few MTP samples");

  // Least squares with the model's sign constraints (reciprocal and queuing
  // coefficients are rates/delays, so nonnegative): active-set style, pin
  // the most negative coefficient to zero and re-solve.
  std::array<std::array<double, 4>, 4> a{};
  std::array<double, 4> b{};
  for (const auto& row : rows) {
    const std::array<double, 4> x{row.inv_mu, row.inv_r, row.qd, 1.0};
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) a[i][j] += x[i] * x[j];
      b[i] += x[i] * row.mtp;
    }
  }
  std::array<bool, 4> pinned{};
  std::array<double, 4> x{};
  for (int pass = 0; pass < 4; ++pass) {
    auto ap = a;
    auto bp = b;
    for (int i = 0; i < 4; ++i) {
      if (!pinned[i]) continue;
      for (int j = 0; j < 4; ++j) ap[i][j] = ap[j][i] = 0.0;
      ap[i][i] = 1.0;
      bp[i] = 0.0;
    }
    for (int i = 0; i < 4; ++i) ap[i][i] += 1e-9;
    x = solve4(ap, bp);
    int worst = -1;
    for (int i = 0; i < 3; ++i)  // the constant alpha4 stays free
      if (x[i] < 0 && (worst < 0 || x[i] < x[worst])) worst = i;
    if (worst < 0) break;
    pinned[worst] = true;
  }

  MtpFit fit;
  fit.params = model::MtpParams::defaults();
  fit.params.alpha1 = x[0];
  fit.params.alpha2 = x[1];
  fit.params.alpha3 = x[2];
  fit.params.alpha4 = x[3];
  fit.samples = static_cast<int>(rows.size());

  double mean = 0.0;
  for (const auto& row : rows) mean += row.mtp;
  mean /= static_cast<double>(rows.size());
  double sse = 0.0, sst = 0.0;
  for (const auto& row : rows) {
    const double pred = x[0] * row.inv_mu + x[1] * row.inv_r + x[2] * row.qd + x[3];
    sse += (row.mtp - pred) * (row.mtp - pred);
    sst += (row.mtp - mean) * (row.mtp - mean);
  }
  fit.r2 = sst > 0 ? 1.0 - sse / sst : 1.0;
  return fit;
}

std::string profile_json_text(const DistortionFit& d, const MtpFit& m) {
  const auto dflt = model::DistortionParams::defaults();
  char buf[640];
  std::snprintf(buf, sizeof(buf),
                "{\n"
                "  \"distortion\": {\n"
                "    \"theta1\": %.6f,\n"
                "    \"r0_kbps\": %.6f,\n"
                "    \"theta2\": %.6f,\n"
                "    \"theta3\": %.6f,\n"
                "    \"max_pixel\": %.1f\n"
                "  },\n"
                "  \"mtp\": {\n"
                "    \"alpha1\": %.6f,\n"
                "    \"alpha2\": %.6f,\n"
                "    \"alpha3\": %.6f,\n"
                "    \"alpha4\": %.6f,\n"
                "    \"phi\": %.1f\n"
                "  }\n"
                "}\n",
                d.theta1, d.r0_kbps, dflt.theta2, dflt.theta3, dflt.max_pixel, m.params.alpha1,
                m.params.alpha2, m.params.alpha3, m.params.alpha4, m.params.phi);
  return buf;
}

}  // namespace nebula::calib
