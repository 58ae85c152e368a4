#include "nebula/jointopt.hpp"

#include <algorithm>
#include <cmath>

namespace nebula::jointopt {

namespace {

// Redundancy rates the frame sizing rule implies at this level and loss
// rate, one candidate per FEC mode (deduplicated). pi == 0 collapses to the
// single candidate Rr = 0.
std::vector<double> redundancy_candidates(int k, double pi, const ctrl::ControllerConfig& cfg) {
  if (pi == 0.0) return {0.0};
  std::vector<double> out;
  for (ctrl::FecMode mode :
       {ctrl::FecMode::cut_dd, ctrl::FecMode::uniform, ctrl::FecMode::gop_level}) {
    ctrl::ControllerConfig c = cfg;
    c.fec_mode = mode;
    double r_bar = 0.0;
    if (mode == ctrl::FecMode::gop_level) {
      const int k_gop = k * c.gop_len;
      r_bar = static_cast<double>(ctrl::fec_packet_count(k_gop, pi, 0, c) - k_gop) / c.gop_len;
    } else {
      for (int f = 0; f < c.gop_len; ++f) r_bar += ctrl::fec_packet_count(k, pi, f, c) - k;
      r_bar /= c.gop_len;
    }
    const double rr = ctrl::redundancy_rate_mbps(r_bar, c);
    if (std::none_of(out.begin(), out.end(),
                     [&](double v) { return std::abs(v - rr) < 1e-12; }))
      out.push_back(rr);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

Solution solve_joint_grid(const model::NetworkState& state, const ctrl::RateLadder& ladder,
                          const model::DistortionParams& dp, const model::MtpParams& mp,
                          const ctrl::ControllerConfig& cfg) {
  ladder.validate();
  state.validate();

  Solution sol;
  for (int level = 0; level < ladder.size(); ++level) {
    const double re = ladder.rate(level);
    const double mean_frame_bytes = re * 1e6 / (8.0 * cfg.fps);
    const int k = std::max(1, static_cast<int>(std::ceil(mean_frame_bytes / cfg.packet_payload)));

    for (double rr : redundancy_candidates(k, state.pi, cfg)) {
      GridPoint pt;
      pt.level = level;
      pt.re_mbps = re;
      pt.rr_mbps = rr;
      pt.distortion = model::end_to_end_distortion(re * 1000.0, state.pi, cfg.beta(), dp).total();
      pt.mtp_s = model::mtp_estimate_s(state.mu_mbps > 0 ? state.mu_mbps : 1e-9, re + rr,
                                       state.qd_s, mp);
      pt.objective = pt.distortion + mp.phi * pt.mtp_s;
      pt.feasible = pt.mtp_s <= cfg.td_s && re + rr <= state.mu_mbps;
      sol.grid.push_back(pt);

      if (!pt.feasible) continue;
      if (!sol.feasible) {
        sol.best = pt;
        sol.feasible = true;
        continue;
      }
      const bool better =
          pt.objective < sol.best.objective ||
          (pt.objective == sol.best.objective &&
           (pt.re_mbps < sol.best.re_mbps ||
            (pt.re_mbps == sol.best.re_mbps && pt.rr_mbps < sol.best.rr_mbps)));
      if (better) sol.best = pt;
    }
  }
  return sol;
}

}  // namespace nebula::jointopt
