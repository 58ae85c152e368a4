#include "nebula/controller.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nebula::ctrl {

RateLadder RateLadder::default_ladder() {
  return RateLadder{{
      {"144p", 0.2},
      {"270p", 0.6},
      {"288p", 1.0},
      {"360p", 1.2},
      {"376p", 1.8},
      {"480p", 2.0},
      {"540p", 3.0},
      {"720p", 4.5},
      {"1080p", 6.5},
  }};
}

void RateLadder::validate() const {
  if (levels.empty()) throw std::invalid_argument("ladder: at least one level required");
  for (size_t i = 0; i < levels.size(); ++i) {
    if (!(levels[i].mbps > 0)) throw std::invalid_argument("ladder: rates must be > 0");
    if (i > 0 && !(levels[i].mbps > levels[i - 1].mbps))
      throw std::invalid_argument("ladder: rates must be strictly ascending");
  }
}

const char* to_string(FecMode m) {
  switch (m) {
    case FecMode::cut_dd: return "cut_dd";
    case FecMode::uniform: return "uniform";
    case FecMode::gop_level: return "gop_level";
  }
  return "unknown";
}

double ControllerConfig::omega_for(double pi) const {
  if (!adaptive_omega) return omega;
  return std::clamp(5.0 * pi, 0.05, 0.39);
}

void ControllerConfig::validate() const {
  if (gop_len < 1) throw std::invalid_argument("controller.gop_len: must be >= 1");
  if (!(fps > 0)) throw std::invalid_argument("controller.fps: must be > 0");
  if (packet_payload < 64) throw std::invalid_argument("controller.packet_payload: must be >= 64");
  if (!(omega > 0 && omega < 0.4))
    throw std::invalid_argument("controller.omega: must be in (0, 0.4)");
  if (!(td_s > 0)) throw std::invalid_argument("controller.td_s: must be > 0");
  if (!(report_interval_s > 0))
    throw std::invalid_argument("controller.report_interval_s: must be > 0");
}

namespace {

int sized_count(int k, double growth, bool min_redundancy) {
  // The epsilon keeps exact-rational products (e.g. 400 * 1.1) from being
  // ceiled one past their mathematical value.
  const double raw = std::ceil(static_cast<double>(k) * growth - 1e-9);
  const int floor_n = min_redundancy ? k + 1 : k;
  return std::max(floor_n, static_cast<int>(raw));
}

}  // namespace

int fec_packet_count(int k, double pi, int frame_index, const ControllerConfig& cfg) {
  if (k < 1) throw std::invalid_argument("fec_packet_count: k must be >= 1");
  if (!(pi >= 0 && pi <= 1)) throw std::invalid_argument("fec_packet_count: pi must be in [0, 1]");
  if (cfg.fec_mode != FecMode::gop_level && (frame_index < 0 || frame_index >= cfg.gop_len))
    throw std::invalid_argument("fec_packet_count: frame_index must be in [0, F)");

  if (pi == 0.0) return k;
  switch (cfg.fec_mode) {
    case FecMode::cut_dd: {
      const double w = cfg.omega_for(pi) * (cfg.gop_len - frame_index) * pi;
      return sized_count(k, 1.0 + w, cfg.min_redundancy_when_lossy);
    }
    case FecMode::uniform:
    case FecMode::gop_level:
      return sized_count(k, 1.0 + pi, cfg.min_redundancy_when_lossy);
  }
  return k;
}

double redundancy_rate_mbps(double r_packets_per_frame, const ControllerConfig& cfg) {
  if (r_packets_per_frame < 0)
    throw std::invalid_argument("redundancy_rate_mbps: r must be >= 0");
  return r_packets_per_frame * cfg.packet_payload * cfg.gop_len * cfg.beta() * 8.0 /
         (1024.0 * 1024.0);
}

double qd_factor(double qd_s) { return 1.0 - std::clamp(qd_s, 0.0, 1.0); }

int select_level(const model::NetworkState& state, double last_re_mbps, double rr_mbps,
                 const RateLadder& ladder, const ControllerConfig& cfg) {
  ladder.validate();
  const double factor = qd_factor(state.qd_s);
  if (!(factor > 0)) return 0;

  const double cap = state.mu_mbps * factor;
  int level = -1;
  for (int i = 0; i < ladder.size(); ++i) {
    if (ladder.rate(i) + rr_mbps < cap)
      level = i;
    else
      break;
  }
  if (level >= 0 && ladder.rate(level) >= last_re_mbps && state.mtp_s > cfg.td_s) --level;
  return std::max(level, 0);
}

int RatePlan::n_for(int k, int frame_index) const {
  ControllerConfig cfg;
  cfg.gop_len = gop_len;
  cfg.omega = omega;
  cfg.fec_mode = fec_mode;
  cfg.min_redundancy_when_lossy = min_redundancy;
  cfg.adaptive_omega = false;  // omega already resolved at plan time
  return fec_packet_count(k, pi, fec_mode == FecMode::gop_level ? 0 : frame_index, cfg);
}

Tuner::Tuner(RateLadder ladder, ControllerConfig cfg, int initial_level)
    : ladder_(std::move(ladder)), cfg_(cfg) {
  ladder_.validate();
  cfg_.validate();
  if (initial_level < 0 || initial_level >= ladder_.size())
    throw std::invalid_argument("tuner: initial_level out of range");
  plan_.level = initial_level;
  plan_.re_mbps = ladder_.rate(initial_level);
  plan_.rr_mbps = 0.0;
  plan_.pi = 0.0;
  plan_.omega = cfg_.omega;
  plan_.fec_mode = cfg_.fec_mode;
  plan_.gop_len = cfg_.gop_len;
  plan_.min_redundancy = cfg_.min_redundancy_when_lossy;
}

TuneRecord Tuner::tune(const model::NetworkState& state, double mean_gop_frame_size_bytes,
                       double now_s) {
  state.validate();

  double frame_bytes = mean_gop_frame_size_bytes;
  if (frame_bytes <= 0)
    frame_bytes = plan_.re_mbps * 1e6 / (8.0 * cfg_.fps);  // cold start estimate

  const int k = std::max(1, static_cast<int>(std::ceil(frame_bytes / cfg_.packet_payload)));

  // Mean redundant packets per frame across GoP positions; in GoP mode the
  // block covers k*F packets at once and the budget is spread back per frame.
  double r_bar = 0.0;
  if (cfg_.fec_mode == FecMode::gop_level) {
    const int k_gop = k * cfg_.gop_len;
    r_bar = static_cast<double>(fec_packet_count(k_gop, state.pi, 0, cfg_) - k_gop) /
            cfg_.gop_len;
  } else {
    for (int f = 0; f < cfg_.gop_len; ++f)
      r_bar += fec_packet_count(k, state.pi, f, cfg_) - k;
    r_bar /= cfg_.gop_len;
  }

  const double rr = redundancy_rate_mbps(r_bar, cfg_);
  const int level = select_level(state, plan_.re_mbps, rr, ladder_, cfg_);

  RatePlan next;
  next.level = level;
  next.re_mbps = ladder_.rate(level);
  next.rr_mbps = rr;
  next.pi = state.pi;
  next.omega = cfg_.omega_for(state.pi);
  next.fec_mode = cfg_.fec_mode;
  next.gop_len = cfg_.gop_len;
  next.min_redundancy = cfg_.min_redundancy_when_lossy;
  next.timestamp_s = now_s;
  plan_ = next;

  TuneRecord rec;
  rec.plan = next;
  rec.k_est = k;
  rec.r_bar = r_bar;
  rec.mu_mbps = state.mu_mbps;
  rec.qd_s = state.qd_s;
  rec.cap_mbps = state.mu_mbps * qd_factor(state.qd_s);
  rec.mtp_s = state.mtp_s;
  return rec;
}

}  // namespace nebula::ctrl
