#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nebula/models.hpp"

// Server-side tuner: per-frame FEC sizing, redundancy rate, and the heuristic
// ladder-level selection. One logical actor: consumes NetworkState updates,
// emits immutable RatePlans.

namespace nebula::ctrl {

struct RateLadder {
  struct Level {
    std::string label;
    double mbps = 0.0;
  };
  std::vector<Level> levels;

  // The nine-step ladder: 144p..1080p against 0.2..6.5 Mb/s.
  static RateLadder default_ladder();

  void validate() const;  // nonempty, strictly ascending
  int size() const { return static_cast<int>(levels.size()); }
  double rate(int level) const { return levels[static_cast<size_t>(level)].mbps; }
  int top() const { return size() - 1; }
};

enum class FecMode : uint8_t {
  cut_dd,     // unequal per-frame protection, weighted by GoP position
  uniform,    // equal per-frame protection
  gop_level,  // one block across the whole GoP
};

const char* to_string(FecMode m);

struct ControllerConfig {
  int gop_len = 10;            // frames per GoP (F)
  double fps = 30.0;
  int packet_payload = 1500;   // FEC symbol size S, bytes
  double omega = 0.10;         // unequal-protection weight, in (0, 0.4)
  double td_s = 0.130;         // MTP upper bound T_d
  double report_interval_s = 1.0;  // feedback / retune cadence (delta t)
  FecMode fec_mode = FecMode::cut_dd;
  bool min_redundancy_when_lossy = true;  // enforce n >= k+1 whenever pi > 0
  bool adaptive_omega = false;            // opt-in: omega = clamp(5*pi, 0.05, 0.39)

  double beta() const { return fps / gop_len; }  // GoPs (I-frames) per second
  double omega_for(double pi) const;
  void validate() const;
};

// Total packet count n for a frame of k source packets at loss rate pi.
//   pi == 0            -> n = k
//   cut_dd             -> n = max(k+1, ceil(k * (1 + omega*(F-f)*pi)))
//   uniform            -> n = max(k+1, ceil(k * (1 + pi)))
//   gop_level          -> the uniform formula on the whole-GoP count, f ignored
// The k+1 floor applies only while min_redundancy_when_lossy is set.
int fec_packet_count(int k, double pi, int frame_index, const ControllerConfig& cfg);

// Redundancy rate in Mb/s for an average of r redundant packets per frame:
// r * S * F * beta * 8 / 2^20.
double redundancy_rate_mbps(double r_packets_per_frame, const ControllerConfig& cfg);

// Queuing-delay factor (1 - Qd) used by the sending-rate bound, with Qd read
// in seconds and clamped to [0, 1] beforehand.
double qd_factor(double qd_s);

// Heuristic level selection: take the last ladder level whose rate + rr stays
// strictly below mu * (1 - Qd); step one level down when that rate would not
// decrease and the measured MTP exceeds T_d; fall back to level 0 when the
// factor is nonpositive or the index underflows.
int select_level(const model::NetworkState& state, double last_re_mbps, double rr_mbps,
                 const RateLadder& ladder, const ControllerConfig& cfg);

struct RatePlan {
  int level = 0;
  double re_mbps = 0.0;
  double rr_mbps = 0.0;
  double pi = 0.0;     // loss rate the FEC sizing was computed with
  double omega = 0.0;  // effective omega at plan time
  FecMode fec_mode = FecMode::cut_dd;
  int gop_len = 10;
  bool min_redundancy = true;
  double timestamp_s = 0.0;

  // Per-frame block size per the plan: n for a frame of k packets at GoP
  // position f (f ignored in gop_level mode).
  int n_for(int k, int frame_index) const;
};

// One tune step record, kept for the plan audit log.
struct TuneRecord {
  RatePlan plan;
  double k_est = 0.0;  // packets per frame used for sizing
  double r_bar = 0.0;  // mean redundant packets per frame
  double mu_mbps = 0.0;
  double qd_s = 0.0;
  double cap_mbps = 0.0;  // mu * (1 - Qd)
  double mtp_s = 0.0;
};

class Tuner {
 public:
  Tuner(RateLadder ladder, ControllerConfig cfg, int initial_level);

  // Recomputed every report interval and on every feedback arrival.
  // mean_gop_frame_size_bytes: mean encoded frame size of the last finished
  // GoP; pass <= 0 before the first GoP completes (cold start falls back to
  // the current level's bitrate / fps).
  TuneRecord tune(const model::NetworkState& state, double mean_gop_frame_size_bytes,
                  double now_s);

  const RatePlan& plan() const { return plan_; }
  const RateLadder& ladder() const { return ladder_; }
  const ControllerConfig& config() const { return cfg_; }

 private:
  RateLadder ladder_;
  ControllerConfig cfg_;
  RatePlan plan_;
};

}  // namespace nebula::ctrl
