#pragma once

#include <cstdint>
#include <vector>
#include <functional>
#include <map>
#include <optional>
#include <span>

// Network performance monitor. Throughput comes from per-frame packet-train
// records: the first packet of a frame starts its timer and its size is
// excluded, so back-to-back arrivals measure the bottleneck rate. Loss is
// counted from sequence gaps per report interval, RTT from probe replies,
// MTP from event echoes; every reported figure is the arithmetic mean of its
// last five raw samples.

namespace nebula::npm {

// Fixed moving average over the latest five samples.
class SmoothingRing {
 public:
  void push(double v);
  double mean() const;  // throws std::runtime_error when empty
  bool empty() const { return count_ == 0; }
  int count() const { return count_; }

 private:
  double samples_[5] = {};
  int count_ = 0;
  int next_ = 0;
};

struct FrameRecord {
  double t_done = 0.0;    // completion (recovery or expiry) time
  double elapsed_s = 0.0; // last received packet minus first
  double bytes = 0.0;     // received wire bytes excluding the first packet
};

// Pooled packet-train estimate over a record window, Mb/s (decimal):
// sum of post-first bytes over sum of per-frame receive times.
// Returns nullopt when the window carries no measurable time.
std::optional<double> measure_throughput_mbps(std::span<const FrameRecord> window);

class ThroughputEstimator {
 public:
  explicit ThroughputEstimator(double window_s) : window_s_(window_s) {}

  // Feed one completed frame; recomputes the rolling-window estimate and
  // pushes it into the smoothing ring. Frames that yielded fewer than two
  // packets carry no elapsed time and are skipped by the caller.
  void on_frame(const FrameRecord& rec);

  // Marks the report boundary: when no frame completed since the previous
  // report the smoothed value holds and the estimate is flagged stale.
  void on_report_tick();

  double smoothed_mbps() const;  // 0 before any sample
  bool stale() const { return stale_; }

 private:
  double window_s_;
  std::vector<FrameRecord> window_;
  SmoothingRing ring_;
  bool stale_ = false;
  bool fed_since_tick_ = false;
};

// Per-frame loss observation: gaps are the sequence indices in 0..n-1 below
// the highest index seen that never arrived by the frame's completion.
struct LossObservation {
  int gaps = 0;
  int k = 1;
  double ratio() const { return static_cast<double>(gaps) / k; }
};

LossObservation observe_loss(std::span<const uint16_t> received_sorted, int k);

class LossEstimator {
 public:
  void on_frame(const LossObservation& obs);
  void on_report_tick();  // folds the interval counters into one sample
  double smoothed() const;  // 0 before any sample

 private:
  long long gaps_acc_ = 0;
  long long k_acc_ = 0;
  SmoothingRing ring_;
};

// RTT probe bookkeeping: one outstanding-table entry per probe, duplicate
// replies ignored, queuing delay derived from the latest raw sample against
// the running minimum.
class RttProber {
 public:
  struct Sample {
    double rtt_s = 0.0;
    double rtt_min_s = 0.0;
    double qd_s = 0.0;
  };

  uint32_t begin_probe(double now_s);  // returns the probe_seq to send
  std::optional<Sample> on_reply(uint32_t probe_seq, double origin_s, double now_s);

  bool has_sample() const { return last_.has_value(); }
  Sample last() const;           // throws before the first sample
  double smoothed_rtt_s() const; // 0 before any sample

 private:
  uint32_t next_seq_ = 1;
  std::map<uint32_t, double> outstanding_;
  std::optional<Sample> last_;
  SmoothingRing rtt_ring_;
};

class MtpTracker {
 public:
  void on_event_sent(uint32_t event_seq, double t_s);

  // Called when a displayed frame echoes event_seq (0 means none); returns
  // the MTP sample when the echo matches a recorded, unconsumed event.
  std::optional<double> on_frame_displayed(uint32_t event_seq, double display_t_s);

  double smoothed_s() const;  // 0 before any sample

 private:
  std::map<uint32_t, double> sent_;
  SmoothingRing ring_;
};

}  // namespace nebula::npm
