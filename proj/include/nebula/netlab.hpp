#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "nebula/rng.hpp"

// Deterministic single-direction link emulator: piecewise-constant bandwidth,
// FIFO serialization behind a byte-bounded queue, fixed propagation delay,
// and Gilbert two-state burst loss applied at dequeue. Pure state machine on
// a virtual clock; the caller schedules deliveries at the returned times.

namespace nebula::netlab {

struct GilbertParams {
  double p_gb = 0.0;   // Good -> Bad transition probability per packet
  double p_bb = 0.25;  // Bad -> Bad persistence; loss in Bad is certain

  // Solves p_gb for a stationary loss target at fixed persistence:
  // loss = p_gb / (p_gb + 1 - p_bb).
  static GilbertParams from_target_loss(double stationary_loss, double p_bb = 0.25);

  double stationary_loss() const { return p_gb / (p_gb + 1.0 - p_bb); }
  void validate() const;
};

class GilbertChannel {
 public:
  explicit GilbertChannel(GilbertParams p) : params_(p) {}

  // Advances the Markov chain one packet; returns true when the packet is
  // lost (chain in Bad).
  bool step(rng::Engine& rng);

  bool bad() const { return bad_; }

 private:
  GilbertParams params_;
  bool bad_ = false;
};

struct BandwidthSegment {
  double start_s = 0.0;
  double mbps = 0.0;
};

struct LinkConfig {
  std::vector<BandwidthSegment> schedule = {{0.0, 10.0}};
  double one_way_delay_s = 0.010;
  GilbertParams loss;
  double queue_capacity_bytes = 150000.0;
  uint64_t seed = 0;

  double bandwidth_at(double t) const;
  void validate() const;
};

enum class PacketFate : uint8_t { delivered = 0, lost = 1, overflow = 2 };

struct LinkEvent {
  double t_offer = 0.0;
  uint32_t bytes = 0;
  PacketFate fate = PacketFate::delivered;
  double t_deliver = 0.0;  // meaningful for delivered packets only
};

struct LinkStats {
  uint64_t offered = 0;
  uint64_t delivered = 0;
  uint64_t lost = 0;      // Gilbert erasures
  uint64_t overflow = 0;  // queue tail drops
  uint64_t offered_bytes = 0;
  uint64_t delivered_bytes = 0;
};

class Link {
 public:
  explicit Link(LinkConfig cfg);

  struct Transit {
    std::optional<double> deliver_at;  // empty when dropped
    PacketFate fate = PacketFate::delivered;
  };

  // Offers one packet at time now (must be nondecreasing across calls).
  // Serialization starts when the line frees up, at the bandwidth in force
  // at that instant; survivors arrive at dequeue + one-way delay.
  Transit offer(double now, uint32_t bytes);

  const LinkStats& stats() const { return stats_; }
  const std::vector<LinkEvent>& events() const { return events_; }
  void set_event_log(bool enabled) { log_events_ = enabled; }
  double backlog_bytes(double now);

 private:
  LinkConfig cfg_;
  GilbertChannel gilbert_;
  rng::Engine rng_;
  double busy_until_ = 0.0;
  std::deque<std::pair<double, uint32_t>> in_queue_;  // (serialization end, bytes)
  LinkStats stats_;
  std::vector<LinkEvent> events_;
  bool log_events_ = false;
};

// The reference 60 s scenario: twelve 5 s segments drawn uniformly from
// {2..10} Mb/s, 10 ms one-way delay, 1% Gilbert loss with 25% persistence.
LinkConfig reference_trace(uint64_t seed, double duration_s = 60.0);

inline constexpr uint64_t k_canonical_trace_seed = 0x6e656275;

// Trace CSV: header then time_s,bandwidth_mbps rows. Throws on IO/parse
// errors with the offending path or line.
void write_trace_csv(const std::string& path, const LinkConfig& cfg);
std::vector<BandwidthSegment> read_trace_csv(const std::string& path);

void write_event_log_csv(const std::string& path, const std::vector<LinkEvent>& events);

}  // namespace nebula::netlab
