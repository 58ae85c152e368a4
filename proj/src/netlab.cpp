#include "nebula/netlab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nebula::netlab {

GilbertParams GilbertParams::from_target_loss(double stationary_loss, double p_bb) {
  if (!(stationary_loss >= 0 && stationary_loss < 1))
    throw std::invalid_argument("gilbert: stationary loss must be in [0, 1)");
  GilbertParams p;
  p.p_bb = p_bb;
  p.p_gb = stationary_loss * (1.0 - p_bb) / (1.0 - stationary_loss);
  p.validate();
  return p;
}

void GilbertParams::validate() const {
  if (!(p_gb >= 0 && p_gb <= 1)) throw std::invalid_argument("gilbert.p_gb: must be in [0, 1]");
  if (!(p_bb >= 0 && p_bb <= 1)) throw std::invalid_argument("gilbert.p_bb: must be in [0, 1]");
}

bool GilbertChannel::step(rng::Engine& rng) {
  const double u = rng::uniform01(rng);
  bad_ = bad_ ? (u < params_.p_bb) : (u < params_.p_gb);
  return bad_;
}

double LinkConfig::bandwidth_at(double t) const {
  double bw = schedule.front().mbps;
  for (const auto& seg : schedule) {
    if (seg.start_s <= t)
      bw = seg.mbps;
    else
      break;
  }
  return bw;
}

void LinkConfig::validate() const {
  if (schedule.empty()) throw std::invalid_argument("link.schedule: must not be empty");
  for (size_t i = 0; i < schedule.size(); ++i) {
    if (!(schedule[i].mbps > 0))
      throw std::invalid_argument("link.schedule: bandwidth must be > 0");
    if (i > 0 && !(schedule[i].start_s > schedule[i - 1].start_s))
      throw std::invalid_argument("link.schedule: segment times must be ascending");
  }
  if (!(one_way_delay_s >= 0)) throw std::invalid_argument("link.one_way_delay_s: must be >= 0");
  if (!(queue_capacity_bytes > 0))
    throw std::invalid_argument("link.queue_capacity_bytes: must be > 0");
  loss.validate();
}

Link::Link(LinkConfig cfg)
    : cfg_(std::move(cfg)), gilbert_(cfg_.loss), rng_(rng::derive_seed(cfg_.seed, 0x11f7)) {
  cfg_.validate();
}

double Link::backlog_bytes(double now) {
  while (!in_queue_.empty() && in_queue_.front().first <= now) in_queue_.pop_front();
  double b = 0;
  for (const auto& [end, bytes] : in_queue_) b += bytes;
  return b;
}

Link::Transit Link::offer(double now, uint32_t bytes) {
  ++stats_.offered;
  stats_.offered_bytes += bytes;

  Transit t;
  if (backlog_bytes(now) + bytes > cfg_.queue_capacity_bytes) {
    t.fate = PacketFate::overflow;
    ++stats_.overflow;
    if (log_events_) events_.push_back({now, bytes, t.fate, 0.0});
    return t;
  }

  const double start = std::max(now, busy_until_);
  const double bw_bps = cfg_.bandwidth_at(start) * 1e6;
  const double serialization = bytes * 8.0 / bw_bps;
  const double dequeue = start + serialization;
  busy_until_ = dequeue;
  in_queue_.emplace_back(dequeue, bytes);

  if (gilbert_.step(rng_)) {
    t.fate = PacketFate::lost;
    ++stats_.lost;
    if (log_events_) events_.push_back({now, bytes, t.fate, 0.0});
    return t;
  }

  t.fate = PacketFate::delivered;
  t.deliver_at = dequeue + cfg_.one_way_delay_s;
  ++stats_.delivered;
  stats_.delivered_bytes += bytes;
  if (log_events_) events_.push_back({now, bytes, t.fate, *t.deliver_at});
  return t;
}

LinkConfig reference_trace(uint64_t seed, double duration_s) {
  LinkConfig cfg;
  cfg.schedule.clear();
  rng::Engine e(rng::derive_seed(seed, 0x7ace));
  const int segments = std::max(1, static_cast<int>(std::ceil(duration_s / 5.0)));
  for (int i = 0; i < segments; ++i) {
    const double mbps = 2.0 + static_cast<double>(rng::uniform_below(e, 9));  // {2..10}
    cfg.schedule.push_back({i * 5.0, mbps});
  }
  cfg.one_way_delay_s = 0.010;
  cfg.loss = GilbertParams::from_target_loss(0.01, 0.25);
  cfg.queue_capacity_bytes = 150000.0;
  cfg.seed = seed;
  return cfg;
}

void write_trace_csv(const std::string& path, const LinkConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open trace file for writing: " + path);
  out << "time_s,bandwidth_mbps\n";
  char line[64];
  for (const auto& seg : cfg.schedule) {
    std::snprintf(line, sizeof(line), "%.3f,%.3f\n", seg.start_s, seg.mbps);
    out << line;
  }
}

std::vector<BandwidthSegment> read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file: " + path);
  std::vector<BandwidthSegment> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1 && line.find("time_s") != std::string::npos) continue;
    std::istringstream ss(line);
    BandwidthSegment seg;
    char comma = 0;
    if (!(ss >> seg.start_s >> comma >> seg.mbps) || comma != ',')
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed trace row");
    out.push_back(seg);
  }
  if (out.empty()) throw std::runtime_error(path + ": trace has no segments");
  return out;
}

void write_event_log_csv(const std::string& path, const std::vector<LinkEvent>& events) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open link event log for writing: " + path);
  out << "t_offer_s,bytes,fate,t_deliver_s\n";
  char line[96];
  for (const auto& ev : events) {
    const char* fate = ev.fate == PacketFate::delivered ? "delivered"
                       : ev.fate == PacketFate::lost    ? "lost"
                                                        : "overflow";
    std::snprintf(line, sizeof(line), "%.9f,%u,%s,%.9f\n", ev.t_offer, ev.bytes, fate,
                  ev.t_deliver);
    out << line;
  }
}

}  // namespace nebula::netlab
