#include "nebula/npm.hpp"

#include <algorithm>
#include <stdexcept>

namespace nebula::npm {

void SmoothingRing::push(double v) {
  samples_[next_] = v;
  next_ = (next_ + 1) % 5;
  if (count_ < 5) ++count_;
}

double SmoothingRing::mean() const {
  if (count_ == 0) throw std::runtime_error("SmoothingRing: no samples");
  double s = 0;
  for (int i = 0; i < count_; ++i) s += samples_[i];
  return s / count_;
}

std::optional<double> measure_throughput_mbps(std::span<const FrameRecord> window) {
  double bytes = 0, elapsed = 0;
  for (const auto& r : window) {
    bytes += r.bytes;
    elapsed += r.elapsed_s;
  }
  if (elapsed <= 0) return std::nullopt;
  return bytes * 8.0 / elapsed / 1e6;
}

void ThroughputEstimator::on_frame(const FrameRecord& rec) {
  window_.push_back(rec);
  size_t cut = 0;
  while (cut < window_.size() && window_[cut].t_done < rec.t_done - window_s_) ++cut;
  if (cut > 0) window_.erase(window_.begin(), window_.begin() + static_cast<ptrdiff_t>(cut));
  const auto est = measure_throughput_mbps(window_);
  if (est) {
    ring_.push(*est);
    stale_ = false;
  }
  fed_since_tick_ = true;
}

void ThroughputEstimator::on_report_tick() {
  if (!fed_since_tick_) stale_ = true;
  fed_since_tick_ = false;
}

double ThroughputEstimator::smoothed_mbps() const { return ring_.empty() ? 0.0 : ring_.mean(); }

LossObservation observe_loss(std::span<const uint16_t> received_sorted, int k) {
  LossObservation obs;
  obs.k = std::max(1, k);
  if (received_sorted.empty()) return obs;
  const int max_seen = received_sorted.back();
  obs.gaps = max_seen + 1 - static_cast<int>(received_sorted.size());
  return obs;
}

void LossEstimator::on_frame(const LossObservation& obs) {
  gaps_acc_ += obs.gaps;
  k_acc_ += obs.k;
}

void LossEstimator::on_report_tick() {
  if (k_acc_ > 0) {
    ring_.push(std::min(1.0, static_cast<double>(gaps_acc_) / static_cast<double>(k_acc_)));
    gaps_acc_ = 0;
    k_acc_ = 0;
  }
}

double LossEstimator::smoothed() const { return ring_.empty() ? 0.0 : ring_.mean(); }

uint32_t RttProber::begin_probe(double now_s) {
  const uint32_t seq = next_seq_++;
  outstanding_[seq] = now_s;
  return seq;
}

std::optional<RttProber::Sample> RttProber::on_reply(uint32_t probe_seq, double origin_s,
                                                     double now_s) {
  auto it = outstanding_.find(probe_seq);
  if (it == outstanding_.end()) return std::nullopt;  // duplicate or unknown
  outstanding_.erase(it);

  Sample s;
  s.rtt_s = now_s - origin_s;
  s.rtt_min_s = last_ ? std::min(last_->rtt_min_s, s.rtt_s) : s.rtt_s;
  s.qd_s = s.rtt_s - s.rtt_min_s;
  last_ = s;
  rtt_ring_.push(s.rtt_s);
  return s;
}

RttProber::Sample RttProber::last() const {
  if (!last_) throw std::runtime_error("RttProber: no sample yet");
  return *last_;
}

double RttProber::smoothed_rtt_s() const { return rtt_ring_.empty() ? 0.0 : rtt_ring_.mean(); }

void MtpTracker::on_event_sent(uint32_t event_seq, double t_s) { sent_[event_seq] = t_s; }

std::optional<double> MtpTracker::on_frame_displayed(uint32_t event_seq, double display_t_s) {
  if (event_seq == 0) return std::nullopt;  // reserved: no event echoed
  auto it = sent_.find(event_seq);
  if (it == sent_.end()) return std::nullopt;
  const double mtp = display_t_s - it->second;
  sent_.erase(it);  // one sample per event
  ring_.push(mtp);
  return mtp;
}

double MtpTracker::smoothed_s() const { return ring_.empty() ? 0.0 : ring_.mean(); }

}  // namespace nebula::npm
