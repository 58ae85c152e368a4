#include "nebula/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nebula::pipeline {

namespace {

uint64_t to_us(double t_s) { return static_cast<uint64_t>(std::llround(t_s * 1e6)); }
double from_us(uint64_t us) { return static_cast<double>(us) / 1e6; }

}  // namespace

void StageDelays::validate() const {
  for (double v : {capture_s, video_encode_s, video_decode_s, fec_encode_s, fec_decode_s,
                   display_s})
    if (!(v >= 0)) throw std::invalid_argument("stages: delays must be >= 0");
}

const char* to_string(Mode m) {
  switch (m) {
    case Mode::nebula: return "nebula";
    case Mode::escot: return "escot";
    case Mode::fixed: return "fixed";
  }
  return "unknown";
}

std::optional<Mode> mode_from_string(const std::string& s) {
  if (s == "nebula") return Mode::nebula;
  if (s == "escot" || s == "gop_level") return Mode::escot;
  if (s == "fixed") return Mode::fixed;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Server

Server::Server(sim::EventLoop& loop, transport::Conduit& media_out,
               transport::Conduit& feedback_in, const Config& cfg)
    : loop_(loop),
      media_out_(media_out),
      cfg_(cfg),
      encoder_(cfg.ladder,
               cfg.mode == Mode::fixed
                   ? (cfg.fixed_level < 0 ? cfg.ladder.top() : cfg.fixed_level)
                   : cfg.initial_level,
               cfg.ctrl.fps, cfg.ctrl.gop_len, cfg.i_frame_ratio,
               rng::derive_seed(cfg.seed, 0x5e0)),
      tuner_(cfg.ladder,
             [&] {
               auto c = cfg.ctrl;
               if (cfg.mode == Mode::escot) c.fec_mode = ctrl::FecMode::gop_level;
               return c;
             }(),
             cfg.mode == Mode::fixed ? (cfg.fixed_level < 0 ? cfg.ladder.top() : cfg.fixed_level)
                                     : cfg.initial_level) {
  cfg_.stages.validate();
  feedback_in.set_receiver([this](std::span<const uint8_t> b) { on_feedback(b); });
  if (cfg_.mode == Mode::escot) cfg_.ctrl.fec_mode = ctrl::FecMode::gop_level;
  frame_interval_s_ = 1.0 / cfg_.ctrl.fps;
}

void Server::start(double duration_s) {
  duration_s_ = duration_s;
  loop_.at(0.0, [this] { on_frame_tick(); });

  // RTT probing, phase-shifted off the report ticks.
  const double dt = cfg_.ctrl.report_interval_s;
  loop_.at(0.25 * dt, [this] { on_probe_tick(); });

  // Periodic retune; feedback arrivals retune as well.
  if (cfg_.mode != Mode::fixed) {
    const double first = dt;
    loop_.at(first, [this] { retune_tick(); });
  }
}

void Server::retune_tick() {
  retune();
  const double next = loop_.now() + cfg_.ctrl.report_interval_s;
  if (next < duration_s_) loop_.at(next, [this] { retune_tick(); });
}

void Server::on_probe_tick() {
  const double now = loop_.now();
  const uint32_t seq = prober_.begin_probe(now);
  media_out_.send(wire::encode_packet(wire::RttpPacket{seq, to_us(now), false}));
  const double next = now + cfg_.ctrl.report_interval_s;
  if (next < duration_s_) loop_.at(next, [this] { on_probe_tick(); });
}

void Server::on_frame_tick() {
  const double now = loop_.now();
  if (now >= duration_s_) return;

  // Level switches take effect at frame boundaries and restart the GoP; the
  // GoP-block mode defers them to GoP boundaries to keep blocks aligned.
  const int target = tuner_.plan().level;
  if (target != encoder_.level() && cfg_.mode != Mode::fixed) {
    const bool at_gop_boundary = gop_frames_ == 0 || gop_frames_ == cfg_.ctrl.gop_len;
    if (cfg_.mode != Mode::escot || at_gop_boundary) encoder_.set_level(target);
  }

  const synth::Frame frame = encoder_.next_frame();
  if (frame.gop_index == 0) {
    gop_size_acc_ = 0.0;
    gop_frames_ = 0;
  }
  gop_size_acc_ += frame.size_bytes;
  ++gop_frames_;
  if (gop_frames_ == cfg_.ctrl.gop_len)
    last_gop_mean_size_ = gop_size_acc_ / cfg_.ctrl.gop_len;

  const uint32_t event_seq = pending_event_seq_;
  pending_event_seq_ = 0;

  const double avail = now + cfg_.stages.capture_s + cfg_.stages.video_encode_s +
                       cfg_.stages.fec_encode_s;

  if (cfg_.mode == Mode::escot) {
    if (!pending_gop_) {
      pending_gop_.emplace();
      pending_gop_->block_id = static_cast<uint32_t>(frame.frame_id);
      pending_gop_->level = encoder_.level();
    }
    auto& gop = *pending_gop_;
    // [u32 length][payload] per frame inside the block.
    const uint32_t len = frame.size_bytes;
    gop.blob.push_back(static_cast<uint8_t>(len >> 24));
    gop.blob.push_back(static_cast<uint8_t>(len >> 16));
    gop.blob.push_back(static_cast<uint8_t>(len >> 8));
    gop.blob.push_back(static_cast<uint8_t>(len));
    gop.blob.resize(gop.blob.size() + len, 0);
    gop.frame_ids.push_back(frame.frame_id);
    if (event_seq != 0) {
      gop.event_seq = event_seq;
      gop.event_frame_pos = static_cast<uint8_t>(frame.gop_index);
    }

    FrameLogRow row;
    row.frame_id = frame.frame_id;
    row.capture_t = now;
    row.send_t = avail;
    row.gop_index = frame.gop_index;
    row.is_iframe = frame.is_iframe;
    row.size_bytes = frame.size_bytes;
    row.level = encoder_.level();
    row.k = std::max(1, static_cast<int>((frame.size_bytes + cfg_.ctrl.packet_payload - 1) /
                                         cfg_.ctrl.packet_payload));
    row.n = row.k;
    row.block_k = row.k;
    row.block_n = row.k;
    row.block_id = gop.block_id;
    gop.frame_log_idx.push_back(frame_log_.size());
    frame_log_.push_back(row);
    source_bytes_ += frame.size_bytes;

    if (frame.gop_index == cfg_.ctrl.gop_len - 1)
      loop_.at(avail, [this] { emit_gop_block(); });
  } else {
    source_bytes_ += frame.size_bytes;
    loop_.at(avail,
             [this, frame, event_seq, now] { emit_frame_block(frame, event_seq, now); });
  }

  const double next = now + frame_interval_s_;
  if (next < duration_s_) {
    loop_.at(next, [this] { on_frame_tick(); });
  } else if (cfg_.mode == Mode::escot && frame.gop_index != cfg_.ctrl.gop_len - 1) {
    // Flush the partial GoP so the schedule's tail frames still go out.
    loop_.at(avail, [this] { emit_gop_block(); });
  }
}

void Server::emit_frame_block(const synth::Frame& frame, uint32_t event_seq,
                              double capture_t) {
  const int s = cfg_.ctrl.packet_payload;
  const int k = std::max(1, static_cast<int>((frame.size_bytes + s - 1) / s));
  int n = k;
  if (cfg_.mode != Mode::fixed) n = tuner_.plan().n_for(k, frame.gop_index);
  n = std::min(n, k + 255);  // one GF(2^8) generation per block

  rlnc::FecBlockSpec spec;
  spec.block_id = static_cast<uint32_t>(frame.frame_id);
  spec.k = static_cast<uint16_t>(k);
  spec.n = static_cast<uint16_t>(n);
  spec.symbol_size = static_cast<uint16_t>(s);

  std::vector<uint8_t> payload(frame.size_bytes, 0);
  const auto packets =
      rlnc::encode_block(payload, spec, rng::derive_seed(cfg_.seed, 0xb10c ^ spec.block_id));
  const int level = cfg_.mode == Mode::fixed ? encoder_.level() : tuner_.plan().level;
  send_frtp(spec.block_id, frame.gop_index, spec, packets, frame.size_bytes, event_seq, level);

  FrameLogRow row;
  row.frame_id = frame.frame_id;
  row.capture_t = capture_t;
  row.send_t = loop_.now();
  row.gop_index = frame.gop_index;
  row.is_iframe = frame.is_iframe;
  row.size_bytes = frame.size_bytes;
  row.level = level;
  row.k = k;
  row.n = n;
  row.block_k = k;
  row.block_n = n;
  row.block_id = spec.block_id;
  frame_log_.push_back(row);
  redundant_bytes_ += static_cast<uint64_t>(n - k) * static_cast<uint64_t>(s);
}

void Server::emit_gop_block() {
  if (!pending_gop_) return;
  PendingGop gop = std::move(*pending_gop_);
  pending_gop_.reset();

  const int s = cfg_.ctrl.packet_payload;
  const int k = std::max(1, static_cast<int>((gop.blob.size() + s - 1) / s));
  int n = tuner_.plan().n_for(k, 0);
  n = std::min(n, k + 255);

  rlnc::FecBlockSpec spec;
  spec.block_id = gop.block_id;
  spec.k = static_cast<uint16_t>(k);
  spec.n = static_cast<uint16_t>(n);
  spec.symbol_size = static_cast<uint16_t>(s);

  const auto packets =
      rlnc::encode_block(gop.blob, spec, rng::derive_seed(cfg_.seed, 0xb10c ^ spec.block_id));
  send_frtp(spec.block_id, gop.event_frame_pos, spec, packets,
            static_cast<uint32_t>(gop.blob.size()), gop.event_seq, gop.level);

  for (size_t idx : gop.frame_log_idx) {
    frame_log_[idx].block_k = k;
    frame_log_[idx].block_n = n;
  }
  redundant_bytes_ += static_cast<uint64_t>(n - k) * static_cast<uint64_t>(s);
}

void Server::send_frtp(uint32_t block_id, int gop_index, const rlnc::FecBlockSpec& spec,
                       const std::vector<rlnc::CodedPacket>& packets, uint32_t frame_len,
                       uint32_t event_seq, int level) {
  for (const auto& pkt : packets) {
    wire::FrtpPacket f;
    f.frame_id = block_id;
    f.gop_index = static_cast<uint8_t>(gop_index);
    f.k = spec.k;
    f.n = spec.n;
    f.packet_index = pkt.index;
    f.frame_len = frame_len;
    f.event_seq = event_seq;
    f.send_timestamp_us = to_us(loop_.now());
    f.level = static_cast<uint8_t>(level);
    if (pkt.kind == rlnc::PacketKind::coded) f.coefficients = pkt.coefficients;
    f.payload = pkt.payload;
    media_out_.send(wire::encode_packet(f));
  }
}

void Server::retune() {
  if (!last_npr_ || cfg_.mode == Mode::fixed) return;
  model::NetworkState st;
  st.mu_mbps = last_npr_->mu_mbps();
  st.pi = last_npr_->pi();
  if (prober_.has_sample()) {
    const auto s = prober_.last();
    st.rtt_s = s.rtt_s;
    st.rtt_min_s = s.rtt_min_s;
    st.qd_s = s.qd_s;
  }
  st.mtp_s = from_us(last_npr_->mtp_us);
  plan_log_.push_back(tuner_.tune(st, last_gop_mean_size_, loop_.now()));
}

void Server::on_feedback(std::span<const uint8_t> bytes) {
  auto res = wire::decode_packet(bytes);
  if (std::holds_alternative<wire::DecodeError>(res)) {
    ++malformed_;
    return;
  }
  const auto& pkt = std::get<wire::WirePacket>(res);
  if (const auto* npr = std::get_if<wire::NprPacket>(&pkt)) {
    last_npr_ = *npr;
    retune();
  } else if (const auto* ev = std::get_if<wire::EventPacket>(&pkt)) {
    pending_event_seq_ = ev->event_seq;  // latest input wins
  } else if (const auto* rttp = std::get_if<wire::RttpPacket>(&pkt)) {
    if (rttp->reply) {
      prober_.on_reply(rttp->probe_seq, from_us(rttp->origin_timestamp_us), loop_.now());
    } else {
      wire::RttpPacket echo = *rttp;
      echo.reply = true;
      media_out_.send(wire::encode_packet(echo));
    }
  }
}

// ---------------------------------------------------------------------------
// Client

Client::Client(sim::EventLoop& loop, transport::Conduit& feedback_out, const Config& cfg)
    : loop_(loop),
      feedback_out_(feedback_out),
      cfg_(cfg),
      throughput_(cfg.report_interval_s) {
  cfg_.stages.validate();
}

void Client::start(double duration_s) {
  duration_s_ = duration_s;
  loop_.at(cfg_.report_interval_s, [this] { report_tick(); });
}

void Client::report_tick() {
  emit_report();
  // Client-side RTT probe rides the report cadence; the reply crosses the
  // shaped direction, so its sample sees the media queue.
  const uint32_t seq = prober_.begin_probe(loop_.now());
  feedback_out_.send(wire::encode_packet(wire::RttpPacket{seq, to_us(loop_.now()), false}));
  const double next = loop_.now() + cfg_.report_interval_s;
  if (next <= duration_s_ + 1e-9) loop_.at(next, [this] { report_tick(); });
}

void Client::emit_report() {
  throughput_.on_report_tick();
  loss_.on_report_tick();

  wire::NprPacket npr;
  npr.report_seq = next_report_seq_++;
  npr.set_mu_mbps(throughput_.smoothed_mbps());
  npr.set_pi(loss_.smoothed());
  npr.rtt_us = static_cast<uint32_t>(to_us(prober_.smoothed_rtt_s()));
  npr.mtp_us = static_cast<uint32_t>(to_us(mtp_.smoothed_s()));
  npr.client_timestamp_us = to_us(loop_.now());
  feedback_out_.send(wire::encode_packet(npr));

  npr_log_.push_back({loop_.now(), npr, throughput_.stale()});
}

void Client::send_event(uint16_t event_id) {
  wire::EventPacket ev;
  ev.event_seq = next_event_seq_++;
  ev.event_id = event_id;
  ev.client_timestamp_us = to_us(loop_.now());
  mtp_.on_event_sent(ev.event_seq, loop_.now());
  feedback_out_.send(wire::encode_packet(ev));
}

void Client::on_media(std::span<const uint8_t> bytes) {
  auto res = wire::decode_packet(bytes);
  if (std::holds_alternative<wire::DecodeError>(res)) {
    ++malformed_;
    return;
  }
  const auto& pkt = std::get<wire::WirePacket>(res);
  if (const auto* frtp = std::get_if<wire::FrtpPacket>(&pkt)) {
    on_frtp(*frtp, bytes.size());
  } else if (const auto* rttp = std::get_if<wire::RttpPacket>(&pkt)) {
    if (rttp->reply) {
      prober_.on_reply(rttp->probe_seq, from_us(rttp->origin_timestamp_us), loop_.now());
    } else {
      wire::RttpPacket echo = *rttp;
      echo.reply = true;
      feedback_out_.send(wire::encode_packet(echo));
    }
  }
}

void Client::on_frtp(const wire::FrtpPacket& p, size_t wire_bytes) {
  const double now = loop_.now();
  if (finished_blocks_.count(p.frame_id)) return;  // straggler of a done block

  auto it = assemblies_.find(p.frame_id);
  if (it == assemblies_.end()) {
    rlnc::FecBlockSpec spec;
    spec.block_id = p.frame_id;
    spec.k = p.k;
    spec.n = p.n;
    spec.symbol_size = static_cast<uint16_t>(p.payload.size());
    try {
      spec.validate();
    } catch (const std::invalid_argument&) {
      ++malformed_;
      return;
    }
    it = assemblies_.emplace(p.frame_id, Assembly(spec)).first;
    auto& fresh = it->second;
    fresh.first_arrival_t = now;
    fresh.last_arrival_t = now;
    fresh.frame_len = p.frame_len;
    fresh.level = p.level;
    fresh.k = p.k;
    fresh.n = p.n;
    const uint32_t id = p.frame_id;
    loop_.at(now + cfg_.display_deadline_s, [this, id] { expire_assembly(id); });
  } else {
    it->second.bytes_after_first += static_cast<double>(wire_bytes);
    it->second.last_arrival_t = now;
  }

  auto& a = it->second;
  if (p.event_seq != 0) {
    a.event_seq = p.event_seq;
    a.event_frame_pos = p.gop_index;
  }
  a.received.insert(p.packet_index);

  rlnc::CodedPacket cp;
  cp.block_id = p.frame_id;
  cp.index = p.packet_index;
  cp.kind = p.packet_index < p.k ? rlnc::PacketKind::systematic : rlnc::PacketKind::coded;
  cp.coefficients = p.coefficients;
  cp.payload = p.payload;
  try {
    a.decoder.absorb(cp);
  } catch (const std::invalid_argument&) {
    ++malformed_;
    return;
  }

  if (a.decoder.complete()) {
    complete_assembly(p.frame_id, a);
    finished_blocks_.insert(p.frame_id);
    assemblies_.erase(p.frame_id);
  }
}

void Client::complete_assembly(uint32_t block_id, Assembly& a) {
  const double now = loop_.now();

  std::vector<uint16_t> seen(a.received.begin(), a.received.end());
  loss_.on_frame(npm::observe_loss(seen, a.k));
  if (seen.size() >= 2)
    throughput_.on_frame({now, a.last_arrival_t - a.first_arrival_t, a.bytes_after_first});

  if (cfg_.mode == Mode::escot) {
    const auto blob = a.decoder.recover();
    size_t off = 0;
    int i = 0;
    while (off + 4 <= a.frame_len) {
      const uint32_t len = (static_cast<uint32_t>(blob[off]) << 24) |
                           (static_cast<uint32_t>(blob[off + 1]) << 16) |
                           (static_cast<uint32_t>(blob[off + 2]) << 8) | blob[off + 3];
      off += 4;
      if (off + len > a.frame_len) {
        ++malformed_;
        break;
      }
      off += len;
      // Frames inside a block decode sequentially after the FEC pass.
      const double at = now + cfg_.stages.fec_decode_s +
                        (i + 1) * cfg_.stages.video_decode_s + cfg_.stages.display_s;
      const uint64_t frame_id = block_id + static_cast<uint64_t>(i);
      const bool carries_event = a.event_seq != 0 && i == a.event_frame_pos;
      const uint32_t ev = carries_event ? a.event_seq : 0;
      loop_.at(at, [this, frame_id, at, ev] { display_frame(frame_id, at, ev); });
      ++i;
    }
  } else {
    const double at = now + cfg_.stages.fec_decode_s + cfg_.stages.video_decode_s +
                      cfg_.stages.display_s;
    const uint64_t frame_id = block_id;
    const uint32_t ev = a.event_seq;
    loop_.at(at, [this, frame_id, at, ev] { display_frame(frame_id, at, ev); });
  }
}

void Client::expire_assembly(uint32_t block_id) {
  auto it = assemblies_.find(block_id);
  if (it == assemblies_.end()) return;  // completed in time
  auto& a = it->second;

  std::vector<uint16_t> seen(a.received.begin(), a.received.end());
  loss_.on_frame(npm::observe_loss(seen, a.k));
  // Partial frames keep the throughput estimate alive through outages.
  if (seen.size() >= 2)
    throughput_.on_frame(
        {loop_.now(), a.last_arrival_t - a.first_arrival_t, a.bytes_after_first});

  DisplayLogRow row;
  row.frame_id = block_id;
  row.displayed = false;
  row.first_arrival_t = a.first_arrival_t;
  display_log_.push_back(row);

  finished_blocks_.insert(block_id);
  assemblies_.erase(it);
}

void Client::display_frame(uint64_t frame_id, double at, uint32_t event_seq) {
  DisplayLogRow row;
  row.frame_id = frame_id;
  row.display_t = at;

  if (static_cast<int64_t>(frame_id) <= last_displayed_frame_) {
    // Arrived behind the playhead; never shown twice or out of order.
    row.displayed = false;
    ++late_drops_;
  } else {
    row.displayed = true;
    last_displayed_frame_ = static_cast<int64_t>(frame_id);
    if (event_seq != 0) row.mtp_s = mtp_.on_frame_displayed(event_seq, at);
  }
  display_log_.push_back(row);
}

// ---------------------------------------------------------------------------

SessionResult run_session(const SessionConfig& cfg) {
  cfg.link.validate();
  cfg.ctrl.validate();
  cfg.ladder.validate();
  cfg.stages.validate();

  sim::EventLoop loop;
  netlab::Link link(cfg.link);

  transport::EmulatedLinkConduit forward(loop, link);
  transport::EmulatedDelayConduit reverse(loop, cfg.link.one_way_delay_s);

  Server::Config scfg;
  scfg.mode = cfg.mode;
  scfg.ladder = cfg.ladder;
  scfg.ctrl = cfg.ctrl;
  scfg.stages = cfg.stages;
  scfg.i_frame_ratio = cfg.i_frame_ratio;
  scfg.initial_level = cfg.initial_level;
  scfg.fixed_level = cfg.fixed_level;
  scfg.seed = cfg.seed;

  Client::Config ccfg;
  ccfg.mode = cfg.mode;
  ccfg.stages = cfg.stages;
  ccfg.display_deadline_s = cfg.display_deadline_s;
  ccfg.report_interval_s = cfg.ctrl.report_interval_s;

  Server server(loop, forward, reverse, scfg);
  Client client(loop, reverse, ccfg);
  forward.set_receiver([&](std::span<const uint8_t> b) { client.on_media(b); });

  server.start(cfg.duration_s);
  client.start(cfg.duration_s);

  if (cfg.event_rate_hz > 0) {
    const double interval = 1.0 / cfg.event_rate_hz;
    for (double t = interval / 2.0; t < cfg.duration_s; t += interval)
      loop.at(t, [&client] { client.send_event(1); });
  }

  // Drain: let in-flight frames display or expire.
  loop.run_until(cfg.duration_s + cfg.display_deadline_s + 1.0);

  SessionResult res;
  res.frames = server.frame_log();
  res.displays = client.display_log();
  res.plans = server.plan_log();
  res.nprs = client.npr_log();
  res.link = link.stats();
  res.source_bytes = server.source_bytes();
  res.redundant_bytes = server.redundant_bytes();
  res.late_drops = client.late_drops();
  res.malformed = server.malformed() + client.malformed();
  return res;
}

}  // namespace nebula::pipeline
