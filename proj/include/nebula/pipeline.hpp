#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "nebula/controller.hpp"
#include "nebula/netlab.hpp"
#include "nebula/npm.hpp"
#include "nebula/rlnc.hpp"
#include "nebula/sim.hpp"
#include "nebula/synthetic_encoder.hpp"
#include "nebula/transport.hpp"
#include "nebula/wire.hpp"

// Server and client endpoints over the datagram conduits.
//
// Server: synthesize frame -> charge capture/encode stages -> split into k
// symbols -> RLNC-encode to n -> emit FRTP. A frame's packets go out
// back-to-back; the bottleneck serializes them, so the client can read the
// path rate from the intra-frame arrival spacing. Plans are retuned every
// report interval and on every feedback arrival.
//
// Client: reassemble per-frame decoders, recover at rank k, charge decode
// and display stages, drop frames whose decoder is still short of rank k one
// deadline after their first packet, and report smoothed measurements every
// report interval.

namespace nebula::pipeline {

struct StageDelays {
  // Reference pipeline stage costs; capture and display split a combined
  // 4.2 ms evenly.
  double capture_s = 0.0021;
  double video_encode_s = 0.0208;
  double video_decode_s = 0.0091;
  double fec_encode_s = 0.0008;
  double fec_decode_s = 0.0011;
  double display_s = 0.0021;

  void validate() const;
};

enum class Mode : uint8_t {
  nebula,  // frame-level FEC, full controller
  escot,   // GoP-level FEC baseline (one block per GoP)
  fixed,   // fixed rate, no FEC
};

const char* to_string(Mode m);
std::optional<Mode> mode_from_string(const std::string& s);

struct FrameLogRow {
  uint64_t frame_id = 0;
  double capture_t = 0.0;
  double send_t = 0.0;
  int gop_index = 0;
  bool is_iframe = false;
  uint32_t size_bytes = 0;
  int level = 0;
  int k = 0;        // source packets carrying this frame (its share of the block)
  int n = 0;        // packets emitted for this frame's share
  int block_k = 0;  // whole block source/total counts (== k/n in frame modes)
  int block_n = 0;
  uint32_t block_id = 0;
};

struct DisplayLogRow {
  uint64_t frame_id = 0;
  bool displayed = false;
  double first_arrival_t = 0.0;
  double display_t = 0.0;
  std::optional<double> mtp_s;  // sample produced by this frame's echo, if any
};

struct NprLogRow {
  double t = 0.0;
  wire::NprPacket pkt;
  bool mu_stale = false;
};

class Server {
 public:
  struct Config {
    Mode mode = Mode::nebula;
    ctrl::RateLadder ladder = ctrl::RateLadder::default_ladder();
    ctrl::ControllerConfig ctrl;
    StageDelays stages;
    double i_frame_ratio = 4.0;
    int initial_level = 0;
    int fixed_level = -1;  // -1 = top of ladder
    uint64_t seed = 1;
  };

  Server(sim::EventLoop& loop, transport::Conduit& media_out, transport::Conduit& feedback_in,
         const Config& cfg);

  void start(double duration_s);

  // Reverse-channel bytes (NPR, events, probe traffic).
  void on_feedback(std::span<const uint8_t> bytes);

  const std::vector<FrameLogRow>& frame_log() const { return frame_log_; }
  const std::vector<ctrl::TuneRecord>& plan_log() const { return plan_log_; }
  uint64_t source_bytes() const { return source_bytes_; }
  uint64_t redundant_bytes() const { return redundant_bytes_; }
  uint64_t malformed() const { return malformed_; }

 private:
  void on_frame_tick();
  void emit_frame_block(const synth::Frame& frame, uint32_t event_seq, double capture_t);
  void emit_gop_block();
  void send_frtp(uint32_t block_id, int gop_index, const rlnc::FecBlockSpec& spec,
                 const std::vector<rlnc::CodedPacket>& packets, uint32_t frame_len,
                 uint32_t event_seq, int level);
  void retune();
  void retune_tick();
  void on_probe_tick();

  sim::EventLoop& loop_;
  transport::Conduit& media_out_;
  Config cfg_;
  synth::SyntheticEncoder encoder_;
  ctrl::Tuner tuner_;
  npm::RttProber prober_;

  double duration_s_ = 0.0;
  double frame_interval_s_ = 0.0;
  uint32_t pending_event_seq_ = 0;

  // Feedback view: throughput/loss/MTP from the latest report, queuing delay
  // from this side's raw probe samples.
  std::optional<wire::NprPacket> last_npr_;

  // GoP frame-size estimator for the tuner.
  double gop_size_acc_ = 0.0;
  int gop_frames_ = 0;
  double last_gop_mean_size_ = 0.0;

  // GoP accumulation (GoP-level FEC mode).
  struct PendingGop {
    uint32_t block_id = 0;
    std::vector<uint8_t> blob;
    std::vector<uint64_t> frame_ids;
    std::vector<size_t> frame_log_idx;
    uint32_t event_seq = 0;
    uint8_t event_frame_pos = 0;
    int level = 0;
  };
  std::optional<PendingGop> pending_gop_;

  std::vector<FrameLogRow> frame_log_;
  std::vector<ctrl::TuneRecord> plan_log_;
  uint64_t source_bytes_ = 0;
  uint64_t redundant_bytes_ = 0;
  uint64_t malformed_ = 0;
};

class Client {
 public:
  struct Config {
    Mode mode = Mode::nebula;
    StageDelays stages;
    double display_deadline_s = 0.330;
    double report_interval_s = 1.0;
  };

  Client(sim::EventLoop& loop, transport::Conduit& feedback_out, const Config& cfg);

  void start(double duration_s);
  void on_media(std::span<const uint8_t> bytes);  // forward-channel bytes

  // Synthetic user input; assigns the next event sequence number.
  void send_event(uint16_t event_id);

  const std::vector<DisplayLogRow>& display_log() const { return display_log_; }
  const std::vector<NprLogRow>& npr_log() const { return npr_log_; }
  uint64_t malformed() const { return malformed_; }
  uint64_t late_drops() const { return late_drops_; }
  double smoothed_mu_mbps() const { return throughput_.smoothed_mbps(); }
  double smoothed_pi() const { return loss_.smoothed(); }

 private:
  struct Assembly {
    rlnc::Decoder decoder;
    double first_arrival_t = 0.0;
    double last_arrival_t = 0.0;
    double bytes_after_first = 0.0;
    std::set<uint16_t> received;
    uint32_t frame_len = 0;
    uint32_t event_seq = 0;
    uint8_t event_frame_pos = 0;
    int level = 0;
    uint16_t k = 0;
    uint16_t n = 0;

    explicit Assembly(rlnc::FecBlockSpec spec) : decoder(spec) {}
  };

  void on_frtp(const wire::FrtpPacket& p, size_t wire_bytes);
  void complete_assembly(uint32_t block_id, Assembly& a);
  void expire_assembly(uint32_t block_id);
  void display_frame(uint64_t frame_id, double at, uint32_t event_seq);
  void report_tick();
  void emit_report();

  sim::EventLoop& loop_;
  transport::Conduit& feedback_out_;
  Config cfg_;

  std::map<uint32_t, Assembly> assemblies_;
  std::set<uint32_t> finished_blocks_;
  int64_t last_displayed_frame_ = -1;

  npm::ThroughputEstimator throughput_;
  npm::LossEstimator loss_;
  npm::RttProber prober_;
  npm::MtpTracker mtp_;

  uint32_t next_event_seq_ = 1;
  uint32_t next_report_seq_ = 1;
  double duration_s_ = 0.0;

  std::vector<DisplayLogRow> display_log_;
  std::vector<NprLogRow> npr_log_;
  uint64_t malformed_ = 0;
  uint64_t late_drops_ = 0;
};

// One fully wired emulated session: server --link--> client over the shaped
// direction, client -> server over a clean fixed-delay direction, synthetic
// user events at the configured rate.
struct SessionConfig {
  Mode mode = Mode::nebula;
  double duration_s = 60.0;
  netlab::LinkConfig link;
  ctrl::RateLadder ladder = ctrl::RateLadder::default_ladder();
  ctrl::ControllerConfig ctrl;
  StageDelays stages;
  double display_deadline_s = 0.330;
  double event_rate_hz = 2.0;
  double i_frame_ratio = 4.0;
  int initial_level = 0;
  int fixed_level = -1;
  uint64_t seed = 1;
};

struct SessionResult {
  std::vector<FrameLogRow> frames;
  std::vector<DisplayLogRow> displays;
  std::vector<ctrl::TuneRecord> plans;
  std::vector<NprLogRow> nprs;
  netlab::LinkStats link;
  uint64_t source_bytes = 0;
  uint64_t redundant_bytes = 0;
  uint64_t late_drops = 0;
  uint64_t malformed = 0;
};

SessionResult run_session(const SessionConfig& cfg);

}  // namespace nebula::pipeline
