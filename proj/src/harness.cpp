#include "nebula/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace nebula::harness {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config loading

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::invalid_argument(path + ": " + what);
}

void reject_unknown(const json& obj, const std::string& prefix,
                    std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed)
      if (it.key() == a) {
        ok = true;
        break;
      }
    if (!ok) fail(prefix.empty() ? it.key() : prefix + "." + it.key(), "unknown field");
  }
}

double get_num(const json& obj, const std::string& prefix, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) fail(prefix + "." + key, "expected a number");
  return obj[key].get<double>();
}

bool get_bool(const json& obj, const std::string& prefix, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean()) fail(prefix + "." + key, "expected a boolean");
  return obj[key].get<bool>();
}

void parse_link(const json& j, ExperimentConfig& cfg) {
  reject_unknown(j, "link",
                 {"trace_seed", "trace_csv", "schedule", "one_way_delay_s", "target_loss",
                  "p_bb", "p_gb", "queue_capacity_bytes"});
  if (j.contains("trace_seed") && j.contains("schedule"))
    fail("link", "trace_seed and schedule are mutually exclusive");

  if (j.contains("trace_seed"))
    cfg.link = netlab::reference_trace(j["trace_seed"].get<uint64_t>(), cfg.duration_s);
  if (j.contains("schedule")) {
    if (!j["schedule"].is_array() || j["schedule"].empty())
      fail("link.schedule", "expected a nonempty array of [time_s, mbps] pairs");
    cfg.link.schedule.clear();
    for (const auto& seg : j["schedule"]) {
      if (!seg.is_array() || seg.size() != 2) fail("link.schedule", "expected [time_s, mbps]");
      cfg.link.schedule.push_back({seg[0].get<double>(), seg[1].get<double>()});
    }
  }
  if (j.contains("trace_csv")) cfg.trace_csv = j["trace_csv"].get<std::string>();

  cfg.link.one_way_delay_s = get_num(j, "link", "one_way_delay_s", cfg.link.one_way_delay_s);
  cfg.link.queue_capacity_bytes =
      get_num(j, "link", "queue_capacity_bytes", cfg.link.queue_capacity_bytes);
  if (j.contains("p_gb")) {
    cfg.link.loss.p_gb = get_num(j, "link", "p_gb", 0.0);
    cfg.link.loss.p_bb = get_num(j, "link", "p_bb", cfg.link.loss.p_bb);
  } else if (j.contains("target_loss")) {
    cfg.link.loss = netlab::GilbertParams::from_target_loss(
        get_num(j, "link", "target_loss", 0.01), get_num(j, "link", "p_bb", 0.25));
  } else if (j.contains("p_bb")) {
    cfg.link.loss.p_bb = get_num(j, "link", "p_bb", cfg.link.loss.p_bb);
  }
}

void parse_controller(const json& j, ctrl::ControllerConfig& c) {
  reject_unknown(j, "controller",
                 {"gop_len", "fps", "packet_payload", "omega", "td_s", "report_interval_s",
                  "fec_mode", "min_redundancy_when_lossy", "adaptive_omega"});
  c.gop_len = static_cast<int>(get_num(j, "controller", "gop_len", c.gop_len));
  c.fps = get_num(j, "controller", "fps", c.fps);
  c.packet_payload = static_cast<int>(get_num(j, "controller", "packet_payload", c.packet_payload));
  c.omega = get_num(j, "controller", "omega", c.omega);
  c.td_s = get_num(j, "controller", "td_s", c.td_s);
  c.report_interval_s = get_num(j, "controller", "report_interval_s", c.report_interval_s);
  c.min_redundancy_when_lossy =
      get_bool(j, "controller", "min_redundancy_when_lossy", c.min_redundancy_when_lossy);
  c.adaptive_omega = get_bool(j, "controller", "adaptive_omega", c.adaptive_omega);
  if (j.contains("fec_mode")) {
    const std::string m = j["fec_mode"].get<std::string>();
    if (m == "cut_dd")
      c.fec_mode = ctrl::FecMode::cut_dd;
    else if (m == "uniform")
      c.fec_mode = ctrl::FecMode::uniform;
    else if (m == "gop_level")
      c.fec_mode = ctrl::FecMode::gop_level;
    else
      fail("controller.fec_mode", "expected cut_dd | uniform | gop_level");
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }

  ExperimentConfig cfg;
  reject_unknown(j, "",
                 {"mode", "duration_s", "seed", "seeds", "out_dir", "link", "controller",
                  "ladder", "distortion", "mtp", "stages", "initial_level", "fixed_level",
                  "event_rate_hz", "display_deadline_s", "i_frame_ratio"});

  if (j.contains("mode")) {
    const auto m = pipeline::mode_from_string(j["mode"].get<std::string>());
    if (!m) fail("mode", "expected nebula | escot | fixed");
    cfg.mode = *m;
  }
  cfg.duration_s = get_num(j, "", "duration_s", cfg.duration_s);
  if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
  if (j.contains("seeds")) {
    if (!j["seeds"].is_array() || j["seeds"].empty())
      fail("seeds", "expected a nonempty array of integers");
    for (const auto& s : j["seeds"]) cfg.seeds.push_back(s.get<uint64_t>());
  }
  if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();

  // The reference trace length follows the configured duration, so parse
  // link after duration.
  if (j.contains("link")) parse_link(j["link"], cfg);
  if (j.contains("controller")) parse_controller(j["controller"], cfg.ctrl);

  if (j.contains("ladder")) {
    if (!j["ladder"].is_array() || j["ladder"].empty())
      fail("ladder", "expected a nonempty array of [label, mbps] pairs");
    cfg.ladder.levels.clear();
    for (const auto& lvl : j["ladder"]) {
      if (!lvl.is_array() || lvl.size() != 2) fail("ladder", "expected [label, mbps]");
      cfg.ladder.levels.push_back({lvl[0].get<std::string>(), lvl[1].get<double>()});
    }
  }

  if (j.contains("distortion")) {
    const auto& d = j["distortion"];
    reject_unknown(d, "distortion", {"theta1", "r0_kbps", "theta2", "theta3", "max_pixel"});
    cfg.distortion.theta1 = get_num(d, "distortion", "theta1", cfg.distortion.theta1);
    cfg.distortion.r0_kbps = get_num(d, "distortion", "r0_kbps", cfg.distortion.r0_kbps);
    cfg.distortion.theta2 = get_num(d, "distortion", "theta2", cfg.distortion.theta2);
    cfg.distortion.theta3 = get_num(d, "distortion", "theta3", cfg.distortion.theta3);
    cfg.distortion.max_pixel = get_num(d, "distortion", "max_pixel", cfg.distortion.max_pixel);
  }
  if (j.contains("mtp")) {
    const auto& m = j["mtp"];
    reject_unknown(m, "mtp", {"alpha1", "alpha2", "alpha3", "alpha4", "phi"});
    cfg.mtp.alpha1 = get_num(m, "mtp", "alpha1", cfg.mtp.alpha1);
    cfg.mtp.alpha2 = get_num(m, "mtp", "alpha2", cfg.mtp.alpha2);
    cfg.mtp.alpha3 = get_num(m, "mtp", "alpha3", cfg.mtp.alpha3);
    cfg.mtp.alpha4 = get_num(m, "mtp", "alpha4", cfg.mtp.alpha4);
    cfg.mtp.phi = get_num(m, "mtp", "phi", cfg.mtp.phi);
  }
  if (j.contains("stages")) {
    const auto& s = j["stages"];
    reject_unknown(s, "stages",
                   {"capture_s", "video_encode_s", "video_decode_s", "fec_encode_s",
                    "fec_decode_s", "display_s"});
    cfg.stages.capture_s = get_num(s, "stages", "capture_s", cfg.stages.capture_s);
    cfg.stages.video_encode_s = get_num(s, "stages", "video_encode_s", cfg.stages.video_encode_s);
    cfg.stages.video_decode_s = get_num(s, "stages", "video_decode_s", cfg.stages.video_decode_s);
    cfg.stages.fec_encode_s = get_num(s, "stages", "fec_encode_s", cfg.stages.fec_encode_s);
    cfg.stages.fec_decode_s = get_num(s, "stages", "fec_decode_s", cfg.stages.fec_decode_s);
    cfg.stages.display_s = get_num(s, "stages", "display_s", cfg.stages.display_s);
  }

  cfg.initial_level = static_cast<int>(get_num(j, "", "initial_level", cfg.initial_level));
  cfg.fixed_level = static_cast<int>(get_num(j, "", "fixed_level", cfg.fixed_level));
  cfg.event_rate_hz = get_num(j, "", "event_rate_hz", cfg.event_rate_hz);
  cfg.display_deadline_s = get_num(j, "", "display_deadline_s", cfg.display_deadline_s);
  cfg.i_frame_ratio = get_num(j, "", "i_frame_ratio", cfg.i_frame_ratio);

  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

void ExperimentConfig::validate() const {
  if (!(duration_s > 0)) fail("duration_s", "must be > 0");
  ladder.validate();
  ctrl.validate();
  stages.validate();
  distortion.validate();
  mtp.validate();
  if (initial_level < 0 || initial_level >= ladder.size())
    fail("initial_level", "out of ladder range");
  if (fixed_level != -1 && (fixed_level < 0 || fixed_level >= ladder.size()))
    fail("fixed_level", "out of ladder range");
  if (!(event_rate_hz >= 0)) fail("event_rate_hz", "must be >= 0");
  if (!(display_deadline_s > 0)) fail("display_deadline_s", "must be > 0");
  if (!(i_frame_ratio >= 1)) fail("i_frame_ratio", "must be >= 1");
  if (trace_csv && !fs::exists(*trace_csv)) fail("link.trace_csv", "file not found: " + *trace_csv);
  netlab::LinkConfig check = link;
  if (trace_csv) check.schedule = netlab::read_trace_csv(*trace_csv);
  check.validate();
}

pipeline::SessionConfig ExperimentConfig::session(uint64_t run_seed) const {
  pipeline::SessionConfig s;
  s.mode = mode;
  s.duration_s = duration_s;
  s.link = link;
  if (trace_csv) s.link.schedule = netlab::read_trace_csv(*trace_csv);
  s.link.seed = rng::derive_seed(run_seed, 0x915be2);  // loss stream varies per run
  s.ladder = ladder;
  s.ctrl = ctrl;
  s.stages = stages;
  s.display_deadline_s = display_deadline_s;
  s.event_rate_hz = event_rate_hz;
  s.i_frame_ratio = i_frame_ratio;
  s.initial_level = initial_level;
  s.fixed_level = fixed_level;
  s.seed = run_seed;
  return s;
}

// ---------------------------------------------------------------------------
// Summaries

namespace {

struct SecondRow {
  double t = 0.0;
  int sent = 0;
  int displayed = 0;
  int dropped = 0;
  double mean_mtp_ms = -1.0;  // -1: no samples this second
  int level = 0;
  double re_mbps = 0.0;
  double rr_mbps = 0.0;
  double pi_meas = 0.0;
  double mu_meas = 0.0;
  double mu_actual = 0.0;
  double model_psnr_db = 0.0;
  double redundancy_pct = 0.0;
  bool mu_stale = false;
};

struct Derived {
  std::map<uint64_t, const pipeline::DisplayLogRow*> display_by_frame;
  std::map<uint32_t, int> frames_per_block;
  std::vector<SecondRow> seconds;
  std::vector<double> mtp_samples;
};

double frame_red_share_bytes(const pipeline::FrameLogRow& f, int payload,
                             const std::map<uint32_t, int>& per_block) {
  const auto it = per_block.find(f.block_id);
  const int cnt = it == per_block.end() ? 1 : it->second;
  return static_cast<double>(f.block_n - f.block_k) * payload / cnt;
}

Derived derive(const ExperimentConfig& cfg, const pipeline::SessionResult& r,
               const netlab::LinkConfig& link) {
  Derived d;
  for (const auto& row : r.displays)
    if (row.displayed) d.display_by_frame[row.frame_id] = &row;
  for (const auto& f : r.frames) d.frames_per_block[f.block_id]++;
  for (const auto& row : r.displays)
    if (row.mtp_s) d.mtp_samples.push_back(*row.mtp_s);

  const int total_seconds = static_cast<int>(std::ceil(cfg.duration_s));
  size_t fi = 0, pi_idx = 0, npr_idx = 0;
  int last_level = cfg.mode == pipeline::Mode::fixed
                       ? (cfg.fixed_level < 0 ? cfg.ladder.top() : cfg.fixed_level)
                       : cfg.initial_level;
  for (int sec = 0; sec < total_seconds; ++sec) {
    SecondRow row;
    row.t = sec;
    const double end = sec + 1.0;

    double src_bytes = 0, red_bytes = 0;
    while (fi < r.frames.size() && r.frames[fi].capture_t < end) {
      const auto& f = r.frames[fi];
      ++row.sent;
      if (d.display_by_frame.count(f.frame_id)) ++row.displayed;
      src_bytes += f.size_bytes;
      red_bytes += frame_red_share_bytes(f, cfg.ctrl.packet_payload, d.frames_per_block);
      last_level = f.level;
      ++fi;
    }
    row.dropped = row.sent - row.displayed;
    row.redundancy_pct = src_bytes > 0 ? 100.0 * red_bytes / src_bytes : 0.0;

    double mtp_sum = 0;
    int mtp_n = 0;
    for (const auto& disp : r.displays)
      if (disp.mtp_s && disp.display_t >= sec && disp.display_t < end) {
        mtp_sum += *disp.mtp_s;
        ++mtp_n;
      }
    if (mtp_n > 0) row.mean_mtp_ms = 1000.0 * mtp_sum / mtp_n;

    while (pi_idx < r.plans.size() && r.plans[pi_idx].plan.timestamp_s <= end) ++pi_idx;
    row.rr_mbps = pi_idx > 0 ? r.plans[pi_idx - 1].plan.rr_mbps : 0.0;
    row.level = last_level;
    row.re_mbps = cfg.ladder.rate(last_level);

    while (npr_idx < r.nprs.size() && r.nprs[npr_idx].t <= end + 1e-9) ++npr_idx;
    if (npr_idx > 0) {
      const auto& npr = r.nprs[npr_idx - 1];
      row.pi_meas = npr.pkt.pi();
      row.mu_meas = npr.pkt.mu_mbps();
      row.mu_stale = npr.mu_stale;
    }
    row.mu_actual = link.bandwidth_at(sec + 0.5);

    const auto dist = model::end_to_end_distortion(row.re_mbps * 1000.0, row.pi_meas,
                                                   cfg.ctrl.beta(), cfg.distortion);
    row.model_psnr_db = model::model_psnr_db(dist.total(), cfg.distortion);

    d.seconds.push_back(row);
  }
  return d;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double p95_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t idx = std::min(v.size() - 1, static_cast<size_t>(std::ceil(0.95 * v.size())) - 1);
  return v[idx];
}

}  // namespace

RunSummary summarize(const ExperimentConfig& cfg, uint64_t seed,
                     const pipeline::SessionResult& r) {
  netlab::LinkConfig link = cfg.link;
  if (cfg.trace_csv) link.schedule = netlab::read_trace_csv(*cfg.trace_csv);
  const Derived d = derive(cfg, r, link);

  RunSummary s;
  s.seed = seed;
  s.frames_sent = r.frames.size();
  for (const auto& row : r.displays)
    if (row.displayed) ++s.frames_displayed;
  s.delivery_ratio = s.frames_sent == 0
                         ? 0.0
                         : static_cast<double>(s.frames_displayed) / s.frames_sent;
  s.mean_mtp_s = mean_of(d.mtp_samples);
  s.p95_mtp_s = p95_of(d.mtp_samples);
  s.mtp_samples = d.mtp_samples.size();

  std::vector<double> psnr;
  for (const auto& row : d.seconds) psnr.push_back(row.model_psnr_db);
  s.mean_model_psnr_db = mean_of(psnr);

  s.mean_redundancy_pct =
      r.source_bytes == 0 ? 0.0 : 100.0 * static_cast<double>(r.redundant_bytes) / r.source_bytes;

  for (const auto& rec : r.plans) {
    const double factor = ctrl::qd_factor(rec.qd_s);
    if (factor > 0 && rec.plan.re_mbps + rec.plan.rr_mbps > rec.mu_mbps * factor + 1e-9)
      ++s.plan_violations;
  }

  if (r.link.offered > 0) {
    s.link_loss_ratio = static_cast<double>(r.link.lost) / static_cast<double>(r.link.offered);
    s.link_overflow_ratio =
        static_cast<double>(r.link.overflow) / static_cast<double>(r.link.offered);
  }
  std::vector<double> pis;
  for (const auto& npr : r.nprs) pis.push_back(npr.pkt.pi());
  s.mean_reported_pi = mean_of(pis);
  return s;
}

// ---------------------------------------------------------------------------
// CSV output

namespace {

void write_frames_csv(const std::string& path, const ExperimentConfig& cfg,
                      const pipeline::SessionResult& r, const Derived& d) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# schema: nebula.frames.v1\n";
  out << "time_s,frame_id,displayed,mtp_s,level,re_mbps,rr_mbps,pi,mu_meas_mbps,"
         "mu_actual_mbps,model_psnr_db,redundancy_overhead_pct\n";

  netlab::LinkConfig link = cfg.link;
  if (cfg.trace_csv) link.schedule = netlab::read_trace_csv(*cfg.trace_csv);

  std::map<uint64_t, const pipeline::DisplayLogRow*> mtp_rows;
  for (const auto& row : r.displays)
    if (row.mtp_s) mtp_rows[row.frame_id] = &row;

  size_t plan_idx = 0, npr_idx = 0;
  char buf[320];
  for (const auto& f : r.frames) {
    while (plan_idx < r.plans.size() && r.plans[plan_idx].plan.timestamp_s <= f.capture_t)
      ++plan_idx;
    const double rr = plan_idx > 0 ? r.plans[plan_idx - 1].plan.rr_mbps : 0.0;
    while (npr_idx < r.nprs.size() && r.nprs[npr_idx].t <= f.capture_t) ++npr_idx;
    const double pi = npr_idx > 0 ? r.nprs[npr_idx - 1].pkt.pi() : 0.0;
    const double mu = npr_idx > 0 ? r.nprs[npr_idx - 1].pkt.mu_mbps() : 0.0;

    const double re = cfg.ladder.rate(f.level);
    const auto dist =
        model::end_to_end_distortion(re * 1000.0, pi, cfg.ctrl.beta(), cfg.distortion);
    const double psnr = model::model_psnr_db(dist.total(), cfg.distortion);
    const double overhead =
        100.0 * frame_red_share_bytes(f, cfg.ctrl.packet_payload, d.frames_per_block) /
        f.size_bytes;

    const bool displayed = d.display_by_frame.count(f.frame_id) != 0;
    std::string mtp_cell;
    if (auto it = mtp_rows.find(f.frame_id); it != mtp_rows.end()) {
      std::snprintf(buf, sizeof(buf), "%.6f", *it->second->mtp_s);
      mtp_cell = buf;
    }

    std::snprintf(buf, sizeof(buf), "%.6f,%llu,%d,%s,%d,%.3f,%.6f,%.6f,%.6f,%.3f,%.3f,%.3f\n",
                  f.capture_t, static_cast<unsigned long long>(f.frame_id), displayed ? 1 : 0,
                  mtp_cell.c_str(), f.level, re, rr, pi, mu, link.bandwidth_at(f.capture_t),
                  psnr, overhead);
    out << buf;
  }
}

void write_seconds_csv(const std::string& path, const Derived& d) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# schema: nebula.seconds.v1\n";
  out << "time_s,frames_sent,frames_displayed,frames_dropped,mean_mtp_ms,level,re_mbps,"
         "rr_mbps,pi_meas,mu_meas_mbps,mu_actual_mbps,model_psnr_db,redundancy_pct,mu_stale\n";
  char buf[320];
  for (const auto& s : d.seconds) {
    std::snprintf(buf, sizeof(buf),
                  "%.0f,%d,%d,%d,%.3f,%d,%.3f,%.6f,%.6f,%.6f,%.3f,%.3f,%.3f,%d\n", s.t, s.sent,
                  s.displayed, s.dropped, s.mean_mtp_ms, s.level, s.re_mbps, s.rr_mbps,
                  s.pi_meas, s.mu_meas, s.mu_actual, s.model_psnr_db, s.redundancy_pct,
                  s.mu_stale ? 1 : 0);
    out << buf;
  }
}

void write_nprs_csv(const std::string& path, const pipeline::SessionResult& r) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# schema: nebula.nprs.v1\n";
  out << "time_s,report_seq,mu_mbps,pi,rtt_us,mtp_us,mu_stale\n";
  char buf[192];
  for (const auto& row : r.nprs) {
    std::snprintf(buf, sizeof(buf), "%.6f,%u,%.6f,%.6f,%u,%u,%d\n", row.t, row.pkt.report_seq,
                  row.pkt.mu_mbps(), row.pkt.pi(), row.pkt.rtt_us, row.pkt.mtp_us,
                  row.mu_stale ? 1 : 0);
    out << buf;
  }
}

void write_plans_csv(const std::string& path, const pipeline::SessionResult& r) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# schema: nebula.plans.v1\n";
  out << "time_s,level,re_mbps,rr_mbps,pi,omega,k_est,r_bar,mu_mbps,qd_s,cap_mbps,mtp_s\n";
  char buf[320];
  for (const auto& rec : r.plans) {
    std::snprintf(buf, sizeof(buf), "%.6f,%d,%.3f,%.6f,%.6f,%.3f,%.1f,%.3f,%.6f,%.6f,%.6f,%.6f\n",
                  rec.plan.timestamp_s, rec.plan.level, rec.plan.re_mbps, rec.plan.rr_mbps,
                  rec.plan.pi, rec.plan.omega, rec.k_est, rec.r_bar, rec.mu_mbps, rec.qd_s,
                  rec.cap_mbps, rec.mtp_s);
    out << buf;
  }
}

void write_summary_csv(const std::string& path, pipeline::Mode mode, const RunSummary& s) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# schema: nebula.summary.v1\n";
  out << "mode,seed,frames_sent,frames_displayed,delivery_ratio,mean_mtp_ms,p95_mtp_ms,"
         "mtp_samples,mean_model_psnr_db,mean_redundancy_pct,plan_violations,"
         "link_loss_ratio,mean_reported_pi\n";
  char buf[384];
  std::snprintf(buf, sizeof(buf), "%s,%llu,%llu,%llu,%.6f,%.3f,%.3f,%llu,%.3f,%.3f,%llu,%.6f,%.6f\n",
                pipeline::to_string(mode), static_cast<unsigned long long>(s.seed),
                static_cast<unsigned long long>(s.frames_sent),
                static_cast<unsigned long long>(s.frames_displayed), s.delivery_ratio,
                1000.0 * s.mean_mtp_s, 1000.0 * s.p95_mtp_s,
                static_cast<unsigned long long>(s.mtp_samples), s.mean_model_psnr_db,
                s.mean_redundancy_pct, static_cast<unsigned long long>(s.plan_violations),
                s.link_loss_ratio, s.mean_reported_pi);
  out << buf;
}

BatchSummary aggregate(std::vector<RunSummary> runs) {
  BatchSummary b;
  b.runs = std::move(runs);
  std::vector<double> mtp, del, psnr, red;
  for (const auto& r : b.runs) {
    mtp.push_back(r.mean_mtp_s);
    del.push_back(r.delivery_ratio);
    psnr.push_back(r.mean_model_psnr_db);
    red.push_back(r.mean_redundancy_pct);
  }
  b.mean_mtp_s = mean_of(mtp);
  b.std_mtp_s = std_of(mtp);
  b.mean_delivery = mean_of(del);
  b.std_delivery = std_of(del);
  b.mean_psnr_db = mean_of(psnr);
  b.std_psnr_db = std_of(psnr);
  b.mean_redundancy_pct = mean_of(red);
  b.std_redundancy_pct = std_of(red);
  return b;
}

void write_batch_csv(const std::string& path, pipeline::Mode mode, const BatchSummary& b) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# schema: nebula.batch.v1\n";
  out << "mode,metric,mean,std\n";
  char buf[192];
  const auto row = [&](const char* metric, double mean, double sd) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f\n", pipeline::to_string(mode), metric, mean,
                  sd);
    out << buf;
  };
  row("mean_mtp_ms", 1000.0 * b.mean_mtp_s, 1000.0 * b.std_mtp_s);
  row("delivery_ratio", b.mean_delivery, b.std_delivery);
  row("model_psnr_db", b.mean_psnr_db, b.std_psnr_db);
  row("redundancy_pct", b.mean_redundancy_pct, b.std_redundancy_pct);
}

}  // namespace

std::string resolve_out_dir(const std::string& out_dir) {
  fs::path p(out_dir);
  if (p.is_absolute()) return out_dir;
  if (const char* root = std::getenv("NEBULA_OUTPUT_ROOT"); root && *root)
    return (fs::path(root) / p).string();
  return out_dir;
}

RunOutput run_one(const ExperimentConfig& cfg, uint64_t seed, const std::string& out_dir) {
  cfg.validate();
  RunOutput out;
  out.session = pipeline::run_session(cfg.session(seed));
  out.summary = summarize(cfg, seed, out.session);

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    netlab::LinkConfig link = cfg.link;
    if (cfg.trace_csv) link.schedule = netlab::read_trace_csv(*cfg.trace_csv);
    const Derived d = derive(cfg, out.session, link);
    write_frames_csv(out_dir + "/frames.csv", cfg, out.session, d);
    write_seconds_csv(out_dir + "/seconds.csv", d);
    write_plans_csv(out_dir + "/plans.csv", out.session);
    write_nprs_csv(out_dir + "/nprs.csv", out.session);
    write_summary_csv(out_dir + "/summary.csv", cfg.mode, out.summary);
  }
  return out;
}

BatchSummary run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto seeds = cfg.seed_list();
  const std::string root = resolve_out_dir(cfg.out_dir);
  fs::create_directories(root);

  std::vector<std::future<RunSummary>> futures;
  futures.reserve(seeds.size());
  for (uint64_t s : seeds)
    futures.push_back(std::async(std::launch::async, [&cfg, s, &root] {
      return run_one(cfg, s, root + "/seed_" + std::to_string(s)).summary;
    }));

  std::vector<RunSummary> runs;
  runs.reserve(seeds.size());
  for (auto& f : futures) runs.push_back(f.get());

  BatchSummary b = aggregate(std::move(runs));
  write_batch_csv(root + "/batch_summary.csv", cfg.mode, b);
  return b;
}

CompareResult compare_modes(const std::vector<ExperimentConfig>& cfgs) {
  if (cfgs.size() < 2)
    throw std::invalid_argument("compare: need at least two configurations");
  for (size_t i = 1; i < cfgs.size(); ++i) {
    const auto& a = cfgs[0];
    const auto& b = cfgs[i];
    const bool same_sched =
        a.link.schedule.size() == b.link.schedule.size() &&
        std::equal(a.link.schedule.begin(), a.link.schedule.end(), b.link.schedule.begin(),
                   [](const auto& x, const auto& y) {
                     return x.start_s == y.start_s && x.mbps == y.mbps;
                   });
    if (!same_sched || a.trace_csv != b.trace_csv)
      throw std::invalid_argument("compare: configurations must share the bandwidth trace");
    if (a.seed_list() != b.seed_list())
      throw std::invalid_argument("compare: configurations must share the seed set");
  }

  CompareResult res;
  for (const auto& cfg : cfgs)
    res.rows.emplace_back(pipeline::to_string(cfg.mode), run_experiment(cfg));

  std::ostringstream text;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-8s %16s %16s %14s %16s\n", "mode", "mtp_ms(mean/std)",
                "delivery", "psnr_db", "redundancy_pct");
  text << buf;
  for (const auto& [mode, b] : res.rows) {
    std::snprintf(buf, sizeof(buf), "%-8s %9.1f/%5.1f %10.3f/%.3f %8.2f/%.2f %10.2f/%.2f\n",
                  mode.c_str(), 1000.0 * b.mean_mtp_s, 1000.0 * b.std_mtp_s, b.mean_delivery,
                  b.std_delivery, b.mean_psnr_db, b.std_psnr_db, b.mean_redundancy_pct,
                  b.std_redundancy_pct);
    text << buf;
  }
  res.table_text = text.str();
  return res;
}

OverheadReport overhead_report(const pipeline::SessionResult& r, int packet_payload) {
  OverheadReport rep;
  std::map<uint32_t, int> per_block;
  for (const auto& f : r.frames) per_block[f.block_id]++;

  std::map<int, std::pair<double, double>> by_sec;  // sec -> (src, red)
  for (const auto& f : r.frames) {
    auto& [src, red] = by_sec[static_cast<int>(f.capture_t)];
    src += f.size_bytes;
    red += frame_red_share_bytes(f, packet_payload, per_block);
  }
  for (const auto& [sec, v] : by_sec)
    rep.per_second_pct.emplace_back(sec, v.first > 0 ? 100.0 * v.second / v.first : 0.0);
  rep.mean_pct =
      r.source_bytes == 0 ? 0.0 : 100.0 * static_cast<double>(r.redundant_bytes) / r.source_bytes;
  return rep;
}

std::string summary_text(const ExperimentConfig& cfg, const BatchSummary& b) {
  std::ostringstream out;
  char buf[256];
  out << "mode " << pipeline::to_string(cfg.mode) << ", " << b.runs.size() << " seed(s), "
      << cfg.duration_s << " s\n";
  std::snprintf(buf, sizeof(buf), "  mean MTP        %8.1f ms (std %.1f)\n",
                1000.0 * b.mean_mtp_s, 1000.0 * b.std_mtp_s);
  out << buf;
  std::snprintf(buf, sizeof(buf), "  delivery ratio  %8.3f (std %.3f)\n", b.mean_delivery,
                b.std_delivery);
  out << buf;
  std::snprintf(buf, sizeof(buf), "  model PSNR      %8.2f dB (std %.2f)\n", b.mean_psnr_db,
                b.std_psnr_db);
  out << buf;
  std::snprintf(buf, sizeof(buf), "  redundancy      %8.2f %% (std %.2f)\n",
                b.mean_redundancy_pct, b.std_redundancy_pct);
  out << buf;
  return out.str();
}

}  // namespace nebula::harness
