#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nebula/models.hpp"
#include "nebula/pipeline.hpp"

// Experiment runner: wires encoder -> controller -> FEC -> link -> client,
// runs one seed or a batch, and writes the versioned CSVs (frames, seconds,
// plans, summary) plus a per-batch aggregate. Deterministic: identical
// (config, seed) yields bit-identical files.

namespace nebula::harness {

struct ExperimentConfig {
  pipeline::Mode mode = pipeline::Mode::nebula;
  double duration_s = 60.0;
  uint64_t seed = 1;
  std::vector<uint64_t> seeds;  // batch override; empty means {seed}
  std::string out_dir = "out";

  netlab::LinkConfig link = netlab::reference_trace(netlab::k_canonical_trace_seed);
  std::optional<std::string> trace_csv;  // replaces link.schedule when set

  ctrl::RateLadder ladder = ctrl::RateLadder::default_ladder();
  ctrl::ControllerConfig ctrl;
  pipeline::StageDelays stages;
  model::DistortionParams distortion = model::DistortionParams::defaults();
  model::MtpParams mtp = model::MtpParams::defaults();

  int initial_level = 0;
  int fixed_level = -1;  // -1 = top
  double event_rate_hz = 2.0;
  double display_deadline_s = 0.330;
  double i_frame_ratio = 4.0;

  std::vector<uint64_t> seed_list() const { return seeds.empty() ? std::vector<uint64_t>{seed} : seeds; }

  // Loads a declarative JSON config; unknown keys are rejected and every
  // validation error carries its field path. `text` is the file content.
  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig from_json_file(const std::string& path);
  void validate() const;

  pipeline::SessionConfig session(uint64_t run_seed) const;
};

struct RunSummary {
  uint64_t seed = 0;
  uint64_t frames_sent = 0;
  uint64_t frames_displayed = 0;
  double delivery_ratio = 0.0;
  double mean_mtp_s = 0.0;
  double p95_mtp_s = 0.0;
  uint64_t mtp_samples = 0;
  double mean_model_psnr_db = 0.0;
  double mean_redundancy_pct = 0.0;
  uint64_t plan_violations = 0;   // re+rr > mu*(1-Qd) while the factor is positive
  double link_loss_ratio = 0.0;   // ground-truth channel erasure ratio (Gilbert)
  double link_overflow_ratio = 0.0;  // queue tail drops
  double mean_reported_pi = 0.0;
};

struct BatchSummary {
  std::vector<RunSummary> runs;
  double mean_mtp_s = 0.0, std_mtp_s = 0.0;
  double mean_delivery = 0.0, std_delivery = 0.0;
  double mean_psnr_db = 0.0, std_psnr_db = 0.0;
  double mean_redundancy_pct = 0.0, std_redundancy_pct = 0.0;
};

struct RunOutput {
  pipeline::SessionResult session;
  RunSummary summary;
};

// Single run; when out_dir is nonempty writes frames.csv, seconds.csv,
// plans.csv and summary.csv beneath it.
RunOutput run_one(const ExperimentConfig& cfg, uint64_t seed, const std::string& out_dir);

// Batch across cfg.seed_list(), parallel across seeds, outputs under
// out_dir/seed_<s>/ plus out_dir/batch_summary.csv.
BatchSummary run_experiment(const ExperimentConfig& cfg);

// Aligned multi-mode comparison over one trace and seed set. Throws when the
// configs do not share the link schedule and seeds.
struct CompareResult {
  std::vector<std::pair<std::string, BatchSummary>> rows;
  std::string table_text;
};
CompareResult compare_modes(const std::vector<ExperimentConfig>& cfgs);

// Redundancy overhead: redundant bytes over source bytes.
struct OverheadReport {
  std::vector<std::pair<double, double>> per_second_pct;  // (t, pct)
  double mean_pct = 0.0;
};
OverheadReport overhead_report(const pipeline::SessionResult& r, int packet_payload = 1500);

RunSummary summarize(const ExperimentConfig& cfg, uint64_t seed,
                     const pipeline::SessionResult& r);

std::string summary_text(const ExperimentConfig& cfg, const BatchSummary& b);

// Resolves out_dir against the NEBULA_OUTPUT_ROOT environment variable when
// the path is relative.
std::string resolve_out_dir(const std::string& out_dir);

}  // namespace nebula::harness
