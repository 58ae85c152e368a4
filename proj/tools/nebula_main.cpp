#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nebula/calibrate.hpp"
#include "nebula/harness.hpp"
#include "nebula/netlab.hpp"

namespace {

using nebula::harness::ExperimentConfig;

// Flags override config-file fields.
struct Overrides {
  std::string config_path;
  std::string mode;
  std::string out_dir;
  std::string trace_csv;
  std::vector<uint64_t> seeds;
  double duration_s = -1;
  int fixed_level = -2;
  uint64_t trace_seed = 0;
  bool has_trace_seed = false;
  bool lossless = false;
};

ExperimentConfig load_config(const Overrides& o) {
  ExperimentConfig cfg;
  if (!o.config_path.empty()) cfg = ExperimentConfig::from_json_file(o.config_path);
  if (!o.mode.empty()) {
    const auto m = nebula::pipeline::mode_from_string(o.mode);
    if (!m) throw std::invalid_argument("mode: expected nebula | escot | fixed");
    cfg.mode = *m;
  }
  if (o.duration_s > 0) cfg.duration_s = o.duration_s;
  if (!o.seeds.empty()) cfg.seeds = o.seeds;
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  if (!o.trace_csv.empty()) cfg.trace_csv = o.trace_csv;
  if (o.has_trace_seed) cfg.link = nebula::netlab::reference_trace(o.trace_seed, cfg.duration_s);
  if (o.fixed_level >= -1) cfg.fixed_level = o.fixed_level;
  if (o.lossless) cfg.link.loss = nebula::netlab::GilbertParams{};
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "JSON experiment config")
      ->check(CLI::ExistingFile);
  cmd->add_option("--mode", o.mode, "nebula | escot | fixed");
  cmd->add_option("--duration", o.duration_s, "run length in seconds");
  cmd->add_option("--seeds", o.seeds, "seed list (batch)")->delimiter(',');
  cmd->add_option("--out", o.out_dir, "output directory (under NEBULA_OUTPUT_ROOT if relative)");
  cmd->add_option("--trace", o.trace_csv, "bandwidth trace CSV")->check(CLI::ExistingFile);
  auto* ts = cmd->add_option("--trace-seed", o.trace_seed, "generate the reference trace from this seed");
  cmd->callback([&o, ts] { o.has_trace_seed = ts->count() > 0; });
  cmd->add_option("--fixed-level", o.fixed_level, "ladder index for fixed mode (-1 = top)");
  cmd->add_flag("--lossless", o.lossless, "disable link loss");
}

int cmd_run(const Overrides& o) {
  const auto cfg = load_config(o);
  const auto batch = nebula::harness::run_experiment(cfg);
  std::cout << nebula::harness::summary_text(cfg, batch);
  std::cout << "outputs under " << nebula::harness::resolve_out_dir(cfg.out_dir) << "\n";
  return 0;
}

int cmd_compare(const Overrides& o, const std::vector<std::string>& modes) {
  if (modes.size() < 2) throw std::invalid_argument("compare: pass at least two --modes");
  std::vector<ExperimentConfig> cfgs;
  for (const auto& m : modes) {
    Overrides om = o;
    om.mode = m;
    ExperimentConfig cfg = load_config(om);
    cfg.out_dir = o.out_dir.empty() ? ("compare/" + m) : (o.out_dir + "/" + m);
    cfgs.push_back(cfg);
  }
  const auto res = nebula::harness::compare_modes(cfgs);
  std::cout << res.table_text;

  const std::string root = nebula::harness::resolve_out_dir(
      o.out_dir.empty() ? std::string("compare") : o.out_dir);
  std::ofstream out(root + "/compare.csv");
  out << "# schema: nebula.compare.v1\n";
  out << "mode,mean_mtp_ms,std_mtp_ms,delivery_ratio,std_delivery,model_psnr_db,std_psnr_db,"
         "redundancy_pct,std_redundancy_pct\n";
  char buf[256];
  for (const auto& [mode, b] : res.rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.3f,%.3f,%.6f,%.6f,%.3f,%.3f,%.3f,%.3f\n", mode.c_str(),
                  1000.0 * b.mean_mtp_s, 1000.0 * b.std_mtp_s, b.mean_delivery, b.std_delivery,
                  b.mean_psnr_db, b.std_psnr_db, b.mean_redundancy_pct, b.std_redundancy_pct);
    out << buf;
  }
  std::cout << "comparison written to " << root << "/compare.csv\n";
  return 0;
}

int cmd_trace(uint64_t seed, bool canonical, double duration, const std::string& out) {
  const uint64_t s = canonical ? nebula::netlab::k_canonical_trace_seed : seed;
  const auto cfg = nebula::netlab::reference_trace(s, duration);
  nebula::netlab::write_trace_csv(out, cfg);
  std::cout << "trace (seed " << s << ", " << cfg.schedule.size() << " segments) -> " << out
            << "\n";
  return 0;
}

int cmd_calibrate(uint64_t seed, const std::string& out) {
  const auto d = nebula::calib::fit_distortion();
  const auto m = nebula::calib::fit_mtp(seed);
  const std::string profile = nebula::calib::profile_json_text(d, m);
  std::printf("distortion fit: theta1 = %.2f, R0 = %.2f kb/s (sse %.3f over %d points)\n",
              d.theta1, d.r0_kbps, d.sse, d.points);
  std::printf("mtp fit: alpha = (%.6f, %.6f, %.6f, %.6f), R^2 = %.3f over %d samples\n",
              m.params.alpha1, m.params.alpha2, m.params.alpha3, m.params.alpha4, m.r2,
              m.samples);
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write " + out);
    f << profile;
    std::cout << "profile -> " << out << "\n";
  } else {
    std::cout << profile;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rate/FEC-adaptive low-latency streaming testbed"};
  app.require_subcommand(1);

  Overrides o;
  std::vector<std::string> compare_modes;
  uint64_t trace_seed = 1;
  bool trace_canonical = false;
  double trace_duration = 60.0;
  std::string trace_out = "trace.csv";
  uint64_t cal_seed = 1;
  std::string cal_out;

  auto* run = app.add_subcommand("run", "run one experiment (batch over --seeds)");
  add_common(run, o);

  auto* cmp = app.add_subcommand("compare", "run several modes on one trace and seed set");
  add_common(cmp, o);
  cmp->add_option("--modes", compare_modes, "modes to compare")->delimiter(',')->required();

  auto* tr = app.add_subcommand("trace", "generate/export a bandwidth trace CSV");
  tr->add_option("--seed", trace_seed, "trace seed");
  tr->add_flag("--canonical", trace_canonical, "use the canonical reference seed");
  tr->add_option("--duration", trace_duration, "trace length in seconds");
  tr->add_option("--out", trace_out, "output CSV path");

  auto* cal = app.add_subcommand("calibrate", "fit the default model parameters");
  cal->add_option("--seed", cal_seed, "seed for the fitting runs");
  cal->add_option("--out", cal_out, "write the profile JSON here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(o);
    if (cmp->parsed()) return cmd_compare(o, compare_modes);
    if (tr->parsed()) return cmd_trace(trace_seed, trace_canonical, trace_duration, trace_out);
    if (cal->parsed()) return cmd_calibrate(cal_seed, cal_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
