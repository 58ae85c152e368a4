#pragma once

#include <cstdint>
#include <vector>

#include "nebula/controller.hpp"
#include "nebula/rng.hpp"

// Stand-in video source: emits frame sizes with a GoP structure (one large
// I-frame followed by smaller P-frames) whose per-GoP total matches the
// ladder level's nominal bitrate. Sizes carry +-10% seeded jitter and are
// renormalized so the GoP budget holds within 1%. A level switch starts a
// fresh GoP, as a resolution change would.

namespace nebula::synth {

struct Frame {
  uint64_t frame_id = 0;
  int gop_index = 0;  // 0 = I-frame
  bool is_iframe = false;
  uint32_t size_bytes = 0;
};

class SyntheticEncoder {
 public:
  SyntheticEncoder(ctrl::RateLadder ladder, int level, double fps, int gop_len,
                   double i_frame_ratio, uint64_t seed);

  Frame next_frame();

  void set_level(int level);  // takes effect immediately; restarts the GoP
  int level() const { return level_; }
  double fps() const { return fps_; }
  int gop_len() const { return gop_len_; }

  // Nominal per-GoP byte budget at a ladder level.
  double gop_budget_bytes(int level) const;

  // Reference quality the synthetic ladder is declared to deliver, used by
  // the calibration fit (MSE = max_pixel^2 / 10^(psnr/10)).
  static double reference_psnr_db(int level);

 private:
  void regenerate_gop();

  ctrl::RateLadder ladder_;
  int level_;
  double fps_;
  int gop_len_;
  double i_frame_ratio_;
  rng::Engine rng_;
  uint64_t next_frame_id_ = 0;
  int gop_pos_ = 0;
  std::vector<uint32_t> gop_sizes_;
};

}  // namespace nebula::synth
