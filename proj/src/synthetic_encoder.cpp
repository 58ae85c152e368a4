#include "nebula/synthetic_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nebula::synth {

SyntheticEncoder::SyntheticEncoder(ctrl::RateLadder ladder, int level, double fps, int gop_len,
                                   double i_frame_ratio, uint64_t seed)
    : ladder_(std::move(ladder)),
      level_(level),
      fps_(fps),
      gop_len_(gop_len),
      i_frame_ratio_(i_frame_ratio),
      rng_(rng::derive_seed(seed, 0xe2c)) {
  ladder_.validate();
  if (level < 0 || level >= ladder_.size())
    throw std::invalid_argument("encoder: level out of range");
  if (!(fps > 0)) throw std::invalid_argument("encoder: fps must be > 0");
  if (gop_len < 1) throw std::invalid_argument("encoder: gop_len must be >= 1");
  if (!(i_frame_ratio >= 1)) throw std::invalid_argument("encoder: i_frame_ratio must be >= 1");
  regenerate_gop();
}

double SyntheticEncoder::gop_budget_bytes(int level) const {
  const double beta = fps_ / gop_len_;  // GoPs per second
  return ladder_.rate(level) * 1e6 / 8.0 / beta;
}

double SyntheticEncoder::reference_psnr_db(int level) {
  // Declared quality of the nine-step ladder, a typical game-content curve.
  static constexpr double table[] = {28.0, 31.5, 33.5, 34.3, 35.8, 36.2, 37.8, 39.3, 40.8};
  if (level < 0 || level >= static_cast<int>(std::size(table)))
    throw std::invalid_argument("encoder: no reference psnr for level");
  return table[level];
}

void SyntheticEncoder::regenerate_gop() {
  const double budget = gop_budget_bytes(level_);
  // I-frame weight rho against F-1 unit P-frames.
  const double p_base = budget / (i_frame_ratio_ + (gop_len_ - 1));

  std::vector<double> raw(static_cast<size_t>(gop_len_));
  double total = 0;
  for (int f = 0; f < gop_len_; ++f) {
    const double base = (f == 0) ? p_base * i_frame_ratio_ : p_base;
    const double jitter = rng::uniform(rng_, 0.9, 1.1);
    raw[static_cast<size_t>(f)] = base * jitter;
    total += raw[static_cast<size_t>(f)];
  }
  const double scale = budget / total;  // keep the GoP on budget
  gop_sizes_.assign(static_cast<size_t>(gop_len_), 0);
  for (int f = 0; f < gop_len_; ++f)
    gop_sizes_[static_cast<size_t>(f)] = static_cast<uint32_t>(
        std::max<long long>(1, std::llround(raw[static_cast<size_t>(f)] * scale)));
  gop_pos_ = 0;
}

Frame SyntheticEncoder::next_frame() {
  if (gop_pos_ >= gop_len_) regenerate_gop();
  Frame fr;
  fr.frame_id = next_frame_id_++;
  fr.gop_index = gop_pos_;
  fr.is_iframe = gop_pos_ == 0;
  fr.size_bytes = gop_sizes_[static_cast<size_t>(gop_pos_)];
  ++gop_pos_;
  return fr;
}

void SyntheticEncoder::set_level(int level) {
  if (level < 0 || level >= ladder_.size())
    throw std::invalid_argument("encoder: level out of range");
  if (level == level_) return;
  level_ = level;
  regenerate_gop();
}

}  // namespace nebula::synth
