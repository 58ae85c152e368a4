#include "nebula/models.hpp"

#include <cmath>
#include <stdexcept>

namespace nebula::model {

void DistortionParams::validate() const {
  if (!(theta1 > 0)) throw std::invalid_argument("distortion.theta1: must be > 0");
  if (!(theta2 >= 0)) throw std::invalid_argument("distortion.theta2: must be >= 0");
  if (!(theta3 >= 0)) throw std::invalid_argument("distortion.theta3: must be >= 0");
  if (!(r0_kbps >= 0)) throw std::invalid_argument("distortion.r0_kbps: must be >= 0");
  if (!(max_pixel > 0)) throw std::invalid_argument("distortion.max_pixel: must be > 0");
}

MtpParams MtpParams::defaults() {
  // `nebula calibrate --seed 1` (see README): sign-constrained least squares
  // over fixed-link runs. The rate column is collinear with the bandwidth
  // column in this pipeline, so the constraint pins alpha2 at zero.
  MtpParams p;
  p.alpha1 = 0.074546128338;
  p.alpha2 = 0.0;
  p.alpha3 = 1.562847446384;
  p.alpha4 = 0.089773170364;
  p.phi = 100.0;
  return p;
}

void MtpParams::validate() const {
  if (!(alpha4 >= 0)) throw std::invalid_argument("mtp.alpha4: must be >= 0");
  for (double v : {alpha1, alpha2, alpha3, alpha4, phi})
    if (!std::isfinite(v)) throw std::invalid_argument("mtp: coefficients must be finite");
}

NetworkState NetworkState::make(double mu_mbps, double pi, double rtt_s, double rtt_min_s,
                                double mtp_s) {
  NetworkState s;
  s.mu_mbps = mu_mbps;
  s.pi = pi;
  s.rtt_s = rtt_s;
  s.rtt_min_s = rtt_min_s;
  s.qd_s = rtt_s - rtt_min_s;
  s.mtp_s = mtp_s;
  s.validate();
  return s;
}

void NetworkState::validate() const {
  if (!(rtt_min_s >= 0)) throw std::invalid_argument("state.rtt_min_s: must be >= 0");
  if (!(rtt_s >= rtt_min_s)) throw std::invalid_argument("state.rtt_s: must be >= rtt_min_s");
  if (!(pi >= 0 && pi <= 1)) throw std::invalid_argument("state.pi: must be in [0, 1]");
  if (!(mu_mbps >= 0)) throw std::invalid_argument("state.mu_mbps: must be >= 0");
}

DistortionBreakdown end_to_end_distortion(double re_kbps, double pi, double beta,
                                          const DistortionParams& p) {
  if (!(beta > 0)) throw std::invalid_argument("end_to_end_distortion: beta must be > 0");
  if (!(re_kbps > p.r0_kbps))
    throw std::domain_error("end_to_end_distortion: re must exceed R0 (encoder-term pole)");
  DistortionBreakdown d;
  d.encoder = p.theta1 / (re_kbps - p.r0_kbps);
  d.channel = p.theta2 * pi;
  d.propagation = p.theta3 * pi / beta;
  return d;
}

double model_psnr_db(double distortion, const DistortionParams& p) {
  if (!(distortion > 0)) throw std::domain_error("model_psnr_db: distortion must be > 0");
  return 20.0 * std::log10(p.max_pixel) - 10.0 * std::log10(distortion);
}

double mtp_estimate_s(double mu_mbps, double total_rate_mbps, double qd_s, const MtpParams& p) {
  if (!(mu_mbps > 0)) throw std::domain_error("mtp_estimate_s: mu must be > 0");
  if (!(total_rate_mbps > 0)) throw std::domain_error("mtp_estimate_s: total rate must be > 0");
  return p.alpha1 / mu_mbps + p.alpha2 / total_rate_mbps + p.alpha3 * qd_s + p.alpha4;
}

double frame_loss_rate(double pi, int packets_per_frame) {
  if (!(pi >= 0 && pi <= 1)) throw std::invalid_argument("frame_loss_rate: pi must be in [0, 1]");
  if (packets_per_frame < 1)
    throw std::invalid_argument("frame_loss_rate: packets_per_frame must be >= 1");
  return 1.0 - std::pow(1.0 - pi, packets_per_frame);
}

}  // namespace nebula::model
