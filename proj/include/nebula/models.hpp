#pragma once

// Closed-form quality and latency models driving the rate/redundancy control:
// the three-component end-to-end distortion, its PSNR, and the linear
// motion-to-photon estimate. Rates entering the distortion model are kb/s;
// rates entering the MTP model and the controller constraints are Mb/s.
// Pure functions over immutable inputs.

namespace nebula::model {

struct DistortionParams {
  double theta1 = 21996.2805494738;  // encoder-distortion scale, kb^2/s
  double r0_kbps = 0.0;     // encoder rate offset
  double theta2 = 500.0;    // transmission-distortion slope
  double theta3 = 3000.0;   // propagation-distortion slope (per I-frame rate)
  double max_pixel = 255.0;

  // theta1 and r0 reproduce `nebula calibrate`: a least-squares fit of
  // theta1/(R - R0) to the synthetic encoder's rate-quality curve. theta2
  // and theta3 are shipped constants (see README, profile "default").
  static DistortionParams defaults() { return {}; }

  void validate() const;  // throws std::invalid_argument with the field name
};

struct MtpParams {
  double alpha1 = 0.0;   // bandwidth coefficient, bit
  double alpha2 = 0.0;   // rate coefficient, bit
  double alpha3 = 1.0;   // queuing coefficient
  double alpha4 = 0.05;  // pipeline constant, seconds
  double phi = 100.0;    // distortion-per-second weight in the joint objective

  // Frozen output of `nebula calibrate`'s least-squares regression of
  // measured MTP samples on (1/mu, 1/R, Q_d, 1) over emulator traces.
  static MtpParams defaults();

  void validate() const;
};

// Smoothed client-side measurements as the controller consumes them.
struct NetworkState {
  double mu_mbps = 0.0;   // measured throughput
  double pi = 0.0;        // packet loss rate in [0, 1]
  double rtt_s = 0.0;
  double rtt_min_s = 0.0;
  double qd_s = 0.0;      // rtt - rtt_min
  double mtp_s = 0.0;

  static NetworkState make(double mu_mbps, double pi, double rtt_s, double rtt_min_s,
                           double mtp_s);
  void validate() const;
};

struct DistortionBreakdown {
  double encoder = 0.0;      // theta1 / (Re - R0)
  double channel = 0.0;      // theta2 * pi
  double propagation = 0.0;  // theta3 * pi / beta
  double total() const { return encoder + channel + propagation; }
};

// End-to-end distortion at source rate re_kbps, loss rate pi and I-frame
// rate beta (GoPs per second). Throws std::domain_error at or below the
// encoder-term pole re <= R0, and std::invalid_argument for beta <= 0.
DistortionBreakdown end_to_end_distortion(double re_kbps, double pi, double beta,
                                          const DistortionParams& p);

// 20*log10(max_pixel) - 10*log10(d). Throws std::domain_error for d <= 0.
double model_psnr_db(double distortion, const DistortionParams& p);

// alpha1/mu + alpha2/(Re+Rr) + alpha3*Qd + alpha4, seconds.
// Throws std::domain_error for nonpositive mu or total rate.
double mtp_estimate_s(double mu_mbps, double total_rate_mbps, double qd_s, const MtpParams& p);

// Probability that a frame of k packets loses at least one packet when each
// packet is erased independently with probability pi: 1 - (1-pi)^k. Used to
// express the per-packet loss rate at frame granularity when scanning the
// rate ladder (larger frames expose more packets to loss).
double frame_loss_rate(double pi, int packets_per_frame);

}  // namespace nebula::model
