#pragma once

#include <cstdint>
#include <string>

#include "nebula/models.hpp"

// Produces the shipped "default" parameter profile from first principles:
// theta1/R0 by least squares against the synthetic encoder's declared
// rate-quality curve, alpha1..alpha4 by multivariate regression of measured
// MTP samples on (1/mu, 1/R, Qd, 1) over emulator runs. `nebula calibrate`
// re-derives and prints them; the frozen copies live in models.cpp.

namespace nebula::calib {

struct DistortionFit {
  double theta1 = 0.0;
  double r0_kbps = 0.0;
  double sse = 0.0;
  int points = 0;
};

DistortionFit fit_distortion();

struct MtpFit {
  model::MtpParams params;
  double r2 = 0.0;
  int samples = 0;
};

MtpFit fit_mtp(uint64_t seed);

// JSON profile loadable through the config file's distortion/mtp sections.
std::string profile_json_text(const DistortionFit& d, const MtpFit& m);

}  // namespace nebula::calib
