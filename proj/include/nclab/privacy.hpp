//
// Copyright 2025 The nclab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef NCLAB_PRIVACY_HPP_
#define NCLAB_PRIVACY_HPP_

#include <cmath>
#include <stdexcept>

#include "nclab/dataset.hpp"

namespace nclab {

// Zero-concentrated differential privacy budget.
struct PrivacyBudget {
  double rho = 0.0;
};

// Per-coordinate Gaussian noise that makes a G-sensitive release rho-zCDP.
struct NoiseCalibration {
  double sensitivity_G = 0.0;
  double sigma_sq = 0.0;

  double sigma() const { return std::sqrt(sigma_sq); }
};

// sigma^2 = G^2 / (2 rho). A zero budget would need infinite noise.
inline NoiseCalibration calibrate(double G, PrivacyBudget budget) {
  if (!(G >= 0.0)) throw std::invalid_argument("sensitivity must be nonnegative");
  if (!(budget.rho > 0.0)) {
    throw std::invalid_argument("infinite noise required: rho must be positive");
  }
  NoiseCalibration calib;
  calib.sensitivity_G = G;
  calib.sigma_sq = G * G / (2.0 * budget.rho);
  return calib;
}

// A noiseless calibration (plain GD); bypasses the rho > 0 requirement.
inline NoiseCalibration no_noise(double G = 1.0) {
  NoiseCalibration calib;
  calib.sensitivity_G = G;
  calib.sigma_sq = 0.0;
  return calib;
}

// rho-zCDP gives (eps, delta)-DP with eps = rho + 2 sqrt(rho ln(1/delta)),
// for every delta in (0,1). Natural logarithm.
inline double zcdp_to_dp(double rho, double delta) {
  if (!(rho >= 0.0)) throw std::invalid_argument("rho must be nonnegative");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("delta must lie in (0,1)");
  }
  return rho + 2.0 * std::sqrt(rho * std::log(1.0 / delta));
}

// Unique positive root of the conversion above, solved as a quadratic in
// sqrt(rho): rho = (sqrt(ln(1/delta) + eps) - sqrt(ln(1/delta)))^2.
inline double dp_to_zcdp(double epsilon, double delta) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("delta must lie in (0,1)");
  }
  const double l = std::log(1.0 / delta);
  const double root = std::sqrt(l + epsilon) - std::sqrt(l);
  return root * root;
}

// T releases at rho_per_step each compose to (T * rho_per_step)-zCDP.
inline PrivacyBudget compose(double rho_per_step, int T) {
  if (T < 1) throw std::invalid_argument("step count must be at least 1");
  if (!(rho_per_step >= 0.0)) {
    throw std::invalid_argument("rho must be nonnegative");
  }
  return PrivacyBudget{static_cast<double>(T) * rho_per_step};
}

// Worst-case l2 norm of a feature under a training-shift model: prototypes
// are unit vectors and the shift adds at most beta per coordinate, so
// G = sqrt(1 + beta^2 p). With clip_to_unit, features are rescaled to the
// unit sphere and G = 1. Test-time attack models have no training
// sensitivity and are rejected.
inline double sensitivity_bound(const ShiftModel& shift, int p,
                                bool clip_to_unit = false) {
  if (p < 1) throw std::invalid_argument("dimension must be positive");
  if (shift.kind == ShiftKind::kAdversarialTest) {
    throw std::invalid_argument(
        "test-time attacks do not touch training data; no sensitivity bound");
  }
  if (!std::isfinite(shift.beta) || shift.beta < 0.0) {
    throw std::invalid_argument("shift model must have a finite l-inf bound");
  }
  if (clip_to_unit) return 1.0;
  if (shift.kind == ShiftKind::kNone) return 1.0;
  return std::sqrt(1.0 + shift.beta * shift.beta * p);
}

}  // namespace nclab

#endif  // NCLAB_PRIVACY_HPP_
