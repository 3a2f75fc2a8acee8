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

#ifndef NCLAB_TRAINER_HPP_
#define NCLAB_TRAINER_HPP_

#include <cmath>
#include <optional>
#include <stdexcept>

#include "nclab/dataset.hpp"
#include "nclab/privacy.hpp"
#include "nclab/rng.hpp"

namespace nclab {

struct TrainConfig {
  // Learning rate. Unset means: 1 for one-step runs (predictions from zero
  // init are scale invariant, so no tuning is needed) and the prescribed
  // multi-step schedule R/(n G^2 + p + sqrt(p t) + t) for projected runs.
  std::optional<double> eta;
  int iterations = 1;  // Gradient steps; > 1 requires a projection radius.
  std::optional<double> projection_radius;  // l2 ball radius R.
  // Concentration parameter t of the multi-step schedule; unset derives
  // t = n^2 + ln(1/iterations).
  std::optional<double> tail_parameter;
};

// Multi-iteration step size: eta = R / (n G^2 + p + sqrt(p t) + t).
inline double default_multistep_eta(double R, int n, double G, int p, double t) {
  return R / (n * G * G + p + std::sqrt(static_cast<double>(p) * t) + t);
}

// Default tail parameter t = n^2 + ln(1/k) for a k-iteration run.
inline double default_tail_parameter(int n, int iterations) {
  return static_cast<double>(n) * n + std::log(1.0 / iterations);
}

// Summed cross-entropy gradient at the given head.
//
// Multi-class head: sum over rows of (softmax(W x) - onehot(y)) x^T, a K x p
// matrix. Reparameterized binary head (theta; labels read as +1 for class 0,
// -1 for class 1): gradient of sum log(1 + exp(-y theta . x)), a 1 x p row.
// At zero parameters the softmax term is (1/K) ones for every row.
inline Matrix ce_gradient(const LinearHead& head, const LabeledDataset& data) {
  if (head.W.cols() != data.features.cols()) {
    throw std::invalid_argument("head and data dimensions disagree");
  }
  if (head.reparameterized) {
    if (data.K() > 2) {
      throw std::invalid_argument("reparameterized head needs binary data");
    }
    Matrix grad = Matrix::Zero(1, data.p());
    for (int i = 0; i < data.n(); ++i) {
      const double y_pm = (data.labels[i] == 0) ? 1.0 : -1.0;
      const double margin = y_pm * head.W.row(0).dot(data.features.row(i));
      // sigmoid(-margin), computed without overflow on either tail.
      const double s = (margin >= 0) ? std::exp(-margin) / (1.0 + std::exp(-margin))
                                     : 1.0 / (1.0 + std::exp(margin));
      grad.row(0) -= y_pm * s * data.features.row(i);
    }
    return grad;
  }

  const int K = static_cast<int>(head.W.rows());
  if (K < data.K()) throw std::invalid_argument("head has fewer rows than classes");
  Matrix grad = Matrix::Zero(K, data.p());
  Vector scores(K);
  for (int i = 0; i < data.n(); ++i) {
    scores.noalias() = head.W * data.features.row(i).transpose();
    const double m = scores.maxCoeff();
    Vector soft = (scores.array() - m).exp();
    soft /= soft.sum();
    soft[data.labels[i]] -= 1.0;
    grad.noalias() += soft * data.features.row(i);
  }
  return grad;
}

namespace internal {

inline void CheckSensitivity(const LabeledDataset& data, const NoiseCalibration& calib) {
  const double limit = calib.sensitivity_G * (1.0 + 1e-9) + 1e-12;
  for (Eigen::Index i = 0; i < data.features.rows(); ++i) {
    const double norm = data.features.row(i).norm();
    if (norm > limit) {
      throw std::invalid_argument(
          "row " + std::to_string(i) + " has norm " + std::to_string(norm) +
          " exceeding the declared sensitivity " + std::to_string(calib.sensitivity_G));
    }
  }
}

inline LinearHead ZeroHead(const LabeledDataset& data) {
  LinearHead head;
  if (data.K() == 2) {
    head.reparameterized = true;
    head.W = Matrix::Zero(1, data.p());
  } else {
    head.reparameterized = false;
    head.W = Matrix::Zero(data.K(), data.p());
  }
  return head;
}

// theta - eta * (gradient - noise); noise is symmetric so the sign choice is
// free, and this one makes a single projected step from zero coincide
// bit-for-bit with the one-step trainer on the same seed.
inline void NoisyStep(const LabeledDataset& data, double eta,
                      const NoiseCalibration& calib, Rng* rng, LinearHead* head) {
  const Matrix grad = ce_gradient(*head, data);
  head->W -= eta * grad;
  if (calib.sigma_sq > 0.0) {
    const double sigma = std::sqrt(calib.sigma_sq);
    for (Eigen::Index r = 0; r < head->W.rows(); ++r) {
      for (Eigen::Index c = 0; c < head->W.cols(); ++c) {
        head->W(r, c) += eta * rng->normal(0.0, sigma);
      }
    }
  }
}

}  // namespace internal

// One noisy gradient step from zero initialization:
//   W = -eta * ce_gradient(0, data) + eta * N(0, sigma^2 per coordinate).
// Binary data trains the reparameterized theta (p noise draws); otherwise
// the full K x p head (K*p noise draws). sigma^2 = 0 recovers plain GD.
// Every row must respect the calibrated sensitivity.
inline LinearHead one_step_noisygd(const LabeledDataset& data, const TrainConfig& cfg,
                                   const NoiseCalibration& calib, std::uint64_t seed) {
  const double eta = cfg.eta.value_or(1.0);
  if (!(eta > 0.0)) throw std::invalid_argument("learning rate must be positive");
  internal::CheckSensitivity(data, calib);
  LinearHead head = internal::ZeroHead(data);
  Rng rng(seed);
  internal::NoisyStep(data, eta, calib, &rng, &head);
  return head;
}

// cfg.iterations steps of noisy gradient descent from zero, each followed by
// Euclidean projection onto the ball of radius cfg.projection_radius. The
// calibration is per step (a k-step run spends k times its per-step budget).
// An explicit cfg.eta always wins; otherwise the prescribed schedule is used
// with t = cfg.tail_parameter or its default.
inline LinearHead projected_noisygd(const LabeledDataset& data, const TrainConfig& cfg,
                                    const NoiseCalibration& calib, std::uint64_t seed) {
  if (!cfg.projection_radius) {
    throw std::invalid_argument("projected training requires a projection radius");
  }
  const double R = *cfg.projection_radius;
  if (!(R > 0.0)) throw std::invalid_argument("projection radius must be positive");
  internal::CheckSensitivity(data, calib);

  double eta;
  if (cfg.eta) {
    eta = *cfg.eta;
  } else {
    const double t =
        cfg.tail_parameter.value_or(default_tail_parameter(data.n(), cfg.iterations));
    eta = default_multistep_eta(R, data.n(), calib.sensitivity_G, data.p(), t);
  }
  if (!(eta > 0.0)) throw std::invalid_argument("learning rate must be positive");

  LinearHead head = internal::ZeroHead(data);
  Rng rng(seed);
  for (int step = 0; step < cfg.iterations; ++step) {
    internal::NoisyStep(data, eta, calib, &rng, &head);
    const double norm = head.W.norm();  // Frobenius; l2 for the theta row.
    if (norm > R) head.W *= R / norm;
  }
  return head;
}

// argmax_k (W x)_k with ties toward the lower class index; reparameterized
// heads use sign(theta . x) with 0 mapped to class 0.
inline int predict(const LinearHead& head, const Vector& x) {
  if (head.W.cols() != x.size()) {
    throw std::invalid_argument("head and point dimensions disagree");
  }
  if (head.reparameterized) {
    return head.W.row(0).dot(x) >= 0.0 ? 0 : 1;
  }
  int best = 0;
  double best_score = head.W.row(0).dot(x);
  for (Eigen::Index k = 1; k < head.W.rows(); ++k) {
    const double score = head.W.row(k).dot(x);
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(k);
    }
  }
  return best;
}

}  // namespace nclab

#endif  // NCLAB_TRAINER_HPP_
