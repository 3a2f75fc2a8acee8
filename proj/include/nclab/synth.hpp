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

#ifndef NCLAB_SYNTH_HPP_
#define NCLAB_SYNTH_HPP_

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "nclab/dataset.hpp"
#include "nclab/geometry.hpp"
#include "nclab/rng.hpp"

namespace nclab {

namespace internal {

// Largest-remainder apportionment of n samples to the given weights.
// Ties in the remainder go to the lower class index.
inline std::vector<int> ApportionCounts(int n, const std::vector<double>& weights) {
  const int K = static_cast<int>(weights.size());
  std::vector<int> counts(K);
  std::vector<std::pair<double, int>> remainders(K);
  int assigned = 0;
  for (int k = 0; k < K; ++k) {
    const double exact = weights[k] * n;
    counts[k] = static_cast<int>(std::floor(exact));
    remainders[k] = {exact - counts[k], k};
    assigned += counts[k];
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (int i = 0; i < n - assigned; ++i) ++counts[remainders[i].second];
  return counts;
}

// Resolves the deterministic offset of a ShiftModel: the explicit vector if
// given (checked against the l-inf bound), otherwise beta on every coordinate.
inline Vector ResolveOffset(const ShiftModel& shift, int p) {
  if (shift.offset_vector) {
    const Vector& v = *shift.offset_vector;
    if (v.size() != p) throw std::invalid_argument("offset vector has wrong dimension");
    if (v.lpNorm<Eigen::Infinity>() > shift.beta + 1e-12) {
      throw std::invalid_argument("offset vector violates its l-inf bound");
    }
    return v;
  }
  return Vector::Constant(p, shift.beta);
}

// One i.i.d. shift draw: coordinates uniform on [-beta, beta]. When
// `axis` is nonzero and the orthogonality flag is on, the component along
// axis is removed and coordinates re-clipped to the l-inf bound.
inline Vector DrawStochasticShift(const ShiftModel& shift, int p, const Vector* axis,
                                  Rng* rng) {
  Vector v(p);
  for (int j = 0; j < p; ++j) v[j] = rng->uniform(-shift.beta, shift.beta);
  if (shift.orthogonal_to_prototype && axis != nullptr) {
    const double norm_sq = axis->squaredNorm();
    if (norm_sq > 0) {
      v -= (axis->dot(v) / norm_sq) * (*axis);
      for (int j = 0; j < p; ++j) v[j] = std::clamp(v[j], -shift.beta, shift.beta);
    }
  }
  return v;
}

}  // namespace internal

// Draws n points around the frame's prototypes: row i is M_{y_i} + v_i with
// rows grouped by label. Shift semantics:
//   none       -> v_i = 0,
//   stochastic -> fresh i.i.d. draw per row,
//   offset     -> one fixed vector added to every row (the distribution's
//                 offset; in the binary reparameterization y_i * x_i this is
//                 the +v / -v convention for the two classes).
// Deterministic given (frame, n, weights, shift, seed); the none/offset
// kinds consume no randomness at all.
inline LabeledDataset sample_dataset(const EtfFrame& frame, int n,
                                     const std::vector<double>& class_weights,
                                     const ShiftModel& shift, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("need at least one sample");
  if (static_cast<int>(class_weights.size()) != frame.K) {
    throw std::invalid_argument("class weights must have one entry per class");
  }
  const double total = std::accumulate(class_weights.begin(), class_weights.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("class weights must sum to 1");
  }
  if (shift.kind == ShiftKind::kAdversarialTest) {
    throw std::invalid_argument(
        "adversarial shifts are test-time only; use perturb_test_point");
  }

  LabeledDataset data;
  data.class_counts = internal::ApportionCounts(n, class_weights);
  data.features = Matrix(n, frame.p);
  data.labels.resize(n);

  std::optional<Vector> offset;
  if (shift.kind == ShiftKind::kOffset) {
    offset = internal::ResolveOffset(shift, frame.p);
  }

  Rng rng(seed);
  int row = 0;
  for (int k = 0; k < frame.K; ++k) {
    const Vector prototype = frame.M.col(k);
    for (int c = 0; c < data.class_counts[k]; ++c, ++row) {
      data.labels[row] = k;
      switch (shift.kind) {
        case ShiftKind::kNone:
          data.features.row(row) = prototype;
          break;
        case ShiftKind::kOffset:
          data.features.row(row) = prototype + *offset;
          break;
        case ShiftKind::kStochastic:
          data.features.row(row) =
              prototype + internal::DrawStochasticShift(shift, frame.p, &prototype, &rng);
          break;
        case ShiftKind::kAdversarialTest:
          break;  // Rejected above.
      }
    }
  }
  if (frame.K == 2) data.alpha = static_cast<double>(data.class_counts[0]) / n;
  return data;
}

// Applies a test-time perturbation to a single point. Stochastic and offset
// kinds mirror the training shift; adversarial-test computes the exact
// worst case over the l-inf ball for a binary linear decision: for the
// reparameterized score y * theta . x the minimizer is
// v*_j = -y * beta * sign(theta_j).
inline Vector perturb_test_point(const Vector& x, int y, const ShiftModel& shift,
                                 const LinearHead* model, std::uint64_t seed) {
  switch (shift.kind) {
    case ShiftKind::kNone:
      return x;
    case ShiftKind::kOffset:
      return x + internal::ResolveOffset(shift, static_cast<int>(x.size()));
    case ShiftKind::kStochastic: {
      Rng rng(seed);
      // The clean test point sits on its class prototype, so its own
      // direction serves as the prototype axis for the orthogonality flag.
      return x + internal::DrawStochasticShift(shift, static_cast<int>(x.size()), &x, &rng);
    }
    case ShiftKind::kAdversarialTest: {
      if (model == nullptr) {
        throw std::invalid_argument("adversarial perturbation requires the trained model");
      }
      Vector theta;
      if (model->reparameterized) {
        theta = model->W.row(0);
      } else if (model->W.rows() == 2) {
        theta = model->W.row(0) - model->W.row(1);
      } else {
        throw std::invalid_argument("adversarial attack is defined for binary models");
      }
      if (theta.size() != x.size()) {
        throw std::invalid_argument("model dimension does not match the test point");
      }
      const double y_pm = (y == 0) ? 1.0 : -1.0;
      Vector out = x;
      for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double s = (theta[j] > 0) - (theta[j] < 0);
        out[j] -= y_pm * shift.beta * s;
      }
      return out;
    }
  }
  throw std::logic_error("unreachable shift kind");
}

// Zero-initialization gradient direction for the binary canonical frame with
// a common offset v and label-(-1) fraction alpha:
//   (n/2) e1 + ((1 - 2 alpha) n / 2) v.
// At alpha = 1/2 the offset cancels; away from balance it contaminates the
// gradient. Reference arithmetic for bound cross-checks.
inline Vector imbalanced_gradient_offset(double alpha, const Vector& v, int n) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("imbalance fraction must lie strictly in (0,1)");
  }
  Vector g = (1.0 - 2.0 * alpha) * (n / 2.0) * v;
  g[0] += n / 2.0;
  return g;
}

}  // namespace nclab

#endif  // NCLAB_SYNTH_HPP_
