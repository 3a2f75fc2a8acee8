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

#ifndef NCLAB_GEOMETRY_HPP_
#define NCLAB_GEOMETRY_HPP_

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "nclab/mathutil.hpp"
#include "nclab/rng.hpp"

namespace nclab {

// Simplex equiangular tight frame of K unit prototype columns in R^p:
//
//   M = sqrt(K/(K-1)) * P * (I_K - (1/K) 1 1^T),   P^T P = I_K.
//
// Columns have unit norm, pairwise inner product -1/(K-1), and sum to zero.
struct EtfFrame {
  int p = 0;
  int K = 0;
  Matrix M;       // p x K prototype columns.
  Matrix source;  // The partial orthogonal P; empty when deserialized.
  bool canonical = false;

  Vector prototype(int k) const { return M.col(k); }
};

namespace internal {

// Modified Gram-Schmidt with a second re-orthogonalization pass ("twice is
// enough"). Throws only on dimensions; near-dependent draws are retried by
// the caller with a fresh seed.
inline bool OrthonormalizeColumns(Matrix* a) {
  const Eigen::Index cols = a->cols();
  for (Eigen::Index j = 0; j < cols; ++j) {
    const double original_norm = a->col(j).norm();
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index i = 0; i < j; ++i) {
        a->col(j) -= a->col(i).dot(a->col(j)) * a->col(i);
      }
    }
    const double norm = a->col(j).norm();
    if (!(norm > 1e-8 * std::max(1.0, original_norm))) return false;
    a->col(j) /= norm;
  }
  return true;
}

}  // namespace internal

// Builds a K-class simplex frame in R^p. `canonical` selects a fixed P
// (the first K coordinate axes; for K = 2 the frame is exactly [e1, -e1]),
// otherwise P is an orthonormalized seeded Gaussian draw.
inline EtfFrame make_etf(int p, int K, std::uint64_t seed = 0,
                         bool canonical = false) {
  if (K < 2) {
    throw std::invalid_argument("a frame needs at least two classes (K >= 2)");
  }
  if (K > p) {
    throw std::invalid_argument(
        "K orthonormal directions do not fit in dimension p (need K <= p)");
  }

  EtfFrame frame;
  frame.p = p;
  frame.K = K;
  frame.canonical = canonical;

  if (canonical && K == 2) {
    // Exact binary frame: M = [e1, -e1]. The recorded P = [(e1+e2)/sqrt(2),
    // (e2-e1)/sqrt(2)] reproduces it through the simplex construction.
    frame.M = Matrix::Zero(p, 2);
    frame.M(0, 0) = 1.0;
    frame.M(0, 1) = -1.0;
    frame.source = Matrix::Zero(p, 2);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    frame.source(0, 0) = inv_sqrt2;
    frame.source(1, 0) = inv_sqrt2;
    frame.source(0, 1) = -inv_sqrt2;
    frame.source(1, 1) = inv_sqrt2;
    return frame;
  }

  Matrix basis;
  if (canonical) {
    basis = Matrix::Identity(p, p).leftCols(K);
  } else {
    Rng rng(seed);
    for (int attempt = 0; attempt < 8; ++attempt) {
      basis = Matrix(p, K);
      Rng draw = rng.derived(attempt);
      for (Eigen::Index j = 0; j < K; ++j) {
        for (Eigen::Index i = 0; i < p; ++i) basis(i, j) = draw.normal();
      }
      if (internal::OrthonormalizeColumns(&basis)) break;
      if (attempt == 7) {
        throw std::runtime_error("could not orthonormalize random basis");
      }
    }
  }

  frame.source = basis;
  const double scale = std::sqrt(static_cast<double>(K) / (K - 1.0));
  const Vector mean = basis.rowwise().sum() / static_cast<double>(K);
  frame.M = scale * (basis.colwise() - mean);
  return frame;
}

// K x K Gram matrix of the prototypes.
inline Matrix gram(const EtfFrame& frame) { return frame.M.transpose() * frame.M; }

// Checks unit norms, the -1/(K-1) off-diagonal, and zero column sums.
inline bool validate_frame(const EtfFrame& frame, double tol = 1e-10) {
  if (frame.M.rows() != frame.p || frame.M.cols() != frame.K) return false;
  const Matrix g = gram(frame);
  const double off_target = -1.0 / (frame.K - 1.0);
  for (int i = 0; i < frame.K; ++i) {
    for (int j = 0; j < frame.K; ++j) {
      const double target = (i == j) ? 1.0 : off_target;
      if (std::abs(g(i, j) - target) > tol) return false;
    }
  }
  return (frame.M.rowwise().sum().lpNorm<Eigen::Infinity>() <= tol);
}

inline nlohmann::json frame_to_json(const EtfFrame& frame) {
  nlohmann::json j;
  j["p"] = frame.p;
  j["K"] = frame.K;
  std::vector<double> m;
  m.reserve(static_cast<std::size_t>(frame.p) * frame.K);
  for (int i = 0; i < frame.p; ++i) {
    for (int k = 0; k < frame.K; ++k) m.push_back(frame.M(i, k));
  }
  j["M"] = std::move(m);
  return j;
}

inline EtfFrame frame_from_json(const nlohmann::json& j) {
  EtfFrame frame;
  frame.p = j.at("p").get<int>();
  frame.K = j.at("K").get<int>();
  const auto& m = j.at("M");
  if (static_cast<int>(m.size()) != frame.p * frame.K) {
    throw std::invalid_argument("frame payload has wrong length");
  }
  frame.M = Matrix(frame.p, frame.K);
  std::size_t idx = 0;
  for (int i = 0; i < frame.p; ++i) {
    for (int k = 0; k < frame.K; ++k) frame.M(i, k) = m[idx++].get<double>();
  }
  return frame;
}

}  // namespace nclab

#endif  // NCLAB_GEOMETRY_HPP_
