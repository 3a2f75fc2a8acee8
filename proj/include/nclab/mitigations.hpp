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

#ifndef NCLAB_MITIGATIONS_HPP_
#define NCLAB_MITIGATIONS_HPP_

#include <Eigen/Eigenvalues>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "nclab/dataset.hpp"
#include "nclab/geometry.hpp"

namespace nclab {

enum class ProjectionMethod {
  kPca,        // Top eigenvectors of the uncentered second-moment matrix.
  kClassMean,  // One column per class: the empirical class mean.
};

inline const char* to_string(ProjectionMethod method) {
  return method == ProjectionMethod::kPca ? "pca" : "class-mean";
}

struct Projection {
  Matrix basis;  // p x r.
  ProjectionMethod method = ProjectionMethod::kPca;
  std::optional<double> beta0_estimate;  // l-inf deviation from ideal directions.

  int p() const { return static_cast<int>(basis.rows()); }
  int r() const { return static_cast<int>(basis.cols()); }
};

namespace internal {

// Flips each column so its largest-magnitude coordinate is positive
// (eigenvector sign convention; first occurrence wins on ties).
inline void FixColumnSigns(Matrix* basis) {
  for (Eigen::Index j = 0; j < basis->cols(); ++j) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < basis->rows(); ++i) {
      const double mag = std::abs((*basis)(i, j));
      if (mag > best) {
        best = mag;
        arg = i;
      }
    }
    if ((*basis)(arg, j) < 0) basis->col(j) = -basis->col(j);
  }
}

// Top-r eigenvectors of (1/m) X^T X (p x p, uncentered), descending
// eigenvalue order. When m < p the p x p problem is recast on the m x m
// Gram matrix (1/m) X X^T: an eigenpair (lambda, u) there lifts to the
// eigenvector X^T u / sqrt(m lambda). Directions beyond the numerical rank
// carry no data and come back as zero columns (degenerate but permitted;
// downstream training on them is pure noise).
inline Matrix TopEigenvectors(const Matrix& x, int r) {
  const Eigen::Index m = x.rows();
  const Eigen::Index p = x.cols();
  Matrix basis(p, r);
  if (m >= p) {
    const Matrix second_moment = (x.transpose() * x) / static_cast<double>(m);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(second_moment);
    if (eig.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
    // Eigenvalues come back ascending; take the trailing r, reversed.
    for (int j = 0; j < r; ++j) basis.col(j) = eig.eigenvectors().col(p - 1 - j);
  } else {
    const Matrix gram = (x * x.transpose()) / static_cast<double>(m);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    if (eig.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
    const double scale_floor = 1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff());
    for (int j = 0; j < r; ++j) {
      const double lambda = eig.eigenvalues()(m - 1 - j);
      if (lambda > scale_floor) {
        basis.col(j) =
            x.transpose() * eig.eigenvectors().col(m - 1 - j) / std::sqrt(m * lambda);
      } else {
        basis.col(j).setZero();
      }
    }
  }
  FixColumnSigns(&basis);
  return basis;
}

}  // namespace internal

// Fits a projection on (public) data. PCA keeps the top-r directions of the
// uncentered second moment; class-mean uses the K empirical class means as
// columns (r must equal K).
inline Projection fit_projection(const LabeledDataset& public_data,
                                 ProjectionMethod method, int r) {
  const int m = public_data.n();
  const int p = public_data.p();
  if (r < 1) throw std::invalid_argument("reduced dimension must be positive");
  if (r > p) throw std::invalid_argument("reduced dimension exceeds the ambient dimension");
  if (r > m) throw std::invalid_argument("reduced dimension exceeds the sample count");

  Projection proj;
  proj.method = method;
  if (method == ProjectionMethod::kPca) {
    proj.basis = internal::TopEigenvectors(public_data.features, r);
    return proj;
  }

  const int K = public_data.K();
  if (r != K) {
    throw std::invalid_argument("class-mean projection has exactly one column per class");
  }
  for (int k = 0; k < K; ++k) {
    if (public_data.class_counts[k] == 0) {
      throw std::invalid_argument("class " + std::to_string(k) +
                                  " is empty; cannot take its mean");
    }
  }
  proj.basis = Matrix::Zero(p, K);
  for (int i = 0; i < m; ++i) {
    proj.basis.col(public_data.labels[i]) += public_data.features.row(i);
  }
  for (int k = 0; k < K; ++k) proj.basis.col(k) /= public_data.class_counts[k];
  return proj;
}

// Replaces features with their r-dimensional images basis^T x. Labels and
// counts carry over; the caller re-derives sensitivity from the projected
// rows (max_row_norm).
inline LabeledDataset project_dataset(const LabeledDataset& data, const Projection& proj) {
  if (proj.basis.rows() != data.features.cols()) {
    throw std::invalid_argument("projection and data dimensions disagree");
  }
  LabeledDataset out;
  out.features = data.features * proj.basis;
  out.labels = data.labels;
  out.class_counts = data.class_counts;
  out.alpha = data.alpha;
  return out;
}

namespace internal {

// Exact add/remove-one sensitivity of the zero-init gradient statistic on
// mean-normalized data, by a leave-one-out sweep. The statistic matches what
// the trainer releases: sum_i y_i (x_i - mean) for binary (reparameterized,
// y_i = +/-1), else sum_i u_i (x_i - mean)^T with u_i = onehot(y_i) - 1/K.
// Removing sample j re-centers the remaining rows. O(n K p) via totals.
inline double LeaveOneOutSensitivity(const LabeledDataset& data) {
  const int n = data.n();
  const int K = data.K();
  Matrix u;
  if (K == 2) {
    u = Matrix(n, 1);
    for (int i = 0; i < n; ++i) u(i, 0) = data.labels[i] == 0 ? 1.0 : -1.0;
  } else {
    u = Matrix(n, K);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < K; ++k) u(i, k) = (data.labels[i] == k ? 1.0 : 0.0) - 1.0 / K;
    }
  }
  const Matrix a = u.transpose() * data.features;      // K x p: sum u_i x_i^T.
  const Vector u_total = u.colwise().sum().transpose();  // K.
  const Vector x_total = data.features.colwise().sum().transpose();  // p.
  const Matrix s = a - u_total * (x_total / n).transpose();

  double worst = 0.0;
  for (int j = 0; j < n; ++j) {
    const Vector uj = u.row(j).transpose();
    const Vector xj = data.features.row(j).transpose();
    const Vector mean_rest = (x_total - xj) / (n - 1.0);
    const Matrix s_rest = (a - uj * xj.transpose()) - (u_total - uj) * mean_rest.transpose();
    worst = std::max(worst, (s - s_rest).norm());
  }
  return worst;
}

}  // namespace internal

// Subtracts the global feature mean from every row and reports the
// add/remove-one sensitivity of the downstream one-step gradient:
// exactly n/(n-1) for the balanced binary case; otherwise measured by a
// leave-one-out sweep (n <= 10^4) or bounded by twice the max row norm.
inline std::pair<LabeledDataset, double> normalize_dataset(const LabeledDataset& data) {
  const int n = data.n();
  if (n < 2) throw std::invalid_argument("normalization needs at least two rows");

  LabeledDataset out;
  const Eigen::RowVectorXd mean = data.features.colwise().mean();
  out.features = data.features.rowwise() - mean;
  out.labels = data.labels;
  out.class_counts = data.class_counts;
  out.alpha = data.alpha;

  double sensitivity;
  if (data.K() == 2 && data.class_counts[0] == data.class_counts[1]) {
    sensitivity = static_cast<double>(n) / (n - 1.0);
  } else if (n <= 10000) {
    sensitivity = internal::LeaveOneOutSensitivity(data);
  } else {
    sensitivity = 2.0 * max_row_norm(out);
  }
  return {std::move(out), sensitivity};
}

// Max over matched columns of the l-inf distance between the fitted basis
// and the frame prototypes, after flipping each column's sign if doing so
// reduces its distance (eigenvector sign ambiguity).
inline double projection_beta0(const Projection& proj, const EtfFrame& frame) {
  if (proj.basis.rows() != frame.p) {
    throw std::invalid_argument("projection and frame dimensions disagree");
  }
  if (proj.r() > frame.K) {
    throw std::invalid_argument("more projection columns than frame prototypes");
  }
  double beta0 = 0.0;
  for (int k = 0; k < proj.r(); ++k) {
    const double direct = (proj.basis.col(k) - frame.M.col(k)).lpNorm<Eigen::Infinity>();
    const double flipped = (proj.basis.col(k) + frame.M.col(k)).lpNorm<Eigen::Infinity>();
    beta0 = std::max(beta0, std::min(direct, flipped));
  }
  return beta0;
}

inline nlohmann::json projection_to_json(const Projection& proj) {
  nlohmann::json j;
  j["method"] = to_string(proj.method);
  j["p"] = proj.p();
  j["r"] = proj.r();
  std::vector<double> b;
  b.reserve(static_cast<std::size_t>(proj.basis.size()));
  for (int i = 0; i < proj.p(); ++i) {
    for (int k = 0; k < proj.r(); ++k) b.push_back(proj.basis(i, k));
  }
  j["basis"] = std::move(b);
  if (proj.beta0_estimate) j["beta0_estimate"] = *proj.beta0_estimate;
  return j;
}

}  // namespace nclab

#endif  // NCLAB_MITIGATIONS_HPP_
