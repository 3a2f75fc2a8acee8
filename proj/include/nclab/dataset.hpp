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

#ifndef NCLAB_DATASET_HPP_
#define NCLAB_DATASET_HPP_

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nclab/mathutil.hpp"

namespace nclab {

// How features deviate from their class prototypes.
enum class ShiftKind {
  kNone,             // Features sit exactly on the prototypes.
  kStochastic,       // I.i.d. symmetric draw, per coordinate uniform on [-beta, beta].
  kOffset,           // A fixed vector added to every feature of the distribution.
  kAdversarialTest,  // Worst-case test-time attack within an l-inf ball.
};

inline const char* to_string(ShiftKind kind) {
  switch (kind) {
    case ShiftKind::kNone: return "none";
    case ShiftKind::kStochastic: return "stochastic";
    case ShiftKind::kOffset: return "offset";
    case ShiftKind::kAdversarialTest: return "adversarial-test";
  }
  return "unknown";
}

struct ShiftModel {
  ShiftKind kind = ShiftKind::kNone;
  // l-inf magnitude: the training-shift bound or the attack budget.
  double beta = 0.0;
  // Fixed direction for kOffset; defaults to beta on every coordinate when
  // unset. Must satisfy the l-inf bound.
  std::optional<Vector> offset_vector;
  // Remove the component along the class prototype (proof normalization).
  bool orthogonal_to_prototype = false;
  // Coordinates drawn independently (the separability assumption).
  bool independent_coordinates = true;

  static ShiftModel None() { return ShiftModel{}; }
  static ShiftModel Stochastic(double beta) {
    ShiftModel s;
    s.kind = ShiftKind::kStochastic;
    s.beta = beta;
    return s;
  }
  static ShiftModel Offset(Vector v) {
    ShiftModel s;
    s.kind = ShiftKind::kOffset;
    s.beta = v.lpNorm<Eigen::Infinity>();
    s.offset_vector = std::move(v);
    return s;
  }
  static ShiftModel Adversarial(double beta_tilde) {
    ShiftModel s;
    s.kind = ShiftKind::kAdversarialTest;
    s.beta = beta_tilde;
    return s;
  }
};

// n labeled feature vectors; class_counts[k] rows carry label k.
struct LabeledDataset {
  Matrix features;          // n x p.
  std::vector<int> labels;  // n entries in [0, K).
  std::vector<int> class_counts;
  // Fraction of class-0 rows; tracked for the binary case only.
  std::optional<double> alpha;

  int n() const { return static_cast<int>(features.rows()); }
  int p() const { return static_cast<int>(features.cols()); }
  int K() const { return static_cast<int>(class_counts.size()); }
};

// Largest l2 row norm; the empirical sensitivity of a one-step gradient.
inline double max_row_norm(const LabeledDataset& data) {
  double g = 0.0;
  for (Eigen::Index i = 0; i < data.features.rows(); ++i) {
    g = std::max(g, data.features.row(i).norm());
  }
  return g;
}

// Trained last-layer parameter. Multi-class heads store the full K x p
// matrix W with decision argmax_k (Wx)_k; the binary reparameterization
// stores a single row theta with decision sign(theta . x).
struct LinearHead {
  Matrix W;  // K x p, or 1 x p when reparameterized.
  bool reparameterized = false;

  int p() const { return static_cast<int>(W.cols()); }
};

inline nlohmann::json head_to_json(const LinearHead& head) {
  nlohmann::json j;
  j["K"] = static_cast<int>(head.W.rows());
  j["p"] = static_cast<int>(head.W.cols());
  j["reparameterized"] = head.reparameterized;
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(head.W.size()));
  for (Eigen::Index i = 0; i < head.W.rows(); ++i) {
    for (Eigen::Index k = 0; k < head.W.cols(); ++k) w.push_back(head.W(i, k));
  }
  j["W"] = std::move(w);
  return j;
}

inline LinearHead head_from_json(const nlohmann::json& j) {
  LinearHead head;
  const int K = j.at("K").get<int>();
  const int p = j.at("p").get<int>();
  head.reparameterized = j.at("reparameterized").get<bool>();
  const auto& w = j.at("W");
  if (static_cast<int>(w.size()) != K * p) {
    throw std::invalid_argument("head payload has wrong length");
  }
  head.W = Matrix(K, p);
  std::size_t idx = 0;
  for (int i = 0; i < K; ++i) {
    for (int k = 0; k < p; ++k) head.W(i, k) = w[idx++].get<double>();
  }
  return head;
}

namespace internal {

inline void RecountClasses(LabeledDataset* data) {
  int K = 0;
  for (int y : data->labels) K = std::max(K, y + 1);
  data->class_counts.assign(K, 0);
  for (int y : data->labels) ++data->class_counts[y];
  if (K == 2 && data->n() > 0) {
    data->alpha = static_cast<double>(data->class_counts[0]) / data->n();
  } else {
    data->alpha.reset();
  }
}

}  // namespace internal

// Reads "label,f0,...,f{p-1}" CSV. Labels must be contiguous integers from 0;
// NaN/Inf entries are rejected with the offending line number. When
// `l2_normalize` is set, each row is rescaled to unit l2 norm.
inline LabeledDataset load_features(const std::string& path,
                                    bool l2_normalize = false) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open feature file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty feature file");
  // Header determines p; we only validate its shape loosely.
  int p = -1;
  {
    int commas = 0;
    for (char c : line) commas += (c == ',');
    p = commas;
  }
  if (p < 1) throw std::invalid_argument("feature file header declares no features");

  std::vector<double> values;
  std::vector<int> labels;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    int col = -1;  // -1 is the label column.
    while (std::getline(row, cell, ',')) {
      if (col == -1) {
        std::size_t used = 0;
        double label = 0.0;
        try {
          label = std::stod(cell, &used);
        } catch (const std::exception&) {
          throw std::invalid_argument("bad label on line " + std::to_string(line_no));
        }
        if (used != cell.size() || label != std::floor(label) || label < 0) {
          throw std::invalid_argument("non-integer label on line " +
                                      std::to_string(line_no));
        }
        labels.push_back(static_cast<int>(label));
      } else {
        std::size_t used = 0;
        double v = 0.0;
        try {
          v = std::stod(cell, &used);
        } catch (const std::exception&) {
          throw std::invalid_argument("bad feature value on line " +
                                      std::to_string(line_no));
        }
        if (used != cell.size() || !std::isfinite(v)) {
          throw std::invalid_argument("non-finite feature value on line " +
                                      std::to_string(line_no));
        }
        values.push_back(v);
      }
      ++col;
    }
    if (col != p) {
      throw std::invalid_argument("ragged row on line " + std::to_string(line_no) +
                                  ": expected " + std::to_string(p) + " features, got " +
                                  std::to_string(col));
    }
  }
  if (labels.empty()) throw std::invalid_argument("feature file has no data rows");

  const int n = static_cast<int>(labels.size());
  LabeledDataset data;
  data.features = Matrix(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      data.features(i, j) = values[static_cast<std::size_t>(i) * p + j];
    }
  }
  data.labels = std::move(labels);

  // Contiguity: every class in [0, max] must appear.
  int max_label = 0;
  for (int y : data.labels) max_label = std::max(max_label, y);
  std::vector<int> seen(max_label + 1, 0);
  for (int y : data.labels) ++seen[y];
  for (int k = 0; k <= max_label; ++k) {
    if (seen[k] == 0) {
      throw std::invalid_argument("labels must be contiguous from 0 (class " +
                                  std::to_string(k) + " is missing)");
    }
  }

  if (l2_normalize) {
    for (Eigen::Index i = 0; i < data.features.rows(); ++i) {
      const double norm = data.features.row(i).norm();
      if (norm > 0) data.features.row(i) /= norm;
    }
  }
  internal::RecountClasses(&data);
  return data;
}

// Writes the same CSV format load_features reads (round-trippable).
inline void save_features(const LabeledDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write feature file: " + path);
  out << "label";
  for (int j = 0; j < data.p(); ++j) out << ",f" << j;
  out << "\n";
  char buf[32];
  for (int i = 0; i < data.n(); ++i) {
    out << data.labels[i];
    for (int j = 0; j < data.p(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", data.features(i, j));
      out << ',' << buf;
    }
    out << "\n";
  }
}

}  // namespace nclab

#endif  // NCLAB_DATASET_HPP_
