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

#ifndef NCLAB_ANALYSIS_HPP_
#define NCLAB_ANALYSIS_HPP_

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nclab/dataset.hpp"

namespace nclab {

// Empirical collapse diagnostics: how close a labeled feature set sits to a
// simplex prototype geometry.
struct CollapseReport {
  Matrix class_means;                        // K x p empirical means.
  Matrix cosine_matrix;                      // K x K cosines of the means.
  double cosine_offdiag_median = 0.0;        // Lower median of i != j entries.
  std::vector<double> per_sample_beta;       // l-inf distance to own class mean.
  std::vector<int> labels;                   // Parallel to per_sample_beta.
  std::vector<double> per_class_beta_median; // Lower median per class.
  bool nc_flag = false;
  // The simplex target for off-diagonal cosines is -1/(K-1); the mirrored
  // +1/(K-1) reading circulates too, so both worst-case distances are kept.
  double max_distance_to_negative_target = 0.0;
  double max_distance_to_positive_target = 0.0;
};

// Class means, their cosine matrix, and the per-sample shift magnitudes
// beta_i = ||x_i - mean(class of i)||_inf. nc_flag is set when every
// off-diagonal cosine sits within cosine_tolerance of -1/(K-1).
inline CollapseReport collapse_report(const LabeledDataset& data,
                                      double cosine_tolerance = 0.2) {
  const int n = data.n();
  const int p = data.p();
  const int K = data.K();
  for (int k = 0; k < K; ++k) {
    if (data.class_counts[k] == 0) {
      throw std::invalid_argument("class " + std::to_string(k) +
                                  " is empty; diagnostics need every class");
    }
  }

  CollapseReport report;
  report.class_means = Matrix::Zero(K, p);
  for (int i = 0; i < n; ++i) {
    report.class_means.row(data.labels[i]) += data.features.row(i);
  }
  for (int k = 0; k < K; ++k) report.class_means.row(k) /= data.class_counts[k];

  report.cosine_matrix = Matrix::Identity(K, K);
  const double target = -1.0 / (K - 1.0);
  std::vector<double> offdiag;
  bool all_within = true;
  for (int i = 0; i < K; ++i) {
    for (int j = i + 1; j < K; ++j) {
      const double ni = report.class_means.row(i).norm();
      const double nj = report.class_means.row(j).norm();
      const double cos_ij =
          (ni > 0 && nj > 0)
              ? report.class_means.row(i).dot(report.class_means.row(j)) / (ni * nj)
              : 0.0;
      report.cosine_matrix(i, j) = cos_ij;
      report.cosine_matrix(j, i) = cos_ij;
      offdiag.push_back(cos_ij);
      all_within = all_within && std::abs(cos_ij - target) <= cosine_tolerance;
      report.max_distance_to_negative_target =
          std::max(report.max_distance_to_negative_target, std::abs(cos_ij - target));
      report.max_distance_to_positive_target =
          std::max(report.max_distance_to_positive_target, std::abs(cos_ij + target));
    }
  }
  report.nc_flag = all_within;
  report.cosine_offdiag_median = offdiag.empty() ? 0.0 : lower_median(offdiag);

  report.per_sample_beta.resize(n);
  report.labels = data.labels;
  std::vector<std::vector<double>> per_class(K);
  for (int i = 0; i < n; ++i) {
    const double beta_i = (data.features.row(i) - report.class_means.row(data.labels[i]))
                              .lpNorm<Eigen::Infinity>();
    report.per_sample_beta[i] = beta_i;
    per_class[data.labels[i]].push_back(beta_i);
  }
  report.per_class_beta_median.resize(K);
  for (int k = 0; k < K; ++k) {
    report.per_class_beta_median[k] = lower_median(per_class[k]);
  }
  return report;
}

struct HistogramRow {
  double bin_low = 0.0;
  double bin_high = 0.0;
  long long count = 0;
  std::string klass;  // "0".."K-1" or "all".
};

// Equal-width histogram of the per-sample shift magnitudes over [0, max],
// one block per class followed by an "all" block.
inline std::vector<HistogramRow> beta_histogram(const CollapseReport& report, int bins) {
  if (bins < 1) throw std::invalid_argument("need at least one bin");
  if (report.per_sample_beta.empty()) throw std::invalid_argument("empty report");
  const std::vector<int>& labels = report.labels;
  if (labels.size() != report.per_sample_beta.size()) {
    throw std::invalid_argument("report is missing its label column");
  }
  const int K = static_cast<int>(report.per_class_beta_median.size());
  const double max_beta =
      *std::max_element(report.per_sample_beta.begin(), report.per_sample_beta.end());
  const double width = max_beta / bins;

  const auto bin_of = [&](double beta) {
    if (width <= 0.0) return 0;
    const int b = static_cast<int>(beta / width);
    return std::min(b, bins - 1);  // Top edge is inclusive.
  };

  std::vector<HistogramRow> rows;
  rows.reserve(static_cast<std::size_t>(bins) * (K + 1));
  for (int block = 0; block <= K; ++block) {
    std::vector<long long> counts(bins, 0);
    for (std::size_t i = 0; i < report.per_sample_beta.size(); ++i) {
      if (block < K && labels[i] != block) continue;
      ++counts[bin_of(report.per_sample_beta[i])];
    }
    for (int b = 0; b < bins; ++b) {
      HistogramRow row;
      row.bin_low = b * width;
      row.bin_high = (b == bins - 1) ? max_beta : (b + 1) * width;
      row.count = counts[b];
      row.klass = (block < K) ? std::to_string(block) : "all";
      rows.push_back(row);
    }
  }
  return rows;
}

inline nlohmann::json report_to_json(const CollapseReport& report) {
  nlohmann::json j;
  const int K = static_cast<int>(report.class_means.rows());
  j["K"] = K;
  j["p"] = static_cast<int>(report.class_means.cols());
  j["nc_flag"] = report.nc_flag;
  j["cosine_offdiag_median"] = report.cosine_offdiag_median;
  j["per_class_beta_median"] = report.per_class_beta_median;
  j["max_distance_to_negative_target"] = report.max_distance_to_negative_target;
  j["max_distance_to_positive_target"] = report.max_distance_to_positive_target;
  std::vector<double> cos;
  cos.reserve(static_cast<std::size_t>(K) * K);
  for (int i = 0; i < K; ++i) {
    for (int k = 0; k < K; ++k) cos.push_back(report.cosine_matrix(i, k));
  }
  j["cosine_matrix"] = std::move(cos);
  j["num_samples"] = report.per_sample_beta.size();
  return j;
}

}  // namespace nclab

#endif  // NCLAB_ANALYSIS_HPP_
