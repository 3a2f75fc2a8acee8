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

#ifndef NCLAB_MATHUTIL_HPP_
#define NCLAB_MATHUTIL_HPP_

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace nclab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Cdf of the standard normal distribution.
inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Lower median: for even sizes, the smaller of the two middle values.
inline double lower_median(std::vector<double> values) {
  if (values.empty()) {
    throw std::invalid_argument("median of an empty set");
  }
  const std::size_t mid = (values.size() - 1) / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  return values[mid];
}

// Sample mean and standard error of the mean.
struct MeanStderr {
  double mean = 0.0;
  double stderr_of_mean = 0.0;
};

inline MeanStderr mean_stderr(const std::vector<double>& values) {
  if (values.empty()) {
    throw std::invalid_argument("mean of an empty set");
  }
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  return {mean, sd / std::sqrt(n)};
}

}  // namespace nclab

#endif  // NCLAB_MATHUTIL_HPP_
