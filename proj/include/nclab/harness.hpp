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

#ifndef NCLAB_HARNESS_HPP_
#define NCLAB_HARNESS_HPP_

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "nclab/bounds.hpp"
#include "nclab/dataset.hpp"
#include "nclab/geometry.hpp"
#include "nclab/mitigations.hpp"
#include "nclab/privacy.hpp"
#include "nclab/synth.hpp"
#include "nclab/trainer.hpp"

namespace nclab {

struct FrameSpec {
  int p = 2;
  int K = 2;
  bool canonical = true;
  std::uint64_t seed = 0;
};

enum class MitigationKind { kNone, kPca, kClassMean, kNormalize };

inline const char* to_string(MitigationKind kind) {
  switch (kind) {
    case MitigationKind::kNone: return "none";
    case MitigationKind::kPca: return "pca";
    case MitigationKind::kClassMean: return "class-mean";
    case MitigationKind::kNormalize: return "normalize";
  }
  return "unknown";
}

struct MitigationSpec {
  MitigationKind kind = MitigationKind::kNone;
  int r = 0;  // Reduced dimension (PCA only).
};

// A full Monte Carlo experiment description. Privacy accepts either rho
// directly or an (epsilon, delta) pair — at most one; neither means a
// noiseless (nonprivate) run.
struct Scenario {
  FrameSpec frame;
  int n = 4;
  std::vector<double> class_weights;  // Empty means uniform.
  ShiftModel train_shift;
  ShiftModel test_shift;
  std::optional<double> rho;
  std::optional<std::pair<double, double>> epsilon_delta;
  TrainConfig trainer;
  MitigationSpec mitigation;
  // Sensitivity override; unset uses the empirical policy (max row norm of
  // the data the trainer sees, or the normalizer's reported value).
  std::optional<double> fixed_sensitivity;
  // Replace the uniform l-inf test draw with per-coordinate Gaussian noise,
  // reading test_shift.beta as the variance.
  bool gaussian_test_noise = false;
  int trials = 200;
  std::uint64_t seed = 0;
};

// Aggregated misclassification estimate. trial_seeds is filled for runs of
// at most 10^4 trials; larger runs record only the derivation rule in the
// provenance (trial i uses Mix(seed, i), with sub-streams data=1, noise=2,
// test=3).
struct TrialResult {
  double error_mean = 0.0;
  double error_stderr = 0.0;
  double accuracy_mean = 0.0;
  double accuracy_stderr = 0.0;
  std::vector<std::uint64_t> trial_seeds;
  nlohmann::json provenance;
  std::optional<BoundResult> bound_ref;
};

namespace internal {

inline std::vector<double> ResolveWeights(const Scenario& s) {
  if (s.class_weights.empty()) {
    return std::vector<double>(s.frame.K, 1.0 / s.frame.K);
  }
  if (static_cast<int>(s.class_weights.size()) != s.frame.K) {
    throw std::invalid_argument("class weights must have one entry per class");
  }
  return s.class_weights;
}

inline std::optional<double> ResolveRho(const Scenario& s) {
  if (s.rho && s.epsilon_delta) {
    throw std::invalid_argument("give rho or (epsilon, delta), not both");
  }
  if (s.rho) {
    if (!(*s.rho > 0.0)) throw std::invalid_argument("rho must be positive");
    return s.rho;
  }
  if (s.epsilon_delta) {
    return dp_to_zcdp(s.epsilon_delta->first, s.epsilon_delta->second);
  }
  return std::nullopt;  // Nonprivate.
}

// The n x p training matrix never materializes when every row of class k is
// the same deterministic vector: the summed gradient has the closed form
//   multi-class: row c = sum_k n_k (1/K - [c==k]) x_k^T,
//   binary theta: -(1/2) (n_0 x_0 - n_1 x_1).
inline bool FastPathEligible(const Scenario& s) {
  return (s.train_shift.kind == ShiftKind::kNone ||
          s.train_shift.kind == ShiftKind::kOffset) &&
         s.mitigation.kind == MitigationKind::kNone && s.trainer.iterations == 1;
}

// Per-class training feature under a deterministic shift.
inline Matrix ClassPoints(const EtfFrame& frame, const ShiftModel& shift) {
  Matrix points = frame.M.transpose();  // K x p rows.
  if (shift.kind == ShiftKind::kOffset) {
    const Vector v = ResolveOffset(shift, frame.p);
    points.rowwise() += v.transpose();
  }
  return points;
}

inline Matrix ClosedFormGradient(const Matrix& class_points,
                                 const std::vector<int>& counts) {
  const int K = static_cast<int>(class_points.rows());
  const int p = static_cast<int>(class_points.cols());
  if (K == 2) {
    Matrix grad(1, p);
    grad.row(0) =
        -0.5 * (counts[0] * class_points.row(0) - counts[1] * class_points.row(1));
    return grad;
  }
  Matrix grad = Matrix::Zero(K, p);
  Vector weighted_sum = Vector::Zero(p);
  for (int k = 0; k < K; ++k) {
    weighted_sum += counts[k] * class_points.row(k).transpose();
  }
  for (int c = 0; c < K; ++c) {
    grad.row(c) = weighted_sum.transpose() / K - counts[c] * class_points.row(c);
  }
  return grad;
}

// Mirrors the trainer: W = -eta * grad + eta * noise, noise drawn row-major.
inline LinearHead AssembleOneStep(const Matrix& grad, double eta,
                                  const NoiseCalibration& calib, std::uint64_t seed,
                                  bool reparameterized) {
  LinearHead head;
  head.reparameterized = reparameterized;
  head.W = -eta * grad;
  if (calib.sigma_sq > 0.0) {
    Rng rng(seed);
    const double sigma = std::sqrt(calib.sigma_sq);
    for (Eigen::Index r = 0; r < head.W.rows(); ++r) {
      for (Eigen::Index c = 0; c < head.W.cols(); ++c) {
        head.W(r, c) += eta * rng.normal(0.0, sigma);
      }
    }
  }
  return head;
}

struct TrialContext {
  const Scenario* scenario;
  const EtfFrame* frame;
  std::vector<double> weights;
  std::vector<int> counts;
  std::optional<double> rho;
  bool fast = false;
  Matrix class_points;   // Fast path: K x p deterministic rows.
  Matrix fast_gradient;  // Fast path: precomputed summed gradient.
  double fast_G = 0.0;   // Fast path: max class-row norm.
};

// Runs one trial and returns its mean 0-1 error over one fresh test point
// per class.
inline double RunTrial(const TrialContext& ctx, std::uint64_t trial_seed) {
  const Scenario& s = *ctx.scenario;
  const std::uint64_t data_seed = Rng::Mix(trial_seed, 1);
  const std::uint64_t noise_seed = Rng::Mix(trial_seed, 2);
  const std::uint64_t test_seed = Rng::Mix(trial_seed, 3);

  LinearHead head;
  std::optional<Projection> proj;
  std::optional<Eigen::RowVectorXd> train_mean;
  const double eta = s.trainer.eta.value_or(1.0);

  if (ctx.fast) {
    const double G = s.fixed_sensitivity.value_or(ctx.fast_G);
    if (ctx.fast_G > G * (1.0 + 1e-9) + 1e-12) {
      throw std::invalid_argument("a class feature exceeds the declared sensitivity");
    }
    const NoiseCalibration calib =
        ctx.rho ? calibrate(G, PrivacyBudget{*ctx.rho}) : no_noise(G);
    head = AssembleOneStep(ctx.fast_gradient, eta, calib, noise_seed,
                           /*reparameterized=*/s.frame.K == 2);
  } else {
    LabeledDataset data =
        sample_dataset(*ctx.frame, s.n, ctx.weights, s.train_shift, data_seed);
    double G;
    switch (s.mitigation.kind) {
      case MitigationKind::kNone:
        G = max_row_norm(data);
        break;
      case MitigationKind::kPca: {
        proj = fit_projection(data, ProjectionMethod::kPca, s.mitigation.r);
        data = project_dataset(data, *proj);
        G = max_row_norm(data);
        break;
      }
      case MitigationKind::kClassMean: {
        proj = fit_projection(data, ProjectionMethod::kClassMean, s.frame.K);
        data = project_dataset(data, *proj);
        G = max_row_norm(data);
        break;
      }
      case MitigationKind::kNormalize: {
        train_mean = data.features.colwise().mean();
        auto [normalized, sens] = normalize_dataset(data);
        data = std::move(normalized);
        G = sens;
        break;
      }
      default:
        throw std::logic_error("unhandled mitigation");
    }
    if (s.fixed_sensitivity) G = *s.fixed_sensitivity;
    const NoiseCalibration calib =
        ctx.rho ? calibrate(G, PrivacyBudget{*ctx.rho}) : no_noise(G);
    head = (s.trainer.iterations == 1)
               ? one_step_noisygd(data, s.trainer, calib, noise_seed)
               : projected_noisygd(data, s.trainer, calib, noise_seed);
  }

  // Original-space linearization of the head, for adversarial test points.
  LinearHead attack_head = head;
  if (proj) {
    attack_head.W = head.W * proj->basis.transpose();
  }

  int wrong = 0;
  for (int j = 0; j < s.frame.K; ++j) {
    Vector z = ctx.frame->M.col(j);
    const std::uint64_t point_seed = Rng::Mix(test_seed, static_cast<std::uint64_t>(j));
    if (s.gaussian_test_noise && s.test_shift.kind == ShiftKind::kStochastic) {
      Rng rng(point_seed);
      const double sd = std::sqrt(s.test_shift.beta);
      for (Eigen::Index c = 0; c < z.size(); ++c) z[c] += rng.normal(0.0, sd);
    } else {
      z = perturb_test_point(z, j, s.test_shift, &attack_head, point_seed);
    }
    if (proj) {
      z = proj->basis.transpose() * z;
    } else if (train_mean) {
      z -= train_mean->transpose();
    }
    wrong += (predict(head, z) != j) ? 1 : 0;
  }
  return static_cast<double>(wrong) / s.frame.K;
}

}  // namespace internal

// Estimates the misclassification probability of the scenario: per trial,
// sample a training set, mitigate, train privately, and test one fresh point
// per class; aggregate mean and standard error across trials. Trials use
// derived seeds and write into preassigned slots, so the result is
// bit-identical regardless of how many worker threads run them.
inline TrialResult mc_error(const Scenario& scenario) {
  if (scenario.trials < 1) throw std::invalid_argument("need at least one trial");
  if (scenario.frame.K > scenario.frame.p) {
    throw std::invalid_argument("frame does not fit: K exceeds p");
  }
  if (scenario.mitigation.kind == MitigationKind::kPca &&
      (scenario.mitigation.r < 1 || scenario.mitigation.r > scenario.frame.p)) {
    throw std::invalid_argument("infeasible projection dimension");
  }

  internal::TrialContext ctx;
  ctx.scenario = &scenario;
  const EtfFrame frame = make_etf(scenario.frame.p, scenario.frame.K,
                                  scenario.frame.seed, scenario.frame.canonical);
  ctx.frame = &frame;
  ctx.weights = internal::ResolveWeights(scenario);
  ctx.counts = internal::ApportionCounts(scenario.n, ctx.weights);
  ctx.rho = internal::ResolveRho(scenario);
  ctx.fast = internal::FastPathEligible(scenario);
  if (ctx.fast) {
    ctx.class_points = internal::ClassPoints(frame, scenario.train_shift);
    ctx.fast_gradient = internal::ClosedFormGradient(ctx.class_points, ctx.counts);
    ctx.fast_G = 0.0;
    for (int k = 0; k < scenario.frame.K; ++k) {
      ctx.fast_G = std::max(ctx.fast_G, ctx.class_points.row(k).norm());
    }
  }

  std::vector<double> errors(scenario.trials);
  const auto run_range = [&](int begin, int end) {
    for (int t = begin; t < end; ++t) {
      errors[t] = internal::RunTrial(ctx, Rng::Mix(scenario.seed, t));
    }
  };
  const unsigned hw = std::thread::hardware_concurrency();
  const int workers =
      std::max(1, std::min<int>(static_cast<int>(hw), scenario.trials / 256));
  if (workers <= 1) {
    run_range(0, scenario.trials);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (scenario.trials + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int begin = w * chunk;
      const int end = std::min(scenario.trials, begin + chunk);
      if (begin < end) pool.emplace_back(run_range, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  const MeanStderr stats = mean_stderr(errors);
  TrialResult result;
  result.error_mean = stats.mean;
  result.error_stderr = stats.stderr_of_mean;
  result.accuracy_mean = 1.0 - stats.mean;
  result.accuracy_stderr = stats.stderr_of_mean;
  if (scenario.trials <= 10000) {
    result.trial_seeds.resize(scenario.trials);
    for (int t = 0; t < scenario.trials; ++t) {
      result.trial_seeds[t] = Rng::Mix(scenario.seed, t);
    }
  }

  nlohmann::json prov;
  prov["frame"] = {{"p", scenario.frame.p},
                   {"K", scenario.frame.K},
                   {"canonical", scenario.frame.canonical},
                   {"seed", scenario.frame.seed}};
  prov["n"] = scenario.n;
  prov["class_weights"] = ctx.weights;
  prov["class_counts"] = ctx.counts;
  const auto shift_json = [](const ShiftModel& sh) {
    nlohmann::json j;
    j["kind"] = to_string(sh.kind);
    j["beta"] = sh.beta;
    j["orthogonal_to_prototype"] = sh.orthogonal_to_prototype;
    j["independent_coordinates"] = sh.independent_coordinates;
    j["explicit_offset"] = sh.offset_vector.has_value();
    return j;
  };
  prov["train_shift"] = shift_json(scenario.train_shift);
  prov["test_shift"] = shift_json(scenario.test_shift);
  prov["stochastic_shift_distribution"] = "uniform per coordinate on [-beta, beta]";
  prov["test_noise_model"] =
      scenario.gaussian_test_noise ? "gaussian (beta read as variance)" : "uniform-linf";
  if (ctx.rho) {
    prov["rho"] = *ctx.rho;
    if (scenario.epsilon_delta) {
      prov["epsilon"] = scenario.epsilon_delta->first;
      prov["delta"] = scenario.epsilon_delta->second;
    }
    prov["total_rho"] = *ctx.rho * scenario.trainer.iterations;
  } else {
    prov["privacy"] = "none (sigma = 0)";
  }
  prov["sensitivity_policy"] = scenario.fixed_sensitivity
                                   ? "fixed"
                                   : (scenario.mitigation.kind == MitigationKind::kNormalize
                                          ? "normalizer-reported"
                                          : "empirical-max-row-norm");
  if (scenario.fixed_sensitivity) prov["sensitivity_G"] = *scenario.fixed_sensitivity;
  if (ctx.fast) {
    prov["sensitivity_G"] = scenario.fixed_sensitivity.value_or(ctx.fast_G);
    if (ctx.rho) {
      const double g = scenario.fixed_sensitivity.value_or(ctx.fast_G);
      prov["sigma_sq"] = g * g / (2.0 * *ctx.rho);
    }
  }
  prov["trainer"] = {{"eta", scenario.trainer.eta.value_or(1.0)},
                     {"eta_explicit", scenario.trainer.eta.has_value()},
                     {"iterations", scenario.trainer.iterations}};
  if (scenario.trainer.projection_radius) {
    prov["trainer"]["projection_radius"] = *scenario.trainer.projection_radius;
  }
  if (scenario.trainer.tail_parameter) {
    prov["trainer"]["tail_parameter"] = *scenario.trainer.tail_parameter;
  }
  prov["mitigation"] = {{"kind", to_string(scenario.mitigation.kind)},
                        {"r", scenario.mitigation.r}};
  if (scenario.mitigation.kind == MitigationKind::kPca) {
    prov["mitigation"]["privacy_caveat"] =
        "projection fitted on the private features themselves, not via a private "
        "eigensolver; its privacy cost is not accounted";
  }
  prov["trials"] = scenario.trials;
  prov["seed"] = scenario.seed;
  prov["gradient_path"] = ctx.fast ? "closed-form-class-sums" : "materialized";
  prov["seed_streams"] =
      "trial=Mix(seed,index); data=Mix(trial,1) noise=Mix(trial,2) test=Mix(trial,3)";
  result.provenance = std::move(prov);

  // Cross-reference the exact-collapse closed form when it applies.
  if (ctx.rho && scenario.train_shift.kind == ShiftKind::kNone &&
      scenario.test_shift.kind == ShiftKind::kNone &&
      scenario.mitigation.kind == MitigationKind::kNone &&
      scenario.trainer.iterations == 1 && !scenario.fixed_sensitivity &&
      scenario.class_weights.empty() && scenario.n % scenario.frame.K == 0) {
    const double sigma = std::sqrt(1.0 / (2.0 * *ctx.rho));  // G = 1.
    result.bound_ref = perfect_nc_error(scenario.n, scenario.frame.K, std::nullopt, sigma);
  }
  return result;
}

}  // namespace nclab

#endif  // NCLAB_HARNESS_HPP_
