/* Copyright 2026 The openseg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 */

#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "openseg/fusion.hpp"
#include "openseg/tensor.hpp"

namespace openseg {

enum class DistanceKind { Euclidean, Cosine, Hybrid };

std::string to_string(DistanceKind kind);
DistanceKind parse_distance(const std::string& name);

/// Distance to a class MAV. For hybrid, the euclidean term is divided by
/// `euclid_scale` (the median euclidean tail distance of the class) before mixing.
struct DistanceSpec {
  DistanceKind kind = DistanceKind::Euclidean;
  double w_euclid = 0.5;
  double w_cosine = 0.5;
  double euclid_scale = 1.0;
};

double distance(std::span<const double> a, std::span<const double> mav, const DistanceSpec& spec);

/// Arithmetic mean over sample rows; NoSamples on an empty matrix.
Eigen::VectorXd compute_mav(const SampleMatrix& samples);

struct WeibullParams {
  double shape = 1.0;
  double scale = 1.0;
};

/// Two-parameter Weibull MLE on the `tail_size` largest values. The shape solves the
/// profile-likelihood equation (bisection-guarded Newton, bracket [0.05, 50]; a root
/// outside the bracket is clamped to its edge); scale = (mean x^shape)^(1/shape).
/// Non-positive values are dropped from the tail. Throws DegenerateTail when the
/// remaining tail values are all equal and InsufficientSamples when there are fewer
/// than `tail_size` distances.
WeibullParams fit_weibull_tail(std::span<const double> distances, std::size_t tail_size);

inline constexpr double kMinWeibullShape = 0.05;
inline constexpr double kMaxWeibullShape = 50.0;

/// Per-class meta-recognition model.
struct WeibullModel {
  std::int32_t class_id = 0;
  Eigen::VectorXd mav;
  double shape = 1.0;
  double scale = 1.0;
  std::size_t tail_size = 0;
  DistanceSpec distance;
  /// Set when the tail was degenerate: the CDF is a step at this value.
  std::optional<double> point_mass;

  /// Distance at which the CDF reaches q.
  double quantile(double q) const;
};

double weibull_cdf(const WeibullModel& model, double x);

struct OpenMaxConfig {
  std::size_t alpha = 0;  // 0 = revise all classes
  std::size_t tail_size = 2000;
  DistanceKind distance = DistanceKind::Euclidean;
  double w_euclid = 0.5;
  double w_cosine = 0.5;
  double quantile = 0.5;  // T_k is the q-quantile of W_k
};

/// Effective alpha for C classes.
std::size_t resolve_alpha(const OpenMaxConfig& cfg, std::size_t num_classes);

/// Fits MAV, distance normalisation and the tail Weibull for one class. A degenerate
/// tail yields a point-mass model. The tail shrinks to the sample count when fewer
/// samples than `cfg.tail_size` are available (at least 3 are required).
WeibullModel fit_weibull_model(const SampleMatrix& samples, const OpenMaxConfig& cfg);

using WeibullModels = std::vector<std::optional<WeibullModel>>;

/// OpenMax recalibration of one activation vector; returns C+1 probabilities with
/// the unknown channel last. Throws ModelMissing if a revised class has no model.
std::vector<double> openmax_recalibrate(std::span<const double> activation, const WeibullModels& models,
                                        const OpenMaxConfig& cfg);

struct OpenFcnScore {
  ScoreMap scores;      // 1 - recalibrated unknown probability
  LabelMap prior;       // argmax of the activations
  LabelMap posterior;   // prior class, or C (unknown) when its CDF exceeds the quantile
  std::vector<std::int32_t> unscoreable;  // classes without a model
};

/// Per-pixel OpenFCN over a C x H x W activation tensor. With `strict`, a missing
/// model raises ModelMissing; otherwise that class is treated as fully rejected.
OpenFcnScore score_openfcn(const FloatTensor& logits, const WeibullModels& models, const OpenMaxConfig& cfg,
                           bool strict = false);

}  // namespace openseg
