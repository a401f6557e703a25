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
#include <vector>

#include "openseg/fusion.hpp"
#include "openseg/tensor.hpp"

namespace openseg {

/// Per-class principal subspace plus isotropic residual noise; read as the
/// gaussian N(mean, V^T diag(lambda - sigma2) V + sigma2 I).
struct PcaModel {
  std::int32_t class_id = 0;
  Eigen::VectorXd mean;         // D
  Eigen::MatrixXd components;   // q x D, orthonormal rows
  Eigen::VectorXd eigenvalues;  // q, descending
  double noise_variance = 0.0;  // mean of the discarded eigenvalues
  std::size_t n_fit = 0;
  // Log-likelihood statistics of the fitting rows, for optional z-normalised scoring.
  double fit_loglik_mean = 0.0;
  double fit_loglik_std = 1.0;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(mean.size()); }
  std::size_t n_components() const noexcept { return static_cast<std::size_t>(components.rows()); }
};

using PcaModels = std::vector<std::optional<PcaModel>>;

inline constexpr std::size_t kDefaultComponents = 16;
/// Eigenvalue floor relative to the largest eigenvalue.
inline constexpr double kEigenFloor = 1e-9;

/// Flips each row so that its largest-magnitude entry is positive (first such entry on ties).
void apply_sign_convention(Eigen::MatrixXd& components);

/// Batch PCA through the thin SVD of the centred rows (divisor N - 1). Rows are put
/// into a canonical order first, so the model does not depend on row order.
/// Keeps q = min(n_comp, N - 1, D) components.
PcaModel fit_pca(const SampleMatrix& samples, std::size_t n_comp);

/// components * (a - mean)
Eigen::VectorXd project(const PcaModel& model, const Eigen::Ref<const Eigen::VectorXd>& a_star);

/// Gaussian log-density of the probabilistic PCA model, O(D q).
double ppca_loglik(const PcaModel& model, const Eigen::Ref<const Eigen::VectorXd>& a_star);

/// Fills fit_loglik_mean / fit_loglik_std from the given rows.
void attach_fit_statistics(PcaModel& model, const Eigen::MatrixXd& rows);

struct OpenPcsOptions {
  bool strict = false;     // ModelMissing instead of -inf scores
  bool normalize = false;  // per-class z-normalisation of the log-likelihood
};

struct OpenPcsScore {
  ScoreMap scores;
  std::vector<std::int32_t> unscoreable;  // predicted classes that had no model
};

/// Scores every pixel with the log-likelihood under the model of its predicted class.
OpenPcsScore score_openpcs(const FeatureField& field, const LabelMap& prior, const PcaModels& models,
                           const OpenPcsOptions& options = {});

}  // namespace openseg
