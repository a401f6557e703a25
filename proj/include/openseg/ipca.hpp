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

#include "openseg/pca.hpp"

namespace openseg {

inline constexpr std::size_t kDefaultIpcaBatchRows = 65536;

/// Mini-batch incremental PCA (incremental SVD with mean correction). Updates are
/// sequential; distinct states may be updated from different threads.
class IncrementalPca {
 public:
  /// Throws BadConfig unless 1 <= n_comp <= dim.
  IncrementalPca(std::size_t n_comp, std::size_t dim, std::int32_t class_id = 0);

  /// Absorbs M x D rows. The first batch needs M >= n_comp + 1.
  void partial_fit(const Eigen::Ref<const Eigen::MatrixXd>& batch);

  /// Eigenvalues = s^2 / (n - 1); the residual variance comes from the running
  /// total variance, so kept + discarded variance equals the sample trace.
  PcaModel finalize() const;

  std::size_t samples_seen() const noexcept { return n_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t n_components() const noexcept { return n_comp_; }
  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  const Eigen::MatrixXd& components() const noexcept { return components_; }
  const Eigen::VectorXd& singular_values() const noexcept { return singular_; }
  /// Sum over columns of squared deviations from the running mean.
  double total_sum_squares() const noexcept { return m2_; }

 private:
  std::size_t n_comp_;
  std::size_t dim_;
  std::int32_t class_id_;
  std::size_t n_ = 0;
  Eigen::VectorXd mean_;
  double m2_ = 0.0;
  Eigen::MatrixXd components_;  // k x D
  Eigen::VectorXd singular_;    // k
};

}  // namespace openseg
