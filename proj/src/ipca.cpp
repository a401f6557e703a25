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

#include "openseg/ipca.hpp"

#include <algorithm>
#include <cmath>

#include "openseg/error.hpp"

namespace openseg {

IncrementalPca::IncrementalPca(std::size_t n_comp, std::size_t dim, std::int32_t class_id)
  : n_comp_(n_comp), dim_(dim), class_id_(class_id)
{
  if (n_comp < 1 || n_comp > dim)
    throw Error(ErrorKind::BadConfig, "ipca::ipca_new",
                "n_comp " + std::to_string(n_comp) + " outside [1, " + std::to_string(dim) + "]");
  mean_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
}

void IncrementalPca::partial_fit(const Eigen::Ref<const Eigen::MatrixXd>& batch)
{
  constexpr std::string_view where = "ipca::ipca_partial_fit";
  if (static_cast<std::size_t>(batch.cols()) != dim_)
    throw Error(ErrorKind::DimMismatch, where, "batch has " + std::to_string(batch.cols()) + " columns, expected " + std::to_string(dim_));
  const auto m = static_cast<std::size_t>(batch.rows());
  if (n_ == 0 && m < n_comp_ + 1)
    throw Error(ErrorKind::FirstBatchTooSmall, where,
                "first batch has " + std::to_string(m) + " rows, needs " + std::to_string(n_comp_ + 1));
  if (m == 0) return;

  const Eigen::VectorXd batch_mean = batch.colwise().mean().transpose();
  Eigen::MatrixXd centred = batch.rowwise() - batch_mean.transpose();
  const double batch_m2 = centred.squaredNorm();
  const std::size_t total = n_ + m;

  Eigen::MatrixXd stacked;
  if (n_ == 0) {
    stacked = std::move(centred);
  } else {
    const double nm = static_cast<double>(n_) * static_cast<double>(m);
    const Eigen::VectorXd delta = mean_ - batch_mean;
    const auto k = components_.rows();
    stacked.resize(k + 1 + static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(dim_));
    stacked.topRows(k) = singular_.asDiagonal() * components_;
    stacked.row(k) = std::sqrt(nm / static_cast<double>(total)) * delta.transpose();
    stacked.bottomRows(static_cast<Eigen::Index>(m)) = centred;
    // Chan et al. pairwise update of the sum of squares.
    m2_ += batch_m2 + delta.squaredNorm() * nm / static_cast<double>(total);
  }
  if (n_ == 0) m2_ = batch_m2;

  mean_ = (static_cast<double>(n_) * mean_ + static_cast<double>(m) * batch_mean) / static_cast<double>(total);
  n_ = total;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(stacked, Eigen::ComputeThinV);
  const auto keep = std::min<Eigen::Index>(static_cast<Eigen::Index>(n_comp_), svd.singularValues().size());
  components_ = svd.matrixV().leftCols(keep).transpose();
  singular_ = svd.singularValues().head(keep);
  // Re-orthonormalise the kept rows against accumulated rounding.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(components_.transpose());
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim_), keep);
  for (Eigen::Index r = 0; r < keep; ++r) {
    if (q.col(r).dot(components_.row(r).transpose()) < 0.0) q.col(r) *= -1.0;
  }
  components_ = q.transpose();
}

PcaModel IncrementalPca::finalize() const
{
  if (n_ < 2) throw Error(ErrorKind::InsufficientSamples, "ipca::ipca_finalize", "need at least 2 absorbed rows");
  const double dof = static_cast<double>(n_ - 1);
  PcaModel model;
  model.class_id = class_id_;
  model.n_fit = n_;
  model.mean = mean_;
  const auto q = std::min<Eigen::Index>(components_.rows(), static_cast<Eigen::Index>(n_ - 1));
  model.components = components_.topRows(q);
  model.eigenvalues = singular_.head(q).array().square() / dof;
  apply_sign_convention(model.components);
  const double trace = m2_ / dof;
  if (static_cast<std::size_t>(q) < dim_)
    model.noise_variance = std::max(0.0, (trace - model.eigenvalues.sum()) / static_cast<double>(dim_ - static_cast<std::size_t>(q)));
  return model;
}

}  // namespace openseg
