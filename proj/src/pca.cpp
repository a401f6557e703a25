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

#include "openseg/pca.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "openseg/error.hpp"

namespace openseg {

namespace {

// Regularised spectrum: kept eigenvalues and the residual variance, floored.
struct Spectrum {
  Eigen::VectorXd lambda;
  double sigma2 = 0.0;
  double log_det = 0.0;
};

Spectrum regularised_spectrum(const PcaModel& m)
{
  const std::size_t D = m.dim(), q = m.n_components();
  double largest = q > 0 ? m.eigenvalues.maxCoeff() : 0.0;
  if (q < D) largest = std::max(largest, m.noise_variance);
  if (!(largest > 0.0)) throw Error(ErrorKind::SingularModel, "pca_density::ppca_loglik", "model has no positive variance");
  const double floor = kEigenFloor * largest;

  Spectrum s;
  s.lambda = m.eigenvalues.cwiseMax(floor);
  s.log_det = s.lambda.array().log().sum();
  if (q < D) {
    s.sigma2 = std::max(m.noise_variance, floor);
    s.log_det += static_cast<double>(D - q) * std::log(s.sigma2);
  }
  return s;
}

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

}  // namespace

void apply_sign_convention(Eigen::MatrixXd& components)
{
  for (Eigen::Index r = 0; r < components.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < components.cols(); ++c)
      if (std::abs(components(r, c)) > std::abs(components(r, best))) best = c;
    if (components(r, best) < 0.0) components.row(r) *= -1.0;
  }
}

PcaModel fit_pca(const SampleMatrix& samples, std::size_t n_comp)
{
  constexpr std::string_view where = "pca_density::fit_pca";
  const std::size_t N = samples.count(), D = samples.dim();
  if (n_comp < 1) throw Error(ErrorKind::BadConfig, where, "n_comp must be >= 1");
  if (N < 2) throw Error(ErrorKind::InsufficientSamples, where, "need at least 2 rows, got " + std::to_string(N));
  if (D < 1) throw Error(ErrorKind::DimMismatch, where, "zero-dimensional samples");

  // Canonical (lexicographic) row order.
  const Eigen::MatrixXd& rows = samples.rows;
  std::vector<Eigen::Index> order(N);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index d = 0; d < rows.cols(); ++d) {
      if (rows(a, d) < rows(b, d)) return true;
      if (rows(b, d) < rows(a, d)) return false;
    }
    return false;
  });
  if ((rows.row(order.front()).array() == rows.row(order.back()).array()).all())
    throw Error(ErrorKind::DegenerateData, where, "class " + std::to_string(samples.class_id) + ": all rows identical");

  Eigen::MatrixXd X(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(D));
  for (std::size_t i = 0; i < N; ++i) X.row(static_cast<Eigen::Index>(i)) = rows.row(order[i]);

  PcaModel model;
  model.class_id = samples.class_id;
  model.n_fit = N;
  model.mean = X.colwise().mean().transpose();
  X.rowwise() -= model.mean.transpose();

  const double dof = static_cast<double>(N - 1);
  const double trace = X.squaredNorm() / dof;
  if (!(trace > 0.0)) throw Error(ErrorKind::DegenerateData, where, "zero covariance");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinV);
  const std::size_t q = std::min({n_comp, N - 1, D});
  const auto qi = static_cast<Eigen::Index>(q);
  model.components = svd.matrixV().leftCols(qi).transpose();
  model.eigenvalues = svd.singularValues().head(qi).array().square() / dof;
  apply_sign_convention(model.components);

  if (q < D) {
    model.noise_variance = std::max(0.0, (trace - model.eigenvalues.sum()) / static_cast<double>(D - q));
  }
  attach_fit_statistics(model, samples.rows);
  return model;
}

Eigen::VectorXd project(const PcaModel& model, const Eigen::Ref<const Eigen::VectorXd>& a_star)
{
  if (static_cast<std::size_t>(a_star.size()) != model.dim())
    throw Error(ErrorKind::DimMismatch, "pca_density::project", "vector dimension differs from model");
  return model.components * (a_star - model.mean);
}

double ppca_loglik(const PcaModel& model, const Eigen::Ref<const Eigen::VectorXd>& a_star)
{
  const Spectrum s = regularised_spectrum(model);
  const Eigen::VectorXd centred = a_star - model.mean;
  const Eigen::VectorXd y = project(model, a_star);
  double maha = (y.array().square() / s.lambda.array()).sum();
  if (model.n_components() < model.dim()) {
    const Eigen::VectorXd residual = centred - model.components.transpose() * y;
    maha += residual.squaredNorm() / s.sigma2;
  }
  return -0.5 * (static_cast<double>(model.dim()) * kLog2Pi + s.log_det + maha);
}

void attach_fit_statistics(PcaModel& model, const Eigen::MatrixXd& rows)
{
  const auto n = rows.rows();
  if (n == 0) return;
  double sum = 0.0, sq = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double l = ppca_loglik(model, rows.row(i).transpose());
    sum += l;
    sq += l * l;
  }
  const double mean = sum / static_cast<double>(n);
  const double var = n > 1 ? std::max(0.0, (sq - sum * mean) / static_cast<double>(n - 1)) : 0.0;
  model.fit_loglik_mean = mean;
  model.fit_loglik_std = var > 0.0 ? std::sqrt(var) : 1.0;
}

OpenPcsScore score_openpcs(const FeatureField& field, const LabelMap& prior, const PcaModels& models,
                           const OpenPcsOptions& options)
{
  constexpr std::string_view where = "pca_density::score_openpcs";
  if (!prior.same_dims(field.height, field.width))
    throw Error(ErrorKind::DimMismatch, where, "prior prediction does not match the feature field");

  // Per-class precomputation: whitened components and log normaliser.
  struct Terms {
    bool usable = false;
    Eigen::MatrixXd components;
    Eigen::VectorXd inv_lambda;
    Eigen::VectorXd mean;
    double inv_sigma2 = 0.0;
    double log_norm = 0.0;
    double shift = 0.0, inv_scale = 1.0;
    bool residual = false;
  };
  std::vector<Terms> terms(models.size());
  for (std::size_t c = 0; c < models.size(); ++c) {
    if (!models[c]) continue;
    const auto& m = *models[c];
    if (m.dim() != field.dim())
      throw Error(ErrorKind::DimMismatch, where, "model " + std::to_string(c) + " has dimension " + std::to_string(m.dim()) +
                                                   ", features have " + std::to_string(field.dim()));
    const Spectrum s = regularised_spectrum(m);
    auto& t = terms[c];
    t.usable = true;
    t.components = m.components;
    t.inv_lambda = s.lambda.cwiseInverse();
    t.mean = m.mean;
    t.residual = m.n_components() < m.dim();
    t.inv_sigma2 = t.residual ? 1.0 / s.sigma2 : 0.0;
    t.log_norm = -0.5 * (static_cast<double>(m.dim()) * kLog2Pi + s.log_det);
    if (options.normalize) {
      t.shift = m.fit_loglik_mean;
      t.inv_scale = 1.0 / m.fit_loglik_std;
    }
  }

  OpenPcsScore out{ScoreMap(field.height, field.width), {}};
  std::int32_t max_label = -1;
  for (auto v : prior.values) max_label = std::max(max_label, v);
  std::vector<std::uint8_t> missing(static_cast<std::size_t>(max_label + 1), 0);
  for (auto v : prior.values) {
    if (v >= 0 && (static_cast<std::size_t>(v) >= terms.size() || !terms[static_cast<std::size_t>(v)].usable))
      missing[static_cast<std::size_t>(v)] = 1;
  }
  for (std::size_t c = 0; c < missing.size(); ++c) {
    if (!missing[c]) continue;
    if (options.strict) throw Error(ErrorKind::ModelMissing, where, "no model for predicted class " + std::to_string(c));
    out.unscoreable.push_back(static_cast<std::int32_t>(c));
  }

  const std::size_t D = field.dim();
  const auto n = static_cast<std::ptrdiff_t>(field.pixels());
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
#pragma omp parallel
  {
    Eigen::VectorXd centred(static_cast<Eigen::Index>(D)), y;
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto c = prior.values[static_cast<std::size_t>(i)];
      if (c < 0 || static_cast<std::size_t>(c) >= terms.size() || !terms[static_cast<std::size_t>(c)].usable) {
        out.scores.values[static_cast<std::size_t>(i)] = kNegInf;
        continue;
      }
      const auto& t = terms[static_cast<std::size_t>(c)];
      centred.noalias() = field.data.col(i) - t.mean;
      y.noalias() = t.components * centred;
      double maha = y.cwiseAbs2().dot(t.inv_lambda);
      if (t.residual) {
        centred.noalias() -= t.components.transpose() * y;
        maha += centred.squaredNorm() * t.inv_sigma2;
      }
      const double l = t.log_norm - 0.5 * maha;
      out.scores.values[static_cast<std::size_t>(i)] = (l - t.shift) * t.inv_scale;
    }
  }
  return out;
}

}  // namespace openseg
