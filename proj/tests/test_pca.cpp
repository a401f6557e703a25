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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "doctest.h"
#include "openseg/error.hpp"
#include "openseg/pca.hpp"
#include "openseg/reference.hpp"
#include "oracles.hpp"

using namespace openseg;

namespace {

ErrorKind kind_of(auto&& fn)
{
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::ConfigError;
}

SampleMatrix gaussian_rows(std::size_t n, std::size_t d, std::uint64_t seed, double anis = 1.0)
{
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n01;
  SampleMatrix s;
  s.rows.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index j = 0; j < s.rows.cols(); ++j) {
    const double sd = std::pow(anis, -static_cast<double>(j));
    for (Eigen::Index i = 0; i < s.rows.rows(); ++i) s.rows(i, j) = 1.0 + 0.5 * j + sd * n01(gen);
  }
  // Mix coordinates so the principal axes are not the coordinate axes.
  std::mt19937_64 g2(seed + 1);
  s.rows = s.rows * oracle::random_orthonormal_rows(d, d, g2);
  return s;
}

// Covariance the model stands for.
Eigen::MatrixXd model_covariance(const PcaModel& m)
{
  const auto D = static_cast<Eigen::Index>(m.dim());
  Eigen::MatrixXd c = m.noise_variance * Eigen::MatrixXd::Identity(D, D);
  for (Eigen::Index i = 0; i < m.components.rows(); ++i)
    c += (m.eigenvalues(i) - m.noise_variance) * m.components.row(i).transpose() * m.components.row(i);
  return c;
}

}  // namespace

TEST_CASE("fit_pca on the line y = x")
{
  SampleMatrix s;
  s.rows = Eigen::MatrixXd(3, 2);
  // Spread along (1, 1): t = -1, 0, 1 scaled so the variance along the line is 2.
  const double a = std::sqrt(2.0) / std::sqrt(2.0);
  s.rows << -a, -a, 0, 0, a, a;
  const auto m = fit_pca(s, 1);
  CHECK(m.components(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(m.components(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(m.eigenvalues(0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::abs(m.noise_variance) < 1e-12);
}

TEST_CASE("fit_pca against the dense covariance eigendecomposition")
{
  const auto s = gaussian_rows(400, 6, 21, 1.6);
  const auto m = fit_pca(s, 3);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(oracle::covariance(s.rows));
  const Eigen::VectorXd ev = es.eigenvalues().reverse();
  for (int i = 0; i < 3; ++i) CHECK(m.eigenvalues(i) == doctest::Approx(ev(i)).epsilon(1e-10));
  CHECK(m.noise_variance == doctest::Approx(ev.tail(3).mean()).epsilon(1e-10));
  const Eigen::MatrixXd top = es.eigenvectors().rowwise().reverse().leftCols(3).transpose();
  CHECK(oracle::max_principal_angle(m.components, top) < 1e-8);

  // invariants: orthonormal rows, sign convention, descending, conservation
  CHECK((m.components * m.components.transpose() - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
  for (int i = 0; i < 3; ++i) {
    Eigen::Index arg;
    m.components.row(i).cwiseAbs().maxCoeff(&arg);
    CHECK(m.components(i, arg) > 0.0);
  }
  for (int i = 1; i < 3; ++i) CHECK(m.eigenvalues(i) <= m.eigenvalues(i - 1));
  CHECK(m.eigenvalues.minCoeff() >= m.noise_variance - 1e-10);
  CHECK(m.eigenvalues.sum() + 3 * m.noise_variance == doctest::Approx(oracle::covariance(s.rows).trace()).epsilon(1e-10));
  CHECK(m.n_fit == 400);
}

TEST_CASE("fit_pca clamps the component count")
{
  const auto s = gaussian_rows(10, 28, 3);
  CHECK(fit_pca(s, 50).n_components() == 9);
  CHECK(fit_pca(gaussian_rows(100, 5, 4), 50).n_components() == 5);
}

TEST_CASE("full-rank model reconstructs exactly")
{
  const auto s = gaussian_rows(50, 4, 5);
  const auto m = fit_pca(s, 4);
  CHECK(m.noise_variance == 0.0);
  const Eigen::VectorXd x = s.rows.row(7).transpose();
  const Eigen::VectorXd back = m.mean + m.components.transpose() * project(m, x);
  CHECK((back - x).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("fit_pca is row-order invariant bit for bit")
{
  auto s = gaussian_rows(200, 7, 6);
  const auto a = fit_pca(s, 4);
  std::vector<Eigen::Index> perm(200);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 gen(1);
  std::shuffle(perm.begin(), perm.end(), gen);
  SampleMatrix t;
  t.rows.resize(200, 7);
  for (Eigen::Index i = 0; i < 200; ++i) t.rows.row(i) = s.rows.row(perm[static_cast<std::size_t>(i)]);
  const auto b = fit_pca(t, 4);
  CHECK(a.mean == b.mean);
  CHECK(a.components == b.components);
  CHECK(a.eigenvalues == b.eigenvalues);
  CHECK(a.noise_variance == b.noise_variance);
}

TEST_CASE("fit_pca errors")
{
  SampleMatrix one;
  one.rows = Eigen::MatrixXd::Ones(1, 3);
  CHECK(kind_of([&] { fit_pca(one, 2); }) == ErrorKind::InsufficientSamples);
  SampleMatrix same;
  same.rows = Eigen::MatrixXd::Constant(5, 3, 2.0);
  CHECK(kind_of([&] { fit_pca(same, 2); }) == ErrorKind::DegenerateData);
  CHECK(kind_of([&] { fit_pca(gaussian_rows(5, 3, 1), 0); }) == ErrorKind::BadConfig);
}

TEST_CASE("project")
{
  const auto m = fit_pca(gaussian_rows(300, 5, 7, 1.5), 3);
  CHECK(project(m, m.mean).cwiseAbs().maxCoeff() == 0.0);
  const Eigen::VectorXd y = project(m, m.mean + m.components.row(0).transpose());
  CHECK(y(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(y(1)) < 1e-12);
  CHECK(std::abs(y(2)) < 1e-12);

  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(5, -2.0, 3.0);
  const Eigen::VectorXd r = (x - m.mean) - m.components.transpose() * project(m, x);
  CHECK((m.components * r).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("ppca_loglik closed forms")
{
  PcaModel iso;
  iso.mean = Eigen::Vector2d(0.5, -1.0);
  iso.components = Eigen::MatrixXd(0, 2);
  iso.eigenvalues = Eigen::VectorXd(0);
  iso.noise_variance = 1.0;
  CHECK(ppca_loglik(iso, iso.mean) == doctest::Approx(-std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
  CHECK(ppca_loglik(iso, iso.mean) == doctest::Approx(-1.837877).epsilon(1e-6));

  const auto m = fit_pca(gaussian_rows(200, 6, 8, 1.4), 3);
  const double logdet = m.eigenvalues.array().log().sum() + 3.0 * std::log(m.noise_variance);
  CHECK(ppca_loglik(m, m.mean) == doctest::Approx(-0.5 * (6.0 * std::log(2.0 * std::numbers::pi) + logdet)).epsilon(1e-12));
}

TEST_CASE("ppca_loglik against the dense gaussian")
{
  std::mt19937_64 gen(99);
  std::uniform_int_distribution<int> dd(1, 6);
  std::normal_distribution<double> n01;
  for (int t = 0; t < 200; ++t) {
    const auto D = static_cast<std::size_t>(dd(gen));
    const auto q = static_cast<std::size_t>(std::uniform_int_distribution<int>(0, static_cast<int>(D))(gen));
    PcaModel m;
    m.mean = Eigen::VectorXd(static_cast<Eigen::Index>(D));
    for (auto& v : m.mean) v = n01(gen);
    m.components = oracle::random_orthonormal_rows(q, D, gen);
    m.noise_variance = q < D ? 0.1 + std::abs(n01(gen)) : 0.0;
    m.eigenvalues = Eigen::VectorXd(static_cast<Eigen::Index>(q));
    double prev = 5.0 + 4.0 * std::abs(n01(gen));
    for (auto& v : m.eigenvalues) v = prev = std::max(m.noise_variance, prev * (0.3 + 0.6 * std::abs(std::tanh(n01(gen)))));
    Eigen::VectorXd x(static_cast<Eigen::Index>(D));
    for (auto& v : x) v = 2.0 * n01(gen);
    CHECK(std::abs(ppca_loglik(m, x) - oracle::gaussian_logpdf(x, m.mean, model_covariance(m))) < 1e-8);
  }
}

TEST_CASE("ppca_loglik peaks at the mean")
{
  const auto m = fit_pca(gaussian_rows(300, 4, 10, 1.3), 2);
  const double top = ppca_loglik(m, m.mean);
  std::mt19937_64 gen(4);
  std::normal_distribution<double> n(0.0, 0.3);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd x = m.mean;
    for (auto& v : x) v += n(gen);
    CHECK(ppca_loglik(m, x) < top);
  }
}

TEST_CASE("ppca_loglik singular model")
{
  PcaModel m;
  m.mean = Eigen::Vector2d::Zero();
  m.components = Eigen::MatrixXd(0, 2);
  m.eigenvalues = Eigen::VectorXd(0);
  m.noise_variance = 0.0;
  CHECK(kind_of([&] { ppca_loglik(m, m.mean); }) == ErrorKind::SingularModel);
}

TEST_CASE("score_openpcs")
{
  const auto m0 = fit_pca(gaussian_rows(300, 3, 11), 2);
  auto m1 = fit_pca(gaussian_rows(300, 3, 12), 2);
  m1.class_id = 1;
  PcaModels models{m0, m1};
  FeatureField f;
  f.height = 2;
  f.width = 2;
  f.data = Eigen::MatrixXd(3, 4);
  f.data.col(0) = m0.mean;
  f.data.col(1) = m0.mean + Eigen::Vector3d(3, -2, 1);
  f.data.col(2) = m1.mean;
  f.data.col(3) = Eigen::Vector3d(7, 7, 7);
  LabelMap prior(2, 2);
  prior.values = {0, 0, 1, 2};
  const auto s = score_openpcs(f, prior, models);
  CHECK(s.scores.values[0] == doctest::Approx(ppca_loglik(m0, m0.mean)).epsilon(1e-13));
  CHECK(s.scores.values[0] > s.scores.values[1]);
  CHECK(s.scores.values[2] == doctest::Approx(ppca_loglik(m1, m1.mean)).epsilon(1e-13));
  CHECK(s.scores.values[3] == -std::numeric_limits<double>::infinity());
  CHECK(s.unscoreable == std::vector<std::int32_t>{2});
  CHECK(kind_of([&] { score_openpcs(f, prior, models, {true, false}); }) == ErrorKind::ModelMissing);

  const auto r = reference::score_openpcs(f, prior, models);
  CHECK(r.unscoreable == s.unscoreable);
  for (std::size_t i = 0; i < 4; ++i) {
    if (std::isinf(r.scores.values[i])) CHECK(std::isinf(s.scores.values[i]));
    else CHECK(std::abs(r.scores.values[i] - s.scores.values[i]) < 1e-10);
  }

  const auto z = score_openpcs(f, prior, models, {false, true});
  CHECK(z.scores.values[0] == doctest::Approx((s.scores.values[0] - m0.fit_loglik_mean) / m0.fit_loglik_std));
}

TEST_CASE("fit statistics describe the fitting rows")
{
  const auto s = gaussian_rows(500, 5, 13);
  const auto m = fit_pca(s, 2);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < 500; ++i) sum += ppca_loglik(m, s.rows.row(i).transpose());
  CHECK(m.fit_loglik_mean == doctest::Approx(sum / 500.0).epsilon(1e-12));
  CHECK(m.fit_loglik_std > 0.0);
}
