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

// Independent reference computations for the tests. Nothing here calls into the
// library's numerics: densities are built from the full covariance, AUC from all
// pairs, metrics from raw label lists.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace oracle {

/// log N(x; mu, cov) via an LLT of the dense covariance.
inline double gaussian_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov)
{
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const Eigen::MatrixXd L = llt.matrixL();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < L.rows(); ++i) logdet += 2.0 * std::log(L(i, i));
  const Eigen::VectorXd z = L.triangularView<Eigen::Lower>().solve(x - mu);
  return -0.5 * (static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi) + logdet + z.squaredNorm());
}

/// Sum over all (unknown, known) pairs: 1 if unknown scores lower, 1/2 on ties.
inline double brute_auc(const std::vector<double>& s, const std::vector<std::uint8_t>& unk)
{
  double good = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!unk[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (unk[j]) continue;
      pairs += 1.0;
      if (s[i] < s[j]) good += 1.0;
      else if (s[i] == s[j]) good += 0.5;
    }
  }
  return good / pairs;
}

struct Metrics {
  double acc_known, pre_unknown, kappa;
};

/// Metrics from paired label lists, unknown class = k - 1.
inline Metrics brute_metrics(const std::vector<int>& truth, const std::vector<int>& pred, int k)
{
  const int u = k - 1;
  double known = 0, known_ok = 0, flagged = 0, flagged_ok = 0, agree = 0;
  std::vector<double> rt(static_cast<std::size_t>(k), 0.0), rp(static_cast<std::size_t>(k), 0.0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] != u) {
      known += 1;
      if (pred[i] == truth[i]) known_ok += 1;
    }
    if (pred[i] == u) {
      flagged += 1;
      if (truth[i] == u) flagged_ok += 1;
    }
    if (pred[i] == truth[i]) agree += 1;
    rt[static_cast<std::size_t>(truth[i])] += 1;
    rp[static_cast<std::size_t>(pred[i])] += 1;
  }
  const double n = static_cast<double>(truth.size());
  double pe = 0;
  for (int c = 0; c < k; ++c) pe += (rt[static_cast<std::size_t>(c)] / n) * (rp[static_cast<std::size_t>(c)] / n);
  const double po = agree / n;
  const double kappa = pe == 1.0 ? 1.0 : (po - pe) / (1.0 - pe);
  return {known ? known_ok / known : 0.0, flagged ? flagged_ok / flagged : 0.0, kappa};
}

/// Sample covariance (divisor N - 1) of N x D rows.
inline Eigen::MatrixXd covariance(const Eigen::MatrixXd& rows)
{
  const Eigen::RowVectorXd mu = rows.colwise().mean();
  const Eigen::MatrixXd c = rows.rowwise() - mu;
  return c.transpose() * c / static_cast<double>(rows.rows() - 1);
}

/// Largest principal angle between the row spaces of A (p x D) and B (q x D), both orthonormal.
inline double max_principal_angle(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B)
{
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A * B.transpose());
  const auto s = svd.singularValues();
  const double smallest = s.size() ? std::min(1.0, s.minCoeff()) : 0.0;
  return std::acos(smallest);
}

/// Weibull draws by inversion: scale * (-log(1 - u))^(1/shape).
inline std::vector<double> weibull_sample(double shape, double scale, std::size_t n, std::uint64_t seed)
{
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& x : out) x = scale * std::pow(-std::log1p(-u(gen)), 1.0 / shape);
  return out;
}

/// Random symmetric positive-definite ppca-style model parts.
inline Eigen::MatrixXd random_orthonormal_rows(std::size_t q, std::size_t d, std::mt19937_64& gen)
{
  std::normal_distribution<double> n01;
  Eigen::MatrixXd g(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = n01(gen);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  const Eigen::MatrixXd Q = qr.householderQ();
  return Q.leftCols(static_cast<Eigen::Index>(q)).transpose();
}

/// Scratch directory under the system temp dir, wiped on construction.
inline std::filesystem::path scratch(const std::string& name)
{
  const auto p = std::filesystem::temp_directory_path() / ("openseg_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace oracle
