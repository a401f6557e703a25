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

#include "openseg/openmax.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>

#include "openseg/error.hpp"
#include "openseg/softmax.hpp"

namespace openseg {

std::string to_string(DistanceKind kind)
{
  switch (kind) {
    case DistanceKind::Euclidean: return "euclidean";
    case DistanceKind::Cosine: return "cosine";
    case DistanceKind::Hybrid: return "hybrid";
  }
  return "euclidean";
}

DistanceKind parse_distance(const std::string& name)
{
  if (name == "euclidean") return DistanceKind::Euclidean;
  if (name == "cosine") return DistanceKind::Cosine;
  if (name == "hybrid") return DistanceKind::Hybrid;
  throw Error(ErrorKind::BadConfig, "openmax_evt::parse_distance", "unknown distance '" + name + "'");
}

namespace {

double euclidean(std::span<const double> a, std::span<const double> b)
{
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double cosine(std::span<const double> a, std::span<const double> b)
{
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw Error(ErrorKind::ZeroVector, "openmax_evt::distance", "cosine distance of a zero vector");
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

std::span<const double> as_span(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

// Profile-likelihood equation for the shape, on values normalised to max 1.
struct ShapeEquation {
  std::span<const double> x;
  double mean_log;

  // Returns g(k) and g'(k).
  std::pair<double, double> operator()(double k) const
  {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (double v : x) {
      const double lv = std::log(v);
      const double p = std::pow(v, k);
      s0 += p;
      s1 += p * lv;
      s2 += p * lv * lv;
    }
    const double g = s1 / s0 - 1.0 / k - mean_log;
    const double dg = (s2 * s0 - s1 * s1) / (s0 * s0) + 1.0 / (k * k);
    return {g, dg};
  }
};

}  // namespace

double distance(std::span<const double> a, std::span<const double> mav, const DistanceSpec& spec)
{
  if (a.size() != mav.size()) throw Error(ErrorKind::DimMismatch, "openmax_evt::distance", "vector dimensions differ");
  switch (spec.kind) {
    case DistanceKind::Euclidean: return euclidean(a, mav);
    case DistanceKind::Cosine: return cosine(a, mav);
    case DistanceKind::Hybrid:
      return spec.w_euclid * euclidean(a, mav) / spec.euclid_scale + spec.w_cosine * cosine(a, mav);
  }
  return 0.0;
}

Eigen::VectorXd compute_mav(const SampleMatrix& samples)
{
  if (samples.count() == 0) throw Error(ErrorKind::NoSamples, "openmax_evt::compute_mav", "empty sample matrix");
  return samples.rows.colwise().mean().transpose();
}

WeibullParams fit_weibull_tail(std::span<const double> distances, std::size_t tail_size)
{
  constexpr std::string_view where = "openmax_evt::fit_weibull_tail";
  if (tail_size < 3) throw Error(ErrorKind::BadConfig, where, "tail_size must be >= 3");
  if (distances.size() < tail_size)
    throw Error(ErrorKind::InsufficientSamples, where,
                std::to_string(distances.size()) + " distances for a tail of " + std::to_string(tail_size));

  std::vector<double> tail(distances.begin(), distances.end());
  std::nth_element(tail.begin(), tail.begin() + static_cast<std::ptrdiff_t>(tail.size() - tail_size), tail.end());
  tail.erase(tail.begin(), tail.begin() + static_cast<std::ptrdiff_t>(tail.size() - tail_size));
  std::erase_if(tail, [](double v) { return !(v > 0.0); });
  // Canonical order so the fit does not depend on how the input was arranged.
  std::sort(tail.begin(), tail.end());
  if (tail.size() < 2 || tail.front() == tail.back())
    throw Error(ErrorKind::DegenerateTail, where, "tail values are all equal");

  const double top = tail.back();
  double mean_log = 0.0;
  for (double& v : tail) {
    v /= top;
    mean_log += std::log(v);
  }
  mean_log /= static_cast<double>(tail.size());
  const ShapeEquation g{tail, mean_log};

  double lo = kMinWeibullShape, hi = kMaxWeibullShape;
  double k;
  if (g(lo).first >= 0.0) {
    k = lo;
  } else if (g(hi).first <= 0.0) {
    k = hi;
  } else {
    k = 1.0;
    for (int iter = 0; iter < 200; ++iter) {
      const auto [val, slope] = g(k);
      if (val > 0.0) hi = k;
      else lo = k;
      double next = k - val / slope;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      const double step = std::abs(next - k);
      k = next;
      if (step < 1e-9 || hi - lo < 1e-9) break;
    }
  }

  double mean_pow = 0.0;
  for (double v : tail) mean_pow += std::pow(v, k);
  mean_pow /= static_cast<double>(tail.size());
  return {k, top * std::pow(mean_pow, 1.0 / k)};
}

double WeibullModel::quantile(double q) const
{
  if (point_mass) return *point_mass;
  if (q <= 0.0) return 0.0;
  if (q >= 1.0) return std::numeric_limits<double>::infinity();
  return scale * std::pow(-std::log1p(-q), 1.0 / shape);
}

double weibull_cdf(const WeibullModel& model, double x)
{
  if (model.point_mass) return x >= *model.point_mass ? 1.0 : 0.0;
  if (!(x > 0.0)) return 0.0;
  return -std::expm1(-std::pow(x / model.scale, model.shape));
}

std::size_t resolve_alpha(const OpenMaxConfig& cfg, std::size_t num_classes)
{
  if (cfg.alpha == 0) return num_classes;
  if (cfg.alpha > num_classes)
    throw Error(ErrorKind::BadConfig, "openmax_evt::openmax_recalibrate",
                "alpha " + std::to_string(cfg.alpha) + " exceeds " + std::to_string(num_classes) + " classes");
  return cfg.alpha;
}

WeibullModel fit_weibull_model(const SampleMatrix& samples, const OpenMaxConfig& cfg)
{
  constexpr std::string_view where = "openmax_evt::fit_weibull_tail";
  WeibullModel model;
  model.class_id = samples.class_id;
  model.mav = compute_mav(samples);
  const std::size_t n = samples.count();
  if (n < 3) throw Error(ErrorKind::InsufficientSamples, where, "class " + std::to_string(samples.class_id) + " has fewer than 3 samples");
  model.tail_size = std::min(cfg.tail_size, n);
  model.distance = {cfg.distance, cfg.w_euclid, cfg.w_cosine, 1.0};

  const auto mav = as_span(model.mav);
  const Eigen::MatrixXd rows_t = samples.rows.transpose();  // column per sample
  auto sample = [&](std::size_t i) {
    return std::span<const double>(rows_t.data() + i * samples.dim(), samples.dim());
  };

  if (cfg.distance == DistanceKind::Hybrid) {
    std::vector<double> eu(n);
    for (std::size_t i = 0; i < n; ++i) eu[i] = euclidean(sample(i), mav);
    std::sort(eu.begin(), eu.end());
    // median of the tail_size largest values
    const std::size_t first = n - model.tail_size;
    const std::size_t m = model.tail_size;
    const double med = (m % 2 == 1) ? eu[first + m / 2] : 0.5 * (eu[first + m / 2 - 1] + eu[first + m / 2]);
    model.distance.euclid_scale = med > 0.0 ? med : 1.0;
  }

  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = distance(sample(i), mav, model.distance);
  try {
    const auto fit = fit_weibull_tail(d, model.tail_size);
    model.shape = fit.shape;
    model.scale = fit.scale;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateTail) throw;
    model.point_mass = *std::max_element(d.begin(), d.end());
  }
  return model;
}

namespace {

// Writes the C+1 recalibrated probabilities for one pixel. `order` is scratch of size C.
void recalibrate_into(std::span<const double> a, const WeibullModels& models, std::size_t alpha, bool strict,
                      std::vector<std::size_t>& order, std::vector<double>& revised, std::span<double> out)
{
  const std::size_t C = a.size();
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a[x] > a[y]; });

  for (std::size_t c = 0; c < C; ++c) revised[c] = a[c];
  double unknown = 0.0;
  for (std::size_t rank = 0; rank < alpha; ++rank) {
    const std::size_t c = order[rank];
    double cdf;
    if (c < models.size() && models[c]) {
      const auto& m = *models[c];
      cdf = weibull_cdf(m, distance(a, as_span(m.mav), m.distance));
    } else if (strict) {
      throw Error(ErrorKind::ModelMissing, "openmax_evt::openmax_recalibrate", "no model for class " + std::to_string(c));
    } else {
      cdf = 1.0;
    }
    const double w = cdf * static_cast<double>(alpha - rank) / static_cast<double>(alpha);
    revised[c] = a[c] * (1.0 - w);
    unknown += a[c] * w;
  }
  revised[C] = unknown;
  softmax_inplace(revised, out);
}

}  // namespace

std::vector<double> openmax_recalibrate(std::span<const double> activation, const WeibullModels& models,
                                        const OpenMaxConfig& cfg)
{
  const std::size_t C = activation.size();
  if (C == 0) throw Error(ErrorKind::DimMismatch, "openmax_evt::openmax_recalibrate", "empty activation");
  const std::size_t alpha = resolve_alpha(cfg, C);
  std::vector<std::size_t> order(C);
  std::vector<double> revised(C + 1), out(C + 1);
  recalibrate_into(activation, models, alpha, true, order, revised, out);
  return out;
}

OpenFcnScore score_openfcn(const FloatTensor& logits, const WeibullModels& models, const OpenMaxConfig& cfg, bool strict)
{
  constexpr std::string_view where = "openmax_evt::score_openfcn";
  if (logits.rank() != 3 || logits.shape[0] < 1) throw Error(ErrorKind::ShapeMismatch, where, "logits must be C x H x W");
  const std::size_t C = logits.shape[0], H = logits.shape[1], W = logits.shape[2], HW = H * W;
  const std::size_t alpha = resolve_alpha(cfg, C);

  OpenFcnScore out{ScoreMap(H, W), LabelMap(H, W), LabelMap(H, W), {}};
  for (std::size_t c = 0; c < C; ++c) {
    if (c < models.size() && models[c]) {
      if (static_cast<std::size_t>(models[c]->mav.size()) != C)
        throw Error(ErrorKind::DimMismatch, where, "model " + std::to_string(c) + " MAV dimension differs from logits");
      continue;
    }
    if (strict) throw Error(ErrorKind::ModelMissing, where, "no model for class " + std::to_string(c));
    out.unscoreable.push_back(static_cast<std::int32_t>(c));
  }

  const auto unknown_id = static_cast<std::int32_t>(C);
  const auto n = static_cast<std::ptrdiff_t>(HW);
  std::exception_ptr failure;
#pragma omp parallel
  {
    std::vector<double> a(C), revised(C + 1), probs(C + 1);
    std::vector<std::size_t> order(C);
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) try {
      const auto px = static_cast<std::size_t>(i);
      std::size_t best = 0;
      for (std::size_t c = 0; c < C; ++c) {
        a[c] = logits.data[c * HW + px];
        if (a[c] > a[best]) best = c;
      }
      recalibrate_into(a, models, alpha, false, order, revised, probs);
      out.scores.values[px] = 1.0 - probs[C];
      out.prior.values[px] = static_cast<std::int32_t>(best);

      bool keep = false;
      if (best < models.size() && models[best]) {
        const auto& m = *models[best];
        keep = weibull_cdf(m, distance(a, as_span(m.mav), m.distance)) <= cfg.quantile;
      }
      out.posterior.values[px] = keep ? static_cast<std::int32_t>(best) : unknown_id;
    } catch (...) {
#pragma omp critical(openseg_openfcn_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace openseg
