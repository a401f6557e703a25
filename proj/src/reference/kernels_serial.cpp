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
#include <numeric>

#include "openseg/error.hpp"
#include "openseg/reference.hpp"

namespace openseg::reference {

Tensor<double> upsample(const FloatTensor& t, std::size_t factor, Upsampling mode)
{
  if (t.rank() != 3 || factor < 1) throw Error(ErrorKind::ShapeMismatch, "reference::upsample", "bad input");
  const std::size_t C = t.shape[0], h = t.shape[1], w = t.shape[2];
  Tensor<double> out({C, h * factor, w * factor});
  const double f = static_cast<double>(factor);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < h * factor; ++y)
      for (std::size_t x = 0; x < w * factor; ++x) {
        double v;
        if (mode == Upsampling::Nearest || factor == 1) {
          v = t.at3(c, y / factor, x / factor);
        } else {
          const double sy = std::clamp((static_cast<double>(y) + 0.5) / f - 0.5, 0.0, static_cast<double>(h - 1));
          const double sx = std::clamp((static_cast<double>(x) + 0.5) / f - 0.5, 0.0, static_cast<double>(w - 1));
          const auto y0 = static_cast<std::size_t>(std::floor(sy)), x0 = static_cast<std::size_t>(std::floor(sx));
          const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
          const double fy = sy - static_cast<double>(y0), fx = sx - static_cast<double>(x0);
          v = (1 - fy) * ((1 - fx) * t.at3(c, y0, x0) + fx * t.at3(c, y0, x1)) +
              fy * ((1 - fx) * t.at3(c, y1, x0) + fx * t.at3(c, y1, x1));
        }
        out.data[(c * h * factor + y) * w * factor + x] = v;
      }
  return out;
}

SoftmaxScore score_softmax(const FloatTensor& logits)
{
  const std::size_t C = logits.shape[0], H = logits.shape[1], W = logits.shape[2];
  SoftmaxScore out{ScoreMap(H, W), LabelMap(H, W)};
  std::vector<double> a(C), p(C);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      for (std::size_t c = 0; c < C; ++c) a[c] = logits.at3(c, y, x);
      softmax_inplace(a, p);
      const auto best = static_cast<std::size_t>(std::max_element(a.begin(), a.end()) - a.begin());
      out.scores(y, x) = p[best];
      out.prior(y, x) = static_cast<std::int32_t>(best);
    }
  return out;
}

OpenFcnScore score_openfcn(const FloatTensor& logits, const WeibullModels& models, const OpenMaxConfig& cfg)
{
  const std::size_t C = logits.shape[0], H = logits.shape[1], W = logits.shape[2];
  // Fill gaps with a model whose CDF is 1 everywhere, same as the lenient kernel.
  WeibullModels full(C);
  OpenFcnScore out{ScoreMap(H, W), LabelMap(H, W), LabelMap(H, W), {}};
  for (std::size_t c = 0; c < C; ++c) {
    if (c < models.size() && models[c]) {
      full[c] = models[c];
      continue;
    }
    WeibullModel reject;
    reject.class_id = static_cast<std::int32_t>(c);
    reject.mav = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(C));
    reject.point_mass = -1.0;
    full[c] = reject;
    out.unscoreable.push_back(static_cast<std::int32_t>(c));
  }
  std::vector<double> a(C);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      for (std::size_t c = 0; c < C; ++c) a[c] = logits.at3(c, y, x);
      const auto probs = openmax_recalibrate(a, full, cfg);
      const auto best = static_cast<std::size_t>(std::max_element(a.begin(), a.end()) - a.begin());
      out.scores(y, x) = 1.0 - probs[C];
      out.prior(y, x) = static_cast<std::int32_t>(best);
      const auto& m = *full[best];
      const bool keep = weibull_cdf(m, distance(a, std::span<const double>(m.mav.data(), C), m.distance)) <= cfg.quantile;
      out.posterior(y, x) = keep ? static_cast<std::int32_t>(best) : static_cast<std::int32_t>(C);
    }
  return out;
}

OpenPcsScore score_openpcs(const FeatureField& field, const LabelMap& prior, const PcaModels& models)
{
  OpenPcsScore out{ScoreMap(field.height, field.width), {}};
  for (std::size_t p = 0; p < field.pixels(); ++p) {
    const auto c = prior.values[p];
    if (c < 0 || static_cast<std::size_t>(c) >= models.size() || !models[static_cast<std::size_t>(c)]) {
      out.scores.values[p] = -std::numeric_limits<double>::infinity();
      if (c >= 0 && std::find(out.unscoreable.begin(), out.unscoreable.end(), c) == out.unscoreable.end())
        out.unscoreable.push_back(c);
      continue;
    }
    out.scores.values[p] = ppca_loglik(*models[static_cast<std::size_t>(c)], field.data.col(static_cast<Eigen::Index>(p)));
  }
  std::sort(out.unscoreable.begin(), out.unscoreable.end());
  return out;
}

}  // namespace openseg::reference
