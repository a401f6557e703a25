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

#include "openseg/softmax.hpp"

#include <cmath>

#include "openseg/error.hpp"

namespace openseg {

namespace {

void check_logits(const FloatTensor& logits, std::string_view where)
{
  if (logits.rank() != 3 || logits.shape[0] < 1) throw Error(ErrorKind::ShapeMismatch, where, "logits must be C x H x W with C >= 1");
}

}  // namespace

void softmax_inplace(std::span<const double> a, std::span<double> out)
{
  double peak = a[0];
  for (double v : a) peak = std::max(peak, v);
  double total = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    out[c] = std::exp(a[c] - peak);
    total += out[c];
  }
  for (std::size_t c = 0; c < a.size(); ++c) out[c] /= total;
}

Tensor<double> softmax(const FloatTensor& logits)
{
  check_logits(logits, "baseline_softmax::softmax");
  const std::size_t C = logits.shape[0], HW = logits.shape[1] * logits.shape[2];
  Tensor<double> out(logits.shape);
  const auto n = static_cast<std::ptrdiff_t>(HW);
#pragma omp parallel
  {
    std::vector<double> a(C), p(C);
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto px = static_cast<std::size_t>(i);
      for (std::size_t c = 0; c < C; ++c) a[c] = logits.data[c * HW + px];
      softmax_inplace(a, p);
      for (std::size_t c = 0; c < C; ++c) out.data[c * HW + px] = p[c];
    }
  }
  return out;
}

LabelMap argmax_prediction(const FloatTensor& logits)
{
  check_logits(logits, "baseline_softmax::argmax_prediction");
  const std::size_t C = logits.shape[0], HW = logits.shape[1] * logits.shape[2];
  LabelMap prior(logits.shape[1], logits.shape[2]);
  const auto n = static_cast<std::ptrdiff_t>(HW);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto px = static_cast<std::size_t>(i);
    std::size_t best = 0;
    for (std::size_t c = 1; c < C; ++c)
      if (logits.data[c * HW + px] > logits.data[best * HW + px]) best = c;
    prior.values[px] = static_cast<std::int32_t>(best);
  }
  return prior;
}

SoftmaxScore score_softmax(const FloatTensor& logits)
{
  check_logits(logits, "baseline_softmax::score_softmax");
  const std::size_t C = logits.shape[0], HW = logits.shape[1] * logits.shape[2];
  SoftmaxScore out{ScoreMap(logits.shape[1], logits.shape[2]), LabelMap(logits.shape[1], logits.shape[2])};
  const auto n = static_cast<std::ptrdiff_t>(HW);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto px = static_cast<std::size_t>(i);
    std::size_t best = 0;
    double peak = logits.data[px];
    for (std::size_t c = 1; c < C; ++c) {
      const double v = logits.data[c * HW + px];
      if (v > peak) {
        peak = v;
        best = c;
      }
    }
    // max probability = 1 / sum_c exp(a_c - a_max)
    double total = 0.0;
    for (std::size_t c = 0; c < C; ++c) total += std::exp(static_cast<double>(logits.data[c * HW + px]) - peak);
    out.scores.values[px] = 1.0 / total;
    out.prior.values[px] = static_cast<std::int32_t>(best);
  }
  return out;
}

}  // namespace openseg
