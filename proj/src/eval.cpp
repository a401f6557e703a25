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

#include "openseg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "openseg/error.hpp"

namespace openseg {

LocoSplit loco_remap(const LabelMap& labels, std::int32_t uuc, std::size_t num_classes)
{
  if (num_classes < 2) throw Error(ErrorKind::BadClass, "eval_harness::loco_remap", "need at least 2 classes");
  if (uuc < 0 || static_cast<std::size_t>(uuc) >= num_classes)
    throw Error(ErrorKind::BadClass, "eval_harness::loco_remap",
                "uuc " + std::to_string(uuc) + " with " + std::to_string(num_classes) + " classes");

  LocoSplit split;
  split.unknown_id = static_cast<std::int32_t>(num_classes - 1);
  split.id_map.resize(num_classes);
  std::int32_t next = 0;
  for (std::size_t c = 0; c < num_classes; ++c)
    split.id_map[c] = static_cast<std::int32_t>(c) == uuc ? split.unknown_id : next++;

  split.train_mask = Mask(labels.height, labels.width, 0);
  split.eval_labels = LabelMap(labels.height, labels.width, kIgnoreLabel);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto v = labels.values[i];
    if (v == kIgnoreLabel) continue;
    if (v < 0 || static_cast<std::size_t>(v) >= num_classes)
      throw Error(ErrorKind::LabelOutOfRange, "eval_harness::loco_remap", "label " + std::to_string(v));
    split.eval_labels.values[i] = split.id_map[static_cast<std::size_t>(v)];
    split.train_mask.values[i] = v != uuc ? 1 : 0;
  }
  return split;
}

FloatTensor loco_logits(const FloatTensor& logits, std::int32_t uuc)
{
  if (logits.rank() != 3 || uuc < 0 || static_cast<std::size_t>(uuc) >= logits.shape[0] || logits.shape[0] < 2)
    throw Error(ErrorKind::BadClass, "eval_harness::loco_remap", "cannot drop channel " + std::to_string(uuc));
  const std::size_t C = logits.shape[0], HW = logits.shape[1] * logits.shape[2];
  FloatTensor out({C - 1, logits.shape[1], logits.shape[2]});
  const std::size_t K = C - 1;
  for (std::size_t p = 0; p < HW; ++p) {
    double mean = 0.0;
    for (std::size_t c = 0; c < C; ++c)
      if (static_cast<std::int32_t>(c) != uuc) mean += logits.data[c * HW + p];
    mean /= static_cast<double>(K);
    std::size_t dst = 0;
    for (std::size_t c = 0; c < C; ++c) {
      if (static_cast<std::int32_t>(c) == uuc) continue;
      out.data[dst * HW + p] = static_cast<float>(logits.data[c * HW + p] - mean);
      ++dst;
    }
  }
  return out;
}

Mask unknown_mask(const LabelMap& eval_labels, std::int32_t unknown_id)
{
  Mask m(eval_labels.height, eval_labels.width, 0);
  for (std::size_t i = 0; i < eval_labels.size(); ++i) m.values[i] = eval_labels.values[i] == unknown_id ? 1 : 0;
  return m;
}

Calibration calibrate_threshold(std::span<const double> scores, std::span<const std::uint8_t> is_unknown, double tpr)
{
  constexpr std::string_view where = "eval_harness::calibrate_threshold";
  if (scores.size() != is_unknown.size()) throw Error(ErrorKind::DimMismatch, where, "scores and mask differ in size");
  if (!(tpr > 0.0 && tpr <= 1.0)) throw Error(ErrorKind::BadConfig, where, "tpr must lie in (0, 1]");

  std::vector<double> unk;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (is_unknown[i]) unk.push_back(scores[i]);
  if (unk.empty()) throw Error(ErrorKind::NoUnknowns, where, "no unknown pixels to calibrate on");
  std::sort(unk.begin(), unk.end());

  const auto n = static_cast<double>(unk.size());
  // Guard against tpr * n landing a hair above an integer (0.3 * 10).
  auto rank = static_cast<std::size_t>(std::ceil(tpr * n - 1e-9 * n));
  rank = std::clamp<std::size_t>(rank, 1, unk.size());

  Calibration cal;
  cal.threshold = unk[rank - 1];
  cal.unknowns = unk.size();
  cal.flagged = static_cast<std::size_t>(std::upper_bound(unk.begin(), unk.end(), cal.threshold) - unk.begin());
  cal.achieved_tpr = static_cast<double>(cal.flagged) / n;
  return cal;
}

Calibration calibrate_threshold(const ScoreMap& scores, const Mask& unknown, double tpr)
{
  if (!scores.same_dims(unknown))
    throw Error(ErrorKind::DimMismatch, "eval_harness::calibrate_threshold", "score map and mask differ in size");
  return calibrate_threshold(scores.values, unknown.values, tpr);
}

OpenSetPrediction apply_threshold(const ScoreMap& scores, const LabelMap& prior, double threshold,
                                  std::int32_t unknown_id, std::string method)
{
  if (!scores.same_dims(prior))
    throw Error(ErrorKind::DimMismatch, "eval_harness::apply_threshold", "score map and prior differ in size");
  OpenSetPrediction pred{LabelMap(prior.height, prior.width), unknown_id, threshold, std::move(method)};
  for (std::size_t i = 0; i < prior.size(); ++i)
    pred.labels.values[i] = scores.values[i] <= threshold ? unknown_id : prior.values[i];
  return pred;
}

RocCurve roc_auc(std::span<const double> scores, std::span<const std::uint8_t> is_unknown)
{
  constexpr std::string_view where = "eval_harness::roc_auc";
  if (scores.size() != is_unknown.size()) throw Error(ErrorKind::DimMismatch, where, "scores and mask differ in size");
  std::uint64_t n_pos = 0;
  for (auto u : is_unknown) n_pos += u ? 1 : 0;
  const std::uint64_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error(ErrorKind::SingleClassMask, where, "need both known and unknown pixels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0, -std::numeric_limits<double>::infinity()});
  // Twice the count of correctly ordered (unknown below known) pairs, ties worth 1.
  std::uint64_t twice_pairs = 0;
  std::uint64_t pos_below = 0, neg_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    std::uint64_t pos_g = 0, neg_g = 0;
    std::size_t j = i;
    for (; j < order.size() && scores[order[j]] == s; ++j) (is_unknown[order[j]] ? pos_g : neg_g) += 1;
    twice_pairs += 2 * pos_g * (n_neg - neg_below - neg_g) + pos_g * neg_g;
    pos_below += pos_g;
    neg_below += neg_g;
    curve.points.push_back({static_cast<double>(neg_below) / static_cast<double>(n_neg),
                            static_cast<double>(pos_below) / static_cast<double>(n_pos), s});
    i = j;
  }
  curve.auc = static_cast<double>(twice_pairs) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
  return curve;
}

double trapezoid_auc(const std::vector<RocPoint>& points)
{
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i)
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) * 0.5;
  return area;
}

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other)
{
  if (other.classes != classes) throw Error(ErrorKind::DimMismatch, "eval_harness::evaluate", "confusion matrices differ in size");
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  return *this;
}

double cohen_kappa(const ConfusionMatrix& m)
{
  const std::uint64_t total = m.total();
  if (total == 0) throw Error(ErrorKind::EmptyMatrix, "eval_harness::cohen_kappa", "confusion matrix is empty");
  const auto n = static_cast<double>(total);
  double diag = 0.0, chance = 0.0;
  for (std::size_t k = 0; k < m.classes; ++k) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t j = 0; j < m.classes; ++j) {
      row += m(k, j);
      col += m(j, k);
    }
    diag += static_cast<double>(m(k, k));
    chance += static_cast<double>(row) * static_cast<double>(col);
  }
  const double p_o = diag / n;
  const double p_e = chance / (n * n);
  if (p_e == 1.0) return 1.0;
  return (p_o - p_e) / (1.0 - p_e);
}

ConfusionMatrix known_block(const ConfusionMatrix& m)
{
  const std::size_t k = m.classes > 0 ? m.classes - 1 : 0;
  ConfusionMatrix out(k);
  for (std::size_t t = 0; t < k; ++t)
    for (std::size_t p = 0; p < k; ++p) out(t, p) = m(t, p);
  return out;
}

ConfusionMatrix confusion(const OpenSetPrediction& pred, const LabelMap& eval_labels)
{
  constexpr std::string_view where = "eval_harness::evaluate";
  if (!pred.labels.same_dims(eval_labels)) throw Error(ErrorKind::DimMismatch, where, "prediction and labels differ in size");
  const auto k = static_cast<std::size_t>(pred.unknown_id) + 1;
  ConfusionMatrix m(k);
  for (std::size_t i = 0; i < eval_labels.size(); ++i) {
    const auto t = eval_labels.values[i];
    if (t == kIgnoreLabel) continue;
    const auto p = pred.labels.values[i];
    if (t < 0 || static_cast<std::size_t>(t) >= k || p < 0 || static_cast<std::size_t>(p) >= k)
      throw Error(ErrorKind::LabelOutOfRange, where, "label outside the open-set label range at pixel " + std::to_string(i));
    m(static_cast<std::size_t>(t), static_cast<std::size_t>(p)) += 1;
  }
  return m;
}

void fill_metrics(EvalReport& report)
{
  const auto& m = report.confusion;
  if (m.classes < 1) throw Error(ErrorKind::EmptyMatrix, "eval_harness::evaluate", "no classes");
  const std::size_t u = m.classes - 1;
  std::uint64_t known_total = 0, known_correct = 0, flagged = 0;
  for (std::size_t t = 0; t < m.classes; ++t) {
    flagged += m(t, u);
    if (t == u) continue;
    known_correct += m(t, t);
    for (std::size_t p = 0; p < m.classes; ++p) known_total += m(t, p);
  }
  report.acc_known = known_total ? static_cast<double>(known_correct) / static_cast<double>(known_total) : 0.0;
  report.pre_unknown = flagged ? static_cast<double>(m(u, u)) / static_cast<double>(flagged) : 0.0;
  report.kappa = m.total() ? cohen_kappa(m) : 0.0;
  const auto kb = known_block(m);
  report.kappa_known = kb.total() ? std::optional<double>(cohen_kappa(kb)) : std::nullopt;
}

EvalReport evaluate(const OpenSetPrediction& pred, const LabelMap& eval_labels, const ScoreMap& scores)
{
  if (!scores.same_dims(eval_labels))
    throw Error(ErrorKind::DimMismatch, "eval_harness::evaluate", "score map and labels differ in size");
  EvalReport report;
  report.threshold = pred.threshold;
  report.confusion = confusion(pred, eval_labels);
  fill_metrics(report);

  std::vector<double> s;
  std::vector<std::uint8_t> u;
  for (std::size_t i = 0; i < eval_labels.size(); ++i) {
    if (eval_labels.values[i] == kIgnoreLabel) continue;
    s.push_back(scores.values[i]);
    u.push_back(eval_labels.values[i] == pred.unknown_id ? 1 : 0);
  }
  const auto n_unk = std::count(u.begin(), u.end(), std::uint8_t{1});
  if (n_unk > 0 && static_cast<std::size_t>(n_unk) < u.size()) report.auc = roc_auc(s, u).auc;
  if (n_unk > 0) {
    std::uint64_t caught = 0;
    for (std::size_t i = 0; i < s.size(); ++i) caught += (u[i] && s[i] <= pred.threshold) ? 1 : 0;
    report.achieved_tpr = static_cast<double>(caught) / static_cast<double>(n_unk);
  }
  return report;
}

}  // namespace openseg
