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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "openseg/tensor.hpp"

namespace openseg {

/// Result of hiding one class (leave-one-class-out).
struct LocoSplit {
  Mask train_mask;                    // 1 where the pixel may be used for fitting
  LabelMap eval_labels;               // compacted KKC ids, UNKNOWN, or -1
  std::vector<std::int32_t> id_map;   // original id -> compact id (UNKNOWN for the hidden class)
  std::int32_t unknown_id = 0;        // == number of known classes
};

/// Hides class `uuc` of `num_classes`: it becomes UNKNOWN (= num_classes - 1) and the
/// remaining ids are compacted in order. Throws BadClass for an out-of-range uuc.
LocoSplit loco_remap(const LabelMap& labels, std::int32_t uuc, std::size_t num_classes);

/// Removes the hidden class's channel from closed-set C x H x W logits so the
/// remaining channels line up with the compacted ids. Softmax training leaves a
/// per-pixel additive offset free; the result is fixed to zero mean per pixel so
/// offset-sensitive scorers see the same gauge for every hidden class.
FloatTensor loco_logits(const FloatTensor& logits, std::int32_t uuc);

/// 1 where eval_labels == unknown_id.
Mask unknown_mask(const LabelMap& eval_labels, std::int32_t unknown_id);

struct Calibration {
  double threshold = 0.0;
  double achieved_tpr = 0.0;
  std::size_t flagged = 0;
  std::size_t unknowns = 0;
};

/// T = ceil(tpr * N_u)-th smallest knownness score among unknown pixels; pixels with
/// score <= T are flagged. Throws NoUnknowns when the mask is empty.
Calibration calibrate_threshold(std::span<const double> scores, std::span<const std::uint8_t> is_unknown, double tpr);
Calibration calibrate_threshold(const ScoreMap& scores, const Mask& unknown, double tpr);

struct OpenSetPrediction {
  LabelMap labels;  // {0..K-1} or unknown_id
  std::int32_t unknown_id = 0;
  double threshold = 0.0;
  std::string method;
};

/// UNKNOWN where score <= threshold, else the prior class.
OpenSetPrediction apply_threshold(const ScoreMap& scores, const LabelMap& prior, double threshold,
                                  std::int32_t unknown_id, std::string method = {});

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // starts at (0, 0), ends at (1, 1)
  double auc = 0.0;
};

/// Unknown pixels are positives, the detection statistic is -score. AUC by the
/// Mann-Whitney rank formula with ties counted 1/2.
RocCurve roc_auc(std::span<const double> scores, std::span<const std::uint8_t> is_unknown);

/// Trapezoidal area under the curve's points.
double trapezoid_auc(const std::vector<RocPoint>& points);

/// Square count matrix, rows = truth, columns = prediction.
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::uint64_t> counts;

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t k) : classes(k), counts(k * k, 0) {}

  std::uint64_t& operator()(std::size_t truth, std::size_t pred) { return counts[truth * classes + pred]; }
  std::uint64_t operator()(std::size_t truth, std::size_t pred) const { return counts[truth * classes + pred]; }
  std::uint64_t total() const;
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix&) const = default;
};

double cohen_kappa(const ConfusionMatrix& m);

/// The known-class block: UNKNOWN (last) row and column dropped.
ConfusionMatrix known_block(const ConfusionMatrix& m);

/// Accumulates the (K+1)^2 confusion matrix over non-ignored pixels.
ConfusionMatrix confusion(const OpenSetPrediction& pred, const LabelMap& eval_labels);

struct EvalReport {
  double acc_known = 0.0;
  double pre_unknown = 0.0;
  double kappa = 0.0;                 // UNKNOWN counted as a class
  std::optional<double> kappa_known;  // known-class block only; empty when that block is empty
  std::optional<double> auc;  // empty when the mask holds a single class
  double tpr_target = 0.0;
  double achieved_tpr = 0.0;
  double threshold = 0.0;
  ConfusionMatrix confusion;
};

/// Acc^K, Pre^U and kappa from a confusion matrix whose last class is UNKNOWN.
/// Pre^U is 0 when nothing was flagged.
void fill_metrics(EvalReport& report);

/// Full report for one prediction. `scores` feeds the AUC; ignored pixels are skipped.
EvalReport evaluate(const OpenSetPrediction& pred, const LabelMap& eval_labels, const ScoreMap& scores);

}  // namespace openseg
