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

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "openseg/eval.hpp"
#include "openseg/fusion.hpp"
#include "openseg/ipca.hpp"
#include "openseg/openmax.hpp"
#include "openseg/pca.hpp"
#include "openseg/scene.hpp"

namespace openseg {

enum class Method { Softmax, OpenFcn, OpenPcs, OpenIpcs };

std::string to_string(Method m);
/// Throws ConfigError for unknown names.
Method parse_method(const std::string& name);

struct FitOptions {
  Method method = Method::OpenPcs;
  std::int32_t uuc = 0;
  std::vector<LayerSpec> layers;  // empty: every scene layer at its manifest scale
  OpenMaxConfig openmax;
  std::size_t n_comp = kDefaultComponents;
  std::size_t cap = kDefaultSampleCap;
  std::size_t batch_rows = kDefaultIpcaBatchRows;
  std::uint64_t seed = 0;
};

/// Everything `score` needs: the method, the LOCO split it was fitted under, and
/// per-known-class models (compact ids).
struct ModelSet {
  Method method = Method::Softmax;
  std::int32_t uuc = 0;
  std::size_t num_classes = 0;  // closed-set classes of the scenes, UUC included
  std::vector<LayerSpec> layers;
  OpenMaxConfig openmax;
  std::size_t n_comp = 0;
  WeibullModels weibull;
  PcaModels pca;
  std::vector<std::string> notes;  // classes that could not be modelled, and why
};

using SceneLoader = std::function<Scene(std::size_t)>;

/// Fits the per-class models on the pixels of known classes that the (UUC-less)
/// closed-set prediction gets right. Scenes are visited in order through `load`.
ModelSet fit_models(std::size_t n_scenes, const SceneLoader& load, const FitOptions& options);
ModelSet fit_models(const std::vector<Scene>& scenes, const FitOptions& options);

/// model.json plus the per-class arrays for PCA methods.
void save_models(const std::filesystem::path& dir, const ModelSet& models);
ModelSet load_models(const std::filesystem::path& dir);

/// Score and prior of one scene, both in compact LOCO ids.
struct SceneScore {
  ScoreMap scores;
  LabelMap prior;
  std::optional<LabelMap> posterior;  // OpenFCN quantile rule
  std::vector<std::int32_t> unscoreable;
};

SceneScore score_scene(const Scene& scene, const ModelSet& models);

/// Labels and score of one evaluated scene.
struct SceneEval {
  ScoreMap scores;
  LabelMap prior;        // compact ids
  LabelMap eval_labels;  // compact ids, UNKNOWN, or -1
};

struct OperatingPoint {
  double tpr_target = 0.0;
  double threshold = 0.0;
  double achieved_tpr = 0.0;
  double acc_known = 0.0;
  double pre_unknown = 0.0;
  double kappa = 0.0;
  std::optional<double> kappa_known;
  ConfusionMatrix confusion;
};

struct RunReport {
  std::string method;
  std::int32_t uuc = 0;
  std::int32_t unknown_id = 0;
  std::vector<std::int32_t> id_map;
  std::size_t scenes = 0;
  std::size_t pixels = 0;
  std::size_t unknown_pixels = 0;
  std::optional<double> auc;
  RocCurve roc;
  OperatingPoint closed;  // threshold -inf
  std::vector<OperatingPoint> points;
};

inline const std::vector<double> kDefaultTprGrid{0.1, 0.3, 0.5, 0.7, 0.9};

/// One threshold per TPR, calibrated on the unknown pixels pooled over all scenes;
/// per-scene confusion matrices are summed before computing metrics.
RunReport evaluate_run(const std::vector<SceneEval>& scenes, std::span<const double> tprs, const std::string& method,
                       std::int32_t uuc, std::size_t num_classes);

nlohmann::ordered_json to_json(const RunReport& report);

/// Writes "fpr,tpr,threshold" rows; keeps at most `max_points` points (0 = all),
/// always including both endpoints.
std::string roc_csv(const RocCurve& roc, std::size_t max_points = 0);

}  // namespace openseg
