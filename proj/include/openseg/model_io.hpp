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

#include "json.hpp"
#include "openseg/fusion.hpp"
#include "openseg/openmax.hpp"
#include "openseg/pca.hpp"

namespace openseg {

// Model files live in one directory: a JSON header (`model.json`) plus, for PCA
// models, per-class NPY arrays (f64) named class_<k>_{mean,components,eigenvalues}.npy.

nlohmann::ordered_json to_json(const OpenMaxConfig& cfg);
OpenMaxConfig openmax_config_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const std::vector<LayerSpec>& spec);
std::vector<LayerSpec> layer_spec_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const WeibullModel& m);
WeibullModel weibull_model_from_json(const nlohmann::json& j);

/// Writes the per-class arrays and returns the JSON entries that reference them.
nlohmann::ordered_json save_pca_models(const std::filesystem::path& dir, const PcaModels& models);
PcaModels load_pca_models(const std::filesystem::path& dir, const nlohmann::json& entries);

nlohmann::ordered_json to_json(const WeibullModels& models);
WeibullModels weibull_models_from_json(const nlohmann::json& entries);

}  // namespace openseg
