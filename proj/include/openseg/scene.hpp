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
#include <string>
#include <vector>

#include "openseg/tensor.hpp"

namespace openseg {

/// One captured layer: C x h x w activations with h * scale == H, w * scale == W.
struct ActivationLayer {
  FloatTensor data;
  std::size_t scale = 1;

  bool operator==(const ActivationLayer&) const = default;
};

using ActivationStack = std::vector<ActivationLayer>;

/// One patch: activations, closed-set logits, labels (-1 = ignore) and metadata.
struct Scene {
  ActivationStack layers;
  FloatTensor logits;  // C x H x W
  LabelMap labels;     // H x W
  std::vector<std::string> class_names;
  std::string patch_id;

  std::size_t height() const noexcept { return labels.height; }
  std::size_t width() const noexcept { return labels.width; }
  std::size_t num_classes() const noexcept { return class_names.size(); }

  bool operator==(const Scene&) const = default;
};

/// Checks every Scene invariant; throws ShapeMismatch / LabelOutOfRange.
void validate_scene(const Scene& scene);

/// Reads `dir/scene.json` and the files it names. Paths are relative to the manifest.
Scene read_scene(const std::filesystem::path& dir);

/// Writes layer_<i>.npy, logits.npy, labels.npy and scene.json into `dir` (created if needed).
void write_scene(const std::filesystem::path& dir, const Scene& scene);

/// Scene directories below `root` (each holding a scene.json), sorted by name.
/// `root` itself is returned when it is a scene directory.
std::vector<std::filesystem::path> list_scene_dirs(const std::filesystem::path& root);

}  // namespace openseg
