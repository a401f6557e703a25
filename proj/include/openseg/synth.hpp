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

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "openseg/scene.hpp"

namespace openseg {

struct SynthLayer {
  std::size_t channels = 1;
  std::size_t scale = 1;
};

enum class RegionLayout { Stripes, Blobs };

std::string to_string(RegionLayout layout);
RegionLayout parse_layout(const std::string& name);

/// Synthetic scene recipe. Class means depend only on `seed`, so scenes with
/// different `scene_index` share the same class clusters.
struct SynthConfig {
  std::size_t n_classes = 5;
  std::size_t height = 224;
  std::size_t width = 224;
  std::vector<SynthLayer> layers{{4, 1}, {8, 2}, {16, 4}};
  double separation = 6.0;   // norm of each class mean, per layer, in units of feature_std
  double feature_std = 1.0;  // isotropic covariance scale
  double label_noise = 0.0;  // fraction of pixels whose logits favour a wrong class
  RegionLayout layout = RegionLayout::Stripes;
  bool ignore_boundaries = false;  // mark pixels on class borders as -1
  std::uint64_t seed = 0;
};

/// Throws BadConfig for invalid recipes.
void validate(const SynthConfig& cfg);

/// Per-layer class means, [layer][class] -> channels-vector.
std::vector<std::vector<Eigen::VectorXd>> class_means(const SynthConfig& cfg);

/// Region labels tile the grid in blocks of lcm(scales) pixels, so every activation
/// cell is class-pure. Activations are drawn from the class gaussian of their cell;
/// logits are the gaussian discriminants of the first layer's features.
Scene generate_scene(const SynthConfig& cfg, std::uint64_t scene_index = 0);

}  // namespace openseg
