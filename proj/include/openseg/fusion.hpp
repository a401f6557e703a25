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

#include "openseg/rng.hpp"
#include "openseg/scene.hpp"
#include "openseg/tensor.hpp"

namespace openseg {

enum class Upsampling { Nearest, Bilinear };

std::string to_string(Upsampling mode);
Upsampling parse_upsampling(const std::string& name);

/// Which stack layer to fuse and by how much to enlarge it.
struct LayerSpec {
  std::size_t layer_index = 0;
  std::size_t scale = 1;
  Upsampling mode = Upsampling::Nearest;

  bool operator==(const LayerSpec&) const = default;
};

/// Fused per-pixel features: one column per pixel in raster order, D rows.
struct FeatureField {
  Eigen::MatrixXd data;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<LayerSpec> provenance;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(data.rows()); }
  std::size_t pixels() const noexcept { return height * width; }
};

/// Source of one sample row: scene ordinal plus raster pixel index.
struct PixelRef {
  std::uint32_t scene = 0;
  std::uint32_t pixel = 0;

  auto operator<=>(const PixelRef&) const = default;
};

/// N x D training rows for one class.
struct SampleMatrix {
  Eigen::MatrixXd rows;
  std::int32_t class_id = 0;
  std::vector<PixelRef> sources;

  std::size_t count() const noexcept { return static_cast<std::size_t>(rows.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(rows.cols()); }
};

inline constexpr std::size_t kDefaultSampleCap = 200000;

/// C x h x w -> C x (h*factor) x (w*factor). Bilinear uses the align-corners=false
/// convention: output pixel i samples source coordinate (i + 0.5) / factor - 0.5, clamped.
template <typename T>
Tensor<double> upsample(const Tensor<T>& t, std::size_t factor, Upsampling mode);

/// Concatenates the upsampled layers along the channel axis in spec order.
/// Output dims are taken from the first entry; every other entry must match.
FeatureField fuse(const ActivationStack& stack, const std::vector<LayerSpec>& spec);

/// As above, additionally requiring the fused dims to equal the scene's output dims.
FeatureField fuse(const Scene& scene, const std::vector<LayerSpec>& spec);

/// One spec entry per scene layer with the manifest's scale.
std::vector<LayerSpec> default_layer_spec(const Scene& scene, Upsampling mode = Upsampling::Nearest);

/// Seeded reservoir (algorithm R) over the correctly classified pixels of one class,
/// streamed across any number of feature fields. The result is sorted by source.
class ClassReservoir {
 public:
  ClassReservoir(std::int32_t class_id, std::size_t dim, std::size_t cap, std::uint64_t seed);

  /// Offers every pixel with predicted == truth == class_id (truth != -1).
  void offer(const FeatureField& field, const LabelMap& predicted, const LabelMap& truth, std::uint32_t scene_ordinal);

  /// Offers a raw column vector (used by callers that already filtered pixels).
  void offer_vector(const Eigen::Ref<const Eigen::VectorXd>& v, PixelRef source);

  std::size_t candidates() const noexcept { return seen_; }

  /// Throws NoSamples when nothing qualified.
  SampleMatrix take() const;

 private:
  std::int32_t class_id_;
  std::size_t dim_;
  std::size_t cap_;
  std::uint64_t seed_;
  SplitMix64 rng_;
  std::size_t seen_ = 0;
  std::vector<double> rows_;
  std::vector<PixelRef> sources_;
};

/// Single-field convenience over ClassReservoir.
SampleMatrix gather_class_samples(const FeatureField& field, const LabelMap& predicted, const LabelMap& truth,
                                  std::int32_t class_id, std::size_t cap, std::uint64_t seed);

}  // namespace openseg
