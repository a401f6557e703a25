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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <variant>
#include <vector>

namespace openseg {

/// Dense row-major tensor. Storage precision only; arithmetic happens in double.
template <typename T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, T fill = T{})
    : shape(std::move(dims)), data(element_count(shape), fill)
  {
  }

  static std::size_t element_count(const std::vector<std::size_t>& dims)
  {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
  }

  std::size_t rank() const noexcept { return shape.size(); }
  std::size_t size() const noexcept { return data.size(); }

  // C x H x W accessors
  std::size_t channels() const { return shape.at(0); }
  std::size_t height() const { return shape.at(rank() - 2); }
  std::size_t width() const { return shape.at(rank() - 1); }

  T& at3(std::size_t c, std::size_t y, std::size_t x) { return data[(c * height() + y) * width() + x]; }
  const T& at3(std::size_t c, std::size_t y, std::size_t x) const
  {
    return data[(c * height() + y) * width() + x];
  }

  bool operator==(const Tensor&) const = default;
};

using FloatTensor = Tensor<float>;
using IntTensor = Tensor<std::int32_t>;
using AnyTensor = std::variant<FloatTensor, IntTensor>;

/// H x W map of per-pixel values (scores, labels, masks).
template <typename T>
struct Raster {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<T> values;

  Raster() = default;
  Raster(std::size_t h, std::size_t w, T fill = T{}) : height(h), width(w), values(h * w, fill) {}

  std::size_t size() const noexcept { return values.size(); }
  T& operator()(std::size_t y, std::size_t x) { return values[y * width + x]; }
  const T& operator()(std::size_t y, std::size_t x) const { return values[y * width + x]; }

  bool same_dims(std::size_t h, std::size_t w) const noexcept { return height == h && width == w; }
  template <typename U>
  bool same_dims(const Raster<U>& other) const noexcept
  {
    return height == other.height && width == other.width;
  }

  bool operator==(const Raster&) const = default;
};

/// Higher = more in-distribution.
using ScoreMap = Raster<double>;
using LabelMap = Raster<std::int32_t>;
using Mask = Raster<std::uint8_t>;

inline constexpr std::int32_t kIgnoreLabel = -1;

}  // namespace openseg
