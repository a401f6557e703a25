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

#include "openseg/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "openseg/error.hpp"

namespace openseg {

std::string to_string(Upsampling mode) { return mode == Upsampling::Nearest ? "nearest" : "bilinear"; }

Upsampling parse_upsampling(const std::string& name)
{
  if (name == "nearest") return Upsampling::Nearest;
  if (name == "bilinear") return Upsampling::Bilinear;
  throw Error(ErrorKind::BadConfig, "fusion::parse_upsampling", "unknown mode '" + name + "'");
}

namespace {

struct Tap {
  std::size_t lo, hi;
  double frac;
};

// Source taps for each output coordinate along one axis.
std::vector<Tap> bilinear_taps(std::size_t in, std::size_t factor)
{
  std::vector<Tap> taps(in * factor);
  for (std::size_t o = 0; o < taps.size(); ++o) {
    double src = (static_cast<double>(o) + 0.5) / static_cast<double>(factor) - 0.5;
    if (src < 0.0) src = 0.0;
    auto lo = static_cast<std::size_t>(src);
    if (lo > in - 1) lo = in - 1;
    const std::size_t hi = std::min(lo + 1, in - 1);
    taps[o] = {lo, hi, src - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace

template <typename T>
Tensor<double> upsample(const Tensor<T>& t, std::size_t factor, Upsampling mode)
{
  if (t.rank() != 3) throw Error(ErrorKind::ShapeMismatch, "fusion::upsample", "expected C x h x w");
  if (factor < 1) throw Error(ErrorKind::ScaleMismatch, "fusion::upsample", "factor must be >= 1");
  const std::size_t C = t.shape[0], h = t.shape[1], w = t.shape[2];
  const std::size_t H = h * factor, W = w * factor;
  Tensor<double> out({C, H, W});
  if (C == 0 || H == 0 || W == 0) return out;

  const auto rows = static_cast<std::ptrdiff_t>(C * H);
  if (mode == Upsampling::Nearest || factor == 1) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
      const std::size_t c = static_cast<std::size_t>(r) / H, y = static_cast<std::size_t>(r) % H;
      const T* src = t.data.data() + (c * h + y / factor) * w;
      double* dst = out.data.data() + static_cast<std::size_t>(r) * W;
      for (std::size_t x = 0; x < W; ++x) dst[x] = static_cast<double>(src[x / factor]);
    }
    return out;
  }

  const auto ty = bilinear_taps(h, factor);
  const auto tx = bilinear_taps(w, factor);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t c = static_cast<std::size_t>(r) / H, y = static_cast<std::size_t>(r) % H;
    const T* row0 = t.data.data() + (c * h + ty[y].lo) * w;
    const T* row1 = t.data.data() + (c * h + ty[y].hi) * w;
    const double fy = ty[y].frac;
    double* dst = out.data.data() + static_cast<std::size_t>(r) * W;
    for (std::size_t x = 0; x < W; ++x) {
      const double fx = tx[x].frac;
      const double top = (1.0 - fx) * row0[tx[x].lo] + fx * row0[tx[x].hi];
      const double bot = (1.0 - fx) * row1[tx[x].lo] + fx * row1[tx[x].hi];
      dst[x] = (1.0 - fy) * top + fy * bot;
    }
  }
  return out;
}

template Tensor<double> upsample<float>(const Tensor<float>&, std::size_t, Upsampling);
template Tensor<double> upsample<double>(const Tensor<double>&, std::size_t, Upsampling);

FeatureField fuse(const ActivationStack& stack, const std::vector<LayerSpec>& spec)
{
  constexpr std::string_view where = "fusion::fuse";
  if (spec.empty()) throw Error(ErrorKind::BadConfig, where, "empty layer spec");

  std::vector<Tensor<double>> parts;
  parts.reserve(spec.size());
  std::size_t D = 0, H = 0, W = 0;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const auto& s = spec[i];
    if (s.layer_index >= stack.size())
      throw Error(ErrorKind::BadConfig, where, "layer " + std::to_string(s.layer_index) + " not in stack");
    if (s.scale < 1) throw Error(ErrorKind::ScaleMismatch, where, "scale must be >= 1");
    parts.push_back(upsample(stack[s.layer_index].data, s.scale, s.mode));
    const auto& p = parts.back();
    if (i == 0) {
      H = p.shape[1];
      W = p.shape[2];
    } else if (p.shape[1] != H || p.shape[2] != W) {
      throw Error(ErrorKind::ScaleMismatch, where,
                  "layer " + std::to_string(s.layer_index) + " at scale " + std::to_string(s.scale) + " gives " +
                    std::to_string(p.shape[1]) + "x" + std::to_string(p.shape[2]) + ", expected " +
                    std::to_string(H) + "x" + std::to_string(W));
    }
    D += p.shape[0];
  }
  if (D == 0) throw Error(ErrorKind::BadConfig, where, "fused dimension is zero");

  FeatureField field;
  field.height = H;
  field.width = W;
  field.provenance = spec;
  field.data.resize(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(H * W));
  const auto npix = static_cast<std::ptrdiff_t>(H * W);
  const std::size_t HW = H * W;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < npix; ++p) {
    Eigen::Index row = 0;
    for (const auto& part : parts) {
      const std::size_t C = part.shape[0];
      for (std::size_t c = 0; c < C; ++c) field.data(row++, p) = part.data[c * HW + static_cast<std::size_t>(p)];
    }
  }
  return field;
}

FeatureField fuse(const Scene& scene, const std::vector<LayerSpec>& spec)
{
  FeatureField field = fuse(scene.layers, spec);
  if (field.height != scene.height() || field.width != scene.width())
    throw Error(ErrorKind::ScaleMismatch, "fusion::fuse",
                "fused dims " + std::to_string(field.height) + "x" + std::to_string(field.width) +
                  " differ from scene output " + std::to_string(scene.height()) + "x" + std::to_string(scene.width()));
  return field;
}

std::vector<LayerSpec> default_layer_spec(const Scene& scene, Upsampling mode)
{
  std::vector<LayerSpec> spec;
  for (std::size_t i = 0; i < scene.layers.size(); ++i) spec.push_back({i, scene.layers[i].scale, mode});
  return spec;
}

ClassReservoir::ClassReservoir(std::int32_t class_id, std::size_t dim, std::size_t cap, std::uint64_t seed)
  : class_id_(class_id), dim_(dim), cap_(cap), seed_(seed), rng_(mix64(seed) ^ static_cast<std::uint64_t>(class_id))
{
  if (cap < 1) throw Error(ErrorKind::BadConfig, "fusion::gather_class_samples", "cap must be >= 1");
}

void ClassReservoir::offer_vector(const Eigen::Ref<const Eigen::VectorXd>& v, PixelRef source)
{
  if (static_cast<std::size_t>(v.size()) != dim_)
    throw Error(ErrorKind::DimMismatch, "fusion::gather_class_samples", "feature dimension changed between offers");
  std::size_t slot;
  if (seen_ < cap_) {
    slot = seen_;
    rows_.resize(rows_.size() + dim_);
    sources_.push_back(source);
  } else {
    const auto j = rng_.below(static_cast<std::uint64_t>(seen_) + 1);
    ++seen_;
    if (j >= cap_) return;
    slot = static_cast<std::size_t>(j);
    sources_[slot] = source;
    std::copy(v.data(), v.data() + dim_, rows_.begin() + static_cast<std::ptrdiff_t>(slot * dim_));
    return;
  }
  ++seen_;
  std::copy(v.data(), v.data() + dim_, rows_.begin() + static_cast<std::ptrdiff_t>(slot * dim_));
}

void ClassReservoir::offer(const FeatureField& field, const LabelMap& predicted, const LabelMap& truth,
                           std::uint32_t scene_ordinal)
{
  if (!predicted.same_dims(field.height, field.width) || !truth.same_dims(field.height, field.width))
    throw Error(ErrorKind::DimMismatch, "fusion::gather_class_samples", "label maps do not match the feature field");
  for (std::size_t p = 0; p < field.pixels(); ++p) {
    const auto t = truth.values[p];
    if (t == kIgnoreLabel || t != class_id_ || predicted.values[p] != t) continue;
    offer_vector(field.data.col(static_cast<Eigen::Index>(p)), {scene_ordinal, static_cast<std::uint32_t>(p)});
  }
}

SampleMatrix ClassReservoir::take() const
{
  if (sources_.empty())
    throw Error(ErrorKind::NoSamples, "fusion::gather_class_samples",
                "class " + std::to_string(class_id_) + " has no correctly classified pixels");
  std::vector<std::size_t> order(sources_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sources_[a] < sources_[b]; });

  SampleMatrix out;
  out.class_id = class_id_;
  out.rows.resize(static_cast<Eigen::Index>(order.size()), static_cast<Eigen::Index>(dim_));
  out.sources.reserve(order.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::size_t s = order[r];
    for (std::size_t d = 0; d < dim_; ++d)
      out.rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(d)) = rows_[s * dim_ + d];
    out.sources.push_back(sources_[s]);
  }
  return out;
}

SampleMatrix gather_class_samples(const FeatureField& field, const LabelMap& predicted, const LabelMap& truth,
                                  std::int32_t class_id, std::size_t cap, std::uint64_t seed)
{
  ClassReservoir reservoir(class_id, field.dim(), cap, seed);
  reservoir.offer(field, predicted, truth, 0);
  return reservoir.take();
}

}  // namespace openseg
