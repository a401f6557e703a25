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

#include "openseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "openseg/error.hpp"
#include "openseg/rng.hpp"

namespace openseg {

namespace {

constexpr std::string_view kWhere = "synth::generate_scene";

// RNG stream ids
constexpr std::uint64_t kMeanStream = 0x4d45414eULL;
constexpr std::uint64_t kSceneStream = 0x5343454eULL;
constexpr std::uint64_t kLayoutStream = 0x4c41594fULL;
constexpr std::uint64_t kNoiseStream = 0x4e4f4953ULL;

std::size_t block_size(const SynthConfig& cfg)
{
  std::size_t b = 1;
  for (const auto& l : cfg.layers) b = std::lcm(b, l.scale);
  return b;
}

// Class of every block (bh x bw grid).
std::vector<std::int32_t> block_classes(const SynthConfig& cfg, std::uint64_t scene_seed, std::size_t bh, std::size_t bw)
{
  const auto n = cfg.n_classes;
  SplitMix64 rng(hash_draw(scene_seed, kLayoutStream, 0));
  std::vector<std::int32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

  std::vector<std::int32_t> blocks(bh * bw);
  if (cfg.layout == RegionLayout::Stripes) {
    for (std::size_t by = 0; by < bh; ++by)
      for (std::size_t bx = 0; bx < bw; ++bx) blocks[by * bw + bx] = perm[std::min(bx * n / bw, n - 1)];
    return blocks;
  }

  // Voronoi blobs: two sites per class.
  struct Site {
    double y, x;
    std::int32_t cls;
  };
  std::vector<Site> sites;
  for (std::size_t i = 0; i < 2 * n; ++i)
    sites.push_back({rng.uniform() * static_cast<double>(bh), rng.uniform() * static_cast<double>(bw), perm[i % n]});
  for (std::size_t by = 0; by < bh; ++by) {
    for (std::size_t bx = 0; bx < bw; ++bx) {
      const double cy = static_cast<double>(by) + 0.5, cx = static_cast<double>(bx) + 0.5;
      double best = std::numeric_limits<double>::infinity();
      std::int32_t cls = 0;
      for (const auto& s : sites) {
        const double d = (s.y - cy) * (s.y - cy) + (s.x - cx) * (s.x - cx);
        if (d < best) {
          best = d;
          cls = s.cls;
        }
      }
      blocks[by * bw + bx] = cls;
    }
  }
  return blocks;
}

}  // namespace

std::string to_string(RegionLayout layout) { return layout == RegionLayout::Stripes ? "stripes" : "blobs"; }

RegionLayout parse_layout(const std::string& name)
{
  if (name == "stripes") return RegionLayout::Stripes;
  if (name == "blobs") return RegionLayout::Blobs;
  throw Error(ErrorKind::BadConfig, "synth::parse_layout", "unknown layout '" + name + "'");
}

void validate(const SynthConfig& cfg)
{
  if (cfg.n_classes < 1) throw Error(ErrorKind::BadConfig, kWhere, "need at least one class");
  if (!(cfg.separation > 0.0)) throw Error(ErrorKind::BadConfig, kWhere, "separation must be > 0 (class means would coincide)");
  if (!(cfg.feature_std > 0.0)) throw Error(ErrorKind::BadConfig, kWhere, "feature_std must be > 0");
  if (!(cfg.label_noise >= 0.0 && cfg.label_noise < 1.0)) throw Error(ErrorKind::BadConfig, kWhere, "label_noise must lie in [0, 1)");
  if (cfg.layers.empty()) throw Error(ErrorKind::BadConfig, kWhere, "need at least one layer");
  for (const auto& l : cfg.layers)
    if (l.channels < 1 || l.scale < 1) throw Error(ErrorKind::BadConfig, kWhere, "layer channels and scale must be >= 1");
  const auto b = block_size(cfg);
  if (cfg.height == 0 || cfg.width == 0 || cfg.height % b != 0 || cfg.width % b != 0)
    throw Error(ErrorKind::BadConfig, kWhere,
                "grid " + std::to_string(cfg.height) + "x" + std::to_string(cfg.width) + " is not a multiple of block " + std::to_string(b));
  const auto means = class_means(cfg);
  for (std::size_t a = 0; a < cfg.n_classes; ++a)
    for (std::size_t c = a + 1; c < cfg.n_classes; ++c) {
      bool same = true;
      for (std::size_t l = 0; l < cfg.layers.size(); ++l) same = same && means[l][a] == means[l][c];
      if (same) throw Error(ErrorKind::BadConfig, kWhere, "class means coincide");
    }
}

std::vector<std::vector<Eigen::VectorXd>> class_means(const SynthConfig& cfg)
{
  std::vector<std::vector<Eigen::VectorXd>> means(cfg.layers.size());
  for (std::size_t l = 0; l < cfg.layers.size(); ++l) {
    const auto C = static_cast<Eigen::Index>(cfg.layers[l].channels);
    std::vector<Eigen::VectorXd> dirs;
    for (std::size_t k = 0; k < cfg.n_classes; ++k) {
      const std::uint64_t stream = kMeanStream ^ (static_cast<std::uint64_t>(l) << 32) ^ k;
      Eigen::VectorXd u(C);
      for (Eigen::Index c = 0; c < C; ++c) u(c) = hash_normal(cfg.seed, stream, static_cast<std::uint64_t>(c));
      dirs.push_back(u / u.norm());
    }
    // Spread the random directions apart on the unit sphere (inverse-square repulsion).
    if (C > 1) {
      for (int iter = 0; iter < 300; ++iter) {
        std::vector<Eigen::VectorXd> next = dirs;
        for (std::size_t i = 0; i < dirs.size(); ++i) {
          Eigen::VectorXd force = Eigen::VectorXd::Zero(C);
          for (std::size_t j = 0; j < dirs.size(); ++j) {
            if (i == j) continue;
            const Eigen::VectorXd d = dirs[i] - dirs[j];
            const double r = std::max(d.norm(), 1e-6);
            force += d / (r * r * r);
          }
          next[i] = dirs[i] + 0.05 * force;
          next[i] /= next[i].norm();
        }
        dirs = std::move(next);
      }
    }
    for (const auto& u : dirs) means[l].push_back(cfg.separation * cfg.feature_std * u);
  }
  return means;
}

Scene generate_scene(const SynthConfig& cfg, std::uint64_t scene_index)
{
  validate(cfg);
  const std::size_t H = cfg.height, W = cfg.width, B = block_size(cfg);
  const std::size_t bh = H / B, bw = W / B;
  const std::uint64_t scene_seed = hash_draw(cfg.seed, kSceneStream, scene_index);
  const auto means = class_means(cfg);
  const auto blocks = block_classes(cfg, scene_seed, bh, bw);
  auto region = [&](std::size_t y, std::size_t x) { return blocks[(y / B) * bw + x / B]; };

  Scene scene;
  scene.patch_id = "synth_s" + std::to_string(cfg.seed) + "_" + std::to_string(scene_index);
  for (std::size_t k = 0; k < cfg.n_classes; ++k) scene.class_names.push_back("class_" + std::to_string(k));

  scene.labels = LabelMap(H, W);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      const auto c = region(y, x);
      bool border = false;
      if (cfg.ignore_boundaries) {
        border = (y > 0 && region(y - 1, x) != c) || (y + 1 < H && region(y + 1, x) != c) ||
                 (x > 0 && region(y, x - 1) != c) || (x + 1 < W && region(y, x + 1) != c);
      }
      scene.labels(y, x) = border ? kIgnoreLabel : c;
    }

  for (std::size_t l = 0; l < cfg.layers.size(); ++l) {
    const auto& spec = cfg.layers[l];
    const std::size_t h = H / spec.scale, w = W / spec.scale, C = spec.channels;
    ActivationLayer layer{FloatTensor({C, h, w}), spec.scale};
    const auto n = static_cast<std::ptrdiff_t>(C * h * w);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      const std::size_t c = idx / (h * w), y = (idx / w) % h, x = idx % w;
      const auto cls = static_cast<std::size_t>(region(y * spec.scale, x * spec.scale));
      const double v = means[l][cls](static_cast<Eigen::Index>(c)) +
                       cfg.feature_std * hash_normal(scene_seed, l + 1, idx);
      layer.data.data[idx] = static_cast<float>(v);
    }
    scene.layers.push_back(std::move(layer));
  }

  // Gaussian discriminants on the first layer: (mu_k . x - |mu_k|^2 / 2) / sigma^2.
  const auto& first = scene.layers[0];
  const std::size_t K = cfg.n_classes, C0 = cfg.layers[0].channels, s0 = cfg.layers[0].scale;
  const std::size_t h0 = H / s0, w0 = W / s0;
  const double inv_var = 1.0 / (cfg.feature_std * cfg.feature_std);
  scene.logits = FloatTensor({K, H, W});
  const auto npix = static_cast<std::ptrdiff_t>(H * W);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < npix; ++i) {
    const auto p = static_cast<std::size_t>(i);
    const std::size_t y = p / W, x = p % W;
    const std::size_t cell = (y / s0) * w0 + x / s0;
    std::vector<double> logit(K);
    for (std::size_t k = 0; k < K; ++k) {
      const auto& mu = means[0][k];
      double dot = 0.0;
      for (std::size_t c = 0; c < C0; ++c) dot += mu(static_cast<Eigen::Index>(c)) * first.data.data[c * h0 * w0 + cell];
      logit[k] = (dot - 0.5 * mu.squaredNorm()) * inv_var;
    }
    if (cfg.label_noise > 0.0 && K > 1 && to_unit(hash_draw(scene_seed, kNoiseStream, 2 * p)) < cfg.label_noise) {
      // Swap the top logit with a different class so the argmax is wrong.
      const auto top = static_cast<std::size_t>(std::max_element(logit.begin(), logit.end()) - logit.begin());
      auto other = static_cast<std::size_t>(hash_draw(scene_seed, kNoiseStream, 2 * p + 1) % (K - 1));
      if (other >= top) ++other;
      std::swap(logit[top], logit[other]);
    }
    for (std::size_t k = 0; k < K; ++k) scene.logits.data[k * H * W + p] = static_cast<float>(logit[k]);
  }
  return scene;
}

}  // namespace openseg
