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

#include <cmath>

#include "doctest.h"
#include "openseg/error.hpp"
#include "openseg/eval.hpp"
#include "openseg/fusion.hpp"
#include "openseg/softmax.hpp"
#include "openseg/synth.hpp"

using namespace openseg;

TEST_CASE("two well separated classes are classified perfectly")
{
  SynthConfig cfg;
  cfg.n_classes = 2;
  cfg.separation = 10;
  cfg.height = cfg.width = 32;
  const auto s = generate_scene(cfg);
  const auto prior = argmax_prediction(s.logits);
  CHECK(prior == s.labels);
}

TEST_CASE("same seed, same scene; different seed, different scene")
{
  SynthConfig cfg;
  cfg.height = cfg.width = 16;
  cfg.seed = 5;
  CHECK(generate_scene(cfg, 2) == generate_scene(cfg, 2));
  CHECK_FALSE(generate_scene(cfg, 2) == generate_scene(cfg, 3));
  auto other = cfg;
  other.seed = 6;
  CHECK_FALSE(generate_scene(cfg, 2) == generate_scene(other, 2));
}

TEST_CASE("invalid recipes")
{
  SynthConfig cfg;
  cfg.separation = 0;
  CHECK_THROWS_AS(generate_scene(cfg), Error);
  try {
    generate_scene(cfg);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BadConfig);
  }
  cfg = SynthConfig{};
  cfg.height = 10;  // not a multiple of 4
  CHECK_THROWS_AS(generate_scene(cfg), Error);
}

TEST_CASE("generated scenes validate, in both layouts and with borders")
{
  for (auto layout : {RegionLayout::Stripes, RegionLayout::Blobs}) {
    SynthConfig cfg;
    cfg.height = cfg.width = 64;
    cfg.layout = layout;
    cfg.ignore_boundaries = true;
    cfg.label_noise = 0.1;
    const auto s = generate_scene(cfg, 1);
    CHECK_NOTHROW(validate_scene(s));
    std::size_t ignored = 0;
    for (auto v : s.labels.values) ignored += v == kIgnoreLabel;
    CHECK(ignored > 0);
    CHECK(ignored < s.labels.size() / 2);
  }
}

TEST_CASE("label noise rate is respected")
{
  SynthConfig cfg;
  cfg.height = cfg.width = 96;
  cfg.separation = 12;
  cfg.label_noise = 0.2;
  const auto s = generate_scene(cfg);
  const auto prior = argmax_prediction(s.logits);
  double wrong = 0;
  for (std::size_t i = 0; i < prior.size(); ++i) wrong += prior.values[i] != s.labels.values[i];
  CHECK(wrong / static_cast<double>(prior.size()) == doctest::Approx(0.2).epsilon(0.15));
}

TEST_CASE("empirical class means converge to the configured means")
{
  SynthConfig cfg;
  cfg.height = cfg.width = 128;
  cfg.n_classes = 3;
  const auto s = generate_scene(cfg);
  const auto means = class_means(cfg);
  const auto field = fuse(s, default_layer_spec(s));
  // Layer 0 occupies the first 4 feature rows at full resolution.
  for (std::int32_t k = 0; k < 3; ++k) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(4);
    double n = 0;
    for (std::size_t p = 0; p < field.pixels(); ++p) {
      if (s.labels.values[p] != k) continue;
      sum += field.data.col(static_cast<Eigen::Index>(p)).head(4);
      n += 1;
    }
    const Eigen::VectorXd emp = sum / n;
    for (int c = 0; c < 4; ++c) CHECK(std::abs(emp(c) - means[0][static_cast<std::size_t>(k)](c)) < 3.0 / std::sqrt(n) + 1e-6);
  }
}

TEST_CASE("class means are pairwise distinct and have the configured norm")
{
  SynthConfig cfg;
  const auto means = class_means(cfg);
  for (const auto& layer : means) {
    for (std::size_t a = 0; a < layer.size(); ++a) {
      CHECK(layer[a].norm() == doctest::Approx(cfg.separation));
      for (std::size_t b = a + 1; b < layer.size(); ++b) CHECK((layer[a] - layer[b]).norm() > 1.0);
    }
  }
}
