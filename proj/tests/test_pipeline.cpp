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
#include <limits>

#include "doctest.h"
#include "openseg/error.hpp"
#include "openseg/model_io.hpp"
#include "openseg/pipeline.hpp"
#include "openseg/synth.hpp"
#include "oracles.hpp"

using namespace openseg;

namespace {

std::vector<Scene> small_dataset(std::size_t n, std::uint64_t seed)
{
  SynthConfig cfg;
  cfg.height = cfg.width = 48;
  cfg.seed = seed;
  cfg.label_noise = 0.02;
  std::vector<Scene> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(generate_scene(cfg, i));
  return out;
}

std::vector<SceneEval> score_all(const std::vector<Scene>& scenes, const ModelSet& models)
{
  std::vector<SceneEval> out;
  for (const auto& s : scenes) {
    auto sc = score_scene(s, models);
    out.push_back({std::move(sc.scores), std::move(sc.prior),
                   loco_remap(s.labels, models.uuc, models.num_classes).eval_labels});
  }
  return out;
}

}  // namespace

TEST_CASE("method names")
{
  for (auto m : {Method::Softmax, Method::OpenFcn, Method::OpenPcs, Method::OpenIpcs}) CHECK(parse_method(to_string(m)) == m);
  try {
    parse_method("openmaxx");
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConfigError);
  }
}

TEST_CASE("fit, save, load and score every method")
{
  const auto scenes = small_dataset(3, 4);
  const auto dir = oracle::scratch("pipeline_models");
  for (auto method : {Method::Softmax, Method::OpenFcn, Method::OpenPcs, Method::OpenIpcs}) {
    CAPTURE(to_string(method));
    FitOptions opt;
    opt.method = method;
    opt.uuc = 2;
    opt.openmax.tail_size = 200;
    opt.batch_rows = 500;
    const auto models = fit_models(scenes, opt);
    CHECK(models.num_classes == 5);
    CHECK(models.notes.empty());
    if (method == Method::OpenFcn) CHECK(models.weibull.size() == 4);
    if (method == Method::OpenPcs || method == Method::OpenIpcs) CHECK(models.pca.size() == 4);

    const auto sub = dir / to_string(method);
    save_models(sub, models);
    const auto back = load_models(sub);
    CHECK(back.method == method);
    CHECK(back.layers == models.layers);

    const auto a = score_scene(scenes[0], models);
    const auto b = score_scene(scenes[0], back);
    CHECK(a.prior == b.prior);
    CHECK(a.scores == b.scores);  // f64 model files reproduce scores exactly

    const auto report = evaluate_run(score_all(scenes, back), kDefaultTprGrid, to_string(method), 2, 5);
    REQUIRE(report.auc.has_value());
    CHECK(*report.auc > 0.5);
    CHECK(report.closed.pre_unknown == 0.0);
    CHECK(report.points.size() == 5);
    for (const auto& op : report.points) CHECK(op.achieved_tpr >= op.tpr_target);
  }
}

TEST_CASE("weibull and pca model json roundtrip")
{
  WeibullModel w;
  w.class_id = 3;
  w.mav = Eigen::Vector3d(0.1, -2.0 / 3.0, 1e-17);
  w.shape = 1.2345678901234567;
  w.scale = 9.87654321e-3;
  w.tail_size = 17;
  w.distance = {DistanceKind::Hybrid, 0.25, 0.75, 3.5};
  const auto back = weibull_model_from_json(nlohmann::json::parse(to_json(w).dump()));
  CHECK(back.mav == w.mav);
  CHECK(back.shape == w.shape);
  CHECK(back.scale == w.scale);
  CHECK(back.distance.kind == DistanceKind::Hybrid);
  CHECK(back.distance.euclid_scale == 3.5);
  CHECK_FALSE(back.point_mass.has_value());

  const auto dir = oracle::scratch("pca_json");
  SampleMatrix s;
  s.rows = Eigen::MatrixXd::Random(30, 5);
  PcaModels models{fit_pca(s, 2), std::nullopt};
  const auto entries = save_pca_models(dir, models);
  const auto loaded = load_pca_models(dir, nlohmann::json::parse(entries.dump()));
  REQUIRE(loaded.size() == 2);
  CHECK_FALSE(loaded[1].has_value());
  CHECK(loaded[0]->components == models[0]->components);
  CHECK(loaded[0]->eigenvalues == models[0]->eigenvalues);
  CHECK(loaded[0]->noise_variance == models[0]->noise_variance);
  CHECK(loaded[0]->fit_loglik_std == models[0]->fit_loglik_std);
}

TEST_CASE("missing model directory is a MissingArtifact")
{
  try {
    load_models(oracle::scratch("no_models"));
    FAIL("expected MissingArtifact");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingArtifact);
  }
}

TEST_CASE("a class without correct pixels is noted, its pixels score -inf")
{
  auto scenes = small_dataset(1, 9);
  // Corrupt class 0's logits so it is never predicted.
  const std::size_t HW = 48 * 48;
  for (std::size_t p = 0; p < HW; ++p) scenes[0].logits.data[p] = -100.0f;
  FitOptions opt;
  opt.method = Method::OpenPcs;
  opt.uuc = 4;
  const auto models = fit_models(scenes, opt);
  REQUIRE(models.notes.size() == 1);
  CHECK_FALSE(models.pca[0].has_value());
  const auto s = score_scene(scenes[0], models);
  CHECK(s.unscoreable.empty());  // class 0 is never predicted either
}

TEST_CASE("roc csv thinning keeps the endpoints")
{
  RocCurve c;
  for (int i = 0; i <= 100; ++i) c.points.push_back({i / 100.0, i / 100.0, static_cast<double>(i)});
  c.points.front().threshold = -std::numeric_limits<double>::infinity();
  const auto all = roc_csv(c);
  const auto thin = roc_csv(c, 11);
  CHECK(std::count(all.begin(), all.end(), '\n') == 102);
  CHECK(std::count(thin.begin(), thin.end(), '\n') == 12);
  CHECK(thin.find("0,0,-inf") != std::string::npos);
  CHECK(thin.find("1,1,100") != std::string::npos);
}
