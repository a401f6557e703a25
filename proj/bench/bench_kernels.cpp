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


// Serial reference kernels against their OpenMP counterparts on one 224x224
// synthetic patch (D = 28 fused features, 4 known classes).

#include <benchmark/benchmark.h>
#include <omp.h>

#include "openseg/eval.hpp"
#include "openseg/pipeline.hpp"
#include "openseg/reference.hpp"
#include "openseg/synth.hpp"

namespace {

using namespace openseg;

struct Fixture {
  Scene scene;
  FloatTensor logits;
  ModelSet fcn;
  ModelSet pcs;
  FeatureField field;
  LabelMap prior;

  Fixture()
  {
    SynthConfig cfg;
    cfg.label_noise = 0.02;
    std::vector<Scene> train{generate_scene(cfg, 0), generate_scene(cfg, 1)};
    scene = generate_scene(cfg, 2);
    logits = loco_logits(scene.logits, 0);
    FitOptions opt;
    opt.uuc = 0;
    opt.method = Method::OpenFcn;
    fcn = fit_models(train, opt);
    opt.method = Method::OpenPcs;
    pcs = fit_models(train, opt);
    field = fuse(scene, pcs.layers);
    prior = score_scene(scene, pcs).prior;
  }
};

const Fixture& fixture()
{
  static const Fixture f;
  return f;
}

void set_threads(benchmark::State& state)
{
  omp_set_num_threads(static_cast<int>(state.range(0)));
  state.counters["threads"] = static_cast<double>(state.range(0));
}

void BM_UpsampleSerial(benchmark::State& state)
{
  const auto& layer = fixture().scene.layers[2].data;
  for (auto _ : state) benchmark::DoNotOptimize(reference::upsample(layer, 4, Upsampling::Bilinear));
}

void BM_UpsampleOmp(benchmark::State& state)
{
  set_threads(state);
  const auto& layer = fixture().scene.layers[2].data;
  for (auto _ : state) benchmark::DoNotOptimize(upsample(layer, 4, Upsampling::Bilinear));
}

void BM_SoftmaxSerial(benchmark::State& state)
{
  for (auto _ : state) benchmark::DoNotOptimize(reference::score_softmax(fixture().logits));
}

void BM_SoftmaxOmp(benchmark::State& state)
{
  set_threads(state);
  for (auto _ : state) benchmark::DoNotOptimize(score_softmax(fixture().logits));
}

void BM_OpenFcnSerial(benchmark::State& state)
{
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(reference::score_openfcn(f.logits, f.fcn.weibull, f.fcn.openmax));
}

void BM_OpenFcnOmp(benchmark::State& state)
{
  set_threads(state);
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(score_openfcn(f.logits, f.fcn.weibull, f.fcn.openmax));
}

void BM_OpenPcsSerial(benchmark::State& state)
{
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(reference::score_openpcs(f.field, f.prior, f.pcs.pca));
}

void BM_OpenPcsOmp(benchmark::State& state)
{
  set_threads(state);
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(score_openpcs(f.field, f.prior, f.pcs.pca));
}

// Whole-patch cost as the CLI sees it: fusion plus scoring.
void BM_ScenePcs(benchmark::State& state)
{
  set_threads(state);
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(score_scene(f.scene, f.pcs));
}

void thread_args(benchmark::internal::Benchmark* b)
{
  const int max = omp_get_num_procs();
  b->Arg(1);
  for (int t = 2; t <= max; t *= 2) b->Arg(t);
  b->Unit(benchmark::kMillisecond)->UseRealTime();
}

BENCHMARK(BM_UpsampleSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_UpsampleOmp)->Apply(thread_args);
BENCHMARK(BM_SoftmaxSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SoftmaxOmp)->Apply(thread_args);
BENCHMARK(BM_OpenFcnSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OpenFcnOmp)->Apply(thread_args);
BENCHMARK(BM_OpenPcsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OpenPcsOmp)->Apply(thread_args);
BENCHMARK(BM_ScenePcs)->Apply(thread_args);

}  // namespace

BENCHMARK_MAIN();
