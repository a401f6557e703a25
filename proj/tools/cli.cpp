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


#include "cli.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "openseg/error.hpp"
#include "openseg/model_io.hpp"
#include "openseg/npy.hpp"
#include "openseg/pipeline.hpp"
#include "openseg/scene.hpp"
#include "openseg/synth.hpp"
#include "timing.hpp"

namespace openseg::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::string_view kVersion = "0.1.0";

// Every flag of every subcommand; each subcommand binds the subset it uses.
struct Options {
  std::string config;
  int jobs = 1;
  // synth
  std::size_t classes = 5;
  std::size_t size = 224;
  std::size_t n_scenes = 4;
  double sep = 6.0;
  double feature_std = 1.0;
  double noise = 0.0;
  std::string layout = "stripes";
  std::string synth_layers = "4:1,8:2,16:4";
  bool ignore_boundaries = false;
  std::uint64_t seed = 0;
  // fit / score
  std::string method;
  std::string uuc;
  std::string fusion;
  std::size_t alpha = 0;
  std::size_t tail_size = 2000;
  std::string distance = "euclidean";
  double w_euclid = 0.5;
  double w_cosine = 0.5;
  double quantile = 0.5;
  std::size_t components = kDefaultComponents;
  std::size_t cap = kDefaultSampleCap;
  std::size_t batch_rows = kDefaultIpcaBatchRows;
  bool pgm = false;
  // evaluate
  std::vector<double> tpr = kDefaultTprGrid;
  std::size_t roc_points = 0;
  // bench
  std::size_t patches = 10;
  std::size_t train_scenes = 4;
  std::vector<std::string> methods{"softmax", "openfcn", "openpcs", "openipcs"};
  // paths
  std::string scenes;
  std::string models;
  std::string scores;
  std::string out;
};

Error config_error(std::string_view where, const std::string& detail) { return {ErrorKind::ConfigError, where, detail}; }

std::vector<std::string> split(const std::string& text, char sep)
{
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, sep))
    if (!cur.empty()) parts.push_back(cur);
  return parts;
}

std::size_t parse_count(const std::string& text, std::string_view where, const std::string& what)
{
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != text.size() || text.front() == '-') throw config_error(where, what + ": '" + text + "' is not a count");
  return static_cast<std::size_t>(v);
}

/// "layer:scale[:mode],..." or a JSON array of {layer, scale, mode}.
std::vector<LayerSpec> parse_fusion(const std::string& text, std::string_view where)
{
  if (text.empty()) return {};
  try {
    if (text.front() == '[') return layer_spec_from_json(json::parse(text));
    std::vector<LayerSpec> spec;
    for (const auto& item : split(text, ',')) {
      const auto f = split(item, ':');
      if (f.size() < 2 || f.size() > 3) throw config_error(where, "fusion entry '" + item + "' is not layer:scale[:mode]");
      spec.push_back({parse_count(f[0], where, "fusion layer"), parse_count(f[1], where, "fusion scale"),
                      f.size() == 3 ? parse_upsampling(f[2]) : Upsampling::Nearest});
    }
    return spec;
  } catch (const json::exception& e) {
    throw config_error(where, std::string("fusion: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigError) throw;
    throw config_error(where, e.what());
  }
}

std::vector<SynthLayer> parse_synth_layers(const std::string& text, std::string_view where)
{
  std::vector<SynthLayer> layers;
  for (const auto& item : split(text, ',')) {
    const auto f = split(item, ':');
    if (f.size() != 2) throw config_error(where, "layer '" + item + "' is not channels:scale");
    layers.push_back({parse_count(f[0], where, "layer channels"), parse_count(f[1], where, "layer scale")});
  }
  return layers;
}

/// A single class id, or nullopt for "all".
std::optional<std::int32_t> parse_uuc(const std::string& text, std::string_view where, bool allow_all)
{
  if (text.empty()) throw config_error(where, "--uuc is required");
  if (text == "all") {
    if (!allow_all) throw config_error(where, "--uuc all is only accepted by pipeline");
    return std::nullopt;
  }
  const auto v = parse_count(text, where, "--uuc");
  if (v > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max())) throw config_error(where, "--uuc out of range");
  return static_cast<std::int32_t>(v);
}

Method require_method(const std::string& name, std::string_view where)
{
  if (name.empty()) throw config_error(where, "--method is required");
  return parse_method(name);
}

fs::path require_path(const std::string& p, std::string_view where, const std::string& flag)
{
  if (p.empty()) throw config_error(where, flag + " is required");
  fs::path path = fs::path(p).lexically_normal();
  if (!path.has_filename() && path.has_parent_path()) path = path.parent_path();
  return path;
}

void check_tprs(const std::vector<double>& tprs, std::string_view where)
{
  if (tprs.empty()) throw config_error(where, "--tpr needs at least one value");
  for (double t : tprs)
    if (!(t > 0.0 && t <= 1.0)) throw config_error(where, "TPR target " + std::to_string(t) + " is outside (0, 1]");
}

void ensure_dir(const fs::path& dir)
{
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoFailure, "cli::run", dir.string() + ": " + ec.message());
}

/// Runs body(i) for every scene with scene-level threads; rethrows the error of
/// the lowest failing index so the reported failure does not depend on timing.
template <typename Body>
void for_each_scene(std::size_t n, Body&& body)
{
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<fs::path> scene_dirs(const fs::path& root, std::string_view where)
{
  if (!fs::exists(root)) throw Error(ErrorKind::MissingArtifact, where, "scene directory " + root.string() + " does not exist");
  auto dirs = list_scene_dirs(root);
  if (dirs.empty()) throw Error(ErrorKind::MissingArtifact, where, "no scene.json below " + root.string());
  return dirs;
}

json read_json(const fs::path& path, ErrorKind missing_kind, std::string_view where)
{
  std::ifstream in(path);
  if (!in) throw Error(missing_kind, where, path.string() + " not found");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedFile, where, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const ordered_json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

/// 8-bit grey rendering of a score map, min..max of the finite values mapped to 0..255.
void write_pgm(const fs::path& path, const ScoreMap& scores)
{
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : scores.values)
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  std::string body = "P5\n" + std::to_string(scores.width) + " " + std::to_string(scores.height) + "\n255\n";
  body.reserve(body.size() + scores.size());
  for (double v : scores.values) {
    double g = 0.0;
    if (std::isfinite(v))
      g = hi > lo ? 255.0 * (v - lo) / (hi - lo) : 255.0;
    else if (v > 0)
      g = 255.0;
    body.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(g))));
  }
  write_file_atomic(path, body);
}

Tensor<double> as_tensor(const ScoreMap& m)
{
  Tensor<double> t({m.height, m.width});
  t.data = m.values;
  return t;
}

IntTensor as_tensor(const LabelMap& m)
{
  IntTensor t({m.height, m.width});
  t.data = m.values;
  return t;
}

template <typename T, typename R>
R as_raster(const Tensor<T>& t, const fs::path& path, std::string_view where)
{
  if (t.rank() != 2) throw Error(ErrorKind::ShapeMismatch, where, path.string() + " is not a 2-D map");
  R r(t.shape[0], t.shape[1]);
  r.values.assign(t.data.begin(), t.data.end());
  return r;
}

// ---------------------------------------------------------------------------
// Command bodies, free of flag handling so that pipeline and bench can chain them.

SynthConfig synth_config(const Options& o)
{
  SynthConfig cfg;
  cfg.n_classes = o.classes;
  cfg.height = cfg.width = o.size;
  cfg.layers = parse_synth_layers(o.synth_layers, "cli::synth");
  cfg.separation = o.sep;
  cfg.feature_std = o.feature_std;
  cfg.label_noise = o.noise;
  try {
    cfg.layout = parse_layout(o.layout);
  } catch (const Error& e) {
    throw config_error("cli::synth", e.what());
  }
  cfg.ignore_boundaries = o.ignore_boundaries;
  cfg.seed = o.seed;
  return cfg;
}

void do_synth(const SynthConfig& cfg, std::size_t n, const fs::path& out)
{
  ensure_dir(out);
  for_each_scene(n, [&](std::size_t i) {
    char name[32];
    std::snprintf(name, sizeof name, "scene_%04zu", i);
    write_scene(out / name, generate_scene(cfg, i));
  });
}

FitOptions fit_options(const Options& o, Method method, std::int32_t uuc)
{
  FitOptions f;
  f.method = method;
  f.uuc = uuc;
  f.layers = parse_fusion(o.fusion, "cli::fit");
  f.openmax.alpha = o.alpha;
  f.openmax.tail_size = o.tail_size;
  try {
    f.openmax.distance = parse_distance(o.distance);
  } catch (const Error& e) {
    throw config_error("cli::fit", e.what());
  }
  f.openmax.w_euclid = o.w_euclid;
  f.openmax.w_cosine = o.w_cosine;
  f.openmax.quantile = o.quantile;
  f.n_comp = o.components;
  f.cap = o.cap;
  f.batch_rows = o.batch_rows;
  f.seed = o.seed;
  if (!(o.quantile > 0.0 && o.quantile < 1.0)) throw config_error("cli::fit", "--quantile must lie in (0, 1)");
  if (o.tail_size < 1) throw config_error("cli::fit", "--tail-size must be >= 1");
  return f;
}

ModelSet do_fit(const fs::path& scenes, const FitOptions& f, const fs::path& out)
{
  const auto dirs = scene_dirs(scenes, "cli::fit");
  auto models = fit_models(dirs.size(), [&](std::size_t i) { return read_scene(dirs[i]); }, f);
  ensure_dir(out);
  save_models(out, models);
  return models;
}

struct ScoreSummary {
  std::vector<std::string> names;
  std::vector<double> seconds;
  TimingSummary timing;
};

ScoreSummary do_score(const fs::path& scenes, const ModelSet& models, const fs::path& out, bool pgm, int jobs)
{
  const auto dirs = scene_dirs(scenes, "cli::score");
  ensure_dir(out);
  const std::size_t n = dirs.size();
  ScoreSummary summary;
  summary.seconds.assign(n, 0.0);
  std::vector<ordered_json> entries(n);
  for_each_scene(n, [&](std::size_t i) {
    const Scene scene = read_scene(dirs[i]);
    const auto t0 = std::chrono::steady_clock::now();
    const SceneScore s = score_scene(scene, models);
    summary.seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto dir = out / dirs[i].filename();
    ensure_dir(dir);
    write_tensor_f64(dir / "score.npy", as_tensor(s.scores));
    write_tensor(dir / "prior.npy", as_tensor(s.prior));
    if (s.posterior) write_tensor(dir / "posterior.npy", as_tensor(*s.posterior));
    if (pgm) write_pgm(dir / "score.pgm", s.scores);
    ordered_json e;
    e["dir"] = dirs[i].filename().string();
    e["patch_id"] = scene.patch_id;
    e["height"] = scene.height();
    e["width"] = scene.width();
    e["unscoreable"] = s.unscoreable;
    entries[i] = std::move(e);
  });

  std::string csv = "scene,patch_id,height,width,seconds\n";
  for (std::size_t i = 0; i < n; ++i) {
    summary.names.push_back(entries[i]["dir"].get<std::string>());
    char sec[32];
    std::snprintf(sec, sizeof sec, "%.9f", summary.seconds[i]);
    csv += summary.names[i] + "," + entries[i]["patch_id"].get<std::string>() + "," + entries[i]["height"].dump() + "," +
           entries[i]["width"].dump() + "," + sec + "\n";
  }
  write_file_atomic(out / "timings.csv", csv);
  summary.timing = summarize_timings(summary.seconds);
  ordered_json t;
  t["method"] = to_string(models.method);
  t["patches"] = summary.timing.n;
  t["jobs"] = jobs;
  t["mean_seconds"] = summary.timing.mean;
  t["stddev_seconds"] = summary.timing.stddev;
  t["confidence"] = summary.timing.confidence;
  t["ci_half_width_seconds"] = summary.timing.half_width;
  write_json(out / "timing.json", t);

  // Written last: its presence marks a complete score run.
  ordered_json index;
  index["format"] = "openseg-scores/1";
  index["method"] = to_string(models.method);
  index["uuc"] = models.uuc;
  index["num_classes"] = models.num_classes;
  index["unknown_id"] = static_cast<std::int32_t>(models.num_classes) - 1;
  index["scenes"] = entries;
  write_json(out / "scores.json", index);
  return summary;
}

RunReport do_evaluate(const fs::path& scores, const fs::path& scenes, std::optional<std::int32_t> uuc,
                      const std::vector<double>& tprs, const fs::path& out, std::size_t roc_points)
{
  constexpr std::string_view where = "cli::evaluate";
  const json index = read_json(scores / "scores.json", ErrorKind::MissingArtifact, where);
  std::string method;
  std::int32_t run_uuc = 0;
  std::size_t num_classes = 0;
  std::vector<std::string> names;
  try {
    method = index.at("method").get<std::string>();
    run_uuc = index.at("uuc").get<std::int32_t>();
    num_classes = index.at("num_classes").get<std::size_t>();
    for (const auto& e : index.at("scenes")) names.push_back(e.at("dir").get<std::string>());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedFile, where, (scores / "scores.json").string() + ": " + e.what());
  }
  if (uuc && *uuc != run_uuc)
    throw config_error(where, "--uuc " + std::to_string(*uuc) + " does not match the scored run (uuc " + std::to_string(run_uuc) + ")");

  // score names each output after its scene directory
  const fs::path scene_root = fs::exists(scenes / "scene.json") ? scenes.parent_path() : scenes;
  std::vector<SceneEval> evals(names.size());
  for_each_scene(names.size(), [&](std::size_t i) {
    const auto dir = scores / names[i];
    for (const char* f : {"score.npy", "prior.npy"})
      if (!fs::exists(dir / f)) throw Error(ErrorKind::MissingArtifact, where, (dir / f).string() + " not found");
    const Scene scene = read_scene(scene_root / names[i]);
    auto eval_labels = loco_remap(scene.labels, run_uuc, num_classes).eval_labels;
    auto s = as_raster<double, ScoreMap>(read_tensor_f64(dir / "score.npy"), dir / "score.npy", where);
    auto p = as_raster<std::int32_t, LabelMap>(as_int(read_tensor(dir / "prior.npy"), "prior"), dir / "prior.npy", where);
    if (!s.same_dims(eval_labels) || !p.same_dims(eval_labels))
      throw Error(ErrorKind::ShapeMismatch, where, names[i] + ": score/prior dims differ from the scene labels");
    evals[i] = {std::move(s), std::move(p), std::move(eval_labels)};
  });
  RunReport report = evaluate_run(evals, tprs, method, run_uuc, num_classes);
  ensure_dir(out);
  write_json(out / "report.json", to_json(report));
  write_file_atomic(out / "roc.csv", roc_csv(report.roc, roc_points));
  return report;
}

ModelSet models_for_score(const Options& o, const fs::path& scenes)
{
  constexpr std::string_view where = "cli::score";
  std::optional<Method> wanted;
  if (!o.method.empty()) wanted = require_method(o.method, where);
  ModelSet models;
  if (!o.models.empty()) {
    models = load_models(o.models);
    if (wanted && *wanted != models.method)
      throw config_error(where, "--method " + o.method + " does not match the fitted models (" + to_string(models.method) + ")");
    if (!o.uuc.empty() && *parse_uuc(o.uuc, where, false) != models.uuc)
      throw config_error(where, "--uuc does not match the fitted models (uuc " + std::to_string(models.uuc) + ")");
  } else {
    // SoftMax needs no fitted model.
    if (!wanted) throw config_error(where, "--models is required (or --method softmax with --uuc)");
    if (*wanted != Method::Softmax) throw Error(ErrorKind::MissingArtifact, where, "--models is required for " + o.method);
    models.method = Method::Softmax;
    models.uuc = *parse_uuc(o.uuc, where, false);
    models.num_classes = read_scene(scene_dirs(scenes, where).front()).num_classes();
  }
  return models;
}

// ---------------------------------------------------------------------------
// Report summaries

void print_report(const RunReport& r)
{
  std::printf("%s uuc=%d: %zu scenes, %zu pixels, %zu unknown, AUC %s\n", r.method.c_str(), r.uuc, r.scenes, r.pixels,
              r.unknown_pixels, r.auc ? std::to_string(*r.auc).c_str() : "n/a");
  std::printf("  %-8s %10s %8s %8s %8s\n", "TPR", "threshold", "Acc^K", "Pre^U", "kappa");
  auto row = [](const std::string& label, const OperatingPoint& p) {
    std::printf("  %-8s %10.4g %8.4f %8.4f %8.4f\n", label.c_str(), p.threshold, p.acc_known, p.pre_unknown, p.kappa);
  };
  row("closed", r.closed);
  for (const auto& p : r.points) row(std::to_string(p.tpr_target).substr(0, 4), p);
}

ordered_json mean_std(const std::vector<double>& v)
{
  ordered_json j;
  j["n"] = v.size();
  if (v.empty()) {
    j["mean"] = nullptr;
    j["std"] = nullptr;
    return j;
  }
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  j["mean"] = m;
  j["std"] = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  return j;
}

/// Mean and standard deviation across LOCO runs.
ordered_json summarize_runs(const std::vector<RunReport>& runs)
{
  ordered_json j;
  j["method"] = runs.empty() ? std::string() : runs.front().method;
  j["runs"] = ordered_json::array();
  std::vector<double> aucs;
  for (const auto& r : runs) {
    j["runs"].push_back({{"uuc", r.uuc}, {"auc", r.auc ? ordered_json(*r.auc) : ordered_json(nullptr)}});
    if (r.auc) aucs.push_back(*r.auc);
  }
  j["auc"] = mean_std(aucs);
  auto metrics = [&](auto pick) {
    std::vector<double> acc, pre, kappa;
    for (const auto& r : runs) {
      const OperatingPoint& p = pick(r);
      acc.push_back(p.acc_known);
      pre.push_back(p.pre_unknown);
      kappa.push_back(p.kappa);
    }
    return ordered_json{{"acc_known", mean_std(acc)}, {"pre_unknown", mean_std(pre)}, {"kappa", mean_std(kappa)}};
  };
  j["closed"] = metrics([](const RunReport& r) -> const OperatingPoint& { return r.closed; });
  j["points"] = ordered_json::array();
  const std::size_t np = runs.empty() ? 0 : runs.front().points.size();
  for (std::size_t k = 0; k < np; ++k) {
    auto p = metrics([k](const RunReport& r) -> const OperatingPoint& { return r.points[k]; });
    ordered_json row;
    row["tpr_target"] = runs.front().points[k].tpr_target;
    for (auto& [key, value] : p.items()) row[key] = value;
    j["points"].push_back(row);
  }
  return j;
}

// ---------------------------------------------------------------------------
// Flag and config plumbing

std::string option_key(const CLI::Option* opt) { return opt->get_single_name(); }

/// Fills every option of `sub` that was not given on the command line from the
/// JSON config (keys are flag names without dashes; '_' and '-' are equivalent).
void apply_config(CLI::App* sub, const std::string& path)
{
  const std::string where = "cli::" + sub->get_name();
  const json cfg = read_json(path, ErrorKind::ConfigError, where);
  if (!cfg.is_object()) throw config_error(where, path + ": config must be a JSON object");
  for (const auto& [raw_key, value] : cfg.items()) {
    std::string key = raw_key;
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "config") continue;
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr) throw config_error(where, "unknown config key '" + raw_key + "' for " + sub->get_name());
    if (opt->count() > 0) continue;  // the command line wins
    std::vector<std::string> results;
    if (value.is_array() && !value.empty() && value.front().is_object())
      results.push_back(value.dump());
    else if (value.is_array())
      for (const auto& v : value) results.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    else
      results.push_back(value.is_string() ? value.get<std::string>() : value.dump());
    try {
      opt->add_result(results);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw config_error(where, "config key '" + raw_key + "': " + e.what());
    }
  }
}

ordered_json option_values(const Options& o)
{
  ordered_json j;
  j["jobs"] = o.jobs;
  j["classes"] = o.classes;
  j["size"] = o.size;
  j["scenes-count"] = o.n_scenes;
  j["sep"] = o.sep;
  j["std"] = o.feature_std;
  j["noise"] = o.noise;
  j["layout"] = o.layout;
  j["layers"] = o.synth_layers;
  j["ignore-boundaries"] = o.ignore_boundaries;
  j["seed"] = o.seed;
  j["method"] = o.method;
  j["uuc"] = o.uuc;
  j["fusion"] = o.fusion;
  j["alpha"] = o.alpha;
  j["tail-size"] = o.tail_size;
  j["distance"] = o.distance;
  j["w-euclid"] = o.w_euclid;
  j["w-cosine"] = o.w_cosine;
  j["quantile"] = o.quantile;
  j["components"] = o.components;
  j["cap"] = o.cap;
  j["batch-rows"] = o.batch_rows;
  j["pgm"] = o.pgm;
  j["tpr"] = o.tpr;
  j["roc-points"] = o.roc_points;
  j["patches"] = o.patches;
  j["train-scenes"] = o.train_scenes;
  j["methods"] = o.methods;
  j["scenes"] = o.scenes;
  j["models"] = o.models;
  j["scores"] = o.scores;
  j["out"] = o.out;
  return j;
}

/// run.json: the subcommand plus the resolved value of each of its options.
void write_run_json(const fs::path& dir, const CLI::App* sub, const Options& o)
{
  const auto all = option_values(o);
  ordered_json cfg;
  for (const CLI::Option* opt : sub->get_options()) {
    const auto key = option_key(opt);
    if (all.contains(key)) cfg[key] = all[key];
  }
  ordered_json j;
  j["tool"] = "openseg";
  j["version"] = kVersion;
  j["command"] = sub->get_name();
  j["config"] = cfg;
  ensure_dir(dir);
  write_json(dir / "run.json", j);
}

void add_common(CLI::App* sub, Options& o)
{
  sub->add_option("--config", o.config, "JSON file with option values (command-line flags take precedence)");
  sub->add_option("--jobs", o.jobs, "Worker threads (scene-level parallelism)")->capture_default_str();
}

void add_fit_flags(CLI::App* sub, Options& o)
{
  sub->add_option("--fusion", o.fusion, "Layers to fuse, layer:scale[:nearest|bilinear],... (default: all at manifest scale)");
  sub->add_option("--alpha", o.alpha, "OpenFCN: classes revised per pixel (0 = all)")->capture_default_str();
  sub->add_option("--tail-size", o.tail_size, "OpenFCN: Weibull tail size")->capture_default_str();
  sub->add_option("--distance", o.distance, "OpenFCN: euclidean, cosine or hybrid")->capture_default_str();
  sub->add_option("--w-euclid", o.w_euclid, "OpenFCN: hybrid euclidean weight")->capture_default_str();
  sub->add_option("--w-cosine", o.w_cosine, "OpenFCN: hybrid cosine weight")->capture_default_str();
  sub->add_option("--quantile", o.quantile, "OpenFCN: posterior rejection quantile")->capture_default_str();
  sub->add_option("--components", o.components, "OpenPCS/OpenIPCS: principal components per class")->capture_default_str();
  sub->add_option("--cap", o.cap, "Training pixels kept per class (reservoir)")->capture_default_str();
  sub->add_option("--batch-rows", o.batch_rows, "OpenIPCS: rows per incremental batch")->capture_default_str();
  sub->add_option("--seed", o.seed, "Sampling seed")->capture_default_str();
}

void add_synth_flags(CLI::App* sub, Options& o)
{
  sub->add_option("--classes", o.classes, "Number of classes")->capture_default_str();
  sub->add_option("--size", o.size, "Patch height and width")->capture_default_str();
  sub->add_option("--scenes-count", o.n_scenes, "Number of patches")->capture_default_str();
  sub->add_option("--sep", o.sep, "Class-mean norm in units of the feature std")->capture_default_str();
  sub->add_option("--std", o.feature_std, "Feature standard deviation")->capture_default_str();
  sub->add_option("--noise", o.noise, "Fraction of pixels with a wrong closed-set argmax")->capture_default_str();
  sub->add_option("--layout", o.layout, "stripes or blobs")->capture_default_str();
  sub->add_option("--layers", o.synth_layers, "Activation layers, channels:scale,...")->capture_default_str();
  sub->add_flag("--ignore-boundaries", o.ignore_boundaries, "Label class borders as ignored (-1)");
}

void set_threads(int jobs, std::string_view where)
{
  if (jobs < 1) throw config_error(where, "--jobs must be >= 1");
  omp_set_max_active_levels(1);
  omp_set_num_threads(jobs);
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_synth(CLI::App* sub, const Options& o)
{
  const auto out = require_path(o.out, "cli::synth", "--out");
  const auto cfg = synth_config(o);
  try {
    validate(cfg);
  } catch (const Error& e) {
    throw config_error("cli::synth", e.what());
  }
  write_run_json(out, sub, o);
  do_synth(cfg, o.n_scenes, out);
  std::printf("wrote %zu scenes of %zux%zu to %s\n", o.n_scenes, cfg.height, cfg.width, out.string().c_str());
  return kExitOk;
}

int cmd_fit(CLI::App* sub, const Options& o)
{
  constexpr std::string_view where = "cli::fit";
  const Method method = require_method(o.method, where);
  const auto uuc = *parse_uuc(o.uuc, where, false);
  const auto scenes = require_path(o.scenes, where, "--scenes");
  const auto out = require_path(o.out, where, "--out");
  const auto f = fit_options(o, method, uuc);
  write_run_json(out, sub, o);
  const auto models = do_fit(scenes, f, out);
  std::printf("fitted %s (uuc %d) on %s\n", to_string(method).c_str(), uuc, scenes.string().c_str());
  for (const auto& note : models.notes) std::printf("  note: %s\n", note.c_str());
  return kExitOk;
}

int cmd_score(CLI::App* sub, const Options& o)
{
  constexpr std::string_view where = "cli::score";
  const auto scenes = require_path(o.scenes, where, "--scenes");
  const auto out = require_path(o.out, where, "--out");
  ModelSet models = models_for_score(o, scenes);
  if (sub->count("--quantile") > 0) {
    if (!(o.quantile > 0.0 && o.quantile < 1.0)) throw config_error(where, "--quantile must lie in (0, 1)");
    models.openmax.quantile = o.quantile;
  }
  write_run_json(out, sub, o);
  const auto s = do_score(scenes, models, out, o.pgm, o.jobs);
  std::printf("scored %zu scenes with %s: %.4f s/patch (+- %.4f, %.0f%% t-interval)\n", s.timing.n,
              to_string(models.method).c_str(), s.timing.mean, s.timing.half_width, 100.0 * s.timing.confidence);
  return kExitOk;
}

int cmd_evaluate(CLI::App* sub, const Options& o)
{
  constexpr std::string_view where = "cli::evaluate";
  const auto scores = require_path(o.scores, where, "--scores");
  const auto scenes = require_path(o.scenes, where, "--scenes");
  const auto out = o.out.empty() ? scores : require_path(o.out, where, "--out");
  check_tprs(o.tpr, where);
  std::optional<std::int32_t> uuc;
  if (!o.uuc.empty()) uuc = parse_uuc(o.uuc, where, false);
  if (!fs::exists(scores / "scores.json"))
    throw Error(ErrorKind::MissingArtifact, where, (scores / "scores.json").string() + " not found (run `openseg score` first)");
  write_run_json(out, sub, o);
  print_report(do_evaluate(scores, scenes, uuc, o.tpr, out, o.roc_points));
  return kExitOk;
}

int cmd_pipeline(CLI::App* sub, const Options& o)
{
  constexpr std::string_view where = "cli::pipeline";
  const Method method = require_method(o.method, where);
  const auto uuc = parse_uuc(o.uuc, where, true);
  const auto scenes = require_path(o.scenes, where, "--scenes");
  const auto out = require_path(o.out, where, "--out");
  check_tprs(o.tpr, where);
  FitOptions f = fit_options(o, method, 0);
  const auto dirs = scene_dirs(scenes, where);
  std::vector<std::int32_t> uucs;
  if (uuc) {
    uucs.push_back(*uuc);
  } else {
    const auto c = read_scene(dirs.front()).num_classes();
    for (std::size_t k = 0; k < c; ++k) uucs.push_back(static_cast<std::int32_t>(k));
  }
  write_run_json(out, sub, o);

  std::vector<RunReport> runs;
  for (auto k : uucs) {
    const fs::path dir = uuc ? out : out / ("uuc_" + std::to_string(k));
    f.uuc = k;
    const auto models = do_fit(scenes, f, dir / "models");
    do_score(scenes, models, dir / "scores", o.pgm, o.jobs);
    runs.push_back(do_evaluate(dir / "scores", scenes, k, o.tpr, dir, o.roc_points));
    print_report(runs.back());
  }
  if (!uuc) {
    const auto summary = summarize_runs(runs);
    write_json(out / "summary.json", summary);
    const auto& auc = summary["auc"];
    if (!auc["mean"].is_null())
      std::printf("%s over %zu LOCO runs: AUC %.4f +- %.4f\n", to_string(method).c_str(), runs.size(), auc["mean"].get<double>(),
                  auc["std"].get<double>());
  }
  return kExitOk;
}

/// Per-patch scoring time of every method on synthetic patches.
int cmd_bench(CLI::App* sub, const Options& o)
{
  constexpr std::string_view where = "cli::bench";
  std::vector<Method> methods;
  for (const auto& m : o.methods) methods.push_back(require_method(m, where));
  if (o.patches < 1 || o.train_scenes < 1) throw config_error(where, "--patches and --train-scenes must be >= 1");
  SynthConfig cfg = synth_config(o);
  try {
    validate(cfg);
  } catch (const Error& e) {
    throw config_error(where, e.what());
  }
  const std::int32_t uuc = o.uuc.empty() ? 0 : *parse_uuc(o.uuc, where, false);
  if (!o.out.empty()) write_run_json(o.out, sub, o);

  std::vector<Scene> train, test;
  for (std::size_t i = 0; i < o.train_scenes; ++i) train.push_back(generate_scene(cfg, i));
  for (std::size_t i = 0; i < o.patches; ++i) test.push_back(generate_scene(cfg, o.train_scenes + i));

  ordered_json report = ordered_json::array();
  std::string csv = "method,patch,seconds\n";
  std::printf("%-9s %8s %12s %12s  (%zu patches of %zux%zu, %d thread(s))\n", "method", "D", "mean [s]", "95% CI [s]", o.patches,
              cfg.height, cfg.width, o.jobs);
  for (const Method m : methods) {
    const ModelSet models = fit_models(train, fit_options(o, m, uuc));
    std::vector<double> sec;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto s = score_scene(test[i], models);
      sec.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.9f", sec.back());
      csv += to_string(m) + "," + std::to_string(i) + "," + buf + "\n";
      (void)s;
    }
    const auto t = summarize_timings(sec);
    std::size_t dim = 0;
    for (const auto& l : models.layers) dim += test.front().layers.at(l.layer_index).data.channels();
    if (m == Method::Softmax || m == Method::OpenFcn) dim = test.front().num_classes() - 1;
    std::printf("%-9s %8zu %12.5f %12.5f\n", to_string(m).c_str(), dim, t.mean, t.half_width);
    report.push_back({{"method", to_string(m)}, {"dim", dim}, {"patches", t.n}, {"mean_seconds", t.mean},
                      {"stddev_seconds", t.stddev}, {"ci_half_width_seconds", t.half_width}, {"confidence", t.confidence}});
  }
  if (!o.out.empty()) {
    write_json(fs::path(o.out) / "bench.json", report);
    write_file_atomic(fs::path(o.out) / "bench.csv", csv);
  }
  return kExitOk;
}

int exit_code(ErrorKind kind)
{
  switch (kind) {
    case ErrorKind::ConfigError:
    case ErrorKind::BadConfig:
      return kExitConfig;
    case ErrorKind::MissingArtifact:
      return kExitMissing;
    default:
      return kExitFailure;
  }
}

}  // namespace

int run(int argc, const char* const* argv)
{
  Options o;
  CLI::App app{"Open-set scoring and evaluation for segmentation activations", "openseg"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  auto* synth = app.add_subcommand("synth", "Generate synthetic scenes");
  add_common(synth, o);
  add_synth_flags(synth, o);
  synth->add_option("--seed", o.seed, "Generator seed")->capture_default_str();
  synth->add_option("--out", o.out, "Output directory");

  auto* fit = app.add_subcommand("fit", "Fit per-class open-set models on the known classes");
  add_common(fit, o);
  fit->add_option("--method", o.method, "softmax, openfcn, openpcs or openipcs");
  fit->add_option("--uuc", o.uuc, "Class hidden as unknown");
  fit->add_option("--scenes", o.scenes, "Scene directory (or a root of scene directories)");
  fit->add_option("--out", o.out, "Model directory");
  add_fit_flags(fit, o);

  auto* score = app.add_subcommand("score", "Write score and prior maps for every scene");
  add_common(score, o);
  score->add_option("--models", o.models, "Model directory written by fit");
  score->add_option("--method", o.method, "Expected method (softmax needs no models)");
  score->add_option("--uuc", o.uuc, "Class hidden as unknown (softmax without models)");
  score->add_option("--quantile", o.quantile, "OpenFCN: override the posterior rejection quantile");
  score->add_option("--scenes", o.scenes, "Scene directory (or a root of scene directories)");
  score->add_option("--out", o.out, "Output directory");
  score->add_flag("--pgm", o.pgm, "Also write an 8-bit PGM rendering of each score map");

  auto* evaluate = app.add_subcommand("evaluate", "Calibrate thresholds and compute open-set metrics");
  add_common(evaluate, o);
  evaluate->add_option("--scores", o.scores, "Output directory of score");
  evaluate->add_option("--scenes", o.scenes, "Scene directory with the labels");
  evaluate->add_option("--uuc", o.uuc, "Expected hidden class (checked against the scores)");
  evaluate->add_option("--tpr", o.tpr, "TPR targets")->delimiter(',')->capture_default_str();
  evaluate->add_option("--roc-points", o.roc_points, "Keep at most this many ROC points in roc.csv (0 = all)")->capture_default_str();
  evaluate->add_option("--out", o.out, "Report directory (default: the scores directory)");

  auto* pipeline = app.add_subcommand("pipeline", "fit, score and evaluate in one go");
  add_common(pipeline, o);
  pipeline->add_option("--method", o.method, "softmax, openfcn, openpcs or openipcs");
  pipeline->add_option("--uuc", o.uuc, "Class hidden as unknown, or 'all' for every LOCO run");
  pipeline->add_option("--scenes", o.scenes, "Scene directory (or a root of scene directories)");
  pipeline->add_option("--out", o.out, "Output directory");
  add_fit_flags(pipeline, o);
  pipeline->add_flag("--pgm", o.pgm, "Also write PGM renderings of the score maps");
  pipeline->add_option("--tpr", o.tpr, "TPR targets")->delimiter(',')->capture_default_str();
  pipeline->add_option("--roc-points", o.roc_points, "Keep at most this many ROC points in roc.csv (0 = all)")->capture_default_str();

  auto* bench = app.add_subcommand("bench", "Time per-patch scoring of each method on synthetic patches");
  add_common(bench, o);
  add_synth_flags(bench, o);
  add_fit_flags(bench, o);
  bench->add_option("--methods", o.methods, "Methods to time")->delimiter(',')->capture_default_str();
  bench->add_option("--patches", o.patches, "Timed patches per method")->capture_default_str();
  bench->add_option("--train-scenes", o.train_scenes, "Synthetic scenes used to fit the models")->capture_default_str();
  bench->add_option("--uuc", o.uuc, "Class hidden as unknown (default 0)");
  bench->add_option("--out", o.out, "Optional directory for bench.json and bench.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    if (!o.config.empty()) apply_config(sub, o.config);
    set_threads(o.jobs, "cli::" + sub->get_name());
    if (sub == synth) return cmd_synth(sub, o);
    if (sub == fit) return cmd_fit(sub, o);
    if (sub == score) return cmd_score(sub, o);
    if (sub == evaluate) return cmd_evaluate(sub, o);
    if (sub == pipeline) return cmd_pipeline(sub, o);
    return cmd_bench(sub, o);
  } catch (const Error& e) {
    std::fprintf(stderr, "openseg %s: %s\n", sub->get_name().c_str(), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "openseg %s: %s\n", sub->get_name().c_str(), e.what());
    return kExitFailure;
  }
}

}  // namespace openseg::cli
