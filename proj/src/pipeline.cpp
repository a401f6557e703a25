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

#include "openseg/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "openseg/error.hpp"
#include "openseg/model_io.hpp"
#include "openseg/npy.hpp"
#include "openseg/softmax.hpp"

namespace openseg {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::string_view kFit = "cli::fit";

// C x H x W logits as a feature field (one column per pixel).
FeatureField logit_field(const FloatTensor& logits)
{
  const std::size_t C = logits.shape[0], HW = logits.shape[1] * logits.shape[2];
  FeatureField f;
  f.height = logits.shape[1];
  f.width = logits.shape[2];
  f.data = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
             logits.data.data(), static_cast<Eigen::Index>(C), static_cast<Eigen::Index>(HW))
             .cast<double>();
  return f;
}

std::vector<LayerSpec> resolve_layers(const Scene& scene, const std::vector<LayerSpec>& requested)
{
  return requested.empty() ? default_layer_spec(scene) : requested;
}

// Streams qualifying rows into one IncrementalPca per class.
class IpcaFeeder {
 public:
  IpcaFeeder(std::size_t n_comp, std::size_t dim, std::int32_t class_id, std::size_t batch_rows)
      : state_(n_comp, dim, class_id), dim_(dim), batch_rows_(batch_rows)
  {
  }

  void add(const Eigen::Ref<const Eigen::VectorXd>& v) { buffer_.insert(buffer_.end(), v.data(), v.data() + dim_); }

  // Called at the end of every scene: one scene's pixels form one batch (split at batch_rows).
  void flush(bool final)
  {
    std::size_t rows = buffer_.size() / dim_;
    if (rows == 0) return;
    if (state_.samples_seen() == 0 && rows < state_.n_components() + 1 && !final) return;  // keep collecting
    std::size_t start = 0;
    while (start < rows) {
      const std::size_t m = std::min(batch_rows_, rows - start);
      using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
      const Eigen::Map<const RowMat> batch(buffer_.data() + start * dim_, static_cast<Eigen::Index>(m),
                                           static_cast<Eigen::Index>(dim_));
      state_.partial_fit(batch);
      start += m;
    }
    buffer_.clear();
  }

  const IncrementalPca& state() const { return state_; }

 private:
  IncrementalPca state_;
  std::size_t dim_;
  std::size_t batch_rows_;
  std::vector<double> buffer_;
};

}  // namespace

std::string to_string(Method m)
{
  switch (m) {
    case Method::Softmax: return "softmax";
    case Method::OpenFcn: return "openfcn";
    case Method::OpenPcs: return "openpcs";
    case Method::OpenIpcs: return "openipcs";
  }
  return "?";
}

Method parse_method(const std::string& name)
{
  if (name == "softmax") return Method::Softmax;
  if (name == "openfcn") return Method::OpenFcn;
  if (name == "openpcs") return Method::OpenPcs;
  if (name == "openipcs") return Method::OpenIpcs;
  throw Error(ErrorKind::ConfigError, "cli::run", "unknown method '" + name + "' (softmax|openfcn|openpcs|openipcs)");
}

ModelSet fit_models(std::size_t n_scenes, const SceneLoader& load, const FitOptions& opt)
{
  if (n_scenes == 0) throw Error(ErrorKind::NoSamples, kFit, "no scenes to fit on");
  if (opt.cap < 1) throw Error(ErrorKind::ConfigError, kFit, "cap must be >= 1");
  if (opt.n_comp < 1) throw Error(ErrorKind::ConfigError, kFit, "components must be >= 1");
  if (opt.method == Method::OpenIpcs && opt.batch_rows < opt.n_comp + 1)
    throw Error(ErrorKind::ConfigError, kFit, "batch rows must exceed the component count");

  ModelSet set;
  set.method = opt.method;
  set.uuc = opt.uuc;
  set.openmax = opt.openmax;
  set.n_comp = opt.n_comp;

  std::vector<ClassReservoir> reservoirs;
  std::vector<IpcaFeeder> feeders;
  std::size_t known = 0;
  for (std::size_t s = 0; s < n_scenes; ++s) {
    const Scene scene = load(s);
    if (s == 0) {
      set.num_classes = scene.num_classes();
      set.layers = resolve_layers(scene, opt.layers);
    } else if (scene.num_classes() != set.num_classes) {
      throw Error(ErrorKind::ShapeMismatch, kFit, "scene " + std::to_string(s) + " has a different class count");
    }
    const auto split = loco_remap(scene.labels, opt.uuc, set.num_classes);
    known = static_cast<std::size_t>(split.unknown_id);
    if (opt.method == Method::Softmax) continue;

    const FloatTensor logits = loco_logits(scene.logits, opt.uuc);
    const LabelMap prior = argmax_prediction(logits);
    const FeatureField field = opt.method == Method::OpenFcn ? logit_field(logits) : fuse(scene, set.layers);

    if (s == 0) {
      for (std::size_t k = 0; k < known; ++k) {
        const auto id = static_cast<std::int32_t>(k);
        if (opt.method == Method::OpenIpcs)
          feeders.emplace_back(std::min(opt.n_comp, field.dim()), field.dim(), id, opt.batch_rows);
        else
          reservoirs.emplace_back(id, field.dim(), opt.cap, opt.seed);
      }
    }
    if (opt.method == Method::OpenIpcs) {
      for (std::size_t p = 0; p < field.pixels(); ++p) {
        const auto t = split.eval_labels.values[p];
        if (t == kIgnoreLabel || t == split.unknown_id || prior.values[p] != t) continue;
        feeders[static_cast<std::size_t>(t)].add(field.data.col(static_cast<Eigen::Index>(p)));
      }
      for (auto& f : feeders) f.flush(false);
    } else {
      for (auto& r : reservoirs) r.offer(field, prior, split.eval_labels, static_cast<std::uint32_t>(s));
    }
  }
  if (opt.method == Method::Softmax) return set;

  auto note = [&](std::size_t k, const Error& e) {
    set.notes.push_back("class " + std::to_string(k) + ": " + e.what());
  };
  if (opt.method == Method::OpenFcn) set.weibull.resize(known);
  else set.pca.resize(known);

  for (std::size_t k = 0; k < known; ++k) {
    try {
      switch (opt.method) {
        case Method::OpenFcn: set.weibull[k] = fit_weibull_model(reservoirs[k].take(), opt.openmax); break;
        case Method::OpenPcs: set.pca[k] = fit_pca(reservoirs[k].take(), opt.n_comp); break;
        case Method::OpenIpcs: {
          feeders[k].flush(true);
          set.pca[k] = feeders[k].state().finalize();
          break;
        }
        case Method::Softmax: break;
      }
    } catch (const Error& e) {
      switch (e.kind()) {
        case ErrorKind::NoSamples:
        case ErrorKind::InsufficientSamples:
        case ErrorKind::FirstBatchTooSmall:
        case ErrorKind::DegenerateData: note(k, e); break;
        default: throw;
      }
    }
  }
  return set;
}

ModelSet fit_models(const std::vector<Scene>& scenes, const FitOptions& options)
{
  return fit_models(scenes.size(), [&](std::size_t i) { return scenes[i]; }, options);
}

void save_models(const fs::path& dir, const ModelSet& models)
{
  fs::create_directories(dir);
  ordered_json j;
  j["format"] = "openseg-models/1";
  j["method"] = to_string(models.method);
  j["uuc"] = models.uuc;
  j["num_classes"] = models.num_classes;
  j["fusion"] = to_json(models.layers);
  j["openmax"] = to_json(models.openmax);
  j["components"] = models.n_comp;
  if (models.method == Method::OpenFcn) j["classes"] = to_json(models.weibull);
  if (models.method == Method::OpenPcs || models.method == Method::OpenIpcs) j["classes"] = save_pca_models(dir, models.pca);
  j["notes"] = models.notes;
  write_file_atomic(dir / "model.json", j.dump(2) + "\n");
}

ModelSet load_models(const fs::path& dir)
{
  const auto path = dir / "model.json";
  if (!fs::exists(path)) throw Error(ErrorKind::MissingArtifact, "cli::score", "no model at " + path.string());
  json j;
  try {
    std::ifstream in(path);
    j = json::parse(in);
    ModelSet m;
    m.method = parse_method(j.at("method").get<std::string>());
    m.uuc = j.at("uuc").get<std::int32_t>();
    m.num_classes = j.at("num_classes").get<std::size_t>();
    m.layers = layer_spec_from_json(j.at("fusion"));
    m.openmax = openmax_config_from_json(j.at("openmax"));
    m.n_comp = j.value("components", std::size_t{0});
    if (m.method == Method::OpenFcn) m.weibull = weibull_models_from_json(j.at("classes"));
    if (m.method == Method::OpenPcs || m.method == Method::OpenIpcs) m.pca = load_pca_models(dir, j.at("classes"));
    m.notes = j.value("notes", std::vector<std::string>{});
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedFile, "model_io::load", path.string() + ": " + e.what());
  }
}

SceneScore score_scene(const Scene& scene, const ModelSet& models)
{
  if (scene.num_classes() != models.num_classes)
    throw Error(ErrorKind::ShapeMismatch, "cli::score",
                "scene has " + std::to_string(scene.num_classes()) + " classes, models expect " +
                  std::to_string(models.num_classes));
  const FloatTensor logits = loco_logits(scene.logits, models.uuc);
  SceneScore out;
  switch (models.method) {
    case Method::Softmax: {
      auto s = score_softmax(logits);
      out.scores = std::move(s.scores);
      out.prior = std::move(s.prior);
      break;
    }
    case Method::OpenFcn: {
      auto s = score_openfcn(logits, models.weibull, models.openmax);
      out.scores = std::move(s.scores);
      out.prior = std::move(s.prior);
      out.posterior = std::move(s.posterior);
      out.unscoreable = std::move(s.unscoreable);
      break;
    }
    case Method::OpenPcs:
    case Method::OpenIpcs: {
      out.prior = argmax_prediction(logits);
      auto s = score_openpcs(fuse(scene, models.layers), out.prior, models.pca);
      out.scores = std::move(s.scores);
      out.unscoreable = std::move(s.unscoreable);
      break;
    }
  }
  return out;
}

RunReport evaluate_run(const std::vector<SceneEval>& scenes, std::span<const double> tprs, const std::string& method,
                       std::int32_t uuc, std::size_t num_classes)
{
  constexpr std::string_view where = "eval_harness::evaluate";
  if (scenes.empty()) throw Error(ErrorKind::NoSamples, where, "no scenes to evaluate");
  RunReport r;
  r.method = method;
  r.uuc = uuc;
  r.unknown_id = static_cast<std::int32_t>(num_classes - 1);
  r.id_map = loco_remap(LabelMap(1, 1, kIgnoreLabel), uuc, num_classes).id_map;
  r.scenes = scenes.size();

  std::vector<double> pooled;
  std::vector<std::uint8_t> unknown;
  for (const auto& s : scenes) {
    if (!s.scores.same_dims(s.eval_labels) || !s.prior.same_dims(s.eval_labels))
      throw Error(ErrorKind::DimMismatch, where, "score, prior and labels differ in size");
    for (std::size_t i = 0; i < s.eval_labels.size(); ++i) {
      const auto t = s.eval_labels.values[i];
      if (t == kIgnoreLabel) continue;
      pooled.push_back(s.scores.values[i]);
      unknown.push_back(t == r.unknown_id ? 1 : 0);
    }
  }
  r.pixels = pooled.size();
  for (auto u : unknown) r.unknown_pixels += u;
  if (r.unknown_pixels > 0 && r.unknown_pixels < r.pixels) {
    r.roc = roc_auc(pooled, unknown);
    r.auc = r.roc.auc;
  }

  auto operating_point = [&](double threshold, bool closed) {
    OperatingPoint op;
    op.threshold = threshold;
    op.confusion = ConfusionMatrix(num_classes);
    std::uint64_t caught = 0;
    for (const auto& s : scenes) {
      OpenSetPrediction pred{s.prior, r.unknown_id, threshold, method};
      if (!closed) pred = apply_threshold(s.scores, s.prior, threshold, r.unknown_id, method);
      op.confusion += confusion(pred, s.eval_labels);
    }
    for (std::size_t i = 0; i < pooled.size(); ++i) caught += (!closed && unknown[i] && pooled[i] <= threshold) ? 1 : 0;
    op.achieved_tpr = r.unknown_pixels ? static_cast<double>(caught) / static_cast<double>(r.unknown_pixels) : 0.0;
    EvalReport er;
    er.confusion = op.confusion;
    fill_metrics(er);
    op.acc_known = er.acc_known;
    op.pre_unknown = er.pre_unknown;
    op.kappa = er.kappa;
    op.kappa_known = er.kappa_known;
    return op;
  };

  r.closed = operating_point(-std::numeric_limits<double>::infinity(), true);
  for (double tpr : tprs) {
    const auto cal = calibrate_threshold(pooled, unknown, tpr);
    auto op = operating_point(cal.threshold, false);
    op.tpr_target = tpr;
    r.points.push_back(std::move(op));
  }
  return r;
}

namespace {

ordered_json number_or_null(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

ordered_json to_json(const OperatingPoint& op, bool with_target)
{
  ordered_json j;
  if (with_target) j["tpr_target"] = op.tpr_target;
  j["threshold"] = number_or_null(op.threshold);
  j["achieved_tpr"] = op.achieved_tpr;
  j["acc_known"] = op.acc_known;
  j["pre_unknown"] = op.pre_unknown;
  j["kappa"] = op.kappa;
  j["kappa_known"] = op.kappa_known ? number_or_null(*op.kappa_known) : ordered_json(nullptr);
  ordered_json rows = ordered_json::array();
  for (std::size_t t = 0; t < op.confusion.classes; ++t) {
    std::vector<std::uint64_t> row(op.confusion.counts.begin() + static_cast<std::ptrdiff_t>(t * op.confusion.classes),
                                   op.confusion.counts.begin() + static_cast<std::ptrdiff_t>((t + 1) * op.confusion.classes));
    rows.push_back(row);
  }
  j["confusion"] = rows;
  return j;
}

}  // namespace

ordered_json to_json(const RunReport& r)
{
  ordered_json j;
  j["method"] = r.method;
  j["uuc"] = r.uuc;
  j["unknown_id"] = r.unknown_id;
  j["id_map"] = r.id_map;
  j["scenes"] = r.scenes;
  j["pixels"] = r.pixels;
  j["unknown_pixels"] = r.unknown_pixels;
  j["auc"] = r.auc ? ordered_json(*r.auc) : ordered_json(nullptr);
  j["closed"] = to_json(r.closed, false);
  ordered_json pts = ordered_json::array();
  for (const auto& op : r.points) pts.push_back(to_json(op, true));
  j["operating_points"] = pts;
  return j;
}

std::string roc_csv(const RocCurve& roc, std::size_t max_points)
{
  std::ostringstream out;
  out.precision(17);
  out << "fpr,tpr,threshold\n";
  const std::size_t n = roc.points.size();
  auto emit = [&](const RocPoint& p) {
    out << p.fpr << ',' << p.tpr << ',';
    if (std::isfinite(p.threshold)) out << p.threshold;
    else out << (p.threshold < 0 ? "-inf" : "inf");
    out << '\n';
  };
  if (max_points == 0 || n <= max_points || max_points < 2) {
    for (const auto& p : roc.points) emit(p);
    return out.str();
  }
  std::size_t last = n;
  for (std::size_t i = 0; i < max_points; ++i) {
    const std::size_t idx = i * (n - 1) / (max_points - 1);
    if (idx == last) continue;
    emit(roc.points[idx]);
    last = idx;
  }
  return out.str();
}

}  // namespace openseg
