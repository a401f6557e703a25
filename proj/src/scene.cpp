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

#include "openseg/scene.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"
#include "openseg/error.hpp"
#include "openseg/npy.hpp"

namespace openseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kRead = "tensor_store::read_scene";

std::string dims_str(const std::vector<std::size_t>& shape)
{
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
  return s;
}

}  // namespace

void validate_scene(const Scene& scene)
{
  const std::size_t H = scene.labels.height;
  const std::size_t W = scene.labels.width;
  if (scene.labels.values.size() != H * W)
    throw Error(ErrorKind::ShapeMismatch, kRead, "labels: value count does not match dims");
  if (scene.class_names.empty()) throw Error(ErrorKind::ShapeMismatch, kRead, "scene declares no classes");

  const auto& lg = scene.logits;
  if (lg.rank() != 3 || Tensor<float>::element_count(lg.shape) != lg.data.size())
    throw Error(ErrorKind::ShapeMismatch, kRead, "logits must be C x H x W, got " + dims_str(lg.shape));
  if (lg.shape[0] != scene.num_classes())
    throw Error(ErrorKind::ShapeMismatch, kRead,
                "logits have " + std::to_string(lg.shape[0]) + " channels for " +
                  std::to_string(scene.num_classes()) + " classes");
  if (lg.shape[1] != H || lg.shape[2] != W)
    throw Error(ErrorKind::ShapeMismatch, kRead, "logits spatial dims " + dims_str(lg.shape) + " differ from labels");

  for (std::size_t i = 0; i < scene.layers.size(); ++i) {
    const auto& layer = scene.layers[i];
    const auto& t = layer.data;
    if (layer.scale < 1)
      throw Error(ErrorKind::ShapeMismatch, kRead, "layer " + std::to_string(i) + ": scale must be >= 1");
    if (t.rank() != 3 || Tensor<float>::element_count(t.shape) != t.data.size() || t.shape[0] == 0)
      throw Error(ErrorKind::ShapeMismatch, kRead, "layer " + std::to_string(i) + ": expected C x h x w, got " + dims_str(t.shape));
    if (t.shape[1] * layer.scale != H || t.shape[2] * layer.scale != W)
      throw Error(ErrorKind::ShapeMismatch, kRead,
                  "layer " + std::to_string(i) + ": dims " + dims_str(t.shape) + " at scale " +
                    std::to_string(layer.scale) + " do not cover " + std::to_string(H) + "x" + std::to_string(W));
  }

  const auto n = static_cast<std::int32_t>(scene.num_classes());
  for (std::size_t i = 0; i < scene.labels.values.size(); ++i) {
    const auto v = scene.labels.values[i];
    if (v < kIgnoreLabel || v >= n)
      throw Error(ErrorKind::LabelOutOfRange, kRead,
                  "label " + std::to_string(v) + " at pixel " + std::to_string(i) + " with " + std::to_string(n) + " classes");
  }
}

Scene read_scene(const fs::path& dir)
{
  const fs::path manifest_path = dir / "scene.json";
  if (!fs::exists(manifest_path)) throw Error(ErrorKind::ManifestMissing, kRead, manifest_path.string());

  json manifest;
  {
    std::ifstream in(manifest_path);
    if (!in) throw Error(ErrorKind::IoFailure, kRead, "cannot open " + manifest_path.string());
    try {
      in >> manifest;
    } catch (const json::exception& e) {
      throw Error(ErrorKind::ManifestMissing, kRead, manifest_path.string() + ": invalid JSON: " + e.what());
    }
  }

  Scene scene;
  try {
    for (const auto& entry : manifest.at("layers")) {
      ActivationLayer layer;
      const auto scale = entry.at("scale").get<long long>();
      if (scale < 1) throw Error(ErrorKind::ShapeMismatch, kRead, "layer scale must be >= 1");
      layer.scale = static_cast<std::size_t>(scale);
      layer.data = as_float(read_tensor(dir / entry.at("file").get<std::string>()), "layer activations");
      scene.layers.push_back(std::move(layer));
    }
    scene.logits = as_float(read_tensor(dir / manifest.at("logits").get<std::string>()), "logits");
    const IntTensor labels = as_int(read_tensor(dir / manifest.at("labels").get<std::string>()), "labels");
    if (labels.rank() != 2) throw Error(ErrorKind::ShapeMismatch, kRead, "labels must be H x W, got " + dims_str(labels.shape));
    scene.labels.height = labels.shape[0];
    scene.labels.width = labels.shape[1];
    scene.labels.values = labels.data;
    scene.class_names = manifest.at("classes").get<std::vector<std::string>>();
    scene.patch_id = manifest.value("patch_id", dir.filename().string());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ManifestMissing, kRead, manifest_path.string() + ": " + e.what());
  }

  validate_scene(scene);
  return scene;
}

void write_scene(const fs::path& dir, const Scene& scene)
{
  validate_scene(scene);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoFailure, "tensor_store::write_scene", dir.string() + ": " + ec.message());

  json manifest;
  manifest["layers"] = json::array();
  for (std::size_t i = 0; i < scene.layers.size(); ++i) {
    const std::string file = "layer_" + std::to_string(i) + ".npy";
    write_tensor(dir / file, scene.layers[i].data);
    manifest["layers"].push_back({{"file", file}, {"scale", scene.layers[i].scale}});
  }
  write_tensor(dir / "logits.npy", scene.logits);
  IntTensor labels({scene.labels.height, scene.labels.width});
  labels.data = scene.labels.values;
  write_tensor(dir / "labels.npy", labels);
  manifest["logits"] = "logits.npy";
  manifest["labels"] = "labels.npy";
  manifest["classes"] = scene.class_names;
  manifest["patch_id"] = scene.patch_id;
  write_file_atomic(dir / "scene.json", manifest.dump(2) + "\n");
}

std::vector<fs::path> list_scene_dirs(const fs::path& root)
{
  if (fs::exists(root / "scene.json")) return {root};
  std::vector<fs::path> dirs;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(root, ec)) {
    if (entry.is_directory() && fs::exists(entry.path() / "scene.json")) dirs.push_back(entry.path());
  }
  if (ec) throw Error(ErrorKind::IoFailure, "tensor_store::list_scene_dirs", root.string() + ": " + ec.message());
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

}  // namespace openseg
