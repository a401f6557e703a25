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

#include "openseg/model_io.hpp"

#include "openseg/error.hpp"
#include "openseg/npy.hpp"

namespace openseg {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

Tensor<double> vector_tensor(const Eigen::VectorXd& v)
{
  Tensor<double> t({static_cast<std::size_t>(v.size())});
  for (Eigen::Index i = 0; i < v.size(); ++i) t.data[static_cast<std::size_t>(i)] = v(i);
  return t;
}

Eigen::VectorXd tensor_vector(const Tensor<double>& t, std::string_view what)
{
  if (t.rank() != 1) throw Error(ErrorKind::MalformedFile, "model_io::load", std::string(what) + " must be 1-D");
  return Eigen::Map<const Eigen::VectorXd>(t.data.data(), static_cast<Eigen::Index>(t.data.size()));
}

template <typename T>
T required(const json& j, const char* key)
{
  if (!j.contains(key)) throw Error(ErrorKind::MalformedFile, "model_io::load", std::string("missing key '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedFile, "model_io::load", std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

ordered_json to_json(const OpenMaxConfig& cfg)
{
  ordered_json j;
  j["alpha"] = cfg.alpha;
  j["tail_size"] = cfg.tail_size;
  j["distance"] = to_string(cfg.distance);
  j["w_euclid"] = cfg.w_euclid;
  j["w_cosine"] = cfg.w_cosine;
  j["quantile"] = cfg.quantile;
  return j;
}

OpenMaxConfig openmax_config_from_json(const json& j)
{
  OpenMaxConfig cfg;
  cfg.alpha = j.value("alpha", cfg.alpha);
  cfg.tail_size = j.value("tail_size", cfg.tail_size);
  cfg.distance = parse_distance(j.value("distance", to_string(cfg.distance)));
  cfg.w_euclid = j.value("w_euclid", cfg.w_euclid);
  cfg.w_cosine = j.value("w_cosine", cfg.w_cosine);
  cfg.quantile = j.value("quantile", cfg.quantile);
  return cfg;
}

ordered_json to_json(const std::vector<LayerSpec>& spec)
{
  ordered_json arr = ordered_json::array();
  for (const auto& s : spec) arr.push_back({{"layer", s.layer_index}, {"scale", s.scale}, {"mode", to_string(s.mode)}});
  return arr;
}

std::vector<LayerSpec> layer_spec_from_json(const json& j)
{
  if (!j.is_array()) throw Error(ErrorKind::MalformedFile, "model_io::load", "layer spec must be an array");
  std::vector<LayerSpec> spec;
  for (const auto& e : j)
    spec.push_back({required<std::size_t>(e, "layer"), required<std::size_t>(e, "scale"),
                    parse_upsampling(e.value("mode", std::string("nearest")))});
  return spec;
}

ordered_json to_json(const WeibullModel& m)
{
  ordered_json j;
  j["class_id"] = m.class_id;
  j["shape"] = m.shape;
  j["scale"] = m.scale;
  j["tail_size"] = m.tail_size;
  j["distance"] = {{"kind", to_string(m.distance.kind)},
                   {"w_euclid", m.distance.w_euclid},
                   {"w_cosine", m.distance.w_cosine},
                   {"euclid_scale", m.distance.euclid_scale}};
  j["point_mass"] = m.point_mass ? ordered_json(*m.point_mass) : ordered_json(nullptr);
  j["mav"] = std::vector<double>(m.mav.data(), m.mav.data() + m.mav.size());
  return j;
}

WeibullModel weibull_model_from_json(const json& j)
{
  WeibullModel m;
  m.class_id = required<std::int32_t>(j, "class_id");
  m.shape = required<double>(j, "shape");
  m.scale = required<double>(j, "scale");
  m.tail_size = required<std::size_t>(j, "tail_size");
  const auto& d = j.at("distance");
  m.distance.kind = parse_distance(required<std::string>(d, "kind"));
  m.distance.w_euclid = required<double>(d, "w_euclid");
  m.distance.w_cosine = required<double>(d, "w_cosine");
  m.distance.euclid_scale = required<double>(d, "euclid_scale");
  if (j.contains("point_mass") && !j["point_mass"].is_null()) m.point_mass = j["point_mass"].get<double>();
  const auto mav = required<std::vector<double>>(j, "mav");
  m.mav = Eigen::Map<const Eigen::VectorXd>(mav.data(), static_cast<Eigen::Index>(mav.size()));
  return m;
}

ordered_json to_json(const WeibullModels& models)
{
  ordered_json arr = ordered_json::array();
  for (const auto& m : models) arr.push_back(m ? to_json(*m) : ordered_json(nullptr));
  return arr;
}

WeibullModels weibull_models_from_json(const json& entries)
{
  if (!entries.is_array()) throw Error(ErrorKind::MalformedFile, "model_io::load", "models must be an array");
  WeibullModels models;
  for (const auto& e : entries) {
    if (e.is_null())
      models.emplace_back();
    else
      models.emplace_back(weibull_model_from_json(e));
  }
  return models;
}

ordered_json save_pca_models(const fs::path& dir, const PcaModels& models)
{
  ordered_json arr = ordered_json::array();
  for (std::size_t k = 0; k < models.size(); ++k) {
    if (!models[k]) {
      arr.push_back(nullptr);
      continue;
    }
    const auto& m = *models[k];
    const std::string stem = "class_" + std::to_string(k);
    write_tensor_f64(dir / (stem + "_mean.npy"), vector_tensor(m.mean));
    write_tensor_f64(dir / (stem + "_eigenvalues.npy"), vector_tensor(m.eigenvalues));
    Tensor<double> comp({m.n_components(), m.dim()});
    for (std::size_t r = 0; r < m.n_components(); ++r)
      for (std::size_t c = 0; c < m.dim(); ++c)
        comp.data[r * m.dim() + c] = m.components(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    write_tensor_f64(dir / (stem + "_components.npy"), comp);

    ordered_json j;
    j["class_id"] = m.class_id;
    j["dim"] = m.dim();
    j["n_components"] = m.n_components();
    j["noise_variance"] = m.noise_variance;
    j["n_fit"] = m.n_fit;
    j["fit_loglik_mean"] = m.fit_loglik_mean;
    j["fit_loglik_std"] = m.fit_loglik_std;
    j["files"] = {{"mean", stem + "_mean.npy"}, {"components", stem + "_components.npy"},
                  {"eigenvalues", stem + "_eigenvalues.npy"}};
    arr.push_back(std::move(j));
  }
  return arr;
}

PcaModels load_pca_models(const fs::path& dir, const json& entries)
{
  constexpr std::string_view where = "model_io::load";
  if (!entries.is_array()) throw Error(ErrorKind::MalformedFile, where, "models must be an array");
  PcaModels models;
  for (const auto& e : entries) {
    if (e.is_null()) {
      models.emplace_back();
      continue;
    }
    PcaModel m;
    m.class_id = required<std::int32_t>(e, "class_id");
    m.noise_variance = required<double>(e, "noise_variance");
    m.n_fit = required<std::size_t>(e, "n_fit");
    m.fit_loglik_mean = e.value("fit_loglik_mean", 0.0);
    m.fit_loglik_std = e.value("fit_loglik_std", 1.0);
    const auto& files = e.at("files");
    const auto dim = required<std::size_t>(e, "dim");
    const auto q = required<std::size_t>(e, "n_components");
    m.mean = tensor_vector(read_tensor_f64(dir / required<std::string>(files, "mean")), "mean");
    m.eigenvalues = tensor_vector(read_tensor_f64(dir / required<std::string>(files, "eigenvalues")), "eigenvalues");
    const auto comp = read_tensor_f64(dir / required<std::string>(files, "components"));
    if (comp.rank() != 2 || comp.shape[0] != q || comp.shape[1] != dim || static_cast<std::size_t>(m.mean.size()) != dim ||
        static_cast<std::size_t>(m.eigenvalues.size()) != q)
      throw Error(ErrorKind::ShapeMismatch, where, "class " + std::to_string(m.class_id) + " arrays disagree with header");
    m.components.resize(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < q; ++r)
      for (std::size_t c = 0; c < dim; ++c)
        m.components(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = comp.data[r * dim + c];
    models.emplace_back(std::move(m));
  }
  return models;
}

}  // namespace openseg
