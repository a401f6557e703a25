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

#include "openseg/fusion.hpp"
#include "openseg/openmax.hpp"
#include "openseg/pca.hpp"
#include "openseg/softmax.hpp"

// Plain single-threaded versions of the per-pixel kernels. Used by the tests and
// the benchmark to check the OpenMP kernels; not tuned.
namespace openseg::reference {

Tensor<double> upsample(const FloatTensor& t, std::size_t factor, Upsampling mode);

SoftmaxScore score_softmax(const FloatTensor& logits);

/// Pixel-by-pixel OpenMax; lenient about missing models.
OpenFcnScore score_openfcn(const FloatTensor& logits, const WeibullModels& models, const OpenMaxConfig& cfg);

/// Pixel-by-pixel ppca_loglik; -inf where the predicted class has no model.
OpenPcsScore score_openpcs(const FeatureField& field, const LabelMap& prior, const PcaModels& models);

}  // namespace openseg::reference
