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

#include <span>
#include <vector>

#include "openseg/tensor.hpp"

namespace openseg {

/// Max-subtracted softmax of one activation vector, written into `out`.
void softmax_inplace(std::span<const double> activations, std::span<double> out);

/// Per-pixel softmax over the channel axis of a C x H x W tensor.
Tensor<double> softmax(const FloatTensor& logits);

/// Per-pixel argmax over channels; ties go to the lowest class index.
LabelMap argmax_prediction(const FloatTensor& logits);

struct SoftmaxScore {
  ScoreMap scores;  // max softmax probability
  LabelMap prior;   // argmax class
};

/// Maximum softmax probability as the knownness score.
SoftmaxScore score_softmax(const FloatTensor& logits);

}  // namespace openseg
