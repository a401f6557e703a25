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

#include <stdexcept>
#include <string>
#include <string_view>

namespace openseg {

enum class ErrorKind {
  // tensor_store
  MalformedFile,
  UnsupportedDtype,
  IoFailure,
  ManifestMissing,
  ShapeMismatch,
  LabelOutOfRange,
  // fusion
  ScaleMismatch,
  NoSamples,
  // openmax_evt
  ZeroVector,
  DegenerateTail,
  InsufficientSamples,
  ModelMissing,
  // pca_density / ipca
  DegenerateData,
  SingularModel,
  BadConfig,
  FirstBatchTooSmall,
  DimMismatch,
  // eval_harness
  BadClass,
  NoUnknowns,
  SingleClassMask,
  EmptyMatrix,
  // cli
  ConfigError,
  MissingArtifact,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure in the toolkit is reported as an Error carrying a typed kind
/// and the "module::operation" that raised it.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string_view where, const std::string& detail);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& where() const noexcept { return where_; }

 private:
  ErrorKind kind_;
  std::string where_;
};

}  // namespace openseg
