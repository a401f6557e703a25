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

#include "openseg/error.hpp"

namespace openseg {

std::string_view to_string(ErrorKind kind) noexcept
{
  switch (kind) {
    case ErrorKind::MalformedFile: return "MalformedFile";
    case ErrorKind::UnsupportedDtype: return "UnsupportedDtype";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::ManifestMissing: return "ManifestMissing";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::ScaleMismatch: return "ScaleMismatch";
    case ErrorKind::NoSamples: return "NoSamples";
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::DegenerateTail: return "DegenerateTail";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::ModelMissing: return "ModelMissing";
    case ErrorKind::DegenerateData: return "DegenerateData";
    case ErrorKind::SingularModel: return "SingularModel";
    case ErrorKind::BadConfig: return "BadConfig";
    case ErrorKind::FirstBatchTooSmall: return "FirstBatchTooSmall";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::BadClass: return "BadClass";
    case ErrorKind::NoUnknowns: return "NoUnknowns";
    case ErrorKind::SingleClassMask: return "SingleClassMask";
    case ErrorKind::EmptyMatrix: return "EmptyMatrix";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::MissingArtifact: return "MissingArtifact";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, std::string_view where, const std::string& detail)
  : std::runtime_error(std::string(where) + ": " + std::string(to_string(kind)) +
                       (detail.empty() ? std::string() : ": " + detail)),
    kind_(kind),
    where_(where)
{
}

}  // namespace openseg
