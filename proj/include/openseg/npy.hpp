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

#include <filesystem>
#include <string>
#include <string_view>

#include "openseg/tensor.hpp"

namespace openseg {

/// Reads an NPY v1.0/v2.0 file. f4/i4 load as-is; f8 and i8 are narrowed to
/// f32/i32 and fail with UnsupportedDtype if a finite value does not fit.
AnyTensor read_tensor(const std::filesystem::path& path);

/// Writes NPY v1.0, little-endian, row-major. The file is first written as
/// "<path>.partial" and renamed into place on success.
void write_tensor(const std::filesystem::path& path, const FloatTensor& t);
void write_tensor(const std::filesystem::path& path, const IntTensor& t);
void write_tensor(const std::filesystem::path& path, const AnyTensor& t);

/// Full-precision variants used for model parameters. Reading accepts f4 or f8.
Tensor<double> read_tensor_f64(const std::filesystem::path& path);
void write_tensor_f64(const std::filesystem::path& path, const Tensor<double>& t);

/// Narrowing accessors; throw UnsupportedDtype when the variant holds the other type.
const FloatTensor& as_float(const AnyTensor& t, std::string_view what);
const IntTensor& as_int(const AnyTensor& t, std::string_view what);

/// Writes `contents` to "<path>.partial" and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace openseg
