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

#include "openseg/npy.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "openseg/error.hpp"

static_assert(std::endian::native == std::endian::little, "NPY I/O assumes a little-endian host");

namespace openseg {

namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;

enum class Dtype { F4, F8, I4, I8 };

std::size_t item_size(Dtype d) { return (d == Dtype::F4 || d == Dtype::I4) ? 4 : 8; }

struct RawArray {
  Dtype dtype;
  std::vector<std::size_t> shape;
  std::string payload;
};

std::string read_all(const std::filesystem::path& path, std::string_view where)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoFailure, where, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::IoFailure, where, "read failed for " + path.string());
  return std::move(ss).str();
}

// Value of `key` in the python-dict header, trimmed up to the next top-level comma or brace.
std::string header_field(const std::string& header, const std::string& key, const std::string& file)
{
  constexpr std::string_view where = "tensor_store::read_tensor";
  auto pos = header.find("'" + key + "'");
  if (pos == std::string::npos) throw Error(ErrorKind::MalformedFile, where, file + ": missing " + key);
  pos = header.find(':', pos);
  if (pos == std::string::npos) throw Error(ErrorKind::MalformedFile, where, file + ": bad " + key);
  ++pos;
  while (pos < header.size() && header[pos] == ' ') ++pos;
  if (pos >= header.size()) throw Error(ErrorKind::MalformedFile, where, file + ": bad " + key);
  if (header[pos] == '(') {
    auto end = header.find(')', pos);
    if (end == std::string::npos) throw Error(ErrorKind::MalformedFile, where, file + ": bad shape");
    return header.substr(pos, end - pos + 1);
  }
  if (header[pos] == '\'') {
    auto end = header.find('\'', pos + 1);
    if (end == std::string::npos) throw Error(ErrorKind::MalformedFile, where, file + ": bad " + key);
    return header.substr(pos + 1, end - pos - 1);
  }
  auto end = header.find_first_of(",}", pos);
  if (end == std::string::npos) throw Error(ErrorKind::MalformedFile, where, file + ": bad " + key);
  auto value = header.substr(pos, end - pos);
  while (!value.empty() && value.back() == ' ') value.pop_back();
  return value;
}

std::vector<std::size_t> parse_shape(const std::string& text, const std::string& file)
{
  std::vector<std::size_t> shape;
  std::string inner = text.substr(1, text.size() - 2);
  std::stringstream ss(inner);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto b = item.find_first_not_of(' ');
    if (b == std::string::npos) continue;
    auto e = item.find_last_not_of(' ');
    item = item.substr(b, e - b + 1);
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos)
      throw Error(ErrorKind::MalformedFile, "tensor_store::read_tensor", file + ": bad shape entry '" + item + "'");
    shape.push_back(std::stoull(item));
  }
  return shape;
}

RawArray read_raw(const std::filesystem::path& path)
{
  constexpr std::string_view where = "tensor_store::read_tensor";
  const std::string file = path.string();
  const std::string bytes = read_all(path, where);
  if (bytes.size() < kMagicLen + 4 || std::memcmp(bytes.data(), kMagic, kMagicLen) != 0)
    throw Error(ErrorKind::MalformedFile, where, file + ": bad magic");

  const auto major = static_cast<unsigned char>(bytes[6]);
  std::size_t header_len = 0;
  std::size_t offset = 0;
  if (major == 1) {
    std::uint16_t len;
    std::memcpy(&len, bytes.data() + 8, 2);
    header_len = len;
    offset = 10;
  } else if (major == 2 || major == 3) {
    if (bytes.size() < 12) throw Error(ErrorKind::MalformedFile, where, file + ": truncated header");
    std::uint32_t len;
    std::memcpy(&len, bytes.data() + 8, 4);
    header_len = len;
    offset = 12;
  } else {
    throw Error(ErrorKind::MalformedFile, where, file + ": unsupported NPY version " + std::to_string(major));
  }
  if (bytes.size() < offset + header_len) throw Error(ErrorKind::MalformedFile, where, file + ": truncated header");
  const std::string header = bytes.substr(offset, header_len);
  if (header.find('{') == std::string::npos) throw Error(ErrorKind::MalformedFile, where, file + ": header is not a dict");

  RawArray raw;
  const std::string descr = header_field(header, "descr", file);
  if (descr == "<f4") raw.dtype = Dtype::F4;
  else if (descr == "<f8") raw.dtype = Dtype::F8;
  else if (descr == "<i4") raw.dtype = Dtype::I4;
  else if (descr == "<i8") raw.dtype = Dtype::I8;
  else throw Error(ErrorKind::UnsupportedDtype, where, file + ": dtype " + descr);

  if (header_field(header, "fortran_order", file) != "False")
    throw Error(ErrorKind::MalformedFile, where, file + ": fortran_order arrays are not supported");

  const std::string shape_text = header_field(header, "shape", file);
  if (shape_text.size() < 2 || shape_text.front() != '(')
    throw Error(ErrorKind::MalformedFile, where, file + ": bad shape");
  raw.shape = parse_shape(shape_text, file);

  const std::size_t count = Tensor<float>::element_count(raw.shape);
  const std::size_t need = count * item_size(raw.dtype);
  const std::size_t data_offset = offset + header_len;
  if (bytes.size() - data_offset < need)
    throw Error(ErrorKind::MalformedFile, where, file + ": payload shorter than shape implies");
  raw.payload = bytes.substr(data_offset, need);
  return raw;
}

template <typename Src>
std::vector<Src> decode(const std::string& payload)
{
  std::vector<Src> out(payload.size() / sizeof(Src));
  if (!out.empty()) std::memcpy(out.data(), payload.data(), payload.size());
  return out;
}

std::string shape_repr(const std::vector<std::size_t>& shape)
{
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  if (shape.size() == 1) s += ",";
  return s + ")";
}

template <typename T>
void write_raw(const std::filesystem::path& path, std::string_view descr, const Tensor<T>& t)
{
  if (Tensor<T>::element_count(t.shape) != t.data.size())
    throw Error(ErrorKind::ShapeMismatch, "tensor_store::write_tensor", "shape does not match data length");
  std::string header = "{'descr': '" + std::string(descr) + "', 'fortran_order': False, 'shape': " +
                       shape_repr(t.shape) + ", }";
  // magic(6) + version(2) + len(2) + header + '\n' padded to a multiple of 64
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');

  std::string out;
  out.reserve(10 + header.size() + t.data.size() * sizeof(T));
  out.append(kMagic, kMagicLen);
  out.push_back('\x01');
  out.push_back('\x00');
  const auto len = static_cast<std::uint16_t>(header.size());
  out.append(reinterpret_cast<const char*>(&len), 2);
  out += header;
  out.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(T));
  write_file_atomic(path, out);
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, std::string_view contents)
{
  constexpr std::string_view where = "tensor_store::write_tensor";
  auto partial = path;
  partial += ".partial";
  {
    std::ofstream out(partial, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoFailure, where, "cannot open " + partial.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw Error(ErrorKind::IoFailure, where, "write failed for " + partial.string());
  }
  std::error_code ec;
  std::filesystem::rename(partial, path, ec);
  if (ec) throw Error(ErrorKind::IoFailure, where, "rename to " + path.string() + " failed: " + ec.message());
}

AnyTensor read_tensor(const std::filesystem::path& path)
{
  constexpr std::string_view where = "tensor_store::read_tensor";
  RawArray raw = read_raw(path);
  switch (raw.dtype) {
    case Dtype::F4: {
      FloatTensor t;
      t.shape = raw.shape;
      t.data = decode<float>(raw.payload);
      return t;
    }
    case Dtype::I4: {
      IntTensor t;
      t.shape = raw.shape;
      t.data = decode<std::int32_t>(raw.payload);
      return t;
    }
    case Dtype::F8: {
      FloatTensor t;
      t.shape = raw.shape;
      const auto wide = decode<double>(raw.payload);
      t.data.resize(wide.size());
      for (std::size_t i = 0; i < wide.size(); ++i) {
        const double v = wide[i];
        if (std::isfinite(v) && std::abs(v) > std::numeric_limits<float>::max())
          throw Error(ErrorKind::UnsupportedDtype, where,
                      path.string() + ": f8 value overflows f32 at index " + std::to_string(i));
        t.data[i] = static_cast<float>(v);
      }
      return t;
    }
    case Dtype::I8: {
      IntTensor t;
      t.shape = raw.shape;
      const auto wide = decode<std::int64_t>(raw.payload);
      t.data.resize(wide.size());
      for (std::size_t i = 0; i < wide.size(); ++i) {
        const auto v = wide[i];
        if (v < std::numeric_limits<std::int32_t>::min() || v > std::numeric_limits<std::int32_t>::max())
          throw Error(ErrorKind::UnsupportedDtype, where,
                      path.string() + ": i8 value overflows i32 at index " + std::to_string(i));
        t.data[i] = static_cast<std::int32_t>(v);
      }
      return t;
    }
  }
  throw Error(ErrorKind::UnsupportedDtype, where, path.string());
}

Tensor<double> read_tensor_f64(const std::filesystem::path& path)
{
  RawArray raw = read_raw(path);
  Tensor<double> t;
  t.shape = raw.shape;
  if (raw.dtype == Dtype::F8) {
    t.data = decode<double>(raw.payload);
  } else if (raw.dtype == Dtype::F4) {
    const auto narrow = decode<float>(raw.payload);
    t.data.assign(narrow.begin(), narrow.end());
  } else {
    throw Error(ErrorKind::UnsupportedDtype, "tensor_store::read_tensor", path.string() + ": expected a float array");
  }
  return t;
}

void write_tensor(const std::filesystem::path& path, const FloatTensor& t) { write_raw(path, "<f4", t); }
void write_tensor(const std::filesystem::path& path, const IntTensor& t) { write_raw(path, "<i4", t); }
void write_tensor_f64(const std::filesystem::path& path, const Tensor<double>& t) { write_raw(path, "<f8", t); }

void write_tensor(const std::filesystem::path& path, const AnyTensor& t)
{
  std::visit([&](const auto& v) { write_tensor(path, v); }, t);
}

const FloatTensor& as_float(const AnyTensor& t, std::string_view what)
{
  if (const auto* f = std::get_if<FloatTensor>(&t)) return *f;
  throw Error(ErrorKind::UnsupportedDtype, "tensor_store::read_tensor", std::string(what) + " must be a float array");
}

const IntTensor& as_int(const AnyTensor& t, std::string_view what)
{
  if (const auto* i = std::get_if<IntTensor>(&t)) return *i;
  throw Error(ErrorKind::UnsupportedDtype, "tensor_store::read_tensor", std::string(what) + " must be an integer array");
}

}  // namespace openseg
