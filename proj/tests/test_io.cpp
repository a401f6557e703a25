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

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "doctest.h"
#include "openseg/error.hpp"
#include "openseg/npy.hpp"
#include "openseg/scene.hpp"
#include "openseg/synth.hpp"
#include "oracles.hpp"

using namespace openseg;
namespace fs = std::filesystem;

namespace {

std::vector<unsigned char> slurp(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const fs::path& p, const std::vector<unsigned char>& bytes)
{
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// Hand-built v1.0 file.
std::vector<unsigned char> npy_bytes(const std::string& descr, const std::string& shape, const std::vector<unsigned char>& payload,
                                     int major = 1)
{
  std::string header = "{'descr': '" + descr + "', 'fortran_order': False, 'shape': " + shape + ", }";
  const std::size_t pre = major == 1 ? 10 : 12;
  while ((pre + header.size() + 1) % 64 != 0) header += ' ';
  header += '\n';
  std::vector<unsigned char> b{0x93, 'N', 'U', 'M', 'P', 'Y', static_cast<unsigned char>(major), 0};
  if (major == 1) {
    b.push_back(static_cast<unsigned char>(header.size() & 0xff));
    b.push_back(static_cast<unsigned char>(header.size() >> 8));
  } else {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>((header.size() >> (8 * i)) & 0xff));
  }
  b.insert(b.end(), header.begin(), header.end());
  b.insert(b.end(), payload.begin(), payload.end());
  return b;
}

template <typename T>
std::vector<unsigned char> le_bytes(const std::vector<T>& v)
{
  std::vector<unsigned char> out(v.size() * sizeof(T));
  std::memcpy(out.data(), v.data(), out.size());
  return out;
}

}  // namespace

TEST_CASE("npy roundtrip of a 2x3 float tensor")
{
  const auto dir = oracle::scratch("npy_rt");
  FloatTensor t({2, 3}, 7.0f);
  write_tensor(dir / "a.npy", t);
  const auto back = as_float(read_tensor(dir / "a.npy"), "a");
  CHECK(back == t);
  CHECK_FALSE(fs::exists(dir / "a.npy.partial"));
}

TEST_CASE("npy 3.5 payload bytes")
{
  const auto dir = oracle::scratch("npy_35");
  write_tensor(dir / "x.npy", FloatTensor({1, 1}, 3.5f));
  const auto bytes = slurp(dir / "x.npy");
  REQUIRE(bytes.size() >= 4);
  CHECK(bytes.size() % 64 == 4);  // header padded to 64, then 4 payload bytes
  const std::vector<unsigned char> tail(bytes.end() - 4, bytes.end());
  CHECK(tail == std::vector<unsigned char>{0x00, 0x00, 0x60, 0x40});
  CHECK(bytes[6] == 1);
  CHECK(bytes[7] == 0);
}

TEST_CASE("npy NaN payload survives")
{
  const auto dir = oracle::scratch("npy_nan");
  FloatTensor t({3});
  t.data[0] = std::bit_cast<float>(0x7fc00123u);
  t.data[1] = std::bit_cast<float>(0xffa00001u);
  t.data[2] = -0.0f;
  write_tensor(dir / "n.npy", t);
  const auto back = as_float(read_tensor(dir / "n.npy"), "n");
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::bit_cast<std::uint32_t>(back.data[i]) == std::bit_cast<std::uint32_t>(t.data[i]));
}

TEST_CASE("npy zero-size dimension")
{
  const auto dir = oracle::scratch("npy_zero");
  write_tensor(dir / "z.npy", FloatTensor({3, 0, 4}));
  const auto back = as_float(read_tensor(dir / "z.npy"), "z");
  CHECK(back.shape == std::vector<std::size_t>{3, 0, 4});
  CHECK(back.data.empty());
}

TEST_CASE("npy int32 roundtrip and 1-d shape")
{
  const auto dir = oracle::scratch("npy_int");
  IntTensor t({5});
  for (int i = 0; i < 5; ++i) t.data[static_cast<std::size_t>(i)] = i * 1000 - 2000;
  write_tensor(dir / "i.npy", t);
  CHECK(as_int(read_tensor(dir / "i.npy"), "i") == t);
  CHECK_THROWS_AS(as_float(read_tensor(dir / "i.npy"), "i"), Error);
}

TEST_CASE("npy reads hand-built f8 / i8 / v2 files")
{
  const auto dir = oracle::scratch("npy_hand");
  dump(dir / "f8.npy", npy_bytes("<f8", "(2,)", le_bytes(std::vector<double>{1.5, -2.25})));
  const auto f = as_float(read_tensor(dir / "f8.npy"), "f8");
  CHECK(f.data == std::vector<float>{1.5f, -2.25f});

  dump(dir / "i8.npy", npy_bytes("<i8", "(1, 2)", le_bytes(std::vector<std::int64_t>{-7, 9})));
  CHECK(as_int(read_tensor(dir / "i8.npy"), "i8").data == std::vector<std::int32_t>{-7, 9});

  dump(dir / "big.npy", npy_bytes("<i8", "(1,)", le_bytes(std::vector<std::int64_t>{std::int64_t{1} << 40})));
  CHECK_THROWS_AS(read_tensor(dir / "big.npy"), Error);

  dump(dir / "v2.npy", npy_bytes("<f4", "(2, 1)", le_bytes(std::vector<float>{4.0f, 5.0f}), 2));
  CHECK(as_float(read_tensor(dir / "v2.npy"), "v2").shape == std::vector<std::size_t>{2, 1});

  dump(dir / "f8wide.npy", npy_bytes("<f8", "(1,)", le_bytes(std::vector<double>{1e300})));
  CHECK_THROWS_AS(read_tensor(dir / "f8wide.npy"), Error);
}

TEST_CASE("npy malformed inputs")
{
  const auto dir = oracle::scratch("npy_bad");
  auto kind_of = [](const fs::path& p) {
    try {
      read_tensor(p);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::ConfigError;
  };
  auto good = npy_bytes("<f4", "(1,)", le_bytes(std::vector<float>{1.0f}));
  auto bad_magic = good;
  bad_magic[1] = 'X';
  dump(dir / "magic.npy", bad_magic);
  CHECK(kind_of(dir / "magic.npy") == ErrorKind::MalformedFile);

  dump(dir / "u8.npy", npy_bytes("|u1", "(1,)", {1}));
  CHECK(kind_of(dir / "u8.npy") == ErrorKind::UnsupportedDtype);

  dump(dir / "be.npy", npy_bytes(">f4", "(1,)", {0, 0, 0, 0}));
  CHECK(kind_of(dir / "be.npy") == ErrorKind::UnsupportedDtype);

  auto shortp = good;
  shortp.pop_back();
  dump(dir / "short.npy", shortp);
  CHECK(kind_of(dir / "short.npy") == ErrorKind::MalformedFile);

  CHECK(kind_of(dir / "absent.npy") == ErrorKind::IoFailure);
}

TEST_CASE("npy write to an unwritable place fails with IoFailure")
{
  const auto dir = oracle::scratch("npy_unwritable");
  std::ofstream(dir / "file") << "x";
  try {
    write_tensor(dir / "file" / "sub.npy", FloatTensor({1}));
    FAIL("expected IoFailure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::IoFailure);
  }
}

TEST_CASE("scene roundtrip through disk")
{
  const auto dir = oracle::scratch("scene_rt");
  SynthConfig cfg;
  cfg.height = cfg.width = 16;
  cfg.seed = 3;
  const Scene s = generate_scene(cfg, 1);
  write_scene(dir / "s", s);
  const Scene back = read_scene(dir / "s");
  CHECK(back == s);
  CHECK(list_scene_dirs(dir) == std::vector<fs::path>{dir / "s"});
  CHECK(list_scene_dirs(dir / "s") == std::vector<fs::path>{dir / "s"});
}

TEST_CASE("scene validation errors")
{
  SynthConfig cfg;
  cfg.height = cfg.width = 8;
  Scene s = generate_scene(cfg);
  auto kind_of = [](const Scene& sc) {
    try {
      validate_scene(sc);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::ConfigError;
  };
  CHECK(kind_of(s) == ErrorKind::ConfigError);  // valid

  Scene bad_scale = s;
  bad_scale.layers[1].scale = 4;
  CHECK(kind_of(bad_scale) == ErrorKind::ShapeMismatch);

  Scene bad_label = s;
  bad_label.labels(0, 0) = 9;
  CHECK(kind_of(bad_label) == ErrorKind::LabelOutOfRange);

  Scene bad_logits = s;
  bad_logits.logits = FloatTensor({5, 4, 8});
  CHECK(kind_of(bad_logits) == ErrorKind::ShapeMismatch);
}

TEST_CASE("scene manifest errors")
{
  const auto dir = oracle::scratch("scene_bad");
  CHECK_THROWS_AS(read_scene(dir), Error);
  try {
    read_scene(dir);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ManifestMissing);
  }
  std::ofstream(dir / "scene.json") << "{ not json";
  try {
    read_scene(dir);
    FAIL("expected ManifestMissing");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ManifestMissing);
  }
}

TEST_CASE("error message names module and operation")
{
  const Error e(ErrorKind::ShapeMismatch, "tensor_store::read_scene", "layer 2");
  CHECK(std::string(e.what()).find("tensor_store::read_scene") != std::string::npos);
  CHECK(std::string(e.what()).find("ShapeMismatch") != std::string::npos);
  CHECK(e.where() == "tensor_store::read_scene");
}
