// mtl/model/checkpoint.hpp

// Copyright 2026  The mtl-ctc Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Checkpoint container layout:
//
//   bytes 0..7    magic "MTLCKPT1"
//   bytes 8..15   u64 little-endian manifest length N
//   bytes 16..    N bytes of JSON manifest
//   then          tensor payloads, raw little-endian, back to back
//
// The manifest holds the format version, the epoch index, the generator
// state, a free-form config echo, and one entry per tensor:
// {name, shape: [rows, cols], dtype: "f64"|"f32", offset, nbytes}, offsets
// counted from the start of the payload area.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtl/core/base.hpp"

namespace mtl {

static_assert(std::endian::native == std::endian::little,
              "checkpoint and dataset payloads are written in host order");

struct TensorBlob {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::string dtype;  // "f64" or "f32"
  std::vector<std::uint8_t> bytes;
};

template <typename Real>
constexpr const char* dtype_name() {
  return sizeof(Real) == 8 ? "f64" : "f32";
}

class Checkpoint {
 public:
  static constexpr int kFormatVersion = 1;
  static constexpr char kMagic[9] = "MTLCKPT1";

  nlohmann::json config = nlohmann::json::object();
  int epoch = 0;
  std::string rng_state;

  template <typename Real>
  void put(const Parameter<Real>& p) {
    if (index_.count(p.name)) throw InternalError("checkpoint: duplicate tensor " + p.name);
    TensorBlob b;
    b.name = p.name;
    b.rows = p.value.rows();
    b.cols = p.value.cols();
    b.dtype = dtype_name<Real>();
    b.bytes.resize(static_cast<std::size_t>(p.value.size()) * sizeof(Real));
    std::memcpy(b.bytes.data(), p.value.data(), b.bytes.size());
    index_[b.name] = tensors_.size();
    tensors_.push_back(std::move(b));
  }

  template <typename Real>
  void put_all(const ParamRefs<Real>& params) {
    for (const auto* p : params) put(*p);
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  const TensorBlob& blob(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw LoadError("checkpoint: no tensor named " + name);
    return tensors_[it->second];
  }

  const std::vector<TensorBlob>& tensors() const { return tensors_; }

  /// Copies a stored tensor into `p`, converting precision if needed.
  template <typename Real>
  void get_into(Parameter<Real>& p) const {
    const TensorBlob& b = blob(p.name);
    if (b.rows != p.value.rows() || b.cols != p.value.cols())
      throw LoadError(str_cat("checkpoint: tensor ", p.name, " has shape ", b.rows, "x", b.cols,
                              ", model expects ", p.value.rows(), "x", p.value.cols()));
    copy_blob(b, p.value);
  }

  template <typename Real>
  static void copy_blob(const TensorBlob& b, Matrix<Real>& dst) {
    dst.resize(b.rows, b.cols);
    const std::size_t n = static_cast<std::size_t>(b.rows * b.cols);
    if (b.dtype == dtype_name<Real>()) {
      std::memcpy(dst.data(), b.bytes.data(), n * sizeof(Real));
    } else if (b.dtype == "f64") {
      std::vector<double> tmp(n);
      std::memcpy(tmp.data(), b.bytes.data(), n * sizeof(double));
      for (std::size_t i = 0; i < n; ++i) dst.data()[i] = static_cast<Real>(tmp[i]);
    } else if (b.dtype == "f32") {
      std::vector<float> tmp(n);
      std::memcpy(tmp.data(), b.bytes.data(), n * sizeof(float));
      for (std::size_t i = 0; i < n; ++i) dst.data()[i] = static_cast<Real>(tmp[i]);
    } else {
      throw LoadError("checkpoint: unknown dtype " + b.dtype);
    }
  }

  template <typename Real>
  void get_all(const ParamRefs<Real>& params) const {
    for (auto* p : params) get_into(*p);
  }

  std::vector<std::uint8_t> serialize() const {
    nlohmann::json manifest;
    manifest["format_version"] = kFormatVersion;
    manifest["epoch"] = epoch;
    manifest["rng_state"] = rng_state;
    manifest["config"] = config;
    nlohmann::json entries = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& t : tensors_) {
      entries.push_back({{"name", t.name},
                         {"shape", {t.rows, t.cols}},
                         {"dtype", t.dtype},
                         {"offset", offset},
                         {"nbytes", t.bytes.size()}});
      offset += t.bytes.size();
    }
    manifest["tensors"] = entries;
    const std::string text = manifest.dump();

    std::vector<std::uint8_t> out(8 + 8);
    std::memcpy(out.data(), kMagic, 8);
    const std::uint64_t len = text.size();
    std::memcpy(out.data() + 8, &len, 8);
    out.insert(out.end(), text.begin(), text.end());
    for (const auto& t : tensors_) out.insert(out.end(), t.bytes.begin(), t.bytes.end());
    return out;
  }

  static Checkpoint deserialize(const std::vector<std::uint8_t>& data) {
    if (data.size() < 16 || std::memcmp(data.data(), kMagic, 8) != 0)
      throw LoadError("checkpoint: bad magic");
    std::uint64_t len;
    std::memcpy(&len, data.data() + 8, 8);
    if (len > data.size() - 16) throw LoadError("checkpoint: truncated manifest");
    nlohmann::json manifest;
    try {
      manifest = nlohmann::json::parse(data.begin() + 16, data.begin() + 16 +
                                                              static_cast<std::ptrdiff_t>(len));
    } catch (const nlohmann::json::exception& e) {
      throw LoadError(std::string("checkpoint: corrupt manifest: ") + e.what());
    }
    if (manifest.value("format_version", -1) != kFormatVersion)
      throw LoadError("checkpoint: unsupported format version");
    Checkpoint c;
    c.epoch = manifest.at("epoch").get<int>();
    c.rng_state = manifest.at("rng_state").get<std::string>();
    c.config = manifest.at("config");
    const std::size_t base = 16 + static_cast<std::size_t>(len);
    for (const auto& e : manifest.at("tensors")) {
      TensorBlob b;
      b.name = e.at("name").get<std::string>();
      b.rows = e.at("shape").at(0).get<Eigen::Index>();
      b.cols = e.at("shape").at(1).get<Eigen::Index>();
      b.dtype = e.at("dtype").get<std::string>();
      const std::size_t off = e.at("offset").get<std::size_t>();
      const std::size_t nbytes = e.at("nbytes").get<std::size_t>();
      const std::size_t elem = b.dtype == "f64" ? 8 : b.dtype == "f32" ? 4 : 0;
      if (elem == 0) throw LoadError("checkpoint: unknown dtype " + b.dtype);
      if (nbytes != static_cast<std::size_t>(b.rows * b.cols) * elem ||
          base + off + nbytes > data.size())
        throw LoadError("checkpoint: tensor " + b.name + " exceeds file bounds");
      b.bytes.assign(data.begin() + static_cast<std::ptrdiff_t>(base + off),
                     data.begin() + static_cast<std::ptrdiff_t>(base + off + nbytes));
      if (c.index_.count(b.name)) throw LoadError("checkpoint: duplicate tensor " + b.name);
      c.index_[b.name] = c.tensors_.size();
      c.tensors_.push_back(std::move(b));
    }
    return c;
  }

  void save(const std::string& path) const {
    const auto bytes = serialize();
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write checkpoint " + path);
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    if (!os) throw Error("short write on checkpoint " + path);
  }

  static Checkpoint load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw LoadError("cannot open checkpoint " + path);
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
    return deserialize(data);
  }

 private:
  std::vector<TensorBlob> tensors_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace mtl
