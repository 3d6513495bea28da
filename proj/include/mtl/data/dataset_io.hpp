// mtl/data/dataset_io.hpp

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

// On-disk dataset: <dir>/dataset.manifest.json + <dir>/dataset.bin.
//
// dataset.bin is a sequence of records, all integers u32 little-endian:
//
//   id_len, id bytes, conv_len, conversation bytes,
//   T, F, L,
//   features   T*F values, row-major, f64 or f32 per the manifest
//   ctc_labels L values
//   frame_labels T values (0xFFFFFFFF for every frame when absent)
//   A, then A alignment triples (label, start, end)
//
// The manifest records the format version, the feature dtype, the
// generating spec and an index entry {id, conversation, T, L, offset,
// nbytes} per record, sorted by id.

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtl/data/synthetic.hpp"
#include "mtl/model/checkpoint.hpp"

namespace mtl {

constexpr int kDatasetFormatVersion = 1;
constexpr std::uint32_t kNoFrameLabel = 0xFFFFFFFFu;

struct DatasetManifest {
  nlohmann::json spec;  // generator spec echo, may be null
  std::string feature_dtype = "f64";
  struct Entry {
    std::string id;
    std::string conversation;
    int frames = 0;
    int labels = 0;
    std::uint64_t offset = 0;
    std::uint64_t nbytes = 0;
  };
  std::vector<Entry> index;
};

namespace detail {

class ByteWriter {
 public:
  void u32(std::uint32_t v) { raw(&v, 4); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf.insert(buf.end(), b, b + n);
  }
  std::vector<std::uint8_t> buf;
};

class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size) : p_(data), end_(data + size) {}
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, 4);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(p_), n);
    p_ += n;
    return s;
  }
  void raw(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, p_, n);
    p_ += n;
  }
  void need(std::size_t n) const {
    if (static_cast<std::size_t>(end_ - p_) < n)
      throw LoadError("dataset: corrupt record (read past end of record)");
  }
  bool done() const { return p_ == end_; }

 private:
  const std::uint8_t* p_;
  const std::uint8_t* end_;
};

inline std::vector<std::uint8_t> encode_record(const UtteranceRecord& u, const std::string& dtype) {
  ByteWriter w;
  w.str(u.id);
  w.str(u.conversation_id);
  const auto T = static_cast<std::uint32_t>(u.features.rows());
  const auto F = static_cast<std::uint32_t>(u.features.cols());
  w.u32(T);
  w.u32(F);
  w.u32(static_cast<std::uint32_t>(u.ctc_labels.size()));
  if (dtype == "f64") {
    w.raw(u.features.data(), static_cast<std::size_t>(u.features.size()) * 8);
  } else {
    for (Eigen::Index i = 0; i < u.features.size(); ++i) {
      const float f = static_cast<float>(u.features.data()[i]);
      w.raw(&f, 4);
    }
  }
  for (int k : u.ctc_labels) w.u32(static_cast<std::uint32_t>(k));
  if (u.frame_labels.empty()) {
    for (std::uint32_t t = 0; t < T; ++t) w.u32(kNoFrameLabel);
  } else {
    if (u.frame_labels.size() != T) throw ConfigError("dataset: frame label count != T for " + u.id);
    for (int s : u.frame_labels) w.u32(static_cast<std::uint32_t>(s));
  }
  w.u32(static_cast<std::uint32_t>(u.alignment.size()));
  for (const auto& a : u.alignment) {
    w.u32(static_cast<std::uint32_t>(a.label));
    w.u32(static_cast<std::uint32_t>(a.start));
    w.u32(static_cast<std::uint32_t>(a.end));
  }
  return std::move(w.buf);
}

inline UtteranceRecord decode_record(const std::uint8_t* data, std::size_t size,
                                     const std::string& dtype) {
  ByteReader r(data, size);
  UtteranceRecord u;
  u.id = r.str();
  u.conversation_id = r.str();
  const std::uint32_t T = r.u32(), F = r.u32(), L = r.u32();
  const std::size_t n = static_cast<std::size_t>(T) * F;
  r.need(n * (dtype == "f64" ? 8 : 4));
  u.features.resize(T, F);
  if (dtype == "f64") {
    r.raw(u.features.data(), n * 8);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      float f;
      r.raw(&f, 4);
      u.features.data()[i] = f;
    }
  }
  u.ctc_labels.resize(L);
  for (auto& k : u.ctc_labels) k = static_cast<int>(r.u32());
  FrameLabels fl(T);
  bool any_missing = false;
  for (auto& s : fl) {
    const std::uint32_t v = r.u32();
    any_missing |= v == kNoFrameLabel;
    s = static_cast<int>(v);
  }
  if (!any_missing) u.frame_labels = std::move(fl);
  const std::uint32_t A = r.u32();
  for (std::uint32_t i = 0; i < A; ++i) {
    AlignmentSegment a;
    a.label = static_cast<int>(r.u32());
    a.start = static_cast<int>(r.u32());
    a.end = static_cast<int>(r.u32());
    u.alignment.push_back(a);
  }
  if (!r.done()) throw LoadError("dataset: corrupt record " + u.id + " (trailing bytes)");
  return u;
}

}  // namespace detail

inline std::string manifest_path(const std::string& dir) {
  return (std::filesystem::path(dir) / "dataset.manifest.json").string();
}

inline std::string bin_path(const std::string& dir) {
  return (std::filesystem::path(dir) / "dataset.bin").string();
}

/// Writes records in id order. `spec` is echoed verbatim into the manifest.
inline DatasetManifest save_dataset(const std::string& dir, std::vector<UtteranceRecord> records,
                                    const nlohmann::json& spec = nullptr,
                                    const std::string& dtype = "f64") {
  if (dtype != "f64" && dtype != "f32") throw ConfigError("dataset: dtype must be f64 or f32");
  std::filesystem::create_directories(dir);
  std::stable_sort(records.begin(), records.end(),
                   [](const auto& a, const auto& b) { return a.id < b.id; });
  DatasetManifest m;
  m.spec = spec;
  m.feature_dtype = dtype;
  std::ofstream bin(bin_path(dir), std::ios::binary | std::ios::trunc);
  if (!bin) throw Error("cannot write " + bin_path(dir));
  std::uint64_t offset = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& u = records[i];
    if (i > 0 && records[i - 1].id == u.id) throw ConfigError("dataset: duplicate id " + u.id);
    const auto bytes = detail::encode_record(u, dtype);
    bin.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    m.index.push_back({u.id, u.conversation_id, u.num_frames(),
                       static_cast<int>(u.ctc_labels.size()), offset, bytes.size()});
    offset += bytes.size();
  }
  if (!bin) throw Error("short write on " + bin_path(dir));

  nlohmann::json j;
  j["format_version"] = kDatasetFormatVersion;
  j["feature_dtype"] = dtype;
  j["spec"] = spec;
  j["num_utterances"] = m.index.size();
  nlohmann::json idx = nlohmann::json::array();
  for (const auto& e : m.index)
    idx.push_back({{"id", e.id},
                   {"conversation", e.conversation},
                   {"T", e.frames},
                   {"L", e.labels},
                   {"offset", e.offset},
                   {"nbytes", e.nbytes}});
  j["utterances"] = idx;
  std::ofstream man(manifest_path(dir), std::ios::trunc);
  if (!man) throw Error("cannot write " + manifest_path(dir));
  man << j.dump(1) << '\n';
  return m;
}

inline DatasetManifest load_manifest(const std::string& dir) {
  std::ifstream is(manifest_path(dir));
  if (!is) throw LoadError("dataset: cannot open " + manifest_path(dir));
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("dataset: corrupt manifest: ") + e.what());
  }
  if (j.value("format_version", -1) != kDatasetFormatVersion)
    throw LoadError(str_cat("dataset: format version ", j.value("format_version", -1),
                            " not supported (expected ", kDatasetFormatVersion, ")"));
  DatasetManifest m;
  m.spec = j.value("spec", nlohmann::json());
  m.feature_dtype = j.at("feature_dtype").get<std::string>();
  if (m.feature_dtype != "f64" && m.feature_dtype != "f32")
    throw LoadError("dataset: unknown feature dtype " + m.feature_dtype);
  for (const auto& e : j.at("utterances")) {
    m.index.push_back({e.at("id").get<std::string>(), e.at("conversation").get<std::string>(),
                       e.at("T").get<int>(), e.at("L").get<int>(),
                       e.at("offset").get<std::uint64_t>(), e.at("nbytes").get<std::uint64_t>()});
  }
  if (j.value("num_utterances", m.index.size()) != m.index.size())
    throw LoadError("dataset: corrupt index (count mismatch)");
  for (std::size_t i = 1; i < m.index.size(); ++i)
    if (!(m.index[i - 1].id < m.index[i].id))
      throw LoadError("dataset: corrupt index (ids not sorted)");
  return m;
}

struct Dataset {
  DatasetManifest manifest;
  std::vector<UtteranceRecord> records;
};

inline Dataset load_dataset(const std::string& dir) {
  Dataset d;
  d.manifest = load_manifest(dir);
  std::ifstream is(bin_path(dir), std::ios::binary);
  if (!is) throw LoadError("dataset: cannot open " + bin_path(dir));
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(is)),
                                 std::istreambuf_iterator<char>());
  std::uint64_t expect = 0;
  for (const auto& e : d.manifest.index) {
    if (e.offset != expect || e.offset + e.nbytes > data.size())
      throw LoadError(str_cat("dataset: corrupt index at ", e.id, " (offset ", e.offset, "+",
                              e.nbytes, " vs file size ", data.size(), ")"));
    UtteranceRecord u = detail::decode_record(data.data() + e.offset,
                                              static_cast<std::size_t>(e.nbytes),
                                              d.manifest.feature_dtype);
    if (u.id != e.id || u.num_frames() != e.frames ||
        static_cast<int>(u.ctc_labels.size()) != e.labels)
      throw LoadError("dataset: corrupt index, record does not match entry " + e.id);
    d.records.push_back(std::move(u));
    expect = e.offset + e.nbytes;
  }
  if (expect != data.size()) throw LoadError("dataset: trailing bytes after last record");
  return d;
}

}  // namespace mtl
