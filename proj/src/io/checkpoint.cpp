// Copyright (c) 2026 NEXcepTion Toolkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "nexception/io/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace nex {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'N', 'E', 'X', 'C', 'K', 'P', 'T', '\n'};

template <typename U>
void put_le(std::string& out, U v) {
  for (size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(const uint8_t* p) {
  U v = 0;
  for (size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

struct Container {
  json manifest;
  std::vector<uint8_t> blob;
};

Container read_container(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < kCheckpointHeaderBytes || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw FormatError(path.string() + ": not a checkpoint container");
  }
  const auto version = get_le<uint32_t>(bytes.data() + 8);
  if (version != kCheckpointVersion) {
    throw FormatError(path.string() + ": unsupported container version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  const auto mlen = get_le<uint64_t>(bytes.data() + 12);
  if (mlen > bytes.size() - kCheckpointHeaderBytes) throw FormatError(path.string() + ": truncated manifest");
  Container c;
  try {
    c.manifest = json::parse(bytes.begin() + kCheckpointHeaderBytes,
                             bytes.begin() + static_cast<std::ptrdiff_t>(kCheckpointHeaderBytes + mlen));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": manifest is not valid JSON (" + e.what() + ")");
  }
  c.blob.assign(bytes.begin() + static_cast<std::ptrdiff_t>(kCheckpointHeaderBytes + mlen), bytes.end());
  if (!c.manifest.contains("params") || !c.manifest["params"].is_array()) {
    throw FormatError(path.string() + ": manifest has no parameter table");
  }
  const uint64_t declared = c.manifest.value("blob_bytes", uint64_t{0});
  if (declared != c.blob.size()) {
    throw FormatError(path.string() + ": blob holds " + std::to_string(c.blob.size()) + " bytes, manifest declares " +
                      std::to_string(declared));
  }
  for (const auto& e : c.manifest["params"]) {
    const std::string name = e.value("name", std::string("?"));
    const auto off = e.value("offset", uint64_t{0});
    const auto len = e.value("length", uint64_t{0});
    const Shape shape = e.value("shape", Shape{});
    if (e.value("dtype", std::string()) != "float32") throw FormatError("parameter " + name + ": dtype must be float32");
    if (len != static_cast<uint64_t>(shape_numel(shape)) * 4) {
      throw FormatError("parameter " + name + ": byte length does not match shape " + shape_str(shape));
    }
    if (off % 4 != 0 || off > c.blob.size() || len > c.blob.size() - off) {
      throw FormatError("parameter " + name + ": extent [" + std::to_string(off) + ", +" + std::to_string(len) +
                        ") lies outside the blob");
    }
  }
  return c;
}

ModelOptions options_from(const json& j) {
  ModelOptions o;
  o.num_classes = j.at("num_classes").get<int64_t>();
  o.input_hw = j.at("input_hw").get<int64_t>();
  o.nas_width = j.value("nas_width", o.nas_width);
  o.drop_path = j.value("drop_path", 0.0);
  o.seed = j.value("seed", uint64_t{0});
  return o;
}

void load_values(ModelGraph& model, const Container& c) {
  std::map<std::string, const json*> table;
  for (const auto& e : c.manifest["params"]) table[e.at("name").get<std::string>()] = &e;
  for (Parameter* p : model.parameters()) {
    auto it = table.find(p->name);
    if (it == table.end()) throw FormatError("checkpoint lacks parameter " + p->name);
    const json& e = *it->second;
    const Shape shape = e.at("shape").get<Shape>();
    if (shape != p->value.shape()) {
      throw FormatError("parameter " + p->name + ": checkpoint shape " + shape_str(shape) + " vs model " +
                        shape_str(p->value.shape()));
    }
    const uint8_t* src = c.blob.data() + e.at("offset").get<uint64_t>();
    const int64_t n = p->value.numel();
    dispatch_dtype(p->value.dtype(), [&]<typename T>() {
      auto dst = p->value.template data<T>();
      for (int64_t i = 0; i < n; ++i) dst[static_cast<size_t>(i)] = static_cast<T>(std::bit_cast<float>(get_le<uint32_t>(src + 4 * i)));
    });
    table.erase(it);
  }
  if (!table.empty()) throw FormatError("checkpoint has unknown parameter " + table.begin()->first);
}

}  // namespace

void save_checkpoint(ModelGraph& model, const fs::path& path, const json& extra) {
  json manifest;
  manifest["format"] = "nexception-checkpoint";
  manifest["version"] = kCheckpointVersion;
  manifest["arch"] = model.arch();
  manifest["config"] = model.config() ? json(model.config()->to_map()) : json(nullptr);
  const auto& o = model.options();
  manifest["options"] = {{"num_classes", o.num_classes}, {"input_hw", o.input_hw}, {"nas_width", o.nas_width},
                         {"drop_path", o.drop_path}, {"seed", o.seed}};
  std::string blob;
  auto& table = manifest["params"] = json::array();
  for (Parameter* p : model.parameters()) {
    const uint64_t offset = blob.size();
    for (double v : p->value.to_vector()) put_le<uint32_t>(blob, std::bit_cast<uint32_t>(static_cast<float>(v)));
    table.push_back({{"name", p->name}, {"shape", p->value.shape()}, {"dtype", "float32"}, {"offset", offset},
                     {"length", blob.size() - offset}, {"trainable", p->trainable}});
  }
  manifest["blob_bytes"] = blob.size();
  if (!extra.is_null()) manifest["meta"] = extra;
  const std::string text = manifest.dump();
  std::string header(kMagic, 8);
  put_le<uint32_t>(header, kCheckpointVersion);
  put_le<uint64_t>(header, text.size());

  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write checkpoint " + path.string());
    out << header << text << blob;
    if (!out) throw FormatError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

json read_checkpoint_manifest(const fs::path& path) { return read_container(path).manifest; }

std::unique_ptr<ModelGraph> load_checkpoint(const fs::path& path) {
  Container c = read_container(path);
  const std::string arch = c.manifest.value("arch", std::string());
  ModelOptions opt;
  ArchConfig cfg;
  try {
    opt = options_from(c.manifest.at("options"));
    if (c.manifest.contains("config") && !c.manifest["config"].is_null()) {
      cfg = ArchConfig::from_map(c.manifest["config"].get<std::map<std::string, std::string>>());
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": malformed model options (" + e.what() + ")");
  }
  auto model = build_variant(arch, opt, &cfg);
  load_values(*model, c);
  return model;
}

void load_checkpoint_into(ModelGraph& model, const fs::path& path) { load_values(model, read_container(path)); }

}  // namespace nex
