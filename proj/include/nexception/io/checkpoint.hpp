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

#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "json.hpp"
#include "nexception/io/dataset.hpp"
#include "nexception/model.hpp"

namespace nex {

// Container layout, all integers little-endian:
//   bytes 0..7    magic "NEXCKPT\n"
//   bytes 8..11   u32 format version
//   bytes 12..19  u64 manifest length M
//   next M bytes  UTF-8 JSON manifest
//   remainder     blob of float32 values
// Every manifest entry records name, shape, dtype, byte offset and byte
// length relative to the blob start.
inline constexpr uint32_t kCheckpointVersion = 1;
inline constexpr size_t kCheckpointHeaderBytes = 20;

/// Writes every parameter (trainable or not) as float32. `extra` is stored
/// under the manifest key "meta".
void save_checkpoint(ModelGraph& model, const std::filesystem::path& path, const nlohmann::json& extra = {});

/// Parses and validates the manifest only.
nlohmann::json read_checkpoint_manifest(const std::filesystem::path& path);

/// Rebuilds the architecture recorded in the manifest and loads its values.
std::unique_ptr<ModelGraph> load_checkpoint(const std::filesystem::path& path);

/// Loads values into an already built model with matching parameter names.
void load_checkpoint_into(ModelGraph& model, const std::filesystem::path& path);

}  // namespace nex
