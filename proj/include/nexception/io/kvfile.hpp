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
#include <map>
#include <string>

namespace nex {

/// Flat "key = value" text. '#' starts a comment anywhere on a line; blank
/// lines are ignored and whitespace around keys and values is trimmed.
/// Duplicate keys throw ConfigError with the line number.
std::map<std::string, std::string> parse_kv(const std::string& text, const std::string& origin = "<text>");
std::map<std::string, std::string> read_kv_file(const std::filesystem::path& path);
void write_kv_file(const std::filesystem::path& path, const std::map<std::string, std::string>& kv,
                   const std::string& comment = {});

}  // namespace nex
