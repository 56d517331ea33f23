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

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nexception/tensor.hpp"

namespace nex {

/// Malformed files: wrong record size, bad magic, truncated payload.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 8-bit RGB image in HWC order.
struct Image {
  int64_t height = 0;
  int64_t width = 0;
  std::vector<uint8_t> pixels;

  uint8_t& at(int64_t y, int64_t x, int c) { return pixels[static_cast<size_t>((y * width + x) * 3 + c)]; }
  uint8_t at(int64_t y, int64_t x, int c) const { return pixels[static_cast<size_t>((y * width + x) * 3 + c)]; }
  bool operator==(const Image&) const = default;
};

/// Square RGB images of one resolution with integer labels.
struct Dataset {
  std::string name;
  std::string split;
  int64_t hw = 32;
  int64_t num_classes = 0;
  std::vector<uint8_t> images;  // size() * hw * hw * 3, HWC per record
  std::vector<int32_t> labels;
  // Per-channel normalisation in [0, 1] pixel units.
  std::array<double, 3> mean{0.5, 0.5, 0.5};
  std::array<double, 3> std{0.25, 0.25, 0.25};

  size_t size() const { return labels.size(); }
  int64_t image_bytes() const { return hw * hw * 3; }
  Image image(size_t i) const;
  /// Throws FormatError if a label or the pixel buffer is inconsistent.
  void validate() const;
  Dataset subset(std::span<const size_t> indices) const;
};

enum class CifarVariant { kCifar10, kCifar100 };

/// Bytes per binary record: label byte(s) plus 3072 channel-planar pixels.
int64_t cifar_record_bytes(CifarVariant variant);

/// Parses one distributor binary file. CIFAR-100 records carry a coarse and
/// a fine label; the fine label is used.
Dataset load_cifar_file(const std::filesystem::path& file, CifarVariant variant);

/// Accepts a single file or the extracted directory (train.bin/test.bin for
/// CIFAR-100, data_batch_1..5.bin/test_batch.bin for CIFAR-10).
Dataset load_cifar(const std::filesystem::path& path, CifarVariant variant, const std::string& split = "train");

/// Writes records in the distributor layout (used by tests and fixtures).
void write_cifar_file(const std::filesystem::path& file, const Dataset& data, CifarVariant variant);

struct SyntheticSpec {
  int64_t num_classes = 10;
  int64_t per_class = 32;
  int64_t hw = 32;
  double noise = 40.0;  // pixel-level Gaussian std
  uint64_t seed = 0;
  std::string split = "train";
};

/// Class-coloured noise: each class has a seeded base colour and a seeded
/// horizontal or vertical gradient; samples add Gaussian pixel noise.
/// Labels cycle through the classes so every prefix is near balanced.
Dataset synthetic_dataset(const SyntheticSpec& spec);

/// Deterministic shuffle then split; the second part has
/// round(size * holdout) records.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double holdout, uint64_t seed);

/// Stacks images into a normalised [N, 3, H, W] tensor.
Tensor to_tensor(std::span<const Image> images, const std::array<double, 3>& mean,
                 const std::array<double, 3>& std, DType dtype = DType::kFloat32);

}  // namespace nex
