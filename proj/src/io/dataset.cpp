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

#include "nexception/io/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace nex {

namespace fs = std::filesystem;

Image Dataset::image(size_t i) const {
  if (i >= size()) throw ConfigError("dataset index " + std::to_string(i) + " out of range");
  Image img{hw, hw, {}};
  const auto n = static_cast<size_t>(image_bytes());
  img.pixels.assign(images.begin() + static_cast<std::ptrdiff_t>(i * n),
                    images.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
  return img;
}

void Dataset::validate() const {
  if (images.size() != size() * static_cast<size_t>(image_bytes())) {
    throw FormatError(name + ": pixel buffer does not match " + std::to_string(size()) + " records");
  }
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw FormatError(name + ": label " + std::to_string(labels[i]) + " at record " + std::to_string(i) +
                        " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

Dataset Dataset::subset(std::span<const size_t> indices) const {
  Dataset out = *this;
  out.images.clear();
  out.labels.clear();
  const auto n = static_cast<size_t>(image_bytes());
  out.images.reserve(indices.size() * n);
  for (size_t i : indices) {
    if (i >= size()) throw ConfigError("subset index out of range");
    out.images.insert(out.images.end(), images.begin() + static_cast<std::ptrdiff_t>(i * n),
                      images.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
    out.labels.push_back(labels[i]);
  }
  return out;
}

int64_t cifar_record_bytes(CifarVariant variant) { return variant == CifarVariant::kCifar100 ? 3074 : 3073; }

namespace {

void set_cifar_defaults(Dataset& d, CifarVariant variant) {
  if (variant == CifarVariant::kCifar100) {
    d.num_classes = 100;
    d.mean = {0.5071, 0.4865, 0.4409};
    d.std = {0.2673, 0.2564, 0.2762};
  } else {
    d.num_classes = 10;
    d.mean = {0.4914, 0.4822, 0.4465};
    d.std = {0.2470, 0.2435, 0.2616};
  }
  d.hw = 32;
}

void append_cifar(Dataset& d, const fs::path& file, CifarVariant variant) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw FormatError("cannot open " + file.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto rec = static_cast<size_t>(cifar_record_bytes(variant));
  if (bytes.empty() || bytes.size() % rec != 0) {
    throw FormatError(file.string() + ": size " + std::to_string(bytes.size()) + " is not a positive multiple of " +
                      std::to_string(rec) + " bytes");
  }
  const size_t labels = rec - 3072;
  const size_t count = bytes.size() / rec;
  d.labels.reserve(d.labels.size() + count);
  d.images.reserve(d.images.size() + count * 3072);
  for (size_t r = 0; r < count; ++r) {
    const uint8_t* p = bytes.data() + r * rec;
    const int32_t label = p[labels - 1];  // fine label for CIFAR-100
    if (label >= d.num_classes) {
      throw FormatError(file.string() + ": record " + std::to_string(r) + " has label " + std::to_string(label));
    }
    d.labels.push_back(label);
    const uint8_t* px = p + labels;
    for (int i = 0; i < 1024; ++i) {
      for (int c = 0; c < 3; ++c) d.images.push_back(px[c * 1024 + i]);
    }
  }
}

}  // namespace

Dataset load_cifar_file(const fs::path& file, CifarVariant variant) {
  Dataset d;
  d.name = file.filename().string();
  d.split = "file";
  set_cifar_defaults(d, variant);
  append_cifar(d, file, variant);
  return d;
}

Dataset load_cifar(const fs::path& path, CifarVariant variant, const std::string& split) {
  if (split != "train" && split != "test") throw ConfigError("split must be train or test, got " + split);
  if (!fs::exists(path)) throw ConfigError("dataset path does not exist: " + path.string());
  Dataset d;
  d.name = variant == CifarVariant::kCifar100 ? "cifar100" : "cifar10";
  d.split = split;
  set_cifar_defaults(d, variant);
  if (fs::is_regular_file(path)) {
    append_cifar(d, path, variant);
    return d;
  }
  std::vector<fs::path> files;
  if (variant == CifarVariant::kCifar100) {
    files.push_back(path / (split + ".bin"));
  } else if (split == "train") {
    for (int i = 1; i <= 5; ++i) files.push_back(path / ("data_batch_" + std::to_string(i) + ".bin"));
  } else {
    files.push_back(path / "test_batch.bin");
  }
  for (const auto& f : files) {
    if (!fs::exists(f)) throw ConfigError("missing dataset file " + f.string());
    append_cifar(d, f, variant);
  }
  return d;
}

void write_cifar_file(const fs::path& file, const Dataset& data, CifarVariant variant) {
  if (data.hw != 32) throw ConfigError("CIFAR records are 32x32");
  std::ofstream out(file, std::ios::binary);
  if (!out) throw FormatError("cannot write " + file.string());
  std::vector<uint8_t> rec(static_cast<size_t>(cifar_record_bytes(variant)));
  const size_t labels = rec.size() - 3072;
  for (size_t r = 0; r < data.size(); ++r) {
    std::fill(rec.begin(), rec.end(), 0);
    rec[labels - 1] = static_cast<uint8_t>(data.labels[r]);
    const uint8_t* px = data.images.data() + r * 3072;
    for (int i = 0; i < 1024; ++i) {
      for (int c = 0; c < 3; ++c) rec[labels + static_cast<size_t>(c * 1024 + i)] = px[i * 3 + c];
    }
    out.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
  }
}

Dataset synthetic_dataset(const SyntheticSpec& spec) {
  if (spec.num_classes < 1 || spec.per_class < 1 || spec.hw < 1) throw ConfigError("synthetic: sizes must be positive");
  Rng rng(spec.seed);
  std::uniform_real_distribution<double> colour(30.0, 225.0);
  std::bernoulli_distribution coin(0.5);
  struct ClassStyle {
    std::array<double, 3> base;
    bool vertical;
    double slope;
  };
  std::vector<ClassStyle> styles(static_cast<size_t>(spec.num_classes));
  for (auto& s : styles) {
    for (auto& c : s.base) c = colour(rng);
    s.vertical = coin(rng);
    s.slope = coin(rng) ? 40.0 : -40.0;
  }
  Dataset d;
  d.name = "synthetic";
  d.split = spec.split;
  d.hw = spec.hw;
  d.num_classes = spec.num_classes;
  const int64_t total = spec.num_classes * spec.per_class;
  d.images.reserve(static_cast<size_t>(total * d.image_bytes()));
  std::normal_distribution<double> noise(0.0, spec.noise);
  for (int64_t i = 0; i < total; ++i) {
    const auto label = static_cast<int32_t>(i % spec.num_classes);
    const auto& s = styles[static_cast<size_t>(label)];
    d.labels.push_back(label);
    for (int64_t y = 0; y < spec.hw; ++y) {
      for (int64_t x = 0; x < spec.hw; ++x) {
        const double t = static_cast<double>(s.vertical ? y : x) / static_cast<double>(std::max<int64_t>(1, spec.hw - 1));
        for (int c = 0; c < 3; ++c) {
          const double v = s.base[static_cast<size_t>(c)] + s.slope * (t - 0.5) + noise(rng);
          d.images.push_back(static_cast<uint8_t>(std::clamp(std::lround(v), 0L, 255L)));
        }
      }
    }
  }
  return d;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double holdout, uint64_t seed) {
  if (!(holdout >= 0.0 && holdout <= 1.0)) throw ConfigError("holdout fraction must be in [0, 1]");
  std::vector<size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_hold = static_cast<size_t>(std::lround(holdout * static_cast<double>(data.size())));
  std::vector<size_t> keep(idx.begin(), idx.end() - static_cast<std::ptrdiff_t>(n_hold));
  std::vector<size_t> hold(idx.end() - static_cast<std::ptrdiff_t>(n_hold), idx.end());
  std::sort(keep.begin(), keep.end());
  std::sort(hold.begin(), hold.end());
  Dataset a = data.subset(keep), b = data.subset(hold);
  a.split = data.split + ".train";
  b.split = data.split + ".holdout";
  return {std::move(a), std::move(b)};
}

Tensor to_tensor(std::span<const Image> images, const std::array<double, 3>& mean, const std::array<double, 3>& std,
                 DType dtype) {
  if (images.empty()) throw ConfigError("to_tensor: empty batch");
  const int64_t h = images[0].height, w = images[0].width;
  const auto n = static_cast<int64_t>(images.size());
  Tensor t = Tensor::zeros({n, 3, h, w}, dtype);
  dispatch_dtype(dtype, [&]<typename T>() {
    auto out = t.data<T>();
    for (int64_t i = 0; i < n; ++i) {
      const Image& img = images[static_cast<size_t>(i)];
      if (img.height != h || img.width != w) throw ConfigError("to_tensor: mixed image sizes in batch");
      for (int c = 0; c < 3; ++c) {
        const double inv = 1.0 / (255.0 * std[static_cast<size_t>(c)]);
        const double off = mean[static_cast<size_t>(c)] / std[static_cast<size_t>(c)];
        T* plane = out.data() + (i * 3 + c) * h * w;
        for (int64_t p = 0; p < h * w; ++p) plane[p] = static_cast<T>(img.pixels[static_cast<size_t>(p * 3 + c)] * inv - off);
      }
    }
  });
  return t;
}

}  // namespace nex
