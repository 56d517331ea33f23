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
#include <span>
#include <string>

#include "nexception/io/dataset.hpp"
#include "nexception/tensor.hpp"

namespace nex {

/// Mixes four integers into one well-distributed 64-bit seed. Augmentation
/// draws for a sample depend only on (seed, epoch, batch, sample).
uint64_t sample_seed(uint64_t seed, uint64_t epoch, uint64_t batch, uint64_t sample);

/// Beta(a, a) via two gamma draws; a == 0 returns 1.
double sample_beta(double alpha, Rng& rng);

enum class AugOp {
  kTranslateX,
  kTranslateY,
  kShearX,
  kShearY,
  kRotate,
  kBrightness,
  kContrast,
  kSharpness,
  kPosterize,
  kSolarize,
};

const std::array<AugOp, 10>& augment_ops();
const char* aug_op_name(AugOp op);

// Magnitude maps for m in [0, 10], all reaching the identity at m = 0:
//   translate   round(0.45 * m/10 * extent) pixels, random sign
//   shear       0.3 * m/10, random sign
//   rotate      30 * m/10 degrees, random sign
//   brightness  factor 1 +/- 0.9 * m/10, blended against black
//   contrast    factor 1 +/- 0.9 * m/10, blended against the mean grey level
//   sharpness   factor 1 +/- 0.9 * m/10, blended against a 3x3 smoothed copy
//   posterize   keep 8 - floor(4m/10) high bits
//   solarize    invert pixels >= 256 - 25.6m
// Geometric ops sample the source with nearest neighbour and fill 128.
Image apply_augment_op(const Image& img, AugOp op, double magnitude, bool negative = false);

struct RandAugmentOptions {
  double magnitude = 7;
  double magnitude_std = 0.5;
  int64_t num_ops = 2;
};

/// Applies num_ops ops drawn uniformly with replacement; each op draws its
/// magnitude from Normal(magnitude, magnitude_std) clipped to [0, 10].
Image rand_augment(const Image& img, const RandAugmentOptions& opt, Rng& rng);

/// With probability p replaces a random rectangle (2% to 1/3 of the area,
/// aspect 0.3 to 3.3) with uniform noise.
Image random_erasing(const Image& img, double p, Rng& rng);

/// Class indices to [N, classes] targets with optional label smoothing.
Tensor one_hot(std::span<const int32_t> labels, int64_t classes, double smoothing = 0.0,
               DType dtype = DType::kFloat32);

struct MixResult {
  Tensor x;
  Tensor targets;
  double lambda = 1.0;
};

struct CutBox {
  int64_t y0 = 0, y1 = 0, x0 = 0, x1 = 0;  // half-open
  int64_t area() const { return (y1 - y0) * (x1 - x0); }
};

// Both mixes pair sample i with sample N-1-i.

/// x' = lambda x + (1 - lambda) partner, with lambda ~ Beta(alpha, alpha).
MixResult mixup(const Tensor& x, const Tensor& targets, double alpha, Rng& rng);
MixResult mixup_with_lambda(const Tensor& x, const Tensor& targets, double lambda);

/// Box with sides sqrt(1 - lambda) of the image, uniform centre, clipped.
CutBox cutmix_box(int64_t h, int64_t w, double lambda, Rng& rng);
/// Pastes the partner's box; targets use 1 - box_area / (H W).
MixResult cutmix(const Tensor& x, const Tensor& targets, double alpha, Rng& rng);
MixResult cutmix_with_box(const Tensor& x, const Tensor& targets, const CutBox& box);

/// Bilinear resize with half-pixel centres.
Image resize_bilinear(const Image& img, int64_t h, int64_t w);
Image center_crop(const Image& img, int64_t size);
/// Resizes the shorter side to round(target / crop_ratio), then centre-crops.
Image eval_transform(const Image& img, int64_t target, double crop_ratio);

}  // namespace nex
