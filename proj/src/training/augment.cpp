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

#include "nexception/training/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace nex {

namespace {

uint64_t splitmix(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

uint8_t clamp_u8(double v) { return static_cast<uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

// Inverse-mapped geometric transform: dst(x, y) = src(f(x, y)).
template <typename F>
Image remap(const Image& img, F&& src_of) {
  Image out{img.height, img.width, std::vector<uint8_t>(img.pixels.size(), 128)};
  for (int64_t y = 0; y < img.height; ++y) {
    for (int64_t x = 0; x < img.width; ++x) {
      const auto [sx, sy] = src_of(static_cast<double>(x), static_cast<double>(y));
      const auto ix = static_cast<int64_t>(std::floor(sx + 0.5)), iy = static_cast<int64_t>(std::floor(sy + 0.5));
      if (ix < 0 || iy < 0 || ix >= img.width || iy >= img.height) continue;
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(iy, ix, c);
    }
  }
  return out;
}

Image blend(const Image& base, const Image& img, double factor) {
  Image out = img;
  for (size_t i = 0; i < img.pixels.size(); ++i) {
    out.pixels[i] = clamp_u8(base.pixels[i] + factor * (static_cast<double>(img.pixels[i]) - base.pixels[i]));
  }
  return out;
}

// 3x3 smoothing [1 1 1; 1 5 1; 1 1 1] / 13 on the interior, border kept.
Image smooth(const Image& img) {
  Image out = img;
  for (int64_t y = 1; y + 1 < img.height; ++y) {
    for (int64_t x = 1; x + 1 < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        int acc = 4 * img.at(y, x, c);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) acc += img.at(y + dy, x + dx, c);
        }
        out.at(y, x, c) = clamp_u8(acc / 13.0);
      }
    }
  }
  return out;
}

}  // namespace

uint64_t sample_seed(uint64_t seed, uint64_t epoch, uint64_t batch, uint64_t sample) {
  uint64_t h = splitmix(seed);
  h = splitmix(h ^ epoch);
  h = splitmix(h ^ batch);
  return splitmix(h ^ sample);
}

double sample_beta(double alpha, Rng& rng) {
  if (alpha <= 0) return 1.0;
  std::gamma_distribution<double> g(alpha, 1.0);
  const double a = g(rng), b = g(rng);
  if (a + b == 0) return 0.5;
  return a / (a + b);
}

const std::array<AugOp, 10>& augment_ops() {
  static const std::array<AugOp, 10> ops = {AugOp::kTranslateX, AugOp::kTranslateY, AugOp::kShearX,
                                            AugOp::kShearY,     AugOp::kRotate,     AugOp::kBrightness,
                                            AugOp::kContrast,   AugOp::kSharpness,  AugOp::kPosterize,
                                            AugOp::kSolarize};
  return ops;
}

const char* aug_op_name(AugOp op) {
  switch (op) {
    case AugOp::kTranslateX: return "translate_x";
    case AugOp::kTranslateY: return "translate_y";
    case AugOp::kShearX: return "shear_x";
    case AugOp::kShearY: return "shear_y";
    case AugOp::kRotate: return "rotate";
    case AugOp::kBrightness: return "brightness";
    case AugOp::kContrast: return "contrast";
    case AugOp::kSharpness: return "sharpness";
    case AugOp::kPosterize: return "posterize";
    case AugOp::kSolarize: return "solarize";
  }
  return "?";
}

Image apply_augment_op(const Image& img, AugOp op, double magnitude, bool negative) {
  const double m = std::clamp(magnitude, 0.0, 10.0) / 10.0;
  const double sign = negative ? -1.0 : 1.0;
  const double cx = 0.5 * static_cast<double>(img.width - 1), cy = 0.5 * static_cast<double>(img.height - 1);
  switch (op) {
    case AugOp::kTranslateX: {
      const double d = sign * std::round(0.45 * m * static_cast<double>(img.width));
      return remap(img, [&](double x, double y) { return std::pair{x - d, y}; });
    }
    case AugOp::kTranslateY: {
      const double d = sign * std::round(0.45 * m * static_cast<double>(img.height));
      return remap(img, [&](double x, double y) { return std::pair{x, y - d}; });
    }
    case AugOp::kShearX: {
      const double s = sign * 0.3 * m;
      return remap(img, [&](double x, double y) { return std::pair{x + s * (y - cy), y}; });
    }
    case AugOp::kShearY: {
      const double s = sign * 0.3 * m;
      return remap(img, [&](double x, double y) { return std::pair{x, y + s * (x - cx)}; });
    }
    case AugOp::kRotate: {
      const double a = sign * 30.0 * m * std::numbers::pi / 180.0;
      const double ca = std::cos(a), sa = std::sin(a);
      return remap(img, [&](double x, double y) {
        const double dx = x - cx, dy = y - cy;
        return std::pair{cx + ca * dx + sa * dy, cy - sa * dx + ca * dy};
      });
    }
    case AugOp::kBrightness: {
      Image black{img.height, img.width, std::vector<uint8_t>(img.pixels.size(), 0)};
      return blend(black, img, 1.0 + sign * 0.9 * m);
    }
    case AugOp::kContrast: {
      double lum = 0;
      for (size_t i = 0; i < img.pixels.size(); i += 3) {
        lum += 0.299 * img.pixels[i] + 0.587 * img.pixels[i + 1] + 0.114 * img.pixels[i + 2];
      }
      const auto grey = clamp_u8(lum / static_cast<double>(std::max<size_t>(1, img.pixels.size() / 3)));
      Image flat{img.height, img.width, std::vector<uint8_t>(img.pixels.size(), grey)};
      return blend(flat, img, 1.0 + sign * 0.9 * m);
    }
    case AugOp::kSharpness:
      return blend(smooth(img), img, 1.0 + sign * 0.9 * m);
    case AugOp::kPosterize: {
      const int bits = 8 - static_cast<int>(std::floor(m * 4.0 + 1e-9));
      const auto mask = static_cast<uint8_t>(0xFF << (8 - bits));
      Image out = img;
      for (auto& p : out.pixels) p &= mask;
      return out;
    }
    case AugOp::kSolarize: {
      const double threshold = 256.0 - m * 256.0;
      Image out = img;
      for (auto& p : out.pixels) {
        if (p >= threshold) p = static_cast<uint8_t>(255 - p);
      }
      return out;
    }
  }
  return img;
}

Image rand_augment(const Image& img, const RandAugmentOptions& opt, Rng& rng) {
  std::uniform_int_distribution<size_t> pick(0, augment_ops().size() - 1);
  std::normal_distribution<double> mag(opt.magnitude, opt.magnitude_std);
  std::bernoulli_distribution coin(0.5);
  Image out = img;
  for (int64_t i = 0; i < opt.num_ops; ++i) {
    const AugOp op = augment_ops()[pick(rng)];
    const double m = opt.magnitude_std > 0 ? std::clamp(mag(rng), 0.0, 10.0) : std::clamp(opt.magnitude, 0.0, 10.0);
    out = apply_augment_op(out, op, m, coin(rng));
  }
  return out;
}

Image random_erasing(const Image& img, double p, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (p <= 0 || u(rng) >= p) return img;
  const double area = static_cast<double>(img.height * img.width);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * (0.02 + u(rng) * (1.0 / 3.0 - 0.02));
    const double aspect = std::exp(std::log(0.3) + u(rng) * (std::log(1.0 / 0.3) - std::log(0.3)));
    const auto h = static_cast<int64_t>(std::lround(std::sqrt(target * aspect)));
    const auto w = static_cast<int64_t>(std::lround(std::sqrt(target / aspect)));
    if (h < 1 || w < 1 || h > img.height || w > img.width) continue;
    std::uniform_int_distribution<int64_t> oy(0, img.height - h), ox(0, img.width - w);
    const int64_t y0 = oy(rng), x0 = ox(rng);
    std::uniform_int_distribution<int> px(0, 255);
    Image out = img;
    for (int64_t y = y0; y < y0 + h; ++y) {
      for (int64_t x = x0; x < x0 + w; ++x) {
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = static_cast<uint8_t>(px(rng));
      }
    }
    return out;
  }
  return img;
}

Tensor one_hot(std::span<const int32_t> labels, int64_t classes, double smoothing, DType dtype) {
  const auto n = static_cast<int64_t>(labels.size());
  const double off = smoothing / static_cast<double>(classes);
  Tensor t = Tensor::full({n, classes}, off, dtype);
  for (int64_t i = 0; i < n; ++i) {
    const int32_t l = labels[static_cast<size_t>(i)];
    if (l < 0 || l >= classes) throw ConfigError("label " + std::to_string(l) + " outside [0, classes)");
    t.set(i * classes + l, 1.0 - smoothing + off);
  }
  return t;
}

namespace {

void require_batch(const Tensor& x, const Tensor& y) {
  if (x.rank() != 4 || y.rank() != 2 || x.dim(0) != y.dim(0)) {
    throw ConfigError("mix: expected x [N, C, H, W] and targets [N, K], got " + shape_str(x.shape()) + " and " +
                      shape_str(y.shape()));
  }
}

Tensor mix_rows(const Tensor& t, double lambda) {
  Tensor out = t.detach();
  const int64_t n = t.dim(0), row = t.numel() / std::max<int64_t>(1, n);
  dispatch_dtype(t.dtype(), [&]<typename T>() {
    auto src = t.data<T>();
    auto dst = out.data<T>();
    for (int64_t i = 0; i < n; ++i) {
      const int64_t j = n - 1 - i;
      for (int64_t k = 0; k < row; ++k) {
        dst[static_cast<size_t>(i * row + k)] = static_cast<T>(lambda * src[static_cast<size_t>(i * row + k)] +
                                                               (1.0 - lambda) * src[static_cast<size_t>(j * row + k)]);
      }
    }
  });
  return out;
}

}  // namespace

MixResult mixup_with_lambda(const Tensor& x, const Tensor& targets, double lambda) {
  require_batch(x, targets);
  if (lambda == 1.0) return {x.detach(), targets.detach(), 1.0};
  return {mix_rows(x, lambda), mix_rows(targets, lambda), lambda};
}

MixResult mixup(const Tensor& x, const Tensor& targets, double alpha, Rng& rng) {
  return mixup_with_lambda(x, targets, sample_beta(alpha, rng));
}

CutBox cutmix_box(int64_t h, int64_t w, double lambda, Rng& rng) {
  const double ratio = std::sqrt(std::clamp(1.0 - lambda, 0.0, 1.0));
  const auto ch = static_cast<int64_t>(ratio * static_cast<double>(h));
  const auto cw = static_cast<int64_t>(ratio * static_cast<double>(w));
  std::uniform_int_distribution<int64_t> cy(0, h - 1), cx(0, w - 1);
  const int64_t y = cy(rng), x = cx(rng);
  CutBox b;
  b.y0 = std::clamp<int64_t>(y - ch / 2, 0, h);
  b.y1 = std::clamp<int64_t>(y + ch / 2, 0, h);
  b.x0 = std::clamp<int64_t>(x - cw / 2, 0, w);
  b.x1 = std::clamp<int64_t>(x + cw / 2, 0, w);
  return b;
}

MixResult cutmix_with_box(const Tensor& x, const Tensor& targets, const CutBox& box) {
  require_batch(x, targets);
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const double lambda = 1.0 - static_cast<double>(box.area()) / static_cast<double>(h * w);
  Tensor out = x.detach();
  dispatch_dtype(x.dtype(), [&]<typename T>() {
    auto src = x.data<T>();
    auto dst = out.data<T>();
    for (int64_t i = 0; i < n; ++i) {
      const int64_t j = n - 1 - i;
      for (int64_t ch = 0; ch < c; ++ch) {
        for (int64_t yy = box.y0; yy < box.y1; ++yy) {
          for (int64_t xx = box.x0; xx < box.x1; ++xx) {
            dst[static_cast<size_t>(((i * c + ch) * h + yy) * w + xx)] =
                src[static_cast<size_t>(((j * c + ch) * h + yy) * w + xx)];
          }
        }
      }
    }
  });
  return {out, lambda == 1.0 ? targets.detach() : mix_rows(targets, lambda), lambda};
}

MixResult cutmix(const Tensor& x, const Tensor& targets, double alpha, Rng& rng) {
  require_batch(x, targets);
  const double lambda = sample_beta(alpha, rng);
  return cutmix_with_box(x, targets, cutmix_box(x.dim(2), x.dim(3), lambda, rng));
}

Image resize_bilinear(const Image& img, int64_t h, int64_t w) {
  if (h < 1 || w < 1) throw ConfigError("resize: target extents must be positive");
  if (h == img.height && w == img.width) return img;
  Image out{h, w, std::vector<uint8_t>(static_cast<size_t>(h * w * 3))};
  const double sy = static_cast<double>(img.height) / static_cast<double>(h);
  const double sx = static_cast<double>(img.width) / static_cast<double>(w);
  for (int64_t y = 0; y < h; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height - 1));
    const auto y0 = static_cast<int64_t>(fy);
    const int64_t y1 = std::min(y0 + 1, img.height - 1);
    const double ay = fy - static_cast<double>(y0);
    for (int64_t x = 0; x < w; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width - 1));
      const auto x0 = static_cast<int64_t>(fx);
      const int64_t x1 = std::min(x0 + 1, img.width - 1);
      const double ax = fx - static_cast<double>(x0);
      for (int c = 0; c < 3; ++c) {
        const double top = img.at(y0, x0, c) * (1 - ax) + img.at(y0, x1, c) * ax;
        const double bot = img.at(y1, x0, c) * (1 - ax) + img.at(y1, x1, c) * ax;
        out.at(y, x, c) = clamp_u8(top * (1 - ay) + bot * ay);
      }
    }
  }
  return out;
}

Image center_crop(const Image& img, int64_t size) {
  if (size > img.height || size > img.width) throw ConfigError("center_crop larger than image");
  const int64_t y0 = (img.height - size) / 2, x0 = (img.width - size) / 2;
  Image out{size, size, std::vector<uint8_t>(static_cast<size_t>(size * size * 3))};
  for (int64_t y = 0; y < size; ++y) {
    for (int64_t x = 0; x < size; ++x) {
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
    }
  }
  return out;
}

Image eval_transform(const Image& img, int64_t target, double crop_ratio) {
  const auto side = static_cast<int64_t>(std::lround(static_cast<double>(target) / crop_ratio));
  int64_t h = side, w = side;
  if (img.height < img.width) {
    w = static_cast<int64_t>(std::lround(static_cast<double>(img.width) * side / static_cast<double>(img.height)));
  } else if (img.width < img.height) {
    h = static_cast<int64_t>(std::lround(static_cast<double>(img.height) * side / static_cast<double>(img.width)));
  }
  return center_crop(resize_bilinear(img, h, w), target);
}

}  // namespace nex
