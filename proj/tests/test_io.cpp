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

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "json.hpp"
#include "nexception/io/checkpoint.hpp"
#include "nexception/io/kvfile.hpp"
#include "nexception/io/metrics.hpp"
#include "support.hpp"

namespace nex {
namespace {

namespace fs = std::filesystem;
using testing::values;

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("nex_io_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

TEST_CASE("CIFAR-100 fixture decodes like the reference") {
  const fs::path dir = NEX_FIXTURE_DIR;
  const Dataset d = load_cifar_file(dir / "cifar100_head3.bin", CifarVariant::kCifar100);
  const auto ref = nlohmann::json::parse(slurp(dir / "cifar100_head3.json"));
  REQUIRE(d.size() == 3);
  CHECK(d.num_classes == 100);
  CHECK(d.hw == 32);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(d.labels[i] == ref[i]["fine"].get<int>());
    const Image img = d.image(i);
    int64_t sum = 0, weighted = 0;
    for (size_t k = 0; k < img.pixels.size(); ++k) {
      sum += img.pixels[k];
      weighted += int64_t(k % 251 + 1) * img.pixels[k];
    }
    CHECK(sum == ref[i]["hwc_sum"].get<int64_t>());
    CHECK(weighted == ref[i]["hwc_weighted"].get<int64_t>());
    for (const auto& [key, v] : ref[i]["probe"].items()) {
      int y, x, c;
      std::sscanf(key.c_str(), "%d,%d,%d", &y, &x, &c);
      CHECK(int(img.at(y, x, c)) == v.get<int>());
    }
  }
}

TEST_CASE("CIFAR loader layout, sizes and errors") {
  CHECK(cifar_record_bytes(CifarVariant::kCifar100) == 3074);
  CHECK(cifar_record_bytes(CifarVariant::kCifar10) == 3073);
  const fs::path dir = scratch("cifar");
  fs::create_directories(dir);

  Dataset d = synthetic_dataset({100, 1, 32, 40.0, 1, "train"});
  write_cifar_file(dir / "small.bin", d, CifarVariant::kCifar100);
  CHECK(fs::file_size(dir / "small.bin") == 100 * 3074);
  const Dataset back = load_cifar_file(dir / "small.bin", CifarVariant::kCifar100);
  CHECK(back.labels == d.labels);
  CHECK(back.images == d.images);
  CHECK(back.image(0).pixels[0] == d.image(0).pixels[0]);

  Dataset d10 = synthetic_dataset({10, 2, 32, 40.0, 2, "train"});
  write_cifar_file(dir / "ten.bin", d10, CifarVariant::kCifar10);
  CHECK(load_cifar_file(dir / "ten.bin", CifarVariant::kCifar10).images == d10.images);

  spit(dir / "bad.bin", std::string(3074 * 2 + 5, '\0'));
  try {
    load_cifar_file(dir / "bad.bin", CifarVariant::kCifar100);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("bad.bin") != std::string::npos);
  }
  std::string bad_label(3074, '\0');
  bad_label[1] = char(150);
  spit(dir / "label.bin", bad_label);
  CHECK_THROWS_AS(load_cifar_file(dir / "label.bin", CifarVariant::kCifar100), FormatError);
  CHECK_THROWS(load_cifar(dir / "missing", CifarVariant::kCifar100));
  fs::remove_all(dir);
}

TEST_CASE("CIFAR-100 train file with 50,000 records") {
  const fs::path dir = scratch("cifar_full");
  fs::create_directories(dir);
  {
    // Records with labels cycling 0..99 and a per-record byte pattern.
    std::ofstream out(dir / "train.bin", std::ios::binary);
    std::string rec(3074, '\0');
    for (int i = 0; i < 50000; ++i) {
      rec[0] = char(i % 20);
      rec[1] = char(i % 100);
      std::memset(rec.data() + 2, i % 251, 3072);
      out.write(rec.data(), long(rec.size()));
    }
  }
  REQUIRE(fs::file_size(dir / "train.bin") == 153700000u);
  const Dataset d = load_cifar(dir, CifarVariant::kCifar100, "train");
  CHECK(d.size() == 50000);
  CHECK(d.labels.front() >= 0);
  CHECK(d.labels.front() < 100);
  CHECK(d.labels[12345] == 45);
  CHECK(d.image(49999).pixels[100] == 49999 % 251);
  fs::remove_all(dir);
}

TEST_CASE("synthetic dataset") {
  const SyntheticSpec spec{10, 40, 32, 40.0, 9, "train"};
  const Dataset a = synthetic_dataset(spec), b = synthetic_dataset(spec);
  CHECK(a.images == b.images);
  CHECK(a.labels == b.labels);
  CHECK_NOTHROW(a.validate());
  std::vector<int> hist(10, 0);
  for (int32_t l : a.labels) hist[size_t(l)]++;
  for (int h : hist) CHECK(h == 40);
  SyntheticSpec other = spec;
  other.seed = 10;
  CHECK(synthetic_dataset(other).images != a.images);

  // Nearest class mean on raw pixels is a linear classifier.
  const auto [train, val] = split_dataset(a, 0.25, 1);
  CHECK(val.size() == 100);
  CHECK(train.size() == 300);
  const size_t dim = size_t(a.image_bytes());
  std::vector<std::vector<double>> means(10, std::vector<double>(dim, 0.0));
  std::vector<int> counts(10, 0);
  for (size_t i = 0; i < train.size(); ++i) {
    const auto l = size_t(train.labels[i]);
    counts[l]++;
    for (size_t k = 0; k < dim; ++k) means[l][k] += train.images[i * dim + k];
  }
  for (size_t c = 0; c < 10; ++c)
    for (auto& v : means[c]) v /= counts[c];
  int hits = 0;
  for (size_t i = 0; i < val.size(); ++i) {
    size_t best = 0;
    double best_d = INFINITY;
    for (size_t c = 0; c < 10; ++c) {
      double dist = 0;
      for (size_t k = 0; k < dim; ++k) {
        const double e = val.images[i * dim + k] - means[c][k];
        dist += e * e;
      }
      if (dist < best_d) best_d = dist, best = c;
    }
    hits += int(best) == val.labels[i];
  }
  const double sigma = std::sqrt(0.1 * 0.9 / 100);
  CHECK(hits / 100.0 > 0.1 + 3 * sigma);
}

TEST_CASE("normalised tensors") {
  const Dataset d = synthetic_dataset({2, 1, 4, 10.0, 3, "train"});
  const Image img = d.image(0);
  const Tensor t = to_tensor(std::span(&img, 1), d.mean, d.std, DType::kFloat64);
  CHECK(t.shape() == Shape{1, 3, 4, 4});
  CHECK(t.at(1 * 16 + 2 * 4 + 3) == doctest::Approx((img.at(2, 3, 1) / 255.0 - d.mean[1]) / d.std[1]));
}

TEST_CASE("checkpoint round trip") {
  const fs::path dir = scratch("ckpt");
  fs::create_directories(dir);
  ModelOptions mo;
  mo.num_classes = 7;
  mo.nas_width = 8;
  mo.seed = 3;
  ArchConfig cfg = nexception_defaults();
  cfg.norm = NormKind::kLayer;
  cfg.kernel_entry = 7;
  auto m = build_variant("reduced_nas", mo, &cfg);
  // Move the batch-norm statistics off their initial values.
  {
    Rng rng(1);
    ForwardContext ctx;
    ctx.training = true;
    NoGradGuard g;
    m->forward(Tensor::randn({4, 3, 32, 32}, rng), ctx);
  }
  const fs::path file = dir / "m.ckpt";
  save_checkpoint(*m, file, {{"epoch", 3}});
  auto loaded = load_checkpoint(file);
  CHECK(loaded->arch() == "reduced_nas");
  REQUIRE(loaded->config().has_value());
  CHECK(*loaded->config() == cfg);
  const auto pa = m->parameters(), pb = loaded->parameters();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->name == pb[i]->name);
    const auto a = pa[i]->value.data<float>(), b = pb[i]->value.data<float>();
    CHECK(std::memcmp(a.data(), b.data(), a.size_bytes()) == 0);
  }
  Rng rng(2);
  const Tensor x = Tensor::randn({2, 3, 32, 32}, rng);
  ForwardContext ctx;
  const Tensor outa = m->forward(x, ctx), outb = loaded->forward(x, ctx);
  const auto ya = outa.data<float>(), yb = outb.data<float>();
  CHECK(std::memcmp(ya.data(), yb.data(), ya.size_bytes()) == 0);

  // Byte accounting: header + manifest + blob.
  const auto manifest = read_checkpoint_manifest(file);
  const std::string bytes = slurp(file);
  uint64_t mlen = 0;
  std::memcpy(&mlen, bytes.data() + 12, 8);
  CHECK(bytes.substr(0, 8) == "NEXCKPT\n");
  CHECK(fs::file_size(file) == kCheckpointHeaderBytes + mlen + manifest["blob_bytes"].get<uint64_t>());
  uint64_t total = 0;
  for (const auto& p : manifest["params"]) total += p["length"].get<uint64_t>();
  CHECK(total == manifest["blob_bytes"].get<uint64_t>());
  CHECK(manifest["meta"]["epoch"] == 3);

  // Loading into a fresh model of the same architecture.
  auto fresh = build_variant("reduced_nas", mo, &cfg);
  load_checkpoint_into(*fresh, file);
  CHECK(values(fresh->parameters().back()->value) == values(m->parameters().back()->value));

  auto rewrite = [&](const std::function<void(nlohmann::json&)>& edit, const fs::path& out) {
    nlohmann::json j = nlohmann::json::parse(bytes.substr(kCheckpointHeaderBytes, mlen));
    edit(j);
    const std::string js = j.dump();
    std::string o = bytes.substr(0, 12);
    const uint64_t n = js.size();
    o.append(reinterpret_cast<const char*>(&n), 8);
    o += js;
    o += bytes.substr(kCheckpointHeaderBytes + mlen);
    spit(out, o);
  };
  SUBCASE("corrupted offset names the parameter") {
    std::string victim;
    rewrite(
        [&](nlohmann::json& j) {
          victim = j["params"][2]["name"];
          j["params"][2]["offset"] = j["blob_bytes"].get<uint64_t>();
        },
        dir / "offset.ckpt");
    try {
      load_checkpoint(dir / "offset.ckpt");
      FAIL("expected rejection");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find(victim) != std::string::npos);
    }
  }
  SUBCASE("unknown architecture") {
    rewrite([](nlohmann::json& j) { j["arch"] = "resnet50"; }, dir / "arch.ckpt");
    CHECK_THROWS(load_checkpoint(dir / "arch.ckpt"));
  }
  SUBCASE("version mismatch") {
    std::string v = bytes;
    v[8] = 9;
    spit(dir / "ver.ckpt", v);
    CHECK_THROWS_AS(load_checkpoint(dir / "ver.ckpt"), FormatError);
  }
  SUBCASE("truncated blob") {
    spit(dir / "short.ckpt", bytes.substr(0, bytes.size() - 4));
    CHECK_THROWS_AS(load_checkpoint(dir / "short.ckpt"), FormatError);
  }
  SUBCASE("bad magic") {
    spit(dir / "magic.ckpt", "NOTCKPT\n" + bytes.substr(8));
    CHECK_THROWS_AS(read_checkpoint_manifest(dir / "magic.ckpt"), FormatError);
  }
  SUBCASE("mismatched model") {
    auto other = build_variant("reduced_nas", mo);
    CHECK_THROWS(load_checkpoint_into(*other, file));
  }
  fs::remove_all(dir);
}

TEST_CASE("metrics csv") {
  const fs::path dir = scratch("metrics");
  fs::create_directories(dir);
  const std::vector<EpochMetrics> rows = {{1, 1e-6, 0.6931471805599453, 0.7, 0.1, 0.5, 0.0},
                                          {2, 0.002, 0.1 + 0.2, 1.0 / 3.0, 0.25, 0.75, 12.5}};
  write_metrics_csv(dir / "m.csv", rows);
  CHECK(read_metrics_csv(dir / "m.csv") == rows);
  const std::string text = slurp(dir / "m.csv");
  CHECK(text.rfind(std::string(kMetricsHeader) + "\n", 0) == 0);
  CHECK(metrics_csv_row(rows[0]) == "1,1e-06,0.6931471805599453,0.7,0.1,0.5,0");
  fs::remove_all(dir);
}

TEST_CASE("key-value files") {
  const auto kv = parse_kv("# comment\n  epochs = 5 \n\nmodel=reduced_nas # trailing\n");
  CHECK(kv.at("epochs") == "5");
  CHECK(kv.at("model") == "reduced_nas");
  CHECK_THROWS_AS(parse_kv("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_kv("just words\n"), ConfigError);
  try {
    parse_kv("a = 1\n\nb\n");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
  const fs::path dir = scratch("kv");
  fs::create_directories(dir);
  write_kv_file(dir / "a.cfg", {{"x", "1"}, {"y", "two"}}, "note");
  CHECK(read_kv_file(dir / "a.cfg") == std::map<std::string, std::string>{{"x", "1"}, {"y", "two"}});
  fs::remove_all(dir);
}

}  // namespace
}  // namespace nex
