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

#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <unistd.h>

#include "json.hpp"
#include "nexception/arch_config.hpp"
#include "nexception/cli.hpp"
#include "nexception/io/kvfile.hpp"
#include "nexception/model.hpp"
#include "nexception/nas/search.hpp"
#include "support.hpp"

namespace nex {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "nexception");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(int(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("nex_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int64_t grouped(const std::string& text, const std::string& label) {
  const std::regex re(label + R"(\s+([0-9,]+))");
  std::smatch m;
  REQUIRE(std::regex_search(text, m, re));
  std::string digits;
  for (char c : m[1].str()) {
    if (c != ',') digits += c;
  }
  return std::stoll(digits);
}

const std::vector<std::string> kSubcommands = {"summarize", "train", "search", "importance", "bench"};

TEST_CASE("help and usage errors") {
  const Run h = cli({"--help"});
  CHECK(h.code == 0);
  for (const auto& s : kSubcommands) CHECK(h.out.find(s) != std::string::npos);
  CHECK(cli({"train", "--help"}).code == 0);
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"summarize"}).code == 2);
  CHECK(cli({"bench", "reduced_nas", "--no-such-flag"}).code == 2);
}

TEST_CASE("every flag is documented in the README") {
  const std::string readme = slurp(fs::path(NEX_SOURCE_DIR) / "README.md");
  REQUIRE(!readme.empty());
  const std::regex flag(R"((--[a-z][a-z0-9-]*))");
  for (const auto& s : kSubcommands) {
    const Run h = cli({s, "--help"});
    REQUIRE(h.code == 0);
    CHECK(readme.find(s) != std::string::npos);
    for (auto it = std::sregex_iterator(h.out.begin(), h.out.end(), flag); it != std::sregex_iterator(); ++it) {
      const std::string f = (*it)[1];
      if (f == "--help" || f == "--help-all") continue;
      INFO(s << " " << f);
      CHECK(readme.find(f) != std::string::npos);
    }
  }
}

TEST_CASE("summarize") {
  const Run t = cli({"summarize", "nexception_t", "--input", "224"});
  REQUIRE(t.code == 0);
  CHECK(std::abs(grouped(t.out, "total params") / 24.5e6 - 1) <= 0.03);
  CHECK(std::abs(grouped(t.out, "total flops") / 4.7e9 - 1) <= 0.05);
  CHECK(t.out.find("middle.0.sep1.dw") != std::string::npos);

  const Run x = cli({"summarize", "xception", "--input", "299", "--totals"});
  REQUIRE(x.code == 0);
  CHECK(std::abs(grouped(x.out, "total flops") / 8.4e9 - 1) <= 0.05);

  const Run j = cli({"summarize", "nexception_tp", "--json"});
  REQUIRE(j.code == 0);
  const auto doc = nlohmann::json::parse(j.out);
  CHECK(doc["model"] == "nexception_tp");
  CHECK(doc["total_params"].get<int64_t>() > 26000000);
  CHECK(doc["layers"].size() > 10);

  const Run bad = cli({"summarize", "resnet50"});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("nexception_s") != std::string::npos);
}

TEST_CASE("train") {
  const fs::path a = scratch("train_a"), b = scratch("train_b");
  const std::vector<std::string> base = {"train", "--model", "reduced_nas", "--synthetic", "--synthetic-per-class",
                                         "12", "--epochs", "2", "--batch-size", "16", "--width", "8",
                                         "--no-wall-clock", "--seed", "7", "--quiet"};
  auto with = [&](std::vector<std::string> extra) {
    auto v = base;
    v.insert(v.end(), extra.begin(), extra.end());
    return v;
  };
  const Run r1 = cli(with({"--out", a.string()}));
  INFO(r1.err);
  REQUIRE(r1.code == 0);
  REQUIRE(cli(with({"--out", b.string()})).code == 0);
  CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));
  CHECK(fs::exists(a / "best.ckpt"));
  const auto summary = nlohmann::json::parse(slurp(a / "summary.json"));
  CHECK(summary.contains("best_top1"));

  // Missing data, invalid values and unknown keys fail before any output.
  const fs::path c = scratch("train_c");
  CHECK(cli({"train", "--data", "/nonexistent/cifar", "--out", c.string()}).code == 2);
  CHECK(cli(with({"--out", c.string(), "--set", "stoch_depth=1.5"})).code == 2);
  CHECK(cli(with({"--out", c.string(), "--set", "bogus=1"})).code == 2);
  CHECK(cli(with({"--out", c.string(), "--lr", "-1"})).code == 2);
  CHECK(cli({"train", "--out", c.string()}).code == 2);
  CHECK(!fs::exists(c));

  // A config file supplies values; flags override them.
  fs::create_directories(c);
  write_kv_file(c / "run.cfg", {{"epochs", "5"}, {"batch_size", "16"}, {"kernel_middle", "3"}, {"width", "4"},
                                {"synthetic_per_class", "6"}, {"mixup_alpha", "0"}});
  const Run r3 = cli({"train", "--config", (c / "run.cfg").string(), "--synthetic", "--epochs", "1", "--out",
                      (c / "out").string(), "--no-wall-clock", "--quiet"});
  INFO(r3.err);
  REQUIRE(r3.code == 0);
  const std::string csv = slurp(c / "out" / "metrics.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);  // header + one epoch
  write_kv_file(c / "bad.cfg", {{"kernel_middle", "4"}});
  CHECK(cli({"train", "--config", (c / "bad.cfg").string(), "--synthetic", "--out", (c / "x").string()}).code == 2);
  CHECK(!fs::exists(c / "x"));
  for (const auto& d : {a, b, c}) fs::remove_all(d);
}

TEST_CASE("train reports divergence with exit code 3") {
  const fs::path d = scratch("diverge");
  const Run r = cli({"train", "--synthetic", "--synthetic-per-class", "8", "--epochs", "2", "--batch-size", "16",
                     "--width", "4", "--lr", "1e30", "--quiet", "--out", d.string()});
  CHECK(r.code == 3);
  CHECK(r.err.find("diverged") != std::string::npos);
  fs::remove_all(d);
}

TEST_CASE("search and importance") {
  const fs::path d = scratch("search");
  SUBCASE("trained trials") {
    const Run r = cli({"search", "--trials", "5", "--strategy", "random", "--synthetic", "--synthetic-classes", "4",
                       "--synthetic-per-class", "6", "--epochs", "1", "--width", "4", "--quiet", "--out",
                       d.string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
    const std::string hist = slurp(d / "history.jsonl");
    CHECK(std::count(hist.begin(), hist.end(), '\n') == 5);
    const ArchConfig inc = ArchConfig::from_map(read_kv_file(d / "incumbent.cfg"));
    ModelOptions mo;
    mo.num_classes = 4;
    mo.nas_width = 4;
    CHECK_NOTHROW(build_variant("reduced_nas", mo, &inc));
    const Run t = cli({"train", "--arch-config", (d / "incumbent.cfg").string(), "--synthetic",
                       "--synthetic-per-class", "4", "--epochs", "1", "--width", "4", "--quiet", "--out",
                       (d / "retrain").string()});
    CHECK(t.code == 0);
  }
  SUBCASE("planted objective") {
    const Run r = cli({"search", "--oracle", "planted", "--trials", "50", "--quiet", "--out", d.string()});
    REQUIRE(r.code == 0);
    const auto inc = read_kv_file(d / "incumbent.cfg");
    CHECK(inc.at("bottleneck") == "inverted3");
    CHECK(inc.at("kernel_middle") == "5");

    const Run imp = cli({"importance", (d / "history.jsonl").string(), "--json", "--out", (d / "imp.json").string()});
    REQUIRE(imp.code == 0);
    const auto j = nlohmann::json::parse(imp.out);
    std::set<std::string> keys, dims;
    for (const auto& [k, v] : j.items()) keys.insert(k);
    for (const auto& dim : search_dimensions()) dims.insert(dim.name);
    CHECK(keys == dims);
    for (const auto& [k, v] : j.items()) {
      if (k != "bottleneck") CHECK(v.get<double>() < j["bottleneck"].get<double>());
    }
    CHECK(nlohmann::json::parse(slurp(d / "imp.json")) == j);
    const Run text = cli({"importance", (d / "history.jsonl").string()});
    CHECK(text.out.find("bottleneck") != std::string::npos);
  }
  SUBCASE("constant history") {
    fs::create_directories(d);
    Rng rng(1);
    for (int i = 0; i < 6; ++i) {
      TrialRecord t;
      t.index = i;
      t.config = sample_config(rng);
      t.val_accuracy = 0.3;
      append_history(d / "h.jsonl", t);
    }
    const Run imp = cli({"importance", (d / "h.jsonl").string(), "--json"});
    REQUIRE(imp.code == 0);
    const auto j = nlohmann::json::parse(imp.out);
    CHECK(j.size() == search_dimensions().size());
    for (const auto& [k, v] : j.items()) CHECK(v.get<double>() == 0.0);
  }
  SUBCASE("budgets and short histories") {
    CHECK(cli({"search", "--oracle", "planted", "--trials", "0", "--out", d.string()}).code == 2);
    CHECK(cli({"search", "--trials", "3", "--out", d.string()}).code == 2);  // no data source
    fs::create_directories(d);
    TrialRecord t;
    append_history(d / "one.jsonl", t);
    CHECK(cli({"importance", (d / "one.jsonl").string()}).code == 2);
    CHECK(cli({"importance", (d / "missing.jsonl").string()}).code == 2);
  }
  fs::remove_all(d);
}

TEST_CASE("bench") {
  const Run one = cli({"bench", "reduced_nas", "--reps", "1", "--warmup", "0", "--batch", "2", "--json"});
  REQUIRE(one.code == 0);
  const auto j = nlohmann::json::parse(one.out);
  CHECK(j.contains("mean"));
  CHECK(j["std"].get<double>() == 0.0);
  CHECK(j["threads"] == 1);
  CHECK(j["mean"].get<double>() > 0);
  const Run text = cli({"bench", "reduced_nas", "--reps", "3", "--batch", "1"});
  CHECK(text.out.find("+/-") != std::string::npos);
  CHECK(cli({"bench", "reduced_nas", "--threads", "4"}).code == 2);

  // The small network stays ahead of NEXcepTion-T at the same resolution.
  for (int run = 0; run < 2; ++run) {
    const auto fast = nlohmann::json::parse(
        cli({"bench", "reduced_nas", "--reps", "30", "--warmup", "2", "--batch", "1", "--json"}).out);
    const auto slow = nlohmann::json::parse(
        cli({"bench", "nexception_t", "--input", "32", "--reps", "30", "--warmup", "2", "--batch", "1", "--json"}).out);
    CHECK(fast["mean"].get<double>() > slow["mean"].get<double>());
  }
}

}  // namespace
}  // namespace nex
