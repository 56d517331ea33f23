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

#include "nexception/io/metrics.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "nexception/io/dataset.hpp"

namespace nex {

namespace {

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw FormatError("bad number in metrics CSV: " + s);
  return v;
}

}  // namespace

std::string metrics_csv_row(const EpochMetrics& m) {
  return std::to_string(m.epoch) + "," + shortest(m.lr) + "," + shortest(m.train_loss) + "," + shortest(m.val_loss) +
         "," + shortest(m.val_top1) + "," + shortest(m.val_top5) + "," + shortest(m.seconds);
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << kMetricsHeader << '\n';
  for (const auto& r : rows) out << metrics_csv_row(r) << '\n';
}

std::vector<EpochMetrics> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw FormatError(path.string() + ": unexpected header");
  std::vector<EpochMetrics> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 7) throw FormatError(path.string() + ": expected 7 columns in '" + line + "'");
    rows.push_back({static_cast<int64_t>(parse_double(f[0])), parse_double(f[1]), parse_double(f[2]),
                    parse_double(f[3]), parse_double(f[4]), parse_double(f[5]), parse_double(f[6])});
  }
  return rows;
}

}  // namespace nex
