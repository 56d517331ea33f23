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
#include <string>
#include <vector>

namespace nex {

/// One row of the training metrics stream.
struct EpochMetrics {
  int64_t epoch = 0;
  double lr = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_top1 = 0;
  double val_top5 = 0;
  double seconds = 0;
  bool operator==(const EpochMetrics&) const = default;
};

/// Column order of the metrics CSV.
inline constexpr const char* kMetricsHeader = "epoch,lr,train_loss,val_loss,val_top1,val_top5,seconds";

/// Values use the shortest round-trip decimal form.
std::string metrics_csv_row(const EpochMetrics& m);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& rows);
std::vector<EpochMetrics> read_metrics_csv(const std::filesystem::path& path);

}  // namespace nex
