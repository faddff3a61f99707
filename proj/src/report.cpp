// Copyright 2026 The Caliper Authors.
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

#include "caliper/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace caliper {

namespace {

std::string fmt_elo(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.0f", v);
  return buf;
}

std::string fmt_rate(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v * 100.0);
  return buf;
}

}  // namespace

std::string emit_report(const std::vector<RatingTable>& tables,
                        const std::vector<BattleRecord>& records,
                        ReportFormat format) {
  const RatingTable* comprehensive = nullptr;
  std::array<const RatingTable*, kDimensionCount> by_dim{};
  for (const RatingTable& t : tables) {
    if (!t.dimension.has_value()) {
      comprehensive = &t;
    } else {
      by_dim[static_cast<int>(*t.dimension)] = &t;
    }
  }
  if (comprehensive == nullptr) {
    throw DataError("no comprehensive rating table given");
  }
  for (Dimension d : all_dimensions()) {
    if (by_dim[static_cast<int>(d)] == nullptr) {
      throw DataError("missing rating table for dimension " +
                      dimension_name(d));
    }
  }

  struct Row {
    std::string model;
    double elo;
  };
  std::vector<Row> rows;
  rows.reserve(comprehensive->ratings.size());
  for (const auto& [model, elo] : comprehensive->ratings) {
    rows.push_back({model, elo});
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.elo != b.elo) return a.elo > b.elo;
    return a.model < b.model;
  });

  for (const Row& row : rows) {
    for (Dimension d : all_dimensions()) {
      const RatingTable* t = by_dim[static_cast<int>(d)];
      if (!t->ratings.count(row.model)) {
        throw DataError("model '" + row.model +
                        "' missing from dimension table " + dimension_name(d));
      }
    }
  }

  std::ostringstream os;
  const bool md = format == ReportFormat::kMarkdown;
  if (md) {
    os << "| Rank | Model | Elo | Win Rate (%) |";
    for (Dimension d : all_dimensions()) os << " " << dimension_name(d) << " |";
    os << "\n|";
    for (int i = 0; i < 4 + kDimensionCount; ++i) os << " --- |";
    os << "\n";
  } else {
    os << "rank,model,elo,win_rate_pct";
    for (Dimension d : all_dimensions()) os << "," << dimension_name(d);
    os << "\n";
  }

  int rank = 1;
  for (const Row& row : rows) {
    const double rate = win_rate(records, row.model);
    if (md) {
      os << "| " << rank << " | " << row.model << " | " << fmt_elo(row.elo)
         << " | " << fmt_rate(rate) << " |";
      for (Dimension d : all_dimensions()) {
        os << " " << fmt_elo(by_dim[static_cast<int>(d)]->ratings.at(row.model))
           << " |";
      }
      os << "\n";
    } else {
      os << rank << "," << row.model << "," << fmt_elo(row.elo) << ","
         << fmt_rate(rate);
      for (Dimension d : all_dimensions()) {
        os << ","
           << fmt_elo(by_dim[static_cast<int>(d)]->ratings.at(row.model));
      }
      os << "\n";
    }
    ++rank;
  }
  return os.str();
}

}  // namespace caliper
