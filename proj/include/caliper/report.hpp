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

#ifndef CALIPER_REPORT_HPP_
#define CALIPER_REPORT_HPP_

#include <string>
#include <vector>

#include "caliper/domain.hpp"
#include "caliper/rating.hpp"

namespace caliper {

enum class ReportFormat { kMarkdown, kCsv };

// Leaderboard document: rank, model, comprehensive Elo (0 decimals), win
// rate in percent (2 decimals), and the 12 per-dimension Elo columns.
// Requires the comprehensive table plus all 12 dimension tables covering
// every ranked model; anything missing is a consistency error (DataError).
std::string emit_report(const std::vector<RatingTable>& tables,
                        const std::vector<BattleRecord>& records,
                        ReportFormat format);

}  // namespace caliper

#endif  // CALIPER_REPORT_HPP_
