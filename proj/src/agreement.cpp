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

#include "caliper/agreement.hpp"

#include <array>
#include <map>
#include <tuple>

namespace caliper {

double cohens_kappa(const std::vector<Relation>& labels_x,
                    const std::vector<Relation>& labels_y) {
  if (labels_x.empty() || labels_x.size() != labels_y.size()) {
    throw PreconditionError("kappa needs equal, non-zero label lists");
  }
  const double n = static_cast<double>(labels_x.size());

  std::array<long long, 3> cx{};
  std::array<long long, 3> cy{};
  long long agree = 0;
  for (std::size_t i = 0; i < labels_x.size(); ++i) {
    cx[static_cast<int>(labels_x[i])] += 1;
    cy[static_cast<int>(labels_y[i])] += 1;
    if (labels_x[i] == labels_y[i]) ++agree;
  }

  const double p_o = agree / n;
  double p_e = 0.0;
  for (int c = 0; c < 3; ++c) {
    p_e += (cx[c] / n) * (cy[c] / n);
  }

  // Both sources constant on the same category: p_e is exactly 1.
  bool degenerate = false;
  for (int c = 0; c < 3; ++c) {
    if (cx[c] == static_cast<long long>(labels_x.size()) &&
        cy[c] == static_cast<long long>(labels_y.size())) {
      degenerate = true;
    }
  }
  if (degenerate) {
    if (agree == static_cast<long long>(labels_x.size())) return 1.0;
    throw UndefinedMetricError("kappa undefined: both marginals degenerate");
  }
  return (p_o - p_e) / (1.0 - p_e);
}

PositionShare position_share(const std::vector<BattleRecord>& records) {
  if (records.empty()) throw PreconditionError("no records");
  PositionShare s;
  for (const BattleRecord& r : records) {
    switch (r.judgment.comprehensive.relation) {
      case Relation::kAWins:
        s.first_win += 1;
        break;
      case Relation::kBWins:
        s.second_win += 1;
        break;
      case Relation::kTie:
        s.tie += 1;
        break;
    }
  }
  const double n = static_cast<double>(records.size());
  s.first_win /= n;
  s.second_win /= n;
  s.tie /= n;
  return s;
}

double swap_consistency(const std::vector<BattleRecord>& records) {
  using Key = std::tuple<int, std::string, std::string, std::string>;
  struct Group {
    bool has_ab = false;
    bool has_ba = false;
    std::string winner_ab;
    std::string winner_ba;
    int count = 0;
  };
  auto winner_of = [](const BattleRecord& r) -> std::string {
    switch (r.judgment.comprehensive.relation) {
      case Relation::kAWins:
        return r.model_a;
      case Relation::kBWins:
        return r.model_b;
      case Relation::kTie:
        return "";
    }
    return "";
  };

  std::map<Key, Group> groups;
  for (const BattleRecord& r : records) {
    auto pair = r.model_a < r.model_b
                    ? std::make_pair(r.model_a, r.model_b)
                    : std::make_pair(r.model_b, r.model_a);
    Group& g = groups[{r.round, r.client_id, pair.first, pair.second}];
    g.count += 1;
    if (r.position_order == PositionOrder::kAB) {
      g.has_ab = true;
      g.winner_ab = winner_of(r);
    } else {
      g.has_ba = true;
      g.winner_ba = winner_of(r);
    }
  }

  std::vector<std::string> orphans;
  long long consistent = 0;
  long long total = 0;
  for (const auto& [key, g] : groups) {
    if (g.count != 2 || !g.has_ab || !g.has_ba) {
      orphans.push_back("round " + std::to_string(std::get<0>(key)) + " case " +
                        std::get<1>(key) + " pair " + std::get<2>(key) + "/" +
                        std::get<3>(key));
      continue;
    }
    ++total;
    if (g.winner_ab == g.winner_ba) ++consistent;
  }
  if (!orphans.empty()) {
    throw PairingError("unpaired battle orders: " + join(orphans, "; "));
  }
  if (total == 0) throw PreconditionError("no paired battles");
  return static_cast<double>(consistent) / static_cast<double>(total);
}

}  // namespace caliper
