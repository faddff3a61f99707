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
//
// Agreement and bias statistics: Cohen's kappa over the three-way outcome
// space, position win shares, and order-swap consistency.

#ifndef CALIPER_AGREEMENT_HPP_
#define CALIPER_AGREEMENT_HPP_

#include <string>
#include <vector>

#include "caliper/domain.hpp"

namespace caliper {

// Swap-consistency groups that do not contain exactly the two orders.
class PairingError : public Error {
 public:
  using Error::Error;
};

// Chance-corrected agreement over {AWins, BWins, Tie}; expected agreement
// comes from the product of marginal frequencies. Degenerate marginals
// (p_e = 1) yield 1 for perfect agreement and an UndefinedMetricError
// otherwise.
double cohens_kappa(const std::vector<Relation>& labels_x,
                    const std::vector<Relation>& labels_y);

struct PositionShare {
  double first_win = 0;   // share won by the first-presented side
  double second_win = 0;  // share won by the second-presented side
  double tie = 0;
};

PositionShare position_share(const std::vector<BattleRecord>& records);

// Fraction of (round, client, pair) groups where the same model identity
// wins in both presentation orders (two ties also count as consistent).
double swap_consistency(const std::vector<BattleRecord>& records);

}  // namespace caliper

#endif  // CALIPER_AGREEMENT_HPP_
