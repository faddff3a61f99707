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
// Bradley-Terry Elo fitting over battle records, treated as a static
// maximum-likelihood problem rather than a sequential update, plus the
// descriptive battle statistics (win rate, one-sided-match rate).

#ifndef CALIPER_RATING_HPP_
#define CALIPER_RATING_HPP_

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "caliper/backends.hpp"
#include "caliper/domain.hpp"

namespace caliper {

struct FitConfig {
  double xi = kDefaultXi;        // 400 / ln 10
  double baseline = kBaselineRating;
  double learning_rate = 1.0;    // initial step, in rating points
  int max_iters = 10000;
  double grad_tol = 1e-8;        // infinity norm of the gradient
  double lambda = 1e-4;          // ridge pull toward the baseline
};

struct RatingTable {
  std::optional<Dimension> dimension;  // absent: comprehensive
  std::map<std::string, double> ratings;
  int iterations = 0;
  double final_grad_norm = 0.0;
  double final_nll = 0.0;
};

void to_json(nlohmann::json& j, const RatingTable& t);
void from_json(const nlohmann::json& j, RatingTable& t);

// P(A beats B) = 1 / (1 + exp(-(r_a - r_b) / xi)).
double win_prob(double r_a, double r_b, double xi);

// One pairwise outcome for the fit; y in {0, 0.5, 1} from side A's view.
struct BtRecord {
  std::string a;
  std::string b;
  double y = 0.5;
};

// Negative log-likelihood plus the ridge term
// lambda * sum_i (r_i - baseline)^2.
double bt_nll(const std::map<std::string, double>& ratings,
              const std::vector<BtRecord>& records, double xi, double lambda,
              double baseline);

// Projects battle records to BT outcomes for one dimension's relations, or
// the comprehensive relation when no dimension is given.
std::vector<BtRecord> relations_for(const std::vector<BattleRecord>& records,
                                    std::optional<Dimension> dimension);

// Called with the ratings after initialization (iter 0) and after every
// accepted descent step; used by invariant checks.
using FitObserver =
    std::function<void(int iter, const std::vector<double>& ratings)>;

// Full-batch deterministic gradient descent with a backtracking step size
// seeded at config.learning_rate; runs until the gradient infinity norm
// drops below grad_tol or max_iters is reached.
RatingTable fit_bt(const std::vector<BtRecord>& records,
                   const FitConfig& config, const FitObserver& observer = {});

RatingTable fit_elo(const std::vector<BattleRecord>& records,
                    const FitConfig& config,
                    std::optional<Dimension> dimension = std::nullopt,
                    const FitObserver& observer = {});

// (wins + 0.5 * ties) / battles involving the model, comprehensive
// relations only. Throws DataError when the model has no battles.
double win_rate(const std::vector<BattleRecord>& records,
                const std::string& model);

// Per canonical pair: the fraction of battles where one side held every one
// of the 12 per-dimension relations.
std::map<std::pair<std::string, std::string>, double> one_sided_rate(
    const std::vector<BattleRecord>& records);

}  // namespace caliper

#endif  // CALIPER_RATING_HPP_
