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
// Ground-truth harness: pools of synthetic agents with known latent skills,
// full tournament pipelines over them, and recovery statistics comparing
// fitted ratings against the latent truth.

#ifndef CALIPER_SYNTHCHECK_HPP_
#define CALIPER_SYNTHCHECK_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "caliper/backends.hpp"
#include "caliper/domain.hpp"
#include "caliper/rating.hpp"
#include "caliper/simulate.hpp"
#include "caliper/tournament.hpp"

namespace caliper {

struct PoolModel {
  std::string model_id;
  double latent_comprehensive = kBaselineRating;
  SkillVector skill;
  BackendConfig backend;
};

// Latent comprehensive skills at baseline + k * spacing for k = 0..n-1;
// per-dimension skills add a seeded perturbation in [-10, +10].
std::vector<PoolModel> generate_pool(int n_models, double skill_spacing,
                                     std::uint64_t seed);

// Small synthetic client personas (fictional throughout) plus their default
// execution scripts.
std::vector<ClientProfile> generate_profiles(int n, std::uint64_t seed);

// Spearman rank correlation with average ranks on ties.
double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);
// Kendall tau-b.
double kendall_tau(const std::vector<double>& x, const std::vector<double>& y);

enum class RecoveryMode { kSwiss, kRoundRobin, kBoth };

struct RecoveryOptions {
  RecoveryMode mode = RecoveryMode::kBoth;
  int rounds = 4;  // Swiss rounds; round robin always plays all N-1
  int cases = 100;
  double judge_noise = 0.1;
  std::uint64_t seed = 0;
  int total_turns = kDefaultTotalTurns;
  int workers = 4;
};

struct ModeOutcome {
  std::map<std::string, double> ratings;  // comprehensive fit
  double spearman_vs_latent = 0.0;
  long long battles = 0;
  std::map<std::string, long long> per_model_battles;
  // Convergence curve: cumulative fit after each round.
  std::vector<double> per_round_spearman;
  std::vector<long long> per_round_battles;
};

struct RecoveryResult {
  std::optional<ModeOutcome> swiss;
  std::optional<ModeOutcome> round_robin;
  // Rank agreement between the two modes; present when both ran.
  std::optional<double> kendall_swiss_vs_roundrobin;
  long long sessions_simulated = 0;
};

RecoveryResult recovery_experiment(const std::vector<PoolModel>& pool,
                                   const RecoveryOptions& options);

}  // namespace caliper

#endif  // CALIPER_SYNTHCHECK_HPP_
