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
// Closes the loop at desk scale: battle trajectories become preference
// pairs, a linear reward model learns the pairwise loss, and a tabular
// softmax policy is optimized with the clipped group-relative surrogate.
// Every gradient here is analytic and finite-difference checked in tests.

#ifndef CALIPER_PREFLEARN_HPP_
#define CALIPER_PREFLEARN_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "caliper/backends.hpp"
#include "caliper/battle.hpp"
#include "caliper/domain.hpp"
#include "caliper/tournament.hpp"

namespace caliper {

class ExtractionError : public Error {
 public:
  using Error::Error;
};

struct PreferencePair {
  Dimension dimension = Dimension::kEmpathy;
  std::string context;
  std::string winner_response;  // o_w
  std::string loser_response;   // o_l
  std::string source_battle;
};

void to_json(nlohmann::json& j, const PreferencePair& p);
void from_json(const nlohmann::json& j, PreferencePair& p);

// One pair per non-Tie per-dimension relation. Local dimensions take both
// models' therapist utterances at the dimension's first trigger turn; global
// dimensions take whole-session concatenations. Ties emit nothing.
std::vector<PreferencePair> extract_preferences(
    const std::vector<BattleRecord>& records,
    const TranscriptStore& transcripts);

// --- Reward model: linear over fixed per-dimension feature blocks ---

constexpr int kFeaturesPerBlock = 4;  // bias, length, distinct-2, markers
constexpr int kFeatureDim = kFeaturesPerBlock * kDimensionCount;

std::vector<double> response_features(const std::string& context,
                                      const std::string& response,
                                      Dimension dimension);

struct RewardParams {
  std::vector<double> weights = std::vector<double>(kFeatureDim, 0.0);
  int feature_dim = kFeatureDim;

  double score(const std::string& context, const std::string& response,
               Dimension dimension) const;
};

void to_json(nlohmann::json& j, const RewardParams& p);
void from_json(const nlohmann::json& j, RewardParams& p);

// -log sigmoid(r_w - r_l).
double rm_loss(const RewardParams& params, const PreferencePair& pair);
// d rm_loss / d weights.
std::vector<double> rm_loss_gradient(const RewardParams& params,
                                     const PreferencePair& pair);

struct RmTrainConfig {
  double learning_rate = 0.5;
  int epochs = 200;
  std::uint64_t seed = 0;
};

struct RmTrainResult {
  RewardParams params;
  double final_loss = 0.0;
  double pairwise_accuracy = 0.0;  // fraction with r_w > r_l after training
};

RmTrainResult train_rm(const std::vector<PreferencePair>& pairs,
                       const RmTrainConfig& config);

// --- GRPO on a tabular softmax policy ---

struct GrpoConfig {
  double clip_epsilon = 0.2;
  double kl_coeff = 0.001;  // beta
  int group_size = 8;       // G
  double std_floor = 1e-8;
  double learning_rate = 0.5;
  int epochs = 100;
  int inner_steps = 4;  // ascent steps per epoch under one theta_old
};

// (r_i - mean) / population std; all zeros when the std is below the floor.
std::vector<double> grpo_advantages(const std::vector<double>& rewards,
                                    double std_floor);

struct GroupSample {
  std::string query_id;
  std::vector<int> responses;  // action-slot ids
  std::vector<double> rewards;
  std::vector<double> old_logprobs;  // under pi_theta_old
  std::vector<double> ref_logprobs;  // under pi_ref
};

// One query of the toy environment. Action slots are aligned across queries
// so a shared policy row generalizes to unseen queries.
struct Query {
  std::string id;
  Dimension dimension = Dimension::kEmpathy;
  std::string context;               // carries the probe cue
  std::vector<std::string> actions;  // candidate therapist responses
};

void to_json(nlohmann::json& j, const Query& q);
void from_json(const nlohmann::json& j, Query& q);

// Toy bandit construction: queries cycle through the local dimensions and
// action slot k carries 2k dimension markers, so higher slots earn strictly
// higher reward under any marker-positive scorer. Slot texts embed the query
// id, keeping responses distinct across queries.
std::vector<Query> generate_bandit_queries(const std::string& id_prefix,
                                           int count, int n_actions,
                                           std::uint64_t seed);

// Softmax policy over shared action slots.
struct PolicyParams {
  std::vector<double> logits;
  std::vector<std::string> trained_query_ids;
};

void to_json(nlohmann::json& j, const PolicyParams& p);
void from_json(const nlohmann::json& j, PolicyParams& p);

std::vector<double> log_softmax(const std::vector<double>& logits);
int greedy_action(const std::vector<double>& logits);

// Clipped group-relative surrogate minus beta * KL(pi_theta || pi_ref), the
// KL taken exactly over the finite action set. Returns the objective and
// its analytic gradient in the logits (ascent direction).
std::pair<double, std::vector<double>> grpo_objective(
    const std::vector<double>& theta_logits,
    const std::vector<double>& ref_logits, const GroupSample& group,
    const GrpoConfig& config);

struct GrpoTrainResult {
  PolicyParams policy;
  std::vector<double> epoch_mean_reward;
};

// Per epoch: freeze theta_old, sample G responses per query, score them with
// the reward model, and ascend the batched objective. Per-query randomness
// derives from (seed, epoch, query id), so query order never matters.
GrpoTrainResult train_policy_grpo(const PolicyParams& initial,
                                  const RewardParams& reward,
                                  const std::vector<Query>& queries,
                                  const GrpoConfig& config,
                                  std::uint64_t seed);

struct TallyRow {
  long long wins = 0;
  long long losses = 0;
  long long ties = 0;
};

struct HeldoutTally {
  std::array<TallyRow, kDimensionCount> per_dimension{};
  TallyRow comprehensive;
  long long battles = 0;

  double win_share() const;
  double loss_share() const;
  double tie_share() const;
};

// Greedy rollouts of both policy snapshots on held-out queries, battled
// through the standard slicing/judging pipeline in both orders. The tally is
// from the "after" policy's perspective.
HeldoutTally heldout_battle_eval(const PolicyParams& before,
                                 const PolicyParams& after,
                                 const std::vector<Query>& heldout,
                                 ChatBackend& judge,
                                 const PromptTemplates& templates,
                                 const JudgeOptions& options = {});

}  // namespace caliper

#endif  // CALIPER_PREFLEARN_HPP_
