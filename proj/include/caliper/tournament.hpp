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
// Match scheduling: Swiss-system pairing with rematch avoidance and byes,
// a circle-method round-robin baseline, battle-count forecasting, and the
// round runner that turns matches into judged battle records.

#ifndef CALIPER_TOURNAMENT_HPP_
#define CALIPER_TOURNAMENT_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "caliper/battle.hpp"
#include "caliper/domain.hpp"

namespace caliper {

// Raised when a round needs transcripts that the store does not hold.
class SchedulingError : public Error {
 public:
  using Error::Error;
};

struct ModelScore {
  double wins = 0;
  double losses = 0;
  double ties = 0;
  double score() const { return wins + 0.5 * ties; }
};

struct Standings {
  std::map<std::string, ModelScore> per_model;
  std::set<std::pair<std::string, std::string>> played;  // canonical pairs
  std::set<std::string> byed;

  bool has_played(const std::string& a, const std::string& b) const;
  void note_played(const std::string& a, const std::string& b);
};

struct RoundPlan {
  int round = 1;
  std::vector<std::pair<std::string, std::string>> matches;
  std::vector<std::string> byes;
  // Set when float-down ran out of fresh opponents and a rematch was forced.
  bool forced_rematch = false;
};

// Pairs by standing: sort on (score desc, seeded tiebreak), pair greedily
// top-down, float past already-played opponents, bye the lowest-score model
// not yet byed when the pool is odd.
RoundPlan swiss_pairing(const Standings& standings,
                        const std::vector<std::string>& models, int round,
                        std::uint64_t seed);

// ceil(log2 N): the default Swiss round count.
int default_rounds(int n_models);

struct TournamentForecast {
  long long sessions = 0;           // judged pairwise sessions
  long long dimension_battles = 0;  // sessions * 12
};

TournamentForecast plan_tournament(int n_models, int rounds, int cases);

// One judged battle to schedule: a canonical pair, a case, and a side order.
struct BattleTicket {
  int round = 1;
  std::string model_x;  // canonical first (model_x < model_y)
  std::string model_y;
  int case_index = 0;
  PositionOrder order = PositionOrder::kAB;
};

// All N(N-1)/2 pairs via the circle method, expanded to two role-ordered
// battles per case.
std::vector<BattleTicket> round_robin_schedule(
    const std::vector<std::string>& models, int cases);

// Circle-method pairings grouped into N-1 rounds (used to run round robin
// through the same per-round machinery as Swiss).
std::vector<RoundPlan> round_robin_rounds(
    const std::vector<std::string>& models);

class TranscriptStore {
 public:
  TranscriptStore() = default;
  explicit TranscriptStore(std::vector<SessionTranscript> transcripts);

  void add(SessionTranscript transcript);
  const SessionTranscript* find(const std::string& model_id,
                                const std::string& client_id) const;
  std::size_t size() const { return by_key_.size(); }

 private:
  std::map<std::pair<std::string, std::string>, SessionTranscript> by_key_;
};

// Memoizes slice_stages per (model, client); a transcript is sliced once
// per tournament instead of once per battle.
class SliceCache {
 public:
  const std::vector<PhaseSlice>& get(const TranscriptStore& store,
                                     const std::string& model_id,
                                     const std::string& client_id);

 private:
  std::mutex mu_;
  std::map<std::pair<std::string, std::string>,
           std::unique_ptr<const std::vector<PhaseSlice>>>
      cache_;
};

struct BattleContext {
  ChatBackend* judge = nullptr;
  const PromptTemplates* templates = nullptr;
  JudgeOptions judge_options;
  std::shared_ptr<Clock> clock;  // stamps battle records
  std::string judge_id = "judge";
  int workers = 4;
  std::shared_ptr<SliceCache> slice_cache;  // optional; rounds share slices
};

struct RoundResult {
  std::vector<BattleRecord> records;  // sorted by battle_id
  std::vector<std::string> judgment_failures;
};

// Runs every (match, case) of the plan twice with roles swapped, persists
// both records, and folds the order-averaged comprehensive outcomes into the
// standings (one point per match plus one per bye).
RoundResult run_round(const RoundPlan& plan, const TranscriptStore& store,
                      const std::vector<std::string>& cases,
                      BattleContext& ctx, Standings& standings);

enum class TournamentMode { kSwiss, kRoundRobin };

struct TournamentOptions {
  TournamentMode mode = TournamentMode::kSwiss;
  int rounds = 0;  // 0: default_rounds(N) for Swiss, N-1 for round robin
  std::uint64_t seed = 0;
};

struct StandingsRow {
  int round = 0;
  std::string model_id;
  double wins = 0;
  double losses = 0;
  double ties = 0;
  double score = 0;
};

void to_json(nlohmann::json& j, const StandingsRow& r);
void from_json(const nlohmann::json& j, StandingsRow& r);

struct TournamentResult {
  std::vector<BattleRecord> records;
  std::vector<RoundPlan> plans;
  Standings standings;
  std::vector<StandingsRow> standings_rows;  // per round, per model
  std::vector<std::string> judgment_failures;
};

TournamentResult run_tournament(const std::vector<std::string>& model_ids,
                                const std::vector<std::string>& case_ids,
                                const TranscriptStore& store,
                                BattleContext& ctx,
                                const TournamentOptions& options);

}  // namespace caliper

#endif  // CALIPER_TOURNAMENT_HPP_
