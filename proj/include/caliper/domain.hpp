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
// Shared domain vocabulary: competency dimensions, clinical phases, client
// profiles, simulation scripts, transcripts, and battle records. All types
// here are immutable value objects once constructed and are safe to share
// across worker threads.

#ifndef CALIPER_DOMAIN_HPP_
#define CALIPER_DOMAIN_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "caliper/common.hpp"
#include "json.hpp"

namespace caliper {

// The 12 judged competency dimensions.
enum class Dimension : int {
  kEmpathy = 0,
  kDiscernment,
  kEngagement,
  kSkill,
  kSuggestion,
  kReframing,
  kProgression,
  kTrauma,
  kCrisis,
  kEthics,
  kDiversity,
  kMemory,
};

constexpr int kDimensionCount = 12;

// Global dimensions are judged over whole sessions; Local dimensions are
// probed at scripted trigger turns.
enum class DimensionScope { kGlobal, kLocal };

enum class DimensionCategory {
  kAllianceBuilding,
  kProfessionalTechnique,
  kReliabilitySupport,
};

const std::array<Dimension, kDimensionCount>& all_dimensions();
const std::vector<Dimension>& local_dimensions();  // the nine probed ones
const std::vector<Dimension>& global_dimensions();

DimensionScope scope_of(Dimension d);
DimensionCategory category_of(Dimension d);

const std::string& dimension_name(Dimension d);
Dimension dimension_from_name(const std::string& name);  // throws ParseError

// Token vocabulary shared by the synthetic agents: a client probe cue and a
// therapist quality marker per dimension. Lowercase, greppable, and distinct
// from each other so counting one never counts the other.
std::string probe_token(Dimension d);   // e.g. "probe-skill"
std::string marker_token(Dimension d);  // e.g. "mk_skill"

// Rendering grammar shared by presentation rendering, dialogue history, and
// the synthetic judge's evidence extraction.
inline constexpr std::string_view kSideAHeader = "## Side A";
inline constexpr std::string_view kSideBHeader = "## Side B";
inline constexpr std::string_view kClientLinePrefix = "Client: ";
inline constexpr std::string_view kTherapistLinePrefix = "Therapist: ";

// Directive substituted for acting content on empty turns.
const std::string& neutral_ack_directive();

// The five clinical phases of a scripted session, in canonical order.
enum class Phase : int {
  kAllianceBuilding = 0,
  kPatternAwareness,
  kCoreConflictTrauma,
  kCorrectiveExperience,
  kIntegrationTermination,
};

constexpr int kPhaseCount = 5;

const std::string& phase_name(Phase p);
Phase phase_from_name(const std::string& name);  // throws ParseError

struct ClientProfile {
  std::string id;
  std::string name;
  std::string gender;
  std::string age;
  std::string occupation;
  std::string topic;
  std::string subtopic;
  std::vector<std::string> personality;
  std::string situation;
  std::string event_context;
  std::vector<std::string> emotional_words;
  std::string core_drive;
  std::string reaction_pattern;
  std::vector<std::string> social_support;
  std::vector<std::string> formative_experiences;
  std::string interests_values;
};

// One turn of the execution script. Empty turns carry no acting content and
// no target dimension; they exist so the therapist's drive can be observed.
struct TurnDirective {
  int turn = 0;
  Phase phase = Phase::kAllianceBuilding;
  std::optional<Dimension> target_dimension;
  std::string session_theme;
  std::string emotional_state;
  std::vector<std::string> memories;
  std::string verbal_pattern;
  std::string resistance;
  bool is_empty = false;
};

struct SimulationScript {
  std::string script_id;
  std::string client_id;
  std::vector<TurnDirective> directives;
  int total_turns = 0;
};

struct DialogueTurn {
  int turn = 0;
  std::string client_utterance;
  std::string therapist_utterance;
  Phase phase = Phase::kAllianceBuilding;
  std::optional<Dimension> triggered_dimension;
};

struct SessionTranscript {
  std::string session_id;
  std::string model_id;
  std::string client_id;
  std::string script_id;
  std::vector<DialogueTurn> turns;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> backend_meta;
};

// Outcome of one comparison, always expressed relative to presentation side
// A. y(AWins)=1, y(BWins)=0, y(Tie)=0.5.
enum class Relation : int { kAWins = 0, kBWins, kTie };

double relation_y(Relation r);
const std::string& relation_name(Relation r);
Relation relation_from_name(const std::string& name);  // throws ParseError
Relation flip(Relation r);

struct DimVerdict {
  Relation relation = Relation::kTie;
  std::string rationale;
};

// A full judgment: one verdict per dimension (indexed by Dimension) plus the
// comprehensive verdict. Rationales are carried verbatim and never parsed.
struct Judgment {
  std::array<DimVerdict, kDimensionCount> per_dimension;
  DimVerdict comprehensive;

  const DimVerdict& at(Dimension d) const {
    return per_dimension[static_cast<int>(d)];
  }
  DimVerdict& at(Dimension d) { return per_dimension[static_cast<int>(d)]; }
};

enum class PositionOrder { kAB, kBA };

const std::string& position_order_name(PositionOrder o);
PositionOrder position_order_from_name(const std::string& name);

// One stage-sliced pairwise battle. model_a / model_b are the models that
// occupied presentation sides A and B; position_order records whether the
// canonical match order was kept (AB) or swapped (BA).
struct BattleRecord {
  std::string battle_id;
  int round = 1;
  std::string client_id;
  std::string model_a;
  std::string model_b;
  PositionOrder position_order = PositionOrder::kAB;
  Judgment judgment;
  std::string judge_id;
  std::string timestamp;
};

// --- JSON bindings (line-delimited records; see docs/schema.md) ---

void to_json(nlohmann::json& j, const ClientProfile& p);
void from_json(const nlohmann::json& j, ClientProfile& p);
void to_json(nlohmann::json& j, const TurnDirective& d);
void from_json(const nlohmann::json& j, TurnDirective& d);
void to_json(nlohmann::json& j, const SimulationScript& s);
void from_json(const nlohmann::json& j, SimulationScript& s);
void to_json(nlohmann::json& j, const DialogueTurn& t);
void from_json(const nlohmann::json& j, DialogueTurn& t);
void to_json(nlohmann::json& j, const SessionTranscript& t);
void from_json(const nlohmann::json& j, SessionTranscript& t);
void to_json(nlohmann::json& j, const Judgment& jd);
void from_json(const nlohmann::json& j, Judgment& jd);
void to_json(nlohmann::json& j, const BattleRecord& r);
void from_json(const nlohmann::json& j, BattleRecord& r);

// --- Validation ---

// Violations are data, not faults: an empty report means valid.
std::vector<std::string> validate_script(const SimulationScript& script,
                                         const ClientProfile& profile);

// Profile-level checks plus id uniqueness across the set.
std::vector<std::string> validate_profiles(
    const std::vector<ClientProfile>& profiles);

// Phase of directive t. Throws PreconditionError when t is out of range.
Phase phase_of_turn(const SimulationScript& script, int t);

// --- Default script construction ---

constexpr int kDefaultTotalTurns = 44;  // 40 scripted + 4 empty

// Builds the standard five-phase execution script for a profile: scripted
// probes for every local dimension at phase-appropriate turns, one empty
// turn after each of the first four phases. total_turns is configurable but
// must leave room for the probes.
SimulationScript make_default_script(const ClientProfile& profile,
                                     int total_turns = kDefaultTotalTurns,
                                     std::uint64_t seed = 0);

}  // namespace caliper

#endif  // CALIPER_DOMAIN_HPP_
