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

#include "caliper/domain.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace caliper {

namespace {

struct DimensionInfo {
  Dimension dim;
  const char* name;
  DimensionScope scope;
  DimensionCategory category;
};

// The canonical taxonomy. Global metrics are judged holistically; the other
// nine are probed at scripted trigger turns.
constexpr std::array<DimensionInfo, kDimensionCount> kDimensionTable = {{
    {Dimension::kEmpathy, "Empathy", DimensionScope::kGlobal,
     DimensionCategory::kAllianceBuilding},
    {Dimension::kDiscernment, "Discernment", DimensionScope::kLocal,
     DimensionCategory::kAllianceBuilding},
    {Dimension::kEngagement, "Engagement", DimensionScope::kGlobal,
     DimensionCategory::kAllianceBuilding},
    {Dimension::kSkill, "Skill", DimensionScope::kLocal,
     DimensionCategory::kProfessionalTechnique},
    {Dimension::kSuggestion, "Suggestion", DimensionScope::kLocal,
     DimensionCategory::kProfessionalTechnique},
    {Dimension::kReframing, "Reframing", DimensionScope::kLocal,
     DimensionCategory::kProfessionalTechnique},
    {Dimension::kProgression, "Progression", DimensionScope::kLocal,
     DimensionCategory::kProfessionalTechnique},
    {Dimension::kTrauma, "Trauma", DimensionScope::kLocal,
     DimensionCategory::kProfessionalTechnique},
    {Dimension::kCrisis, "Crisis", DimensionScope::kLocal,
     DimensionCategory::kReliabilitySupport},
    {Dimension::kEthics, "Ethics", DimensionScope::kLocal,
     DimensionCategory::kReliabilitySupport},
    {Dimension::kDiversity, "Diversity", DimensionScope::kGlobal,
     DimensionCategory::kReliabilitySupport},
    {Dimension::kMemory, "Memory", DimensionScope::kLocal,
     DimensionCategory::kReliabilitySupport},
}};

constexpr std::array<const char*, kPhaseCount> kPhaseNames = {
    "AllianceBuilding", "PatternAwareness", "CoreConflictTrauma",
    "CorrectiveExperience", "IntegrationTermination"};

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

const std::array<Dimension, kDimensionCount>& all_dimensions() {
  static const std::array<Dimension, kDimensionCount> dims = [] {
    std::array<Dimension, kDimensionCount> out{};
    for (int i = 0; i < kDimensionCount; ++i) out[i] = kDimensionTable[i].dim;
    return out;
  }();
  return dims;
}

const std::vector<Dimension>& local_dimensions() {
  static const std::vector<Dimension> dims = [] {
    std::vector<Dimension> out;
    for (const auto& info : kDimensionTable) {
      if (info.scope == DimensionScope::kLocal) out.push_back(info.dim);
    }
    return out;
  }();
  return dims;
}

const std::vector<Dimension>& global_dimensions() {
  static const std::vector<Dimension> dims = [] {
    std::vector<Dimension> out;
    for (const auto& info : kDimensionTable) {
      if (info.scope == DimensionScope::kGlobal) out.push_back(info.dim);
    }
    return out;
  }();
  return dims;
}

DimensionScope scope_of(Dimension d) {
  return kDimensionTable[static_cast<int>(d)].scope;
}

DimensionCategory category_of(Dimension d) {
  return kDimensionTable[static_cast<int>(d)].category;
}

const std::string& dimension_name(Dimension d) {
  static const std::array<std::string, kDimensionCount> names = [] {
    std::array<std::string, kDimensionCount> out;
    for (int i = 0; i < kDimensionCount; ++i) out[i] = kDimensionTable[i].name;
    return out;
  }();
  return names[static_cast<int>(d)];
}

Dimension dimension_from_name(const std::string& name) {
  for (const auto& info : kDimensionTable) {
    if (name == info.name) return info.dim;
  }
  throw ParseError("unknown dimension: " + name);
}

std::string probe_token(Dimension d) {
  return "probe-" + lower(dimension_name(d));
}

std::string marker_token(Dimension d) {
  return "mk_" + lower(dimension_name(d));
}

const std::string& neutral_ack_directive() {
  static const std::string text =
      "Give only a brief, neutral acknowledgement this turn. Do not raise a "
      "new topic, ask a question, or add emotional content; leave the "
      "direction of the conversation entirely to the counselor.";
  return text;
}

const std::string& phase_name(Phase p) {
  static const std::array<std::string, kPhaseCount> names = [] {
    std::array<std::string, kPhaseCount> out;
    for (int i = 0; i < kPhaseCount; ++i) out[i] = kPhaseNames[i];
    return out;
  }();
  return names[static_cast<int>(p)];
}

Phase phase_from_name(const std::string& name) {
  for (int i = 0; i < kPhaseCount; ++i) {
    if (name == kPhaseNames[i]) return static_cast<Phase>(i);
  }
  throw ParseError("unknown phase: " + name);
}

double relation_y(Relation r) {
  switch (r) {
    case Relation::kAWins:
      return 1.0;
    case Relation::kBWins:
      return 0.0;
    case Relation::kTie:
      return 0.5;
  }
  return 0.5;
}

const std::string& relation_name(Relation r) {
  static const std::array<std::string, 3> names = {"AWins", "BWins", "Tie"};
  return names[static_cast<int>(r)];
}

Relation relation_from_name(const std::string& name) {
  if (name == "AWins") return Relation::kAWins;
  if (name == "BWins") return Relation::kBWins;
  if (name == "Tie") return Relation::kTie;
  throw ParseError("unknown relation: " + name);
}

Relation flip(Relation r) {
  switch (r) {
    case Relation::kAWins:
      return Relation::kBWins;
    case Relation::kBWins:
      return Relation::kAWins;
    case Relation::kTie:
      return Relation::kTie;
  }
  return Relation::kTie;
}

const std::string& position_order_name(PositionOrder o) {
  static const std::array<std::string, 2> names = {"AB", "BA"};
  return names[static_cast<int>(o)];
}

PositionOrder position_order_from_name(const std::string& name) {
  if (name == "AB") return PositionOrder::kAB;
  if (name == "BA") return PositionOrder::kBA;
  throw ParseError("unknown position order: " + name);
}

// --- JSON bindings ---

void to_json(nlohmann::json& j, const ClientProfile& p) {
  j = nlohmann::json{{"id", p.id},
                     {"name", p.name},
                     {"gender", p.gender},
                     {"age", p.age},
                     {"occupation", p.occupation},
                     {"topic", p.topic},
                     {"subtopic", p.subtopic},
                     {"personality", p.personality},
                     {"situation", p.situation},
                     {"event_context", p.event_context},
                     {"emotional_words", p.emotional_words},
                     {"core_drive", p.core_drive},
                     {"reaction_pattern", p.reaction_pattern},
                     {"social_support", p.social_support},
                     {"formative_experiences", p.formative_experiences},
                     {"interests_values", p.interests_values}};
}

void from_json(const nlohmann::json& j, ClientProfile& p) {
  j.at("id").get_to(p.id);
  j.at("name").get_to(p.name);
  j.at("gender").get_to(p.gender);
  j.at("age").get_to(p.age);
  j.at("occupation").get_to(p.occupation);
  j.at("topic").get_to(p.topic);
  j.at("subtopic").get_to(p.subtopic);
  j.at("personality").get_to(p.personality);
  j.at("situation").get_to(p.situation);
  j.at("event_context").get_to(p.event_context);
  j.at("emotional_words").get_to(p.emotional_words);
  j.at("core_drive").get_to(p.core_drive);
  j.at("reaction_pattern").get_to(p.reaction_pattern);
  j.at("social_support").get_to(p.social_support);
  j.at("formative_experiences").get_to(p.formative_experiences);
  j.at("interests_values").get_to(p.interests_values);
}

void to_json(nlohmann::json& j, const TurnDirective& d) {
  j = nlohmann::json{{"turn", d.turn},
                     {"phase", phase_name(d.phase)},
                     {"session_theme", d.session_theme},
                     {"emotional_state", d.emotional_state},
                     {"memories", d.memories},
                     {"verbal_pattern", d.verbal_pattern},
                     {"resistance", d.resistance},
                     {"is_empty", d.is_empty}};
  if (d.target_dimension.has_value()) {
    j["target_dimension"] = dimension_name(*d.target_dimension);
  } else {
    j["target_dimension"] = nullptr;
  }
}

void from_json(const nlohmann::json& j, TurnDirective& d) {
  j.at("turn").get_to(d.turn);
  d.phase = phase_from_name(j.at("phase").get<std::string>());
  if (j.contains("target_dimension") && !j.at("target_dimension").is_null()) {
    d.target_dimension =
        dimension_from_name(j.at("target_dimension").get<std::string>());
  } else {
    d.target_dimension.reset();
  }
  j.at("session_theme").get_to(d.session_theme);
  j.at("emotional_state").get_to(d.emotional_state);
  j.at("memories").get_to(d.memories);
  j.at("verbal_pattern").get_to(d.verbal_pattern);
  j.at("resistance").get_to(d.resistance);
  j.at("is_empty").get_to(d.is_empty);
}

void to_json(nlohmann::json& j, const SimulationScript& s) {
  j = nlohmann::json{{"script_id", s.script_id},
                     {"client_id", s.client_id},
                     {"directives", s.directives},
                     {"total_turns", s.total_turns}};
}

void from_json(const nlohmann::json& j, SimulationScript& s) {
  j.at("script_id").get_to(s.script_id);
  j.at("client_id").get_to(s.client_id);
  j.at("directives").get_to(s.directives);
  j.at("total_turns").get_to(s.total_turns);
}

void to_json(nlohmann::json& j, const DialogueTurn& t) {
  j = nlohmann::json{{"turn", t.turn},
                     {"client_utterance", t.client_utterance},
                     {"therapist_utterance", t.therapist_utterance},
                     {"phase", phase_name(t.phase)}};
  if (t.triggered_dimension.has_value()) {
    j["triggered_dimension"] = dimension_name(*t.triggered_dimension);
  } else {
    j["triggered_dimension"] = nullptr;
  }
}

void from_json(const nlohmann::json& j, DialogueTurn& t) {
  j.at("turn").get_to(t.turn);
  j.at("client_utterance").get_to(t.client_utterance);
  j.at("therapist_utterance").get_to(t.therapist_utterance);
  t.phase = phase_from_name(j.at("phase").get<std::string>());
  if (j.contains("triggered_dimension") &&
      !j.at("triggered_dimension").is_null()) {
    t.triggered_dimension =
        dimension_from_name(j.at("triggered_dimension").get<std::string>());
  } else {
    t.triggered_dimension.reset();
  }
}

void to_json(nlohmann::json& j, const SessionTranscript& t) {
  j = nlohmann::json{{"session_id", t.session_id},
                     {"model_id", t.model_id},
                     {"client_id", t.client_id},
                     {"script_id", t.script_id},
                     {"turns", t.turns},
                     {"seed", t.seed},
                     {"backend_meta", t.backend_meta}};
}

void from_json(const nlohmann::json& j, SessionTranscript& t) {
  j.at("session_id").get_to(t.session_id);
  j.at("model_id").get_to(t.model_id);
  j.at("client_id").get_to(t.client_id);
  j.at("script_id").get_to(t.script_id);
  j.at("turns").get_to(t.turns);
  j.at("seed").get_to(t.seed);
  j.at("backend_meta").get_to(t.backend_meta);
}

void to_json(nlohmann::json& j, const Judgment& jd) {
  nlohmann::json dims = nlohmann::json::object();
  for (Dimension d : all_dimensions()) {
    const DimVerdict& v = jd.at(d);
    dims[dimension_name(d)] = {{"relation", relation_name(v.relation)},
                               {"rationale", v.rationale}};
  }
  j = nlohmann::json{
      {"per_dimension", dims},
      {"comprehensive",
       {{"relation", relation_name(jd.comprehensive.relation)},
        {"rationale", jd.comprehensive.rationale}}}};
}

void from_json(const nlohmann::json& j, Judgment& jd) {
  const auto& dims = j.at("per_dimension");
  for (Dimension d : all_dimensions()) {
    const auto& v = dims.at(dimension_name(d));
    jd.at(d).relation = relation_from_name(v.at("relation").get<std::string>());
    jd.at(d).rationale = v.value("rationale", "");
  }
  const auto& comp = j.at("comprehensive");
  jd.comprehensive.relation =
      relation_from_name(comp.at("relation").get<std::string>());
  jd.comprehensive.rationale = comp.value("rationale", "");
}

void to_json(nlohmann::json& j, const BattleRecord& r) {
  j = nlohmann::json{{"battle_id", r.battle_id},
                     {"round", r.round},
                     {"client_id", r.client_id},
                     {"model_a", r.model_a},
                     {"model_b", r.model_b},
                     {"position_order", position_order_name(r.position_order)},
                     {"judgment", r.judgment},
                     {"judge_id", r.judge_id},
                     {"timestamp", r.timestamp}};
}

void from_json(const nlohmann::json& j, BattleRecord& r) {
  j.at("battle_id").get_to(r.battle_id);
  j.at("round").get_to(r.round);
  j.at("client_id").get_to(r.client_id);
  j.at("model_a").get_to(r.model_a);
  j.at("model_b").get_to(r.model_b);
  r.position_order =
      position_order_from_name(j.at("position_order").get<std::string>());
  j.at("judgment").get_to(r.judgment);
  j.at("judge_id").get_to(r.judge_id);
  j.at("timestamp").get_to(r.timestamp);
}

// --- Validation ---

std::vector<std::string> validate_script(const SimulationScript& script,
                                         const ClientProfile& profile) {
  std::vector<std::string> out;
  if (script.client_id != profile.id) {
    out.push_back("client_id mismatch: script references '" + script.client_id +
                  "' but profile is '" + profile.id + "'");
  }
  if (static_cast<int>(script.directives.size()) != script.total_turns) {
    std::ostringstream os;
    os << "total_turns " << script.total_turns << " but "
       << script.directives.size() << " directives";
    out.push_back(os.str());
  }

  // Index coverage: 0..total_turns-1, no gaps, no duplicates.
  std::set<int> seen;
  for (const TurnDirective& d : script.directives) {
    if (d.turn < 0 || d.turn >= script.total_turns) {
      out.push_back("directive turn index out of range: " +
                    std::to_string(d.turn));
      continue;
    }
    if (!seen.insert(d.turn).second) {
      out.push_back("duplicate directive for turn " + std::to_string(d.turn));
    }
  }
  for (int t = 0; t < script.total_turns; ++t) {
    if (!seen.count(t)) {
      out.push_back("missing directive for turn " + std::to_string(t));
    }
  }

  // Order the directives by turn for the sequential checks below.
  std::vector<const TurnDirective*> ordered;
  ordered.reserve(script.directives.size());
  for (const TurnDirective& d : script.directives) ordered.push_back(&d);
  std::sort(ordered.begin(), ordered.end(),
            [](const TurnDirective* a, const TurnDirective* b) {
              return a->turn < b->turn;
            });

  int last_phase = -1;
  std::set<Dimension> covered;
  std::set<int> phases_present;
  for (const TurnDirective* d : ordered) {
    int ph = static_cast<int>(d->phase);
    phases_present.insert(ph);
    if (ph < last_phase) {
      out.push_back("non-monotone phase order at turn " +
                    std::to_string(d->turn));
    }
    last_phase = std::max(last_phase, ph);

    if (d->is_empty) {
      if (d->target_dimension.has_value()) {
        out.push_back("empty turn " + std::to_string(d->turn) +
                      " has a target dimension");
      }
      if (!d->session_theme.empty() || !d->emotional_state.empty() ||
          !d->verbal_pattern.empty() || !d->resistance.empty() ||
          !d->memories.empty()) {
        out.push_back("empty turn " + std::to_string(d->turn) +
                      " carries acting content");
      }
    } else if (d->session_theme.empty()) {
      out.push_back("scripted turn " + std::to_string(d->turn) +
                    " lacks a session theme");
    }
    if (d->target_dimension.has_value()) {
      if (scope_of(*d->target_dimension) != DimensionScope::kLocal) {
        out.push_back("global dimension '" +
                      dimension_name(*d->target_dimension) +
                      "' used as target at turn " + std::to_string(d->turn));
      } else {
        covered.insert(*d->target_dimension);
      }
    }
  }
  for (Dimension d : local_dimensions()) {
    if (!covered.count(d)) {
      out.push_back("uncovered local dimension: " + dimension_name(d));
    }
  }
  for (int p = 0; p < kPhaseCount; ++p) {
    if (!phases_present.count(p)) {
      out.push_back("missing phase: " + phase_name(static_cast<Phase>(p)));
    }
  }
  return out;
}

std::vector<std::string> validate_profiles(
    const std::vector<ClientProfile>& profiles) {
  std::vector<std::string> out;
  std::set<std::string> ids;
  for (const ClientProfile& p : profiles) {
    if (p.id.empty()) out.push_back("profile with empty id");
    if (!ids.insert(p.id).second) {
      out.push_back("duplicate profile id: " + p.id);
    }
    if (p.name.empty()) out.push_back("profile " + p.id + ": empty name");
    if (p.topic.empty()) out.push_back("profile " + p.id + ": empty topic");
    if (p.situation.empty())
      out.push_back("profile " + p.id + ": empty situation");
    if (p.core_drive.empty())
      out.push_back("profile " + p.id + ": empty core_drive");
  }
  return out;
}

Phase phase_of_turn(const SimulationScript& script, int t) {
  if (t < 0 || t >= script.total_turns) {
    throw PreconditionError("turn index " + std::to_string(t) +
                            " out of range [0, " +
                            std::to_string(script.total_turns) + ")");
  }
  if (t < static_cast<int>(script.directives.size()) &&
      script.directives[t].turn == t) {
    return script.directives[t].phase;
  }
  for (const TurnDirective& d : script.directives) {
    if (d.turn == t) return d.phase;
  }
  throw PreconditionError("no directive for turn " + std::to_string(t));
}

// --- Default script construction ---

namespace {

struct PhasePlanEntry {
  Phase phase;
  std::vector<Dimension> probes;  // placed inside this phase's scripted turns
  const char* theme;
  const char* pattern;
  const char* resistance;
};

// Probe-to-phase placement follows the clinical arc: discernment while the
// alliance forms, restructuring work in the middle, recommendations and
// boundaries near the end.
const std::vector<PhasePlanEntry>& phase_plan() {
  static const std::vector<PhasePlanEntry> plan = {
      {Phase::kAllianceBuilding,
       {Dimension::kDiscernment},
       "settling in and describing what has been happening lately",
       "matter-of-fact description, few feeling words",
       "deflects direct questions about emotions"},
      {Phase::kPatternAwareness,
       {Dimension::kReframing, Dimension::kProgression},
       "noticing the same reaction repeating across situations",
       "talks about the pattern in the third person",
       "intellectualizes instead of feeling"},
      {Phase::kCoreConflictTrauma,
       {Dimension::kTrauma, Dimension::kCrisis, Dimension::kSkill,
        Dimension::kMemory},
       "getting close to the event underneath the pattern",
       "flat, detailed narration with long pauses",
       "changes subject when pressed too fast"},
      {Phase::kCorrectiveExperience,
       {Dimension::kSuggestion, Dimension::kEthics},
       "trying out a different response to an old situation",
       "tentative, asks for concrete direction",
       "doubts the new behavior will hold"},
      {Phase::kIntegrationTermination,
       {},
       "looking back on the session and naming what to keep",
       "summarizing, quieter, some relief",
       "worries about relapsing after the session"},
  };
  return plan;
}

constexpr std::array<int, kPhaseCount> kPhaseMinScripted = {1, 2, 4, 2, 1};
constexpr std::array<int, kPhaseCount> kPhaseWeights = {1, 1, 3, 2, 1};

std::vector<int> scripted_lengths(int scripted_total) {
  std::vector<int> len(kPhaseMinScripted.begin(), kPhaseMinScripted.end());
  int used = 0;
  for (int v : len) used += v;
  // Hand out the remaining turns proportionally to the phase weights.
  int remaining = scripted_total - used;
  int weight_sum = 0;
  for (int w : kPhaseWeights) weight_sum += w;
  while (remaining > 0) {
    // Pick the phase whose share is furthest below target.
    int best = 0;
    double best_deficit = -1e300;
    int total_now = used + 0;
    for (int i = 0; i < kPhaseCount; ++i) {
      double target =
          static_cast<double>(scripted_total) * kPhaseWeights[i] / weight_sum;
      double deficit = target - len[i];
      if (deficit > best_deficit) {
        best_deficit = deficit;
        best = i;
      }
    }
    (void)total_now;
    ++len[best];
    --remaining;
  }
  return len;
}

}  // namespace

SimulationScript make_default_script(const ClientProfile& profile,
                                     int total_turns, std::uint64_t seed) {
  constexpr int kEmptyTurns = 4;
  int scripted_total = total_turns - kEmptyTurns;
  int min_total = 0;
  for (int v : kPhaseMinScripted) min_total += v;
  if (scripted_total < min_total) {
    throw PreconditionError(
        "total_turns too small: need at least " +
        std::to_string(min_total + kEmptyTurns) + ", got " +
        std::to_string(total_turns));
  }

  const std::vector<int> lens = scripted_lengths(scripted_total);
  Rng rng(mix64(seed, fnv1a64(profile.id)));

  SimulationScript script;
  script.script_id = profile.id + "-s44";
  if (total_turns != kDefaultTotalTurns) {
    script.script_id = profile.id + "-s" + std::to_string(total_turns);
  }
  script.client_id = profile.id;
  script.total_turns = total_turns;

  int turn = 0;
  for (int pi = 0; pi < kPhaseCount; ++pi) {
    const PhasePlanEntry& entry = phase_plan()[pi];
    const int n = lens[pi];

    // Spread this phase's probes over its scripted turns.
    std::vector<std::optional<Dimension>> probe_at(n);
    const auto& probes = entry.probes;
    for (std::size_t k = 0; k < probes.size(); ++k) {
      int slot = static_cast<int>((k * n + n / 2) / probes.size());
      slot = std::min(slot, n - 1);
      while (probe_at[slot].has_value()) slot = (slot + 1) % n;
      probe_at[slot] = probes[k];
    }

    for (int i = 0; i < n; ++i, ++turn) {
      TurnDirective d;
      d.turn = turn;
      d.phase = entry.phase;
      d.target_dimension = probe_at[i];
      d.session_theme = profile.name + " is " + entry.theme + " (" +
                        profile.situation + ")";
      if (!profile.emotional_words.empty()) {
        d.emotional_state =
            profile.emotional_words[rng.next_below(profile.emotional_words.size())];
      } else {
        d.emotional_state = "unsettled";
      }
      if (!profile.formative_experiences.empty() &&
          entry.phase == Phase::kCoreConflictTrauma) {
        d.memories.push_back(profile.formative_experiences[rng.next_below(
            profile.formative_experiences.size())]);
      }
      d.verbal_pattern = entry.pattern;
      d.resistance = entry.resistance;
      d.is_empty = false;
      script.directives.push_back(d);
    }

    // One empty turn after each of the first four phases, tagged with the
    // phase that just concluded so the phase order stays monotone.
    if (pi < kPhaseCount - 1) {
      TurnDirective d;
      d.turn = turn++;
      d.phase = entry.phase;
      d.is_empty = true;
      script.directives.push_back(d);
    }
  }
  return script;
}

}  // namespace caliper
