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

#include "caliper/synthcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace caliper {

namespace {

constexpr std::uint64_t kProfileSalt = 0x70726f66696c6573ULL;
constexpr std::uint64_t kJudgeSalt = 0x6a75646765736564ULL;
constexpr std::uint64_t kClientSalt = 0x636c69656e747365ULL;

std::vector<double> average_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(),
            [&v](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 +
                        1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

std::string two_digit(int v) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%02d", v);
  return buf;
}

ModeOutcome summarize_mode(const TournamentResult& result,
                           const std::vector<PoolModel>& pool) {
  ModeOutcome out;
  out.battles = static_cast<long long>(result.records.size());
  int total_rounds = 0;
  for (const BattleRecord& r : result.records) {
    total_rounds = std::max(total_rounds, r.round);
  }
  for (const BattleRecord& r : result.records) {
    out.per_model_battles[r.model_a] += 1;
    out.per_model_battles[r.model_b] += 1;
  }

  FitConfig fit_config;
  RatingTable table = fit_elo(result.records, fit_config);
  out.ratings = table.ratings;

  std::vector<double> latent;
  std::vector<double> fitted;
  for (const PoolModel& m : pool) {
    auto it = table.ratings.find(m.model_id);
    if (it == table.ratings.end()) continue;
    latent.push_back(m.latent_comprehensive);
    fitted.push_back(it->second);
  }
  try {
    out.spearman_vs_latent = spearman_rho(latent, fitted);
  } catch (const UndefinedMetricError&) {
    out.spearman_vs_latent = 0.0;  // all-tied snapshot carries no signal
  }

  // Cumulative per-round convergence curve.
  std::vector<BattleRecord> cumulative;
  cumulative.reserve(result.records.size());
  for (int r = 1; r <= total_rounds; ++r) {
    for (const BattleRecord& rec : result.records) {
      if (rec.round == r) cumulative.push_back(rec);
    }
    if (cumulative.empty()) continue;
    RatingTable snapshot = fit_elo(cumulative, fit_config);
    std::vector<double> lat;
    std::vector<double> fit;
    for (const PoolModel& m : pool) {
      auto it = snapshot.ratings.find(m.model_id);
      if (it == snapshot.ratings.end()) continue;
      lat.push_back(m.latent_comprehensive);
      fit.push_back(it->second);
    }
    double rho = 0.0;
    if (lat.size() >= 2) {
      try {
        rho = spearman_rho(lat, fit);
      } catch (const UndefinedMetricError&) {
        rho = 0.0;
      }
    }
    out.per_round_spearman.push_back(rho);
    out.per_round_battles.push_back(static_cast<long long>(cumulative.size()));
  }
  return out;
}

}  // namespace

std::vector<PoolModel> generate_pool(int n_models, double skill_spacing,
                                     std::uint64_t seed) {
  if (n_models < 2) throw PreconditionError("pool needs at least 2 models");
  std::vector<PoolModel> pool;
  pool.reserve(static_cast<std::size_t>(n_models));
  for (int k = 0; k < n_models; ++k) {
    PoolModel m;
    m.model_id = "synth" + two_digit(k);
    m.latent_comprehensive = kBaselineRating + k * skill_spacing;
    m.skill.seed = mix64(seed, static_cast<std::uint64_t>(1000 + k));
    for (Dimension d : all_dimensions()) {
      Rng rng(mix64(mix64(seed, static_cast<std::uint64_t>(k)),
                    static_cast<std::uint64_t>(static_cast<int>(d))));
      m.skill.at(d) = m.latent_comprehensive + rng.next_in(-10.0, 10.0);
    }
    m.backend.kind = BackendKind::kSyntheticTherapist;
    m.backend.skill = m.skill;
    m.backend.seed = m.skill.seed;
    pool.push_back(std::move(m));
  }
  return pool;
}

std::vector<ClientProfile> generate_profiles(int n, std::uint64_t seed) {
  if (n < 1) throw PreconditionError("need at least one profile");

  static const std::vector<std::string> kNames = {
      "Jordan", "Casey", "Riley", "Alex",  "Sam",    "Morgan",
      "Quinn",  "Avery", "Rowan", "Elliot", "Marin",  "Noa"};
  static const std::vector<std::string> kGenders = {"female", "male",
                                                    "nonbinary"};
  static const std::vector<std::string> kOccupations = {
      "high school student", "college student", "junior designer",
      "nurse", "apprentice electrician", "library assistant"};
  static const std::vector<std::pair<std::string, std::string>> kTopics = {
      {"Interpersonal Relationships", "difficulty voicing appreciation"},
      {"Academic Pressure", "fear of falling behind"},
      {"Family Relations", "conflict with a sibling"},
      {"Personal Growth", "perfectionism after a setback"},
      {"Emotional Distress", "persistent low mood in the evenings"},
      {"Romantic Relationships", "avoidance after a breakup"}};
  static const std::vector<std::vector<std::string>> kPersonalities = {
      {"self-critical", "orderly", "quietly stubborn"},
      {"eager to please", "conflict-avoidant"},
      {"analytical", "emotionally guarded"},
      {"impulsive", "warm", "easily discouraged"}};
  static const std::vector<std::string> kSituations = {
      "keeps replaying a recent mistake and withdrawing from friends",
      "freezes when asked to present work and then overprepares at night",
      "argues with family over small duties and regrets it immediately",
      "avoids a close friend after forgetting an important promise"};
  static const std::vector<std::string> kEvents = {
      "last Tuesday after class, in the hallway, with a close classmate",
      "two weeks ago at the family dinner table",
      "at the end-of-term review meeting last month"};
  static const std::vector<std::vector<std::string>> kEmotions = {
      {"confusion", "fear", "despondency"},
      {"anxiety", "frustration"},
      {"guilt", "sadness", "anger"}};
  static const std::vector<std::string> kDrives = {
      "believes a single flaw undoes everything done right",
      "needs constant reassurance of belonging to feel safe",
      "fears being a burden and hides every difficulty"};
  static const std::vector<std::string> kPatterns = {
      "rearranges routines to regain a feeling of control",
      "goes silent and changes the subject under stress",
      "over-apologizes and then withdraws"};
  static const std::vector<std::vector<std::string>> kSupports = {
      {"mother (a gentle teacher)", "one close classmate"},
      {"an older cousin", "the school counselor"},
      {"roommate", "weekend hiking group"}};
  static const std::vector<std::vector<std::string>> kExperiences = {
      {"a failed music exam at age nine that still stings",
       "a journal read aloud by others at age twelve"},
      {"moving cities twice before middle school"},
      {"being the family translator since childhood"}};
  static const std::vector<std::string> kInterests = {
      "pressed leaves, nature documentaries, geometry puzzles",
      "sketching, long walks, instant photography",
      "strategy games, baking, early morning runs"};

  std::vector<ClientProfile> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng(mix64(mix64(seed, kProfileSalt), static_cast<std::uint64_t>(i)));
    ClientProfile p;
    p.id = "client_" + std::string(i < 10 ? "00" : (i < 100 ? "0" : "")) +
           std::to_string(i);
    p.name = kNames[rng.next_below(kNames.size())] + " " +
             static_cast<char>('A' + (i % 26)) + std::string(".");
    p.gender = kGenders[rng.next_below(kGenders.size())];
    p.age = std::to_string(14 + rng.next_below(12));
    p.occupation = kOccupations[rng.next_below(kOccupations.size())];
    const auto& topic = kTopics[rng.next_below(kTopics.size())];
    p.topic = topic.first;
    p.subtopic = topic.second;
    p.personality = kPersonalities[rng.next_below(kPersonalities.size())];
    p.situation = kSituations[rng.next_below(kSituations.size())];
    p.event_context = kEvents[rng.next_below(kEvents.size())];
    p.emotional_words = kEmotions[rng.next_below(kEmotions.size())];
    p.core_drive = kDrives[rng.next_below(kDrives.size())];
    p.reaction_pattern = kPatterns[rng.next_below(kPatterns.size())];
    p.social_support = kSupports[rng.next_below(kSupports.size())];
    p.formative_experiences = kExperiences[rng.next_below(kExperiences.size())];
    p.interests_values = kInterests[rng.next_below(kInterests.size())];
    out.push_back(std::move(p));
  }
  return out;
}

double spearman_rho(const std::vector<double>& x,
                    const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw PreconditionError("spearman needs two equal series of length >= 2");
  }
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) {
    throw UndefinedMetricError("spearman undefined: constant ranks");
  }
  return sxy / std::sqrt(sxx * syy);
}

double kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw PreconditionError("kendall needs two equal series of length >= 2");
  }
  long long concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      if (dx == 0 && dy == 0) {
        ++ties_x;
        ++ties_y;
      } else if (dx == 0) {
        ++ties_x;
      } else if (dy == 0) {
        ++ties_y;
      } else if ((dx > 0) == (dy > 0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const double n0 = static_cast<double>(n) * (n - 1) / 2.0;
  const double denom =
      std::sqrt((n0 - ties_x) * (n0 - ties_y));
  if (denom == 0) throw UndefinedMetricError("kendall undefined: all tied");
  return (concordant - discordant) / denom;
}

RecoveryResult recovery_experiment(const std::vector<PoolModel>& pool,
                                   const RecoveryOptions& options) {
  if (pool.size() < 2) throw PreconditionError("pool needs at least 2 models");
  if (options.cases < 1) throw PreconditionError("cases must be >= 1");
  if (options.judge_noise < 0 || options.judge_noise > 1) {
    throw PreconditionError("judge noise must be in [0, 1]");
  }

  // Simulate one session per (model, case); both tournament modes reuse the
  // same transcripts.
  std::vector<ClientProfile> profiles =
      generate_profiles(options.cases, mix64(options.seed, kProfileSalt));
  std::vector<ClientCase> cases;
  cases.reserve(profiles.size());
  std::vector<std::string> case_ids;
  for (const ClientProfile& p : profiles) {
    ClientCase c;
    c.script = make_default_script(p, options.total_turns, options.seed);
    c.profile = p;
    cases.push_back(std::move(c));
    case_ids.push_back(p.id);
  }

  std::vector<ModelSpec> models;
  std::vector<std::string> model_ids;
  for (const PoolModel& m : pool) {
    models.push_back({m.model_id, m.backend});
    model_ids.push_back(m.model_id);
  }

  CampaignConfig campaign;
  campaign.campaign_seed = options.seed;
  campaign.workers = options.workers;
  campaign.client_backend.kind = BackendKind::kScriptReplay;
  campaign.client_backend.seed = mix64(options.seed, kClientSalt);
  campaign.templates = default_templates();

  CampaignResult sessions = run_campaign(models, cases, campaign);
  if (!sessions.failures.empty()) {
    throw DataError("synthetic campaign had " +
                    std::to_string(sessions.failures.size()) + " failures");
  }

  RecoveryResult result;
  result.sessions_simulated =
      static_cast<long long>(sessions.transcripts.size());
  TranscriptStore store(std::move(sessions.transcripts));

  BackendConfig judge_config;
  judge_config.kind = BackendKind::kSyntheticJudge;
  judge_config.noise = options.judge_noise;
  judge_config.seed = mix64(options.seed, kJudgeSalt);
  ChatBackend judge(judge_config);

  PromptTemplates templates = default_templates();
  BattleContext ctx;
  ctx.judge = &judge;
  ctx.templates = &templates;
  ctx.clock = std::make_shared<SimClock>(0);
  ctx.judge_id = "synthetic-judge";
  ctx.workers = options.workers;

  if (options.mode == RecoveryMode::kSwiss ||
      options.mode == RecoveryMode::kBoth) {
    TournamentOptions topt;
    topt.mode = TournamentMode::kSwiss;
    topt.rounds = options.rounds;
    topt.seed = options.seed;
    TournamentResult t =
        run_tournament(model_ids, case_ids, store, ctx, topt);
    result.swiss = summarize_mode(t, pool);
  }
  if (options.mode == RecoveryMode::kRoundRobin ||
      options.mode == RecoveryMode::kBoth) {
    TournamentOptions topt;
    topt.mode = TournamentMode::kRoundRobin;
    topt.rounds = 0;  // all N-1 circle rounds
    topt.seed = options.seed;
    TournamentResult t =
        run_tournament(model_ids, case_ids, store, ctx, topt);
    result.round_robin = summarize_mode(t, pool);
  }

  if (result.swiss && result.round_robin) {
    std::vector<double> swiss_r;
    std::vector<double> rr_r;
    for (const PoolModel& m : pool) {
      auto is = result.swiss->ratings.find(m.model_id);
      auto ir = result.round_robin->ratings.find(m.model_id);
      if (is == result.swiss->ratings.end() ||
          ir == result.round_robin->ratings.end()) {
        continue;
      }
      swiss_r.push_back(is->second);
      rr_r.push_back(ir->second);
    }
    result.kendall_swiss_vs_roundrobin = kendall_tau(swiss_r, rr_r);
  }
  return result;
}

}  // namespace caliper
