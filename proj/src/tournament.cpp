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

#include "caliper/tournament.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cmath>
#include <mutex>
#include <thread>
#include <tuple>

namespace caliper {

namespace {

std::pair<std::string, std::string> canonical_pair(const std::string& a,
                                                   const std::string& b) {
  return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

}  // namespace

const std::vector<PhaseSlice>& SliceCache::get(const TranscriptStore& store,
                                               const std::string& model_id,
                                               const std::string& client_id) {
  auto key = std::make_pair(model_id, client_id);
  std::lock_guard<std::mutex> lock(mu_);
  auto it = cache_.find(key);
  if (it == cache_.end()) {
    const SessionTranscript* t = store.find(model_id, client_id);
    if (t == nullptr) {
      throw SchedulingError("missing transcript for " + model_id + "/" +
                            client_id);
    }
    it = cache_
             .emplace(std::move(key),
                      std::make_unique<const std::vector<PhaseSlice>>(
                          slice_stages(*t)))
             .first;
  }
  return *it->second;
}

bool Standings::has_played(const std::string& a, const std::string& b) const {
  return played.count(canonical_pair(a, b)) > 0;
}

void Standings::note_played(const std::string& a, const std::string& b) {
  played.insert(canonical_pair(a, b));
}

RoundPlan swiss_pairing(const Standings& standings,
                        const std::vector<std::string>& models, int round,
                        std::uint64_t seed) {
  if (models.size() < 2) {
    throw PreconditionError("swiss pairing needs at least 2 models");
  }
  if (round < 1) throw PreconditionError("round must be >= 1");

  // Sort key: score desc, then a seeded tiebreak that depends only on
  // (seed, round, model id) so the input order never matters.
  struct Entry {
    std::string model;
    double score;
    std::uint64_t tiebreak;
  };
  std::vector<Entry> order;
  order.reserve(models.size());
  for (const std::string& m : models) {
    auto it = standings.per_model.find(m);
    const double score =
        it == standings.per_model.end() ? 0.0 : it->second.score();
    order.push_back(
        {m, score,
         mix64(mix64(seed, static_cast<std::uint64_t>(round)), fnv1a64(m))});
  }
  std::sort(order.begin(), order.end(), [](const Entry& a, const Entry& b) {
    if (a.score != b.score) return a.score > b.score;
    return std::tie(a.tiebreak, a.model) < std::tie(b.tiebreak, b.model);
  });

  RoundPlan plan;
  plan.round = round;

  std::vector<bool> taken(order.size(), false);

  // Odd pool: bye the lowest-score model that has not had one yet.
  if (order.size() % 2 == 1) {
    int bye = -1;
    for (int i = static_cast<int>(order.size()) - 1; i >= 0; --i) {
      if (!standings.byed.count(order[i].model)) {
        bye = i;
        break;
      }
    }
    if (bye < 0) bye = static_cast<int>(order.size()) - 1;
    taken[bye] = true;
    plan.byes.push_back(order[bye].model);
  }

  // Greedy top-down pairing. Skipping a played opponent floats the lower
  // entry down to the next available candidate.
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (taken[i]) continue;
    int partner = -1;
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      if (taken[j]) continue;
      if (!standings.has_played(order[i].model, order[j].model)) {
        partner = static_cast<int>(j);
        break;
      }
    }
    if (partner < 0) {
      // Everyone left already met this model; allow a rematch.
      for (std::size_t j = i + 1; j < order.size(); ++j) {
        if (!taken[j]) {
          partner = static_cast<int>(j);
          plan.forced_rematch = true;
          break;
        }
      }
    }
    if (partner < 0) break;  // nobody left (odd pool already byed)
    taken[i] = true;
    taken[static_cast<std::size_t>(partner)] = true;
    plan.matches.emplace_back(order[i].model,
                              order[static_cast<std::size_t>(partner)].model);
  }
  return plan;
}

int default_rounds(int n_models) {
  if (n_models < 2) throw PreconditionError("need at least 2 models");
  int rounds = 0;
  int capacity = 1;
  while (capacity < n_models) {
    capacity *= 2;
    ++rounds;
  }
  return rounds;
}

TournamentForecast plan_tournament(int n_models, int rounds, int cases) {
  if (n_models < 2) throw PreconditionError("need at least 2 models");
  if (rounds < 1) throw PreconditionError("rounds must be >= 1");
  if (cases < 1) throw PreconditionError("cases must be >= 1");
  const long long matches_per_round = n_models / 2;
  TournamentForecast f;
  f.sessions = static_cast<long long>(rounds) * matches_per_round * cases * 2;
  f.dimension_battles = f.sessions * kDimensionCount;
  return f;
}

std::vector<RoundPlan> round_robin_rounds(
    const std::vector<std::string>& models) {
  if (models.size() < 2) {
    throw PreconditionError("round robin needs at least 2 models");
  }
  std::vector<std::string> ring = models;
  if (ring.size() % 2 == 1) ring.push_back("");  // sentinel: sits out

  const int n = static_cast<int>(ring.size());
  std::vector<RoundPlan> rounds;
  for (int r = 0; r < n - 1; ++r) {
    RoundPlan plan;
    plan.round = r + 1;
    for (int i = 0; i < n / 2; ++i) {
      const std::string& x = ring[static_cast<std::size_t>(i)];
      const std::string& y = ring[static_cast<std::size_t>(n - 1 - i)];
      if (x.empty() || y.empty()) {
        plan.byes.push_back(x.empty() ? y : x);
        continue;
      }
      plan.matches.emplace_back(x, y);
    }
    rounds.push_back(std::move(plan));
    // Rotate everything but the first seat.
    std::rotate(ring.begin() + 1, ring.end() - 1, ring.end());
  }
  return rounds;
}

std::vector<BattleTicket> round_robin_schedule(
    const std::vector<std::string>& models, int cases) {
  if (cases < 1) throw PreconditionError("cases must be >= 1");
  std::vector<BattleTicket> out;
  for (const RoundPlan& plan : round_robin_rounds(models)) {
    for (const auto& match : plan.matches) {
      auto [x, y] = canonical_pair(match.first, match.second);
      for (int c = 0; c < cases; ++c) {
        out.push_back({plan.round, x, y, c, PositionOrder::kAB});
        out.push_back({plan.round, x, y, c, PositionOrder::kBA});
      }
    }
  }
  return out;
}

TranscriptStore::TranscriptStore(std::vector<SessionTranscript> transcripts) {
  for (SessionTranscript& t : transcripts) add(std::move(t));
}

void TranscriptStore::add(SessionTranscript transcript) {
  auto key = std::make_pair(transcript.model_id, transcript.client_id);
  by_key_[std::move(key)] = std::move(transcript);
}

const SessionTranscript* TranscriptStore::find(
    const std::string& model_id, const std::string& client_id) const {
  auto it = by_key_.find(std::make_pair(model_id, client_id));
  return it == by_key_.end() ? nullptr : &it->second;
}

void to_json(nlohmann::json& j, const StandingsRow& r) {
  j = nlohmann::json{{"round", r.round}, {"model_id", r.model_id},
                     {"wins", r.wins},   {"losses", r.losses},
                     {"ties", r.ties},   {"score", r.score}};
}

void from_json(const nlohmann::json& j, StandingsRow& r) {
  j.at("round").get_to(r.round);
  j.at("model_id").get_to(r.model_id);
  j.at("wins").get_to(r.wins);
  j.at("losses").get_to(r.losses);
  j.at("ties").get_to(r.ties);
  j.at("score").get_to(r.score);
}

RoundResult run_round(const RoundPlan& plan, const TranscriptStore& store,
                      const std::vector<std::string>& cases,
                      BattleContext& ctx, Standings& standings) {
  if (ctx.judge == nullptr || ctx.templates == nullptr) {
    throw PreconditionError("battle context lacks judge or templates");
  }
  if (cases.empty()) throw PreconditionError("no cases given");

  // Fail fast with the complete gap list before judging anything.
  {
    std::vector<std::string> gaps;
    for (const auto& match : plan.matches) {
      for (const std::string& c : cases) {
        if (store.find(match.first, c) == nullptr) {
          gaps.push_back(match.first + "/" + c);
        }
        if (store.find(match.second, c) == nullptr) {
          gaps.push_back(match.second + "/" + c);
        }
      }
    }
    if (!gaps.empty()) {
      std::sort(gaps.begin(), gaps.end());
      gaps.erase(std::unique(gaps.begin(), gaps.end()), gaps.end());
      throw SchedulingError("missing transcripts for: " + join(gaps, ", "));
    }
  }

  struct Ticket {
    std::size_t match_index;
    std::size_t case_index;
    PositionOrder order;
  };
  std::vector<Ticket> tickets;
  tickets.reserve(plan.matches.size() * cases.size() * 2);
  for (std::size_t m = 0; m < plan.matches.size(); ++m) {
    for (std::size_t c = 0; c < cases.size(); ++c) {
      tickets.push_back({m, c, PositionOrder::kAB});
      tickets.push_back({m, c, PositionOrder::kBA});
    }
  }

  std::shared_ptr<Clock> clock = ctx.clock ? ctx.clock : system_clock();
  std::shared_ptr<SliceCache> slices =
      ctx.slice_cache ? ctx.slice_cache : std::make_shared<SliceCache>();

  RoundResult result;
  // y-value of the canonical first model, summed per match over judged
  // battles, for the standings fold.
  std::vector<double> match_y_sum(plan.matches.size(), 0.0);
  std::vector<int> match_y_count(plan.matches.size(), 0);

  std::mutex out_mu;
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tickets.size()) return;
      const Ticket& ticket = tickets[i];
      auto [x, y] = canonical_pair(plan.matches[ticket.match_index].first,
                                   plan.matches[ticket.match_index].second);
      const std::string& client = cases[ticket.case_index];
      const bool ab = ticket.order == PositionOrder::kAB;
      const std::string& side_a = ab ? x : y;
      const std::string& side_b = ab ? y : x;

      const SessionTranscript* ta = store.find(side_a, client);
      const SessionTranscript* tb = store.find(side_b, client);

      char round_tag[16];
      std::snprintf(round_tag, sizeof(round_tag), "r%02d", plan.round);
      BattleRecord record;
      record.battle_id = std::string(round_tag) + "__" + client + "__" + x +
                         "_vs_" + y + "__" + position_order_name(ticket.order);
      record.round = plan.round;
      record.client_id = client;
      record.model_a = side_a;
      record.model_b = side_b;
      record.position_order = ticket.order;
      record.judge_id = ctx.judge_id;
      record.timestamp = iso8601_utc(clock->now_ms());

      try {
        Presentation presentation =
            interleave(slices->get(store, side_a, client),
                       slices->get(store, side_b, client), side_a, side_b);
        record.judgment = judge_battle(*ctx.judge, presentation,
                                       *ctx.templates, ctx.judge_options);
      } catch (const Error& e) {
        std::lock_guard<std::mutex> lock(out_mu);
        result.judgment_failures.push_back(record.battle_id + ": " + e.what());
        continue;
      }

      const double y_a = relation_y(record.judgment.comprehensive.relation);
      const double y_x = side_a == x ? y_a : 1.0 - y_a;
      {
        std::lock_guard<std::mutex> lock(out_mu);
        result.records.push_back(std::move(record));
        match_y_sum[ticket.match_index] += y_x;
        match_y_count[ticket.match_index] += 1;
      }
    }
  };

  const int n_workers = std::max(
      1, std::min<int>(ctx.workers, static_cast<int>(tickets.size())));
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(n_workers));
  for (int i = 0; i < n_workers; ++i) threads.emplace_back(worker);
  for (std::thread& th : threads) th.join();

  std::sort(result.records.begin(), result.records.end(),
            [](const BattleRecord& a, const BattleRecord& b) {
              return a.battle_id < b.battle_id;
            });
  std::sort(result.judgment_failures.begin(), result.judgment_failures.end());

  // Fold the round into the standings: each match contributes one point
  // split by the order-averaged comprehensive outcome (0, .25, .5, .75 or 1
  // per case, averaged over cases).
  for (std::size_t m = 0; m < plan.matches.size(); ++m) {
    auto [x, y] =
        canonical_pair(plan.matches[m].first, plan.matches[m].second);
    const double r =
        match_y_count[m] > 0 ? match_y_sum[m] / match_y_count[m] : 0.5;
    const double win_part = std::max(0.0, 2.0 * r - 1.0);
    const double tie_part = 1.0 - std::fabs(2.0 * r - 1.0);
    const double loss_part = std::max(0.0, 1.0 - 2.0 * r);
    ModelScore& sx = standings.per_model[x];
    ModelScore& sy = standings.per_model[y];
    sx.wins += win_part;
    sx.ties += tie_part;
    sx.losses += loss_part;
    sy.wins += loss_part;
    sy.ties += tie_part;
    sy.losses += win_part;
    standings.note_played(x, y);
  }
  for (const std::string& model : plan.byes) {
    standings.per_model[model].wins += 1.0;
    standings.byed.insert(model);
  }
  return result;
}

TournamentResult run_tournament(const std::vector<std::string>& model_ids,
                                const std::vector<std::string>& case_ids,
                                const TranscriptStore& store,
                                BattleContext& ctx,
                                const TournamentOptions& options) {
  if (model_ids.size() < 2) {
    throw PreconditionError("tournament needs at least 2 models");
  }

  if (!ctx.slice_cache) ctx.slice_cache = std::make_shared<SliceCache>();

  TournamentResult result;
  std::vector<RoundPlan> rr_plans;
  int rounds = options.rounds;

  if (options.mode == TournamentMode::kSwiss) {
    if (rounds <= 0) {
      rounds = default_rounds(static_cast<int>(model_ids.size()));
    }
  } else {
    rr_plans = round_robin_rounds(model_ids);
    if (rounds <= 0 || rounds > static_cast<int>(rr_plans.size())) {
      rounds = static_cast<int>(rr_plans.size());
    }
  }

  for (int r = 1; r <= rounds; ++r) {
    RoundPlan plan =
        options.mode == TournamentMode::kSwiss
            ? swiss_pairing(result.standings, model_ids, r, options.seed)
            : rr_plans[static_cast<std::size_t>(r - 1)];
    RoundResult round =
        run_round(plan, store, case_ids, ctx, result.standings);
    for (BattleRecord& rec : round.records) {
      result.records.push_back(std::move(rec));
    }
    for (std::string& f : round.judgment_failures) {
      result.judgment_failures.push_back(std::move(f));
    }
    for (const auto& [model, score] : result.standings.per_model) {
      result.standings_rows.push_back(
          {r, model, score.wins, score.losses, score.ties, score.score()});
    }
    result.plans.push_back(std::move(plan));
  }
  return result;
}

}  // namespace caliper
