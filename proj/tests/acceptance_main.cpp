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
// Acceptance suite: one pass/fail line per criterion, exit 1 on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "caliper/agreement.hpp"
#include "caliper/battle.hpp"
#include "caliper/cli.hpp"
#include "caliper/jsonl.hpp"
#include "caliper/preflearn.hpp"
#include "caliper/rating.hpp"
#include "caliper/report.hpp"
#include "caliper/simulate.hpp"
#include "caliper/synthcheck.hpp"
#include "caliper/tournament.hpp"
#include "helpers.hpp"

namespace {

using namespace caliper;
namespace fs = std::filesystem;

struct CheckFailure {
  std::string what;
};

void expect(bool condition, const std::string& what) {
  if (!condition) throw CheckFailure{what};
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

double seconds_since(
    const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

constexpr double kXiLn3 = 190.84850188786498;

// --- criterion 1: closed-form Elo ------------------------------------------

void criterion_closed_form_elo() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<BtRecord> records;
  records.reserve(10000);
  for (int i = 0; i < 7500; ++i) records.push_back({"strong", "weak", 1.0});
  for (int i = 0; i < 2500; ++i) records.push_back({"strong", "weak", 0.0});

  FitConfig config;  // xi = 400/ln 10, lambda = 1e-4, baseline 100
  RatingTable table = fit_bt(records, config);
  const double gap = table.ratings.at("strong") - table.ratings.at("weak");
  const double mean =
      (table.ratings.at("strong") + table.ratings.at("weak")) / 2.0;
  const double elapsed = seconds_since(t0);

  expect(std::fabs(gap - kXiLn3) < 1.0,
         "gap " + fmt(gap) + " not within 1.0 of " + fmt(kXiLn3));
  expect(std::fabs(mean - 100.0) < 1e-6,
         "mean " + fmt(mean) + " not within 1e-6 of 100");
  expect(table.final_grad_norm < config.grad_tol, "fit did not converge");
  expect(elapsed < 1.0, "took " + fmt(elapsed) + "s (limit 1s)");
}

// --- criterion 2: mean preservation ----------------------------------------

void criterion_mean_preservation() {
  FitConfig config;
  long long observed_iterations = 0;
  FitObserver observer = [&observed_iterations](
                             int, const std::vector<double>& ratings) {
    double mean = 0;
    for (double r : ratings) mean += r;
    mean /= static_cast<double>(ratings.size());
    expect(std::fabs(mean - 100.0) <= 1e-9,
           "rating mean drifted to " + fmt(mean));
    ++observed_iterations;
  };

  // Two-model skewed, all ties, a balanced cycle, and a random mixed set.
  std::vector<std::vector<BtRecord>> datasets;
  {
    std::vector<BtRecord> two;
    for (int i = 0; i < 30; ++i) two.push_back({"a", "b", 1.0});
    for (int i = 0; i < 10; ++i) two.push_back({"a", "b", 0.0});
    datasets.push_back(two);

    std::vector<BtRecord> ties;
    for (int i = 0; i < 10; ++i) ties.push_back({"a", "b", 0.5});
    datasets.push_back(ties);

    std::vector<BtRecord> cycle;
    for (int i = 0; i < 7; ++i) {
      cycle.push_back({"a", "b", 1.0});
      cycle.push_back({"b", "c", 1.0});
      cycle.push_back({"c", "a", 1.0});
    }
    datasets.push_back(cycle);

    std::vector<BtRecord> mixed;
    Rng rng(12);
    for (int i = 0; i < 400; ++i) {
      const int a = static_cast<int>(rng.next_below(6));
      int b = static_cast<int>(rng.next_below(6));
      if (a == b) b = (b + 1) % 6;
      mixed.push_back({"m" + std::to_string(a), "m" + std::to_string(b),
                       0.5 * static_cast<double>(rng.next_below(3))});
    }
    datasets.push_back(mixed);
  }
  for (const auto& dataset : datasets) {
    fit_bt(dataset, config, observer);
  }
  expect(observed_iterations > 4, "observer never ran");
  // Every other fit in this binary is covered by the same invariant checked
  // inside fit_bt itself, which throws on any drift past 1e-9.
}

// --- criterion 3: scheduler arithmetic --------------------------------------

void criterion_scheduler_arithmetic() {
  const auto t0 = std::chrono::steady_clock::now();

  TournamentForecast f = plan_tournament(12, 4, 100);
  expect(f.sessions == 4800, "12x4x100 sessions = " + fmt(f.sessions));
  expect(f.dimension_battles == 57600,
         "12x4x100 dimension battles = " + fmt(f.dimension_battles));

  // Enumerate a 12-model 4-round Swiss schedule and count.
  auto enumerate_swiss = [](int n, int rounds, int cases) {
    std::vector<std::string> models;
    for (int i = 0; i < n; ++i) models.push_back("m" + std::to_string(i));
    Standings standings;
    std::map<std::string, long long> per_model;
    long long sessions = 0;
    Rng fold(3);
    for (int r = 1; r <= rounds; ++r) {
      RoundPlan plan = swiss_pairing(standings, models, r, 5);
      for (const auto& [x, y] : plan.matches) {
        sessions += 2LL * cases;
        per_model[x] += 2LL * cases;
        per_model[y] += 2LL * cases;
        standings.note_played(x, y);
        const double score = 0.5 * static_cast<double>(fold.next_below(3));
        standings.per_model[x].wins += score;
        standings.per_model[y].wins += 1.0 - score;
      }
      for (const std::string& bye : plan.byes) {
        standings.per_model[bye].wins += 1.0;
        standings.byed.insert(bye);
      }
    }
    return std::make_pair(sessions, per_model);
  };

  auto [sessions12, per12] = enumerate_swiss(12, 4, 100);
  expect(sessions12 == 4800, "enumerated 12x4x100 = " + fmt(sessions12));
  expect(sessions12 * kDimensionCount == 57600, "dimension battle count");

  auto [sessions6, per6] = enumerate_swiss(6, 3, 100);
  for (const auto& [model, count] : per6) {
    expect(count == 600, model + " has " + fmt(count) + " Swiss sessions");
  }
  std::map<std::string, long long> rr;
  std::vector<std::string> six = {"a", "b", "c", "d", "e", "f"};
  for (const BattleTicket& t : round_robin_schedule(six, 100)) {
    rr[t.model_x] += 1;
    rr[t.model_y] += 1;
  }
  for (const auto& [model, count] : rr) {
    expect(count == 1000, model + " has " + fmt(count) + " RR sessions");
  }

  // Forecast equals enumeration for every pool size up to 16.
  for (int n = 2; n <= 16; ++n) {
    const int rounds = default_rounds(n);
    auto [sessions, per] = enumerate_swiss(n, rounds, 3);
    expect(sessions == plan_tournament(n, rounds, 3).sessions,
           "forecast mismatch at n=" + std::to_string(n));
  }

  const double elapsed = seconds_since(t0);
  expect(elapsed < 1.0, "took " + fmt(elapsed) + "s (limit 1s)");
}

// --- criterion 4: synthetic recovery ----------------------------------------

void criterion_synthetic_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  const int kSeeds = 5;
  int rho_ok = 0;
  int tau_ok = 0;
  int monotone_ok = 0;
  std::vector<double> rhos, taus;

  for (int s = 0; s < kSeeds; ++s) {
    std::vector<PoolModel> pool = generate_pool(12, 20.0, 100 + s);
    RecoveryOptions opts;
    opts.mode = RecoveryMode::kBoth;
    opts.rounds = 4;
    opts.cases = 100;
    opts.judge_noise = 0.1;
    opts.seed = 100 + s;
    opts.workers = 8;
    RecoveryResult r = recovery_experiment(pool, opts);

    expect(r.swiss.has_value() && r.round_robin.has_value(),
           "both modes must run");
    expect(r.sessions_simulated == 12 * 100, "session count");
    expect(r.swiss->battles == plan_tournament(12, 4, 100).sessions,
           "swiss battles " + fmt(r.swiss->battles));
    expect(r.round_robin->battles == plan_tournament(12, 11, 100).sessions,
           "round robin battles " + fmt(r.round_robin->battles));
    for (const auto& [model, count] : r.swiss->per_model_battles) {
      expect(count == 800, "per-model swiss battles " + fmt(count));
    }

    rhos.push_back(r.swiss->spearman_vs_latent);
    if (r.swiss->spearman_vs_latent >= 0.9) ++rho_ok;
    expect(r.kendall_swiss_vs_roundrobin.has_value(), "kendall missing");
    taus.push_back(*r.kendall_swiss_vs_roundrobin);
    if (*r.kendall_swiss_vs_roundrobin >= 0.8) ++tau_ok;

    int declines = 0;
    for (std::size_t i = 1; i < r.swiss->per_round_spearman.size(); ++i) {
      if (r.swiss->per_round_spearman[i] <
          r.swiss->per_round_spearman[i - 1] - 1e-12) {
        ++declines;
      }
    }
    if (declines <= 1) ++monotone_ok;
  }

  const double elapsed = seconds_since(t0);
  std::ostringstream detail;
  detail << "rho:";
  for (double v : rhos) detail << " " << fmt(v);
  detail << " tau:";
  for (double v : taus) detail << " " << fmt(v);
  std::cerr << "  [recovery " << detail.str() << ", " << fmt(elapsed)
            << "s]\n";

  expect(rho_ok >= 4, "spearman >= 0.9 in only " + std::to_string(rho_ok) +
                          "/5 seeds (" + detail.str() + ")");
  expect(tau_ok >= 4, "kendall >= 0.8 in only " + std::to_string(tau_ok) +
                          "/5 seeds (" + detail.str() + ")");
  expect(monotone_ok >= 4,
         "per-round spearman regressed in " +
             std::to_string(kSeeds - monotone_ok) + "/5 seeds");
  expect(elapsed < 120.0, "took " + fmt(elapsed) + "s (limit 120s)");
}

// --- criterion 5: interleaving ----------------------------------------------

void criterion_interleaving() {
  auto slices_of = [](int n, const std::string& tag) {
    std::vector<PhaseSlice> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      out[i].stage_index = i + 1;
      out[i].phase = static_cast<Phase>(i % kPhaseCount);
      out[i].turns.push_back(
          {i, "c", tag + std::to_string(i), out[i].phase, std::nullopt});
    }
    return out;
  };

  Presentation two = interleave(slices_of(2, "a"), slices_of(2, "b"), "a", "b");
  expect(two.slices.size() == 4, "n=2 size");
  const bool exact = two.slices[0].side == BattleSide::kA &&
                     two.slices[1].side == BattleSide::kB &&
                     two.slices[2].side == BattleSide::kB &&
                     two.slices[3].side == BattleSide::kA;
  expect(exact, "n=2 order is not A1 B1 B2 A2");

  for (int n = 1; n <= 8; ++n) {
    Presentation p =
        interleave(slices_of(n, "a"), slices_of(n, "b"), "a", "b");
    expect(p.slices.size() == static_cast<std::size_t>(2 * n), "pair count");
    std::multiset<std::string> seen;
    for (std::size_t k = 0; 2 * k < p.slices.size(); ++k) {
      const StageSlice& first = p.slices[2 * k];
      const StageSlice& second = p.slices[2 * k + 1];
      const BattleSide lead =
          (k % 2 == 0) ? BattleSide::kA : BattleSide::kB;
      expect(first.side == lead && second.side != first.side,
             "parity violated at stage " + std::to_string(k + 1));
      seen.insert(first.turns[0].therapist_utterance);
      seen.insert(second.turns[0].therapist_utterance);
    }
    for (int i = 0; i < n; ++i) {
      expect(seen.count("a" + std::to_string(i)) == 1 &&
                 seen.count("b" + std::to_string(i)) == 1,
             "slice conservation violated");
    }
  }
}

// --- criterion 6: position symmetry -----------------------------------------

void criterion_position_symmetry() {
  // Four synthetic models in two matched pairs, judged over 2500 cases in
  // both orders: 10,000 battles.
  const int kCases = 2500;
  std::vector<ClientProfile> profiles = generate_profiles(kCases, 77);
  std::vector<ClientCase> cases;
  std::vector<std::string> case_ids;
  for (ClientProfile& p : profiles) {
    ClientCase c;
    c.script = make_default_script(p, 14, 7);
    c.profile = p;
    cases.push_back(c);
    case_ids.push_back(p.id);
  }
  std::vector<ModelSpec> models = {
      {"p0_weak", test::therapist_backend(100, 1)},
      {"p0_strong", test::therapist_backend(140, 2)},
      {"p1_weak", test::therapist_backend(100, 3)},
      {"p1_strong", test::therapist_backend(140, 4)},
  };
  CampaignConfig campaign;
  campaign.campaign_seed = 9;
  campaign.workers = 8;
  campaign.client_backend = test::replay_client(5);
  campaign.templates = default_templates();
  CampaignResult sessions = run_campaign(models, cases, campaign);
  expect(sessions.failures.empty(), "campaign failures");
  TranscriptStore store(std::move(sessions.transcripts));

  ChatBackend judge(test::judge_backend(0.1, 31));
  PromptTemplates templates = default_templates();
  BattleContext ctx;
  ctx.judge = &judge;
  ctx.templates = &templates;
  ctx.clock = std::make_shared<SimClock>(0);
  ctx.workers = 8;

  RoundPlan plan;
  plan.round = 1;
  plan.matches = {{"p0_weak", "p0_strong"}, {"p1_weak", "p1_strong"}};
  Standings standings;
  RoundResult result = run_round(plan, store, case_ids, ctx, standings);
  expect(result.records.size() == 10000,
         "expected 10000 battles, got " + fmt(result.records.size()));

  PositionShare share = position_share(result.records);
  std::cerr << "  [position shares " << fmt(share.first_win) << " / "
            << fmt(share.second_win) << " / tie " << fmt(share.tie) << "]\n";
  expect(std::fabs(share.first_win - share.second_win) < 0.02,
         "first/second shares differ by " +
             fmt(std::fabs(share.first_win - share.second_win)));
}

// --- criterion 7: distinct-n exactness ---------------------------------------

void criterion_distinct_n() {
  expect(std::fabs(distinct_n_tokens({"a", "a", "a", "a"}, 1) - 0.25) < 1e-12,
         "distinct-1 of aaaa");
  expect(std::fabs(distinct_n_tokens({"a", "b", "c", "d"}, 1) - 1.0) < 1e-12,
         "distinct-1 of abcd");
  expect(std::fabs(distinct_n_tokens({"a", "b", "a", "b"}, 2) - 2.0 / 3.0) <
             1e-12,
         "distinct-2 of abab");
}

// --- criterion 8: kappa exactness --------------------------------------------

void criterion_kappa() {
  std::vector<Relation> x = {Relation::kAWins, Relation::kAWins,
                             Relation::kAWins, Relation::kAWins,
                             Relation::kAWins, Relation::kBWins,
                             Relation::kBWins, Relation::kBWins,
                             Relation::kBWins, Relation::kBWins};
  std::vector<Relation> y = {Relation::kAWins, Relation::kAWins,
                             Relation::kAWins, Relation::kAWins,
                             Relation::kBWins, Relation::kAWins,
                             Relation::kBWins, Relation::kBWins,
                             Relation::kBWins, Relation::kBWins};
  expect(std::fabs(cohens_kappa(x, y) - 0.6) < 1e-12, "hand table kappa");
  expect(cohens_kappa(x, x) == 1.0, "self agreement");
}

// --- criterion 9: gradient fidelity ------------------------------------------

void criterion_gradient_fidelity() {
  Rng rng(2026);
  GrpoConfig config;
  double worst_grpo = 0.0;
  int accepted = 0;
  while (accepted < 100) {
    std::vector<double> theta, ref;
    GroupSample group;
    if (!test::random_group(rng, 6, 8, config, theta, ref, group)) continue;
    ++accepted;
    worst_grpo =
        std::max(worst_grpo, test::grpo_fd_error(theta, ref, group, config));
  }
  expect(worst_grpo < 1e-4,
         "grpo gradient max relative error " + fmt(worst_grpo));

  double worst_rm = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    PreferencePair pair;
    pair.dimension = local_dimensions()[rep % 9];
    pair.context = "ctx";
    pair.winner_response = "steady reply " + std::to_string(rep);
    pair.loser_response = "flat reply " + std::to_string(rep);
    for (int m = 0; m < rep % 6; ++m) {
      pair.winner_response += " " + marker_token(pair.dimension);
    }
    RewardParams params;
    for (double& w : params.weights) w = rng.next_in(-3.0, 3.0);
    worst_rm = std::max(worst_rm, test::rm_fd_error(params, pair));
  }
  expect(worst_rm < 1e-4, "rm gradient max relative error " + fmt(worst_rm));
}

// --- criterion 10: advantage properties --------------------------------------

void criterion_advantages() {
  std::vector<double> a = grpo_advantages({1, 2, 3}, 1e-8);
  expect(std::fabs(a[0] + 1.224744871391589) < 1e-9, "adv[0]");
  expect(std::fabs(a[1]) < 1e-9, "adv[1]");
  expect(std::fabs(a[2] - 1.224744871391589) < 1e-9, "adv[2]");

  Rng rng(55);
  for (int rep = 0; rep < 1000; ++rep) {
    const int g = 2 + static_cast<int>(rng.next_below(7));
    std::vector<double> rewards(static_cast<std::size_t>(g));
    for (double& r : rewards) r = rng.next_in(-5.0, 5.0);
    std::vector<double> adv = grpo_advantages(rewards, 1e-8);
    double mean = 0;
    for (double v : adv) mean += v;
    expect(std::fabs(mean) < 1e-9, "advantages not mean-zero");

    const double shift = rng.next_in(-10.0, 10.0);
    const double scale = 0.1 + rng.next_in(0.0, 5.0);
    std::vector<double> transformed(rewards);
    for (double& r : transformed) r = r * scale + shift;
    std::vector<double> adv2 = grpo_advantages(transformed, 1e-8);
    for (int i = 0; i < g; ++i) {
      expect(std::fabs(adv[i] - adv2[i]) < 1e-9,
             "shift/scale invariance violated");
    }
  }
}

// --- criterion 11: closed-loop improvement ------------------------------------

void criterion_closed_loop() {
  // Constructed bandit with marker-graded actions; reward model trained on
  // separable slot preferences; policy optimized with GRPO; judged on 100
  // held-out queries in both orders (200 battles).
  std::vector<Query> train = generate_bandit_queries("q_train", 45, 6, 501);
  std::vector<Query> heldout = generate_bandit_queries("q_held", 100, 6, 502);

  std::vector<PreferencePair> pairs;
  Rng rng(77);
  for (const Query& q : train) {
    for (int rep = 0; rep < 2; ++rep) {
      int hi = 1 + static_cast<int>(rng.next_below(5));
      int lo = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(hi)));
      PreferencePair p;
      p.dimension = q.dimension;
      p.context = q.context;
      p.winner_response = q.actions[static_cast<std::size_t>(hi)];
      p.loser_response = q.actions[static_cast<std::size_t>(lo)];
      p.source_battle = "bandit_" + q.id;
      pairs.push_back(std::move(p));
    }
  }
  RmTrainResult rm = train_rm(pairs, {});
  expect(rm.pairwise_accuracy >= 0.95,
         "rm accuracy " + fmt(rm.pairwise_accuracy));

  GrpoConfig config;
  config.epochs = 80;
  GrpoTrainResult trained =
      train_policy_grpo({}, rm.params, train, config, 9);
  PolicyParams before;  // pre-training snapshot: uniform policy

  ChatBackend judge(test::judge_backend(0.1, 91));
  PromptTemplates templates = default_templates();
  HeldoutTally tally =
      heldout_battle_eval(before, trained.policy, heldout, judge, templates);
  std::cerr << "  [closed loop w:l:t " << tally.comprehensive.wins << ":"
            << tally.comprehensive.losses << ":" << tally.comprehensive.ties
            << "]\n";
  expect(tally.battles == 200, "expected 200 battles");
  expect(tally.win_share() > 0.6, "win share " + fmt(tally.win_share()));
}

// --- criterion 12: determinism -----------------------------------------------

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("caliper_acc_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  expect(f.good(), "missing output " + path);
  return std::string(std::istreambuf_iterator<char>(f),
                     std::istreambuf_iterator<char>());
}

void run_or_die(const std::vector<std::string>& args) {
  expect(dispatch(args) == 0, "subcommand failed: " + join(args, " "));
}

void pipeline(const TempDir& dir, const std::vector<std::string>& order,
              int workers) {
  run_or_die({"gen-clients", "--n", "5", "--seed", "21", "--turns", "14",
              "--out-profiles", dir.file("profiles.jsonl"), "--out-scripts",
              dir.file("scripts.jsonl")});

  nlohmann::json models = nlohmann::json::array();
  nlohmann::json by_id;
  double skill = 240;
  for (const std::string& id : {"m_hi", "m_mid", "m_lo"}) {
    nlohmann::json per_dim;
    for (Dimension d : all_dimensions()) per_dim[dimension_name(d)] = skill;
    by_id[id] = {{"model_id", id},
                 {"backend",
                  {{"kind", "SyntheticTherapist"},
                   {"seed", skill},
                   {"skill", {{"per_dimension", per_dim}, {"seed", skill}}}}}};
    skill -= 70;
  }
  for (const std::string& id : order) models.push_back(by_id[id]);
  nlohmann::json config = {
      {"backends",
       {{"client", {{"kind", "ScriptReplay"}, {"seed", 13}}},
        {"models", models}}},
      {"simulation",
       {{"clients_path", dir.file("profiles.jsonl")},
        {"scripts_path", dir.file("scripts.jsonl")},
        {"campaign_seed", 33},
        {"workers", workers}}}};
  {
    std::ofstream f(dir.file("sim.json"), std::ios::trunc);
    f << config.dump(2);
  }
  run_or_die({"simulate", "--config", dir.file("sim.json"), "--out",
              dir.file("transcripts.jsonl")});
  run_or_die({"tournament", "--transcripts", dir.file("transcripts.jsonl"),
              "--rounds", "2", "--seed", "3", "--workers",
              std::to_string(workers), "--out", dir.file("battles.jsonl"),
              "--standings", dir.file("standings.jsonl")});
  run_or_die({"rate", "--battles", dir.file("battles.jsonl"), "--out",
              dir.file("ratings.jsonl")});
  run_or_die({"report", "--ratings", dir.file("ratings.jsonl"), "--battles",
              dir.file("battles.jsonl"), "--format", "md", "--out",
              dir.file("leaderboard.md")});
  run_or_die({"report", "--ratings", dir.file("ratings.jsonl"), "--battles",
              dir.file("battles.jsonl"), "--format", "csv", "--out",
              dir.file("leaderboard.csv")});
}

void criterion_determinism() {
  TempDir d1("run1"), d2("run2"), d3("run3");
  pipeline(d1, {"m_hi", "m_mid", "m_lo"}, 4);
  pipeline(d2, {"m_hi", "m_mid", "m_lo"}, 4);
  // Permuted work order: different model order and serial execution.
  pipeline(d3, {"m_lo", "m_hi", "m_mid"}, 1);

  for (const char* name : {"battles.jsonl", "ratings.jsonl", "leaderboard.md",
                           "leaderboard.csv"}) {
    expect(slurp(d1.file(name)) == slurp(d2.file(name)),
           std::string(name) + " differs between identical runs");
    expect(slurp(d1.file(name)) == slurp(d3.file(name)),
           std::string(name) + " differs under permuted work order");
  }
}

struct Criterion {
  int id;
  const char* name;
  std::function<void()> body;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "closed-form Elo gap", criterion_closed_form_elo},
      {2, "mean preservation during fits", criterion_mean_preservation},
      {3, "scheduler arithmetic", criterion_scheduler_arithmetic},
      {4, "synthetic skill recovery", criterion_synthetic_recovery},
      {5, "stage-slice interleaving", criterion_interleaving},
      {6, "position symmetry", criterion_position_symmetry},
      {7, "distinct-n exactness", criterion_distinct_n},
      {8, "kappa exactness", criterion_kappa},
      {9, "gradient fidelity", criterion_gradient_fidelity},
      {10, "advantage properties", criterion_advantages},
      {11, "closed-loop improvement", criterion_closed_loop},
      {12, "end-to-end determinism", criterion_determinism},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.body();
      std::printf("PASS  %2d  %s (%.2fs)\n", c.id, c.name,
                  seconds_since(t0));
    } catch (const CheckFailure& f) {
      ++failures;
      std::printf("FAIL  %2d  %s: %s\n", c.id, c.name, f.what.c_str());
    } catch (const std::exception& e) {
      ++failures;
      std::printf("FAIL  %2d  %s: unexpected error: %s\n", c.id, c.name,
                  e.what());
    }
    std::fflush(stdout);
  }
  if (failures > 0) {
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return 1;
  }
  std::printf("all %zu criteria passed\n", criteria.size());
  return 0;
}
