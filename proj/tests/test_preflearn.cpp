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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "caliper/preflearn.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace caliper;

namespace {

constexpr double kLn2 = 0.6931471805599453;

PreferencePair marker_pair(Dimension d, int winner_markers, int loser_markers,
                           const std::string& tag) {
  PreferencePair p;
  p.dimension = d;
  p.context = "ctx " + tag;
  p.winner_response = "calm steady reply " + tag;
  for (int i = 0; i < winner_markers; ++i) {
    p.winner_response += " " + marker_token(d);
  }
  p.loser_response = "calm flat reply " + tag;
  for (int i = 0; i < loser_markers; ++i) {
    p.loser_response += " " + marker_token(d);
  }
  p.source_battle = "b_" + tag;
  return p;
}

}  // namespace

TEST_CASE("extract_preferences emits one pair per decisive relation") {
  const std::string client = "c_prefs";
  TranscriptStore store;
  store.add(test::sample_transcript("win", 240, client, 14));
  store.add(test::sample_transcript("lose", 120, client, 14));

  Judgment j = test::uniform_judgment(Relation::kAWins);
  j.at(Dimension::kMemory).relation = Relation::kTie;
  j.at(Dimension::kCrisis).relation = Relation::kTie;
  std::vector<BattleRecord> records = {test::make_record(
      "b0", 1, client, "win", "lose", PositionOrder::kAB, j)};

  std::vector<PreferencePair> pairs = extract_preferences(records, store);
  CHECK(pairs.size() == 10);  // 12 relations minus 2 ties
  for (const PreferencePair& p : pairs) {
    CHECK(p.winner_response != p.loser_response);
    CHECK(p.source_battle == "b0");
  }

  SUBCASE("all ties emit nothing") {
    records[0].judgment = test::uniform_judgment(Relation::kTie);
    CHECK(extract_preferences(records, store).empty());
  }

  SUBCASE("missing trigger turn is an extraction error") {
    SessionTranscript truncated = *store.find("win", client);
    for (DialogueTurn& turn : truncated.turns) {
      turn.triggered_dimension.reset();
    }
    TranscriptStore broken;
    broken.add(truncated);
    broken.add(*store.find("lose", client));
    records[0].judgment = test::uniform_judgment(Relation::kAWins);
    try {
      extract_preferences(records, broken);
      FAIL("expected ExtractionError");
    } catch (const ExtractionError& e) {
      CHECK(std::string(e.what()).find("b0") != std::string::npos);
    }
  }

  SUBCASE("missing transcript is an extraction error") {
    TranscriptStore empty;
    CHECK_THROWS_AS(extract_preferences(records, empty), ExtractionError);
  }
}

TEST_CASE("rm_loss closed forms") {
  RewardParams zero;
  PreferencePair pair = marker_pair(Dimension::kSkill, 3, 0, "a");

  SUBCASE("zero margin costs ln 2") {
    CHECK(rm_loss(zero, pair) == doctest::Approx(kLn2).epsilon(1e-12));
  }

  SUBCASE("margin ln 3 costs ln(4/3)") {
    // Set the Skill marker-density weight so the margin is exactly ln 3.
    const std::vector<double> fw = response_features(
        pair.context, pair.winner_response, pair.dimension);
    const std::vector<double> fl = response_features(
        pair.context, pair.loser_response, pair.dimension);
    const int slot = static_cast<int>(Dimension::kSkill) * kFeaturesPerBlock + 3;
    const double gap = fw[slot] - fl[slot];
    REQUIRE(gap > 0);
    RewardParams params;
    params.weights[slot] = std::log(3.0) / gap;
    CHECK(rm_loss(params, pair) ==
          doctest::Approx(std::log(4.0 / 3.0)).epsilon(1e-12));
  }

  SUBCASE("loss decays monotonically with the margin") {
    const int slot = static_cast<int>(Dimension::kSkill) * kFeaturesPerBlock + 3;
    double last = 1e9;
    for (double w : {0.0, 1.0, 5.0, 25.0, 125.0}) {
      RewardParams params;
      params.weights[slot] = w;
      const double loss = rm_loss(params, pair);
      CHECK(loss < last);
      last = loss;
    }
    CHECK(last >= 0.0);
  }
}

TEST_CASE("swapped pairs cost at least 2 ln 2 combined") {
  Rng rng(17);
  for (int rep = 0; rep < 50; ++rep) {
    PreferencePair pair = marker_pair(
        local_dimensions()[rng.next_below(9)],
        static_cast<int>(rng.next_below(8)), static_cast<int>(rng.next_below(8)),
        std::to_string(rep));
    PreferencePair swapped = pair;
    std::swap(swapped.winner_response, swapped.loser_response);
    RewardParams params;
    for (double& w : params.weights) w = rng.next_in(-2.0, 2.0);
    CHECK(rm_loss(params, pair) + rm_loss(params, swapped) >=
          2 * kLn2 - 1e-12);
  }
}

TEST_CASE("rm gradients pass central differences") {
  Rng rng(23);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    PreferencePair pair = marker_pair(
        local_dimensions()[rng.next_below(9)],
        static_cast<int>(rng.next_below(6)),
        static_cast<int>(rng.next_below(6)), "fd" + std::to_string(rep));
    RewardParams params;
    for (double& w : params.weights) w = rng.next_in(-3.0, 3.0);
    worst = std::max(worst, test::rm_fd_error(params, pair));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("train_rm behavior") {
  SUBCASE("separable pairs reach high accuracy") {
    std::vector<PreferencePair> pairs;
    Rng rng(5);
    for (int i = 0; i < 60; ++i) {
      pairs.push_back(marker_pair(local_dimensions()[i % 9],
                                  4 + static_cast<int>(rng.next_below(3)), 0,
                                  "sep" + std::to_string(i)));
    }
    RmTrainResult result = train_rm(pairs, {});
    CHECK(result.pairwise_accuracy >= 0.95);
    CHECK(result.final_loss < kLn2);
  }

  SUBCASE("identical responses stay at chance and ln 2") {
    std::vector<PreferencePair> pairs;
    for (int i = 0; i < 10; ++i) {
      PreferencePair p;
      p.dimension = Dimension::kSkill;
      p.context = "ctx";
      p.winner_response = "the same text";
      p.loser_response = "the same text";
      p.source_battle = "b";
      pairs.push_back(p);
    }
    RmTrainResult result = train_rm(pairs, {});
    CHECK(result.pairwise_accuracy == doctest::Approx(0.5));
    CHECK(result.final_loss == doctest::Approx(kLn2).epsilon(1e-9));
  }

  SUBCASE("a single informative pair is learned outright") {
    std::vector<PreferencePair> pairs = {marker_pair(Dimension::kTrauma, 5, 0,
                                                     "single")};
    RmTrainResult result = train_rm(pairs, {});
    CHECK(result.pairwise_accuracy == doctest::Approx(1.0));
  }

  CHECK_THROWS_AS(train_rm({}, {}), DataError);
}

TEST_CASE("grpo_advantages closed forms and invariances") {
  std::vector<double> a = grpo_advantages({1, 2, 3}, 1e-8);
  REQUIRE(a.size() == 3);
  CHECK(a[0] == doctest::Approx(-1.224744871391589).epsilon(1e-9));
  CHECK(a[1] == doctest::Approx(0.0));
  CHECK(a[2] == doctest::Approx(1.224744871391589).epsilon(1e-9));

  std::vector<double> flat = grpo_advantages({4.2, 4.2, 4.2, 4.2}, 1e-8);
  for (double v : flat) CHECK(v == 0.0);

  std::vector<double> pairv = grpo_advantages({0, 1}, 1e-8);
  CHECK(pairv[0] == doctest::Approx(-1.0));
  CHECK(pairv[1] == doctest::Approx(1.0));

  CHECK_THROWS_AS(grpo_advantages({1.0}, 1e-8), PreconditionError);

  Rng rng(77);
  for (int rep = 0; rep < 1000; ++rep) {
    const int g = 2 + static_cast<int>(rng.next_below(7));
    std::vector<double> rewards(g);
    for (double& r : rewards) r = rng.next_in(-5.0, 5.0);
    std::vector<double> adv = grpo_advantages(rewards, 1e-8);

    double mean = 0;
    for (double v : adv) mean += v;
    CHECK(std::fabs(mean) < 1e-9);

    const double shift = rng.next_in(-10.0, 10.0);
    const double scale = 0.1 + rng.next_in(0.0, 5.0);
    std::vector<double> transformed(rewards);
    for (double& r : transformed) r = r * scale + shift;
    std::vector<double> adv2 = grpo_advantages(transformed, 1e-8);
    for (int i = 0; i < g; ++i) {
      CHECK(std::fabs(adv[i] - adv2[i]) < 1e-9);
    }
  }
}

TEST_CASE("grpo_objective identities") {
  GrpoConfig config;
  config.kl_coeff = 0.0;

  // theta == theta_old: every rho is 1, the clip is inactive, and the
  // objective is the mean advantage.
  std::vector<double> theta = {0.3, -0.2, 0.1, 0.5};
  const std::vector<double> logp = log_softmax(theta);
  GroupSample group;
  group.query_id = "q";
  group.responses = {0, 2, 3, 1};
  for (int a : group.responses) group.old_logprobs.push_back(logp[a]);
  group.rewards = {1.0, 2.0, 0.5, 3.0};
  group.ref_logprobs = group.old_logprobs;

  std::vector<double> adv = grpo_advantages(group.rewards, config.std_floor);
  double mean_adv = 0;
  for (double v : adv) mean_adv += v;
  mean_adv /= static_cast<double>(adv.size());

  auto [value, grad] = grpo_objective(theta, theta, group, config);
  CHECK(value == doctest::Approx(mean_adv).epsilon(1e-12));

  SUBCASE("pi_theta == pi_ref zeroes the KL term for any beta") {
    GrpoConfig with_kl = config;
    with_kl.kl_coeff = 123.0;
    auto [v2, g2] = grpo_objective(theta, theta, group, with_kl);
    CHECK(v2 == doctest::Approx(value).epsilon(1e-12));
  }

  SUBCASE("inside the trust band the clip is the identity") {
    std::vector<double> nearby = theta;
    nearby[0] += 0.01;  // rho stays well inside [0.8, 1.2]
    GrpoConfig no_clip = config;
    no_clip.clip_epsilon = 0.9999;
    auto [v_clip, g_clip] = grpo_objective(nearby, theta, group, config);
    auto [v_wide, g_wide] = grpo_objective(nearby, theta, group, no_clip);
    CHECK(v_clip == doctest::Approx(v_wide).epsilon(1e-12));
  }

  SUBCASE("out-of-vocabulary actions are data errors") {
    GroupSample bad = group;
    bad.responses[0] = 9;
    CHECK_THROWS_AS(grpo_objective(theta, theta, bad, config), DataError);
  }
}

TEST_CASE("grpo gradients pass central differences") {
  Rng rng(41);
  GrpoConfig config;
  double worst = 0.0;
  int accepted = 0;
  while (accepted < 100) {
    std::vector<double> theta, ref;
    GroupSample group;
    if (!test::random_group(rng, 5, 8, config, theta, ref, group)) continue;
    ++accepted;
    worst = std::max(worst, test::grpo_fd_error(theta, ref, group, config));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("train_policy_grpo learns the constructed bandit") {
  std::vector<Query> queries = generate_bandit_queries("q_train", 40, 6, 3);
  RewardParams reward = test::marker_reward();

  GrpoConfig config;
  config.epochs = 80;
  config.learning_rate = 0.5;
  GrpoTrainResult result = train_policy_grpo({}, reward, queries, config, 11);

  // The top slot carries the most markers, hence the highest reward.
  int correct = 0;
  for (const Query& q : queries) {
    double best = -1e18;
    int best_slot = 0;
    for (int a = 0; a < static_cast<int>(q.actions.size()); ++a) {
      const double r = reward.score(q.context, q.actions[a], q.dimension);
      if (r > best) {
        best = r;
        best_slot = a;
      }
    }
    if (greedy_action(result.policy.logits) == best_slot) ++correct;
  }
  CHECK(correct >= static_cast<int>(queries.size() * 95) / 100);

  // Reward log rises from the uniform-policy level.
  REQUIRE(!result.epoch_mean_reward.empty());
  CHECK(result.epoch_mean_reward.back() > result.epoch_mean_reward.front());
  CHECK(result.policy.trained_query_ids.size() == queries.size());
}

TEST_CASE("a dominant KL penalty pins the policy to the reference") {
  std::vector<Query> queries = generate_bandit_queries("q_kl", 10, 4, 5);
  RewardParams reward = test::marker_reward();
  GrpoConfig config;
  config.kl_coeff = 1e6;
  config.learning_rate = 1e-7;
  config.epochs = 40;
  GrpoTrainResult result = train_policy_grpo({}, reward, queries, config, 2);

  // KL(pi_theta || uniform reference) stays negligible.
  const std::vector<double> logp = log_softmax(result.policy.logits);
  const double log_uniform = std::log(1.0 / 4.0);
  double kl = 0;
  for (double lp : logp) kl += std::exp(lp) * (lp - log_uniform);
  CHECK(kl <= 1e-3);
}

TEST_CASE("zero-variance rewards leave the policy untouched") {
  std::vector<Query> queries = generate_bandit_queries("q_zero", 8, 4, 9);
  RewardParams zero_reward;  // every response scores 0
  GrpoConfig config;
  config.kl_coeff = 0.0;
  config.epochs = 20;
  GrpoTrainResult result =
      train_policy_grpo({}, zero_reward, queries, config, 4);
  for (double logit : result.policy.logits) {
    CHECK(logit == 0.0);  // bitwise unchanged
  }
}

TEST_CASE("held-out evaluation") {
  std::vector<Query> train = generate_bandit_queries("q_train", 36, 6, 21);
  std::vector<Query> heldout = generate_bandit_queries("q_held", 40, 6, 22);
  RewardParams reward = test::marker_reward();

  GrpoConfig config;
  config.epochs = 80;
  GrpoTrainResult trained = train_policy_grpo({}, reward, train, config, 6);
  PolicyParams before;  // untrained zeros

  PromptTemplates templates = default_templates();

  SUBCASE("identical policies tie everywhere") {
    ChatBackend judge(test::judge_backend(0.1, 60));
    HeldoutTally tally = heldout_battle_eval(before, before, heldout, judge,
                                             templates);
    CHECK(tally.battles == 2 * static_cast<long long>(heldout.size()));
    CHECK(std::fabs(tally.win_share() - tally.loss_share()) < 0.1);
    CHECK(tally.comprehensive.ties == tally.battles);
  }

  SUBCASE("the trained policy wins the held-out battles") {
    ChatBackend judge(test::judge_backend(0.05, 61));
    HeldoutTally tally = heldout_battle_eval(before, trained.policy, heldout,
                                             judge, templates);
    CHECK(tally.win_share() > 0.6);
    // The probed dimensions carry the signal.
    long long dim_wins = 0, dim_total = 0;
    for (Dimension d : all_dimensions()) {
      const TallyRow& row = tally.per_dimension[static_cast<int>(d)];
      dim_wins += row.wins;
      dim_total += row.wins + row.losses + row.ties;
    }
    CHECK(dim_total == 12 * tally.battles);
    CHECK(dim_wins > 0);
  }

  SUBCASE("overlapping ids are rejected") {
    std::vector<Query> overlap = heldout;
    overlap[0].id = train[0].id;
    ChatBackend judge(test::judge_backend(0.1, 62));
    CHECK_THROWS_AS(heldout_battle_eval(before, trained.policy, overlap,
                                        judge, templates),
                    DataError);
  }
}
