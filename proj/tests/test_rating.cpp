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
#include <algorithm>
#include <cmath>
#include <random>

#include "caliper/rating.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace caliper;

namespace {

// Frozen oracle values.
constexpr double kXiLn3 = 190.84850188786498;     // xi * ln 3
constexpr double kLn2 = 0.6931471805599453;
constexpr double kMinusLn075 = 0.2876820724517809;

std::vector<BtRecord> two_model_records(int wins, int losses) {
  std::vector<BtRecord> records;
  for (int i = 0; i < wins; ++i) records.push_back({"strong", "weak", 1.0});
  for (int i = 0; i < losses; ++i) records.push_back({"strong", "weak", 0.0});
  return records;
}

double fitted_gap(const RatingTable& t) {
  return t.ratings.at("strong") - t.ratings.at("weak");
}

BattleRecord comp_battle(const std::string& a, const std::string& b,
                         Relation rel, int idx) {
  Judgment j = caliper::test::uniform_judgment(Relation::kTie);
  j.comprehensive.relation = rel;
  return caliper::test::make_record("b" + std::to_string(idx), 1, "c", a, b,
                                    PositionOrder::kAB, j);
}

}  // namespace

TEST_CASE("win_prob closed forms") {
  const double xi = kDefaultXi;
  CHECK(win_prob(100, 100, xi) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(win_prob(500, 100, xi) ==
        doctest::Approx(10.0 / 11.0).epsilon(1e-12));
  CHECK(win_prob(143, 138, xi) ==
        doctest::Approx(0.5071950817090514).epsilon(1e-9));
  CHECK(win_prob(100, 500, xi) ==
        doctest::Approx(1.0 / 11.0).epsilon(1e-12));
  CHECK_THROWS_AS(win_prob(1, 2, 0.0), PreconditionError);
}

TEST_CASE("bt_nll closed forms") {
  std::map<std::string, double> equal = {{"a", 100.0}, {"b", 100.0}};

  SUBCASE("single tie at equal ratings is ln 2") {
    std::vector<BtRecord> records = {{"a", "b", 0.5}};
    CHECK(bt_nll(equal, records, kDefaultXi, 0.0, 100.0) ==
          doctest::Approx(kLn2).epsilon(1e-12));
  }

  SUBCASE("single win at P = 0.75 is -ln 0.75") {
    std::map<std::string, double> tilted = {{"a", 100.0 + kXiLn3 / 2},
                                            {"b", 100.0 - kXiLn3 / 2}};
    std::vector<BtRecord> records = {{"a", "b", 1.0}};
    CHECK(bt_nll(tilted, records, kDefaultXi, 0.0, 100.0) ==
          doctest::Approx(kMinusLn075).epsilon(1e-12));
  }

  SUBCASE("empty record list is zero") {
    CHECK(bt_nll(equal, {}, kDefaultXi, 0.0, 100.0) == 0.0);
  }

  SUBCASE("with lambda = 0 a common shift changes nothing") {
    std::vector<BtRecord> records = {{"a", "b", 1.0}, {"a", "b", 0.0},
                                     {"a", "b", 0.5}};
    std::map<std::string, double> base = {{"a", 137.0}, {"b", 88.0}};
    std::map<std::string, double> shifted = {{"a", 137.0 + 55.5},
                                             {"b", 88.0 + 55.5}};
    CHECK(bt_nll(base, records, kDefaultXi, 0.0, 100.0) ==
          doctest::Approx(bt_nll(shifted, records, kDefaultXi, 0.0, 100.0))
              .epsilon(1e-12));
  }
}

TEST_CASE("two-model fit recovers the closed-form gap") {
  SUBCASE("lambda -> 0 limit on four records") {
    FitConfig config;
    config.lambda = 1e-8;
    RatingTable t = fit_bt(two_model_records(3, 1), config);
    CHECK(std::fabs(fitted_gap(t) - kXiLn3) < 0.5);
    const double mean =
        (t.ratings.at("strong") + t.ratings.at("weak")) / 2.0;
    CHECK(std::fabs(mean - 100.0) < 1e-6);
  }

  SUBCASE("default ridge on a dataset large enough to dominate it") {
    FitConfig config;  // lambda = 1e-4
    RatingTable t = fit_bt(two_model_records(7500, 2500), config);
    CHECK(std::fabs(fitted_gap(t) - kXiLn3) < 1.0);
    CHECK(t.final_grad_norm < config.grad_tol);
    const double mean =
        (t.ratings.at("strong") + t.ratings.at("weak")) / 2.0;
    CHECK(std::fabs(mean - 100.0) < 1e-6);
  }
}

TEST_CASE("symmetric datasets sit at the baseline fixed point") {
  FitConfig config;

  SUBCASE("all ties") {
    std::vector<BtRecord> records;
    for (int i = 0; i < 6; ++i) records.push_back({"a", "b", 0.5});
    for (int i = 0; i < 6; ++i) records.push_back({"b", "c", 0.5});
    RatingTable t = fit_bt(records, config);
    for (const auto& [model, r] : t.ratings) {
      CHECK(r == doctest::Approx(100.0).epsilon(1e-9));
    }
  }

  SUBCASE("balanced three-cycle") {
    std::vector<BtRecord> records;
    for (int i = 0; i < 5; ++i) {
      records.push_back({"a", "b", 1.0});
      records.push_back({"b", "c", 1.0});
      records.push_back({"c", "a", 1.0});
    }
    RatingTable t = fit_bt(records, config);
    for (const auto& [model, r] : t.ratings) {
      CHECK(r == doctest::Approx(100.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("mean stays at the baseline on every iteration") {
  FitConfig config;
  int calls = 0;
  FitObserver observer = [&calls](int, const std::vector<double>& ratings) {
    double mean = 0;
    for (double r : ratings) mean += r;
    mean /= static_cast<double>(ratings.size());
    CHECK(std::fabs(mean - 100.0) <= 1e-9);
    ++calls;
  };
  fit_bt(two_model_records(30, 10), config, observer);
  CHECK(calls > 1);
}

TEST_CASE("fitted gap grows with the win fraction") {
  FitConfig config;
  double last = -1e9;
  for (int wins : {1100, 1300, 1500, 1700, 1900}) {
    RatingTable t = fit_bt(two_model_records(wins, 2000 - wins), config);
    const double gap = fitted_gap(t);
    CHECK(gap > last);
    last = gap;
  }
}

TEST_CASE("record order does not change the fit") {
  std::vector<BtRecord> records;
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const int a = static_cast<int>(rng.next_below(4));
    int b = static_cast<int>(rng.next_below(4));
    if (b == a) b = (b + 1) % 4;
    records.push_back({"m" + std::to_string(a), "m" + std::to_string(b),
                       0.5 * static_cast<double>(rng.next_below(3))});
  }
  FitConfig config;
  RatingTable t1 = fit_bt(records, config);

  std::mt19937 shuffle_rng(99);
  std::shuffle(records.begin(), records.end(), shuffle_rng);
  RatingTable t2 = fit_bt(records, config);
  for (const auto& [model, r] : t1.ratings) {
    CHECK(std::fabs(r - t2.ratings.at(model)) < 1e-9);
  }
}

TEST_CASE("fit_elo filters by dimension") {
  // Empathy relations favor "x"; comprehensive favors "y".
  std::vector<BattleRecord> records;
  for (int i = 0; i < 40; ++i) {
    Judgment j = caliper::test::uniform_judgment(Relation::kTie);
    j.at(Dimension::kEmpathy).relation = Relation::kAWins;
    j.comprehensive.relation = Relation::kBWins;
    records.push_back(caliper::test::make_record("b" + std::to_string(i), 1,
                                                 "c", "x", "y",
                                                 PositionOrder::kAB, j));
  }
  FitConfig config;
  RatingTable comp = fit_elo(records, config);
  RatingTable empathy = fit_elo(records, config, Dimension::kEmpathy);
  CHECK(comp.ratings.at("y") > comp.ratings.at("x"));
  CHECK(empathy.ratings.at("x") > empathy.ratings.at("y"));
  CHECK(!comp.dimension.has_value());
  CHECK(empathy.dimension == Dimension::kEmpathy);

  CHECK_THROWS_AS(fit_elo({}, config), DataError);
}

TEST_CASE("win_rate counting") {
  std::vector<BattleRecord> records;
  int idx = 0;
  // "m" wins 3, loses 1 (as side A and side B mixed).
  records.push_back(comp_battle("m", "o", Relation::kAWins, idx++));
  records.push_back(comp_battle("o", "m", Relation::kBWins, idx++));
  records.push_back(comp_battle("m", "o", Relation::kAWins, idx++));
  records.push_back(comp_battle("m", "o", Relation::kBWins, idx++));
  CHECK(win_rate(records, "m") == doctest::Approx(0.75));

  std::vector<BattleRecord> ties;
  for (int i = 0; i < 4; ++i) {
    ties.push_back(comp_battle("m", "o", Relation::kTie, i));
  }
  CHECK(win_rate(ties, "m") == doctest::Approx(0.5));

  std::vector<BattleRecord> mixed;
  mixed.push_back(comp_battle("m", "o", Relation::kAWins, 0));
  mixed.push_back(comp_battle("m", "o", Relation::kBWins, 1));
  mixed.push_back(comp_battle("m", "o", Relation::kTie, 2));
  mixed.push_back(comp_battle("m", "o", Relation::kTie, 3));
  CHECK(win_rate(mixed, "m") == doctest::Approx(0.5));

  CHECK_THROWS_AS(win_rate(records, "absent"), DataError);
}

TEST_CASE("one_sided_rate needs a clean sweep") {
  std::vector<BattleRecord> records;
  int idx = 0;
  // 3 clean sweeps for A.
  for (int i = 0; i < 3; ++i) {
    records.push_back(caliper::test::make_record(
        "s" + std::to_string(idx++), 1, "c", "p", "q", PositionOrder::kAB,
        caliper::test::uniform_judgment(Relation::kAWins)));
  }
  // 1 clean sweep for B.
  records.push_back(caliper::test::make_record(
      "s" + std::to_string(idx++), 1, "c", "p", "q", PositionOrder::kBA,
      caliper::test::uniform_judgment(Relation::kBWins)));
  // 11 wins plus one tie is not one-sided.
  Judgment near = caliper::test::uniform_judgment(Relation::kAWins);
  near.at(Dimension::kMemory).relation = Relation::kTie;
  records.push_back(caliper::test::make_record("s" + std::to_string(idx++), 1,
                                               "c", "p", "q",
                                               PositionOrder::kAB, near));
  // 5 mixed battles.
  for (int i = 0; i < 5; ++i) {
    Judgment j = caliper::test::uniform_judgment(Relation::kAWins);
    j.at(Dimension::kCrisis).relation = Relation::kBWins;
    records.push_back(caliper::test::make_record(
        "s" + std::to_string(idx++), 1, "c", "p", "q", PositionOrder::kAB, j));
  }

  auto rates = one_sided_rate(records);
  REQUIRE(rates.size() == 1);
  CHECK(rates.begin()->second == doctest::Approx(0.4));  // 4 of 10
}
