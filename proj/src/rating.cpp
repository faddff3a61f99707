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

#include "caliper/rating.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

// The fitted ratings maximize the Bradley-Terry likelihood of the observed
// outcomes with a small ridge prior pulling every rating toward the
// baseline:
//
//   L(r) = -sum_(A,B,y) [ y log P(A>B) + (1-y) log(1-P(A>B)) ]
//          + lambda * sum_i (r_i - baseline)^2
//
// with P(A>B) = sigmoid((r_A - r_B) / xi). Without the ridge the likelihood
// is invariant under a common shift of all ratings (and unbounded on
// separable data); the ridge anchors the mean at the baseline and keeps the
// optimum finite and unique.
//
// The pairwise NLL gradient terms come in exact +/- pairs, so the gradient
// components sum to zero and plain descent steps preserve the rating mean at
// the baseline throughout the fit.

namespace caliper {

namespace {

double log_sigmoid(double z) {
  return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

struct IndexedRecord {
  int a;
  int b;
  double y;
};

struct Problem {
  std::vector<std::string> models;  // sorted, index = rating slot
  std::vector<IndexedRecord> records;
};

Problem index_records(const std::vector<BtRecord>& records) {
  Problem p;
  std::set<std::string> names;
  for (const BtRecord& r : records) {
    names.insert(r.a);
    names.insert(r.b);
  }
  p.models.assign(names.begin(), names.end());
  std::map<std::string, int> index;
  for (int i = 0; i < static_cast<int>(p.models.size()); ++i) {
    index[p.models[i]] = i;
  }
  p.records.reserve(records.size());
  for (const BtRecord& r : records) {
    if (r.y != 0.0 && r.y != 0.5 && r.y != 1.0) {
      throw DataError("outcome y must be 0, 0.5 or 1");
    }
    if (r.a == r.b) throw DataError("record pits a model against itself");
    p.records.push_back({index[r.a], index[r.b], r.y});
  }
  // Canonical record order: gradient sums accumulate identically however the
  // caller ordered the records, so the fit is bitwise order-independent.
  std::sort(p.records.begin(), p.records.end(),
            [](const IndexedRecord& x, const IndexedRecord& y) {
              return std::tie(x.a, x.b, x.y) < std::tie(y.a, y.b, y.y);
            });
  return p;
}

double nll_indexed(const std::vector<double>& r,
                   const std::vector<IndexedRecord>& records, double xi,
                   double lambda, double baseline) {
  double loss = 0.0;
  for (const IndexedRecord& rec : records) {
    const double z = (r[rec.a] - r[rec.b]) / xi;
    loss -= rec.y * log_sigmoid(z) + (1.0 - rec.y) * log_sigmoid(-z);
  }
  for (double v : r) {
    const double d = v - baseline;
    loss += lambda * d * d;
  }
  return loss;
}

void gradient_indexed(const std::vector<double>& r,
                      const std::vector<IndexedRecord>& records, double xi,
                      double lambda, double baseline,
                      std::vector<double>& grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  for (const IndexedRecord& rec : records) {
    const double p = win_prob(r[rec.a], r[rec.b], xi);
    const double g = (p - rec.y) / xi;
    grad[rec.a] += g;
    grad[rec.b] -= g;
  }
  for (std::size_t i = 0; i < r.size(); ++i) {
    grad[i] += 2.0 * lambda * (r[i] - baseline);
  }
}

double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

}  // namespace

double win_prob(double r_a, double r_b, double xi) {
  if (xi <= 0) throw PreconditionError("xi must be positive");
  const double z = (r_a - r_b) / xi;
  if (z >= 0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double bt_nll(const std::map<std::string, double>& ratings,
              const std::vector<BtRecord>& records, double xi, double lambda,
              double baseline) {
  double loss = 0.0;
  for (const BtRecord& rec : records) {
    auto ia = ratings.find(rec.a);
    auto ib = ratings.find(rec.b);
    if (ia == ratings.end() || ib == ratings.end()) {
      throw DataError("record references a model absent from ratings");
    }
    const double z = (ia->second - ib->second) / xi;
    loss -= rec.y * log_sigmoid(z) + (1.0 - rec.y) * log_sigmoid(-z);
  }
  for (const auto& [model, r] : ratings) {
    const double d = r - baseline;
    loss += lambda * d * d;
  }
  return loss;
}

std::vector<BtRecord> relations_for(const std::vector<BattleRecord>& records,
                                    std::optional<Dimension> dimension) {
  std::vector<BtRecord> out;
  out.reserve(records.size());
  for (const BattleRecord& r : records) {
    const Relation rel = dimension.has_value()
                             ? r.judgment.at(*dimension).relation
                             : r.judgment.comprehensive.relation;
    out.push_back({r.model_a, r.model_b, relation_y(rel)});
  }
  return out;
}

RatingTable fit_bt(const std::vector<BtRecord>& records,
                   const FitConfig& config, const FitObserver& observer) {
  if (records.empty()) throw DataError("no records to fit");
  if (config.xi <= 0 || config.learning_rate <= 0 || config.max_iters <= 0 ||
      config.grad_tol <= 0 || config.lambda < 0) {
    throw PreconditionError("invalid fit config");
  }
  Problem p = index_records(records);
  const std::size_t n = p.models.size();

  std::vector<double> r(n, config.baseline);
  std::vector<double> grad(n, 0.0);
  if (observer) observer(0, r);

  // Step-size control: Barzilai-Borwein (the delta-g form) seeded at the
  // configured rate. The fixed learning rate the config names is the first
  // step; after that the curvature estimate sets the pace, which is what
  // lets one default serve 4-record and 50k-record fits alike. A halving
  // safeguard rejects steps that blow the gradient up.
  constexpr double kMinStep = 1e-10;
  constexpr double kMaxStep = 1e6;

  double step = config.learning_rate;
  int iter = 0;
  std::vector<double> trial(n);
  std::vector<double> trial_grad(n);

  gradient_indexed(r, p.records, config.xi, config.lambda, config.baseline,
                   grad);
  double gnorm = inf_norm(grad);
  double g2 = 0.0;
  for (double g : grad) g2 += g * g;

  while (iter < config.max_iters && gnorm >= config.grad_tol) {
    bool accepted = false;
    double trial_g2 = 0.0;
    while (step >= kMinStep) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = r[i] - step * grad[i];
      gradient_indexed(trial, p.records, config.xi, config.lambda,
                       config.baseline, trial_grad);
      trial_g2 = 0.0;
      for (double g : trial_grad) trial_g2 += g * g;
      if (std::isfinite(trial_g2) && trial_g2 <= 16.0 * g2) {
        accepted = true;
        break;
      }
      step *= 0.5;  // safeguard: the step overshot badly
    }
    if (!accepted) break;

    // BB2 curvature estimate from the accepted move.
    double dg_dg = 0.0;
    double dr_dg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dg = trial_grad[i] - grad[i];
      dg_dg += dg * dg;
      dr_dg += (trial[i] - r[i]) * dg;
    }
    r.swap(trial);
    grad.swap(trial_grad);
    g2 = trial_g2;
    gnorm = inf_norm(grad);
    if (dg_dg > 0 && dr_dg > 0 && std::isfinite(dr_dg / dg_dg)) {
      step = std::clamp(dr_dg / dg_dg, kMinStep, kMaxStep);
    }
    ++iter;

    // Mean preservation: the pairwise gradient terms cancel exactly, so the
    // rating mean must sit at the baseline on every iteration.
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= static_cast<double>(n);
    if (std::fabs(mean - config.baseline) > 1e-9) {
      throw NumericalError("rating mean drifted from the baseline");
    }
    if (observer) observer(iter, r);
  }

  gnorm = inf_norm(grad);
  const double f =
      nll_indexed(r, p.records, config.xi, config.lambda, config.baseline);
  if (!std::isfinite(f)) throw NumericalError("non-finite loss after fit");

  RatingTable table;
  table.iterations = iter;
  table.final_grad_norm = gnorm;
  table.final_nll = f;
  for (std::size_t i = 0; i < n; ++i) {
    table.ratings[p.models[i]] = r[i];
  }
  return table;
}

RatingTable fit_elo(const std::vector<BattleRecord>& records,
                    const FitConfig& config,
                    std::optional<Dimension> dimension,
                    const FitObserver& observer) {
  std::vector<BtRecord> bt = relations_for(records, dimension);
  if (bt.empty()) {
    throw DataError("no relations to fit" +
                    (dimension ? " for dimension " + dimension_name(*dimension)
                               : std::string()));
  }
  RatingTable table = fit_bt(bt, config, observer);
  table.dimension = dimension;
  return table;
}

double win_rate(const std::vector<BattleRecord>& records,
                const std::string& model) {
  double wins = 0.0;
  double ties = 0.0;
  long long battles = 0;
  for (const BattleRecord& r : records) {
    const bool as_a = r.model_a == model;
    const bool as_b = r.model_b == model;
    if (!as_a && !as_b) continue;
    ++battles;
    const Relation rel = r.judgment.comprehensive.relation;
    if (rel == Relation::kTie) {
      ties += 1.0;
    } else if ((as_a && rel == Relation::kAWins) ||
               (as_b && rel == Relation::kBWins)) {
      wins += 1.0;
    }
  }
  if (battles == 0) {
    throw DataError("model '" + model + "' appears in no battles");
  }
  return (wins + 0.5 * ties) / static_cast<double>(battles);
}

std::map<std::pair<std::string, std::string>, double> one_sided_rate(
    const std::vector<BattleRecord>& records) {
  std::map<std::pair<std::string, std::string>, std::pair<long long, long long>>
      counts;  // pair -> (one_sided, total)
  for (const BattleRecord& r : records) {
    auto key = r.model_a < r.model_b
                   ? std::make_pair(r.model_a, r.model_b)
                   : std::make_pair(r.model_b, r.model_a);
    bool all_a = true;
    bool all_b = true;
    for (Dimension d : all_dimensions()) {
      const Relation rel = r.judgment.at(d).relation;
      all_a = all_a && rel == Relation::kAWins;
      all_b = all_b && rel == Relation::kBWins;
    }
    auto& [one_sided, total] = counts[key];
    one_sided += (all_a || all_b) ? 1 : 0;
    total += 1;
  }
  std::map<std::pair<std::string, std::string>, double> out;
  for (const auto& [key, c] : counts) {
    out[key] = static_cast<double>(c.first) / static_cast<double>(c.second);
  }
  return out;
}

void to_json(nlohmann::json& j, const RatingTable& t) {
  j = nlohmann::json{{"ratings", t.ratings},
                     {"iterations", t.iterations},
                     {"final_grad_norm", t.final_grad_norm},
                     {"final_nll", t.final_nll}};
  if (t.dimension.has_value()) {
    j["dimension"] = dimension_name(*t.dimension);
  } else {
    j["dimension"] = nullptr;
  }
}

void from_json(const nlohmann::json& j, RatingTable& t) {
  if (j.contains("dimension") && !j.at("dimension").is_null()) {
    t.dimension = dimension_from_name(j.at("dimension").get<std::string>());
  } else {
    t.dimension.reset();
  }
  j.at("ratings").get_to(t.ratings);
  j.at("iterations").get_to(t.iterations);
  j.at("final_grad_norm").get_to(t.final_grad_norm);
  j.at("final_nll").get_to(t.final_nll);
}

}  // namespace caliper
