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

#include "caliper/preflearn.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace caliper {

namespace {

double softplus(double x) {
  // log(1 + e^x), stable on both tails.
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

const DialogueTurn* first_trigger_turn(const SessionTranscript& t,
                                       Dimension d) {
  for (const DialogueTurn& turn : t.turns) {
    if (turn.triggered_dimension.has_value() &&
        *turn.triggered_dimension == d) {
      return &turn;
    }
  }
  return nullptr;
}

std::string whole_session_response(const SessionTranscript& t) {
  std::vector<std::string> parts;
  parts.reserve(t.turns.size());
  for (const DialogueTurn& turn : t.turns) {
    parts.push_back(turn.therapist_utterance);
  }
  return join(parts, " ");
}

std::string trigger_context(const SessionTranscript& t,
                            const DialogueTurn& trigger) {
  std::string out;
  if (trigger.turn > 0) {
    for (const DialogueTurn& turn : t.turns) {
      if (turn.turn == trigger.turn - 1) {
        out += std::string(kClientLinePrefix) + turn.client_utterance + "\n";
        out += std::string(kTherapistLinePrefix) + turn.therapist_utterance +
               "\n";
        break;
      }
    }
  }
  out += std::string(kClientLinePrefix) + trigger.client_utterance;
  return out;
}

}  // namespace

void to_json(nlohmann::json& j, const PreferencePair& p) {
  j = nlohmann::json{{"dimension", dimension_name(p.dimension)},
                     {"context", p.context},
                     {"winner_response", p.winner_response},
                     {"loser_response", p.loser_response},
                     {"source_battle", p.source_battle}};
}

void from_json(const nlohmann::json& j, PreferencePair& p) {
  p.dimension = dimension_from_name(j.at("dimension").get<std::string>());
  j.at("context").get_to(p.context);
  j.at("winner_response").get_to(p.winner_response);
  j.at("loser_response").get_to(p.loser_response);
  j.at("source_battle").get_to(p.source_battle);
}

std::vector<PreferencePair> extract_preferences(
    const std::vector<BattleRecord>& records,
    const TranscriptStore& transcripts) {
  std::vector<PreferencePair> out;
  for (const BattleRecord& record : records) {
    const SessionTranscript* ta =
        transcripts.find(record.model_a, record.client_id);
    const SessionTranscript* tb =
        transcripts.find(record.model_b, record.client_id);
    if (ta == nullptr || tb == nullptr) {
      throw ExtractionError("battle " + record.battle_id +
                            ": transcripts missing from store");
    }
    for (Dimension d : all_dimensions()) {
      const Relation rel = record.judgment.at(d).relation;
      if (rel == Relation::kTie) continue;
      const SessionTranscript* winner = rel == Relation::kAWins ? ta : tb;
      const SessionTranscript* loser = rel == Relation::kAWins ? tb : ta;

      PreferencePair pair;
      pair.dimension = d;
      pair.source_battle = record.battle_id;
      if (scope_of(d) == DimensionScope::kLocal) {
        const DialogueTurn* wt = first_trigger_turn(*winner, d);
        const DialogueTurn* lt = first_trigger_turn(*loser, d);
        if (wt == nullptr || lt == nullptr) {
          throw ExtractionError("battle " + record.battle_id +
                                ", dimension " + dimension_name(d) +
                                ": no trigger turn in transcript");
        }
        pair.context = trigger_context(*winner, *wt);
        pair.winner_response = wt->therapist_utterance;
        pair.loser_response = lt->therapist_utterance;
      } else {
        pair.context = "whole-session comparison for client " +
                       record.client_id;
        pair.winner_response = whole_session_response(*winner);
        pair.loser_response = whole_session_response(*loser);
      }
      // Identical texts carry no training signal and would break the
      // winner != loser invariant.
      if (pair.winner_response == pair.loser_response) continue;
      out.push_back(std::move(pair));
    }
  }
  return out;
}

std::vector<double> response_features(const std::string& context,
                                      const std::string& response,
                                      Dimension dimension) {
  (void)context;
  std::vector<double> f(kFeatureDim, 0.0);
  const std::vector<std::string> tokens = split_ws(response);
  const double n = static_cast<double>(tokens.size());

  double distinct = 0.0;
  if (tokens.size() >= 2) {
    std::set<std::string> seen;
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
      seen.insert(tokens[i] + "\x1f" + tokens[i + 1]);
    }
    distinct = static_cast<double>(seen.size()) / (n - 1.0);
  }

  // Prefix match: synthetic markers come as numbered variants.
  const std::string marker = marker_token(dimension);
  double markers = 0.0;
  for (const std::string& tok : tokens) {
    if (starts_with(tok, marker)) markers += 1.0;
  }

  const int base = static_cast<int>(dimension) * kFeaturesPerBlock;
  f[base + 0] = 1.0;
  f[base + 1] = std::min(1.0, n / 64.0);
  f[base + 2] = distinct;
  f[base + 3] = markers / std::max(1.0, n);
  return f;
}

double RewardParams::score(const std::string& context,
                           const std::string& response,
                           Dimension dimension) const {
  const std::vector<double> f = response_features(context, response, dimension);
  double s = 0.0;
  for (int i = 0; i < kFeatureDim; ++i) s += weights[i] * f[i];
  return s;
}

void to_json(nlohmann::json& j, const RewardParams& p) {
  j = nlohmann::json{{"weights", p.weights}, {"feature_dim", p.feature_dim}};
}

void from_json(const nlohmann::json& j, RewardParams& p) {
  j.at("weights").get_to(p.weights);
  j.at("feature_dim").get_to(p.feature_dim);
  if (static_cast<int>(p.weights.size()) != p.feature_dim ||
      p.feature_dim != kFeatureDim) {
    throw DataError("reward params have the wrong feature dimension");
  }
}

double rm_loss(const RewardParams& params, const PreferencePair& pair) {
  const double margin =
      params.score(pair.context, pair.winner_response, pair.dimension) -
      params.score(pair.context, pair.loser_response, pair.dimension);
  return softplus(-margin);
}

std::vector<double> rm_loss_gradient(const RewardParams& params,
                                     const PreferencePair& pair) {
  const std::vector<double> fw =
      response_features(pair.context, pair.winner_response, pair.dimension);
  const std::vector<double> fl =
      response_features(pair.context, pair.loser_response, pair.dimension);
  double margin = 0.0;
  for (int i = 0; i < kFeatureDim; ++i) {
    margin += params.weights[i] * (fw[i] - fl[i]);
  }
  const double coeff = -(1.0 - sigmoid(margin));
  std::vector<double> grad(kFeatureDim, 0.0);
  for (int i = 0; i < kFeatureDim; ++i) {
    grad[i] = coeff * (fw[i] - fl[i]);
  }
  return grad;
}

RmTrainResult train_rm(const std::vector<PreferencePair>& pairs,
                       const RmTrainConfig& config) {
  if (pairs.empty()) throw DataError("no preference pairs to train on");
  if (config.learning_rate <= 0 || config.epochs <= 0) {
    throw PreconditionError("invalid rm train config");
  }

  RmTrainResult result;
  const double inv_n = 1.0 / static_cast<double>(pairs.size());
  std::vector<double> grad(kFeatureDim, 0.0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (const PreferencePair& pair : pairs) {
      const std::vector<double> g = rm_loss_gradient(result.params, pair);
      for (int i = 0; i < kFeatureDim; ++i) grad[i] += g[i] * inv_n;
    }
    for (int i = 0; i < kFeatureDim; ++i) {
      result.params.weights[i] -= config.learning_rate * grad[i];
      if (!std::isfinite(result.params.weights[i])) {
        throw NumericalError("reward model training diverged");
      }
    }
  }

  double loss = 0.0;
  double correct = 0.0;  // indistinguishable pairs count half
  for (const PreferencePair& pair : pairs) {
    loss += rm_loss(result.params, pair) * inv_n;
    const double margin =
        result.params.score(pair.context, pair.winner_response,
                            pair.dimension) -
        result.params.score(pair.context, pair.loser_response,
                            pair.dimension);
    if (margin > 0) {
      correct += 1.0;
    } else if (margin == 0) {
      correct += 0.5;
    }
  }
  result.final_loss = loss;
  result.pairwise_accuracy = correct / static_cast<double>(pairs.size());
  return result;
}

std::vector<double> grpo_advantages(const std::vector<double>& rewards,
                                    double std_floor) {
  if (rewards.size() < 2) {
    throw PreconditionError("advantages need a group of at least 2");
  }
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= n;  // population variance
  const double std = std::sqrt(var);
  std::vector<double> out(rewards.size(), 0.0);
  if (std < std_floor) return out;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    out[i] = (rewards[i] - mean) / std;
  }
  return out;
}

void to_json(nlohmann::json& j, const Query& q) {
  j = nlohmann::json{{"id", q.id},
                     {"dimension", dimension_name(q.dimension)},
                     {"context", q.context},
                     {"actions", q.actions}};
}

void from_json(const nlohmann::json& j, Query& q) {
  j.at("id").get_to(q.id);
  q.dimension = dimension_from_name(j.at("dimension").get<std::string>());
  j.at("context").get_to(q.context);
  j.at("actions").get_to(q.actions);
}

std::vector<Query> generate_bandit_queries(const std::string& id_prefix,
                                           int count, int n_actions,
                                           std::uint64_t seed) {
  if (count < 1) throw PreconditionError("need at least one query");
  if (n_actions < 2) throw PreconditionError("need at least 2 actions");
  const std::vector<Dimension>& dims = local_dimensions();
  std::vector<Query> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Rng rng(mix64(mix64(seed, fnv1a64(id_prefix)),
                  static_cast<std::uint64_t>(i)));
    Query q;
    q.id = id_prefix + "_" + std::to_string(i);
    q.dimension = dims[static_cast<std::size_t>(i) % dims.size()];
    q.context = "I keep circling the same worry and cannot move on (" + q.id +
                ") " + probe_token(q.dimension);
    for (int a = 0; a < n_actions; ++a) {
      std::string text = "Let us take angle " + std::to_string(a) +
                         " on this together (" + q.id + " v" +
                         std::to_string(rng.next_below(1000)) + ")";
      for (int m = 0; m < 2 * a; ++m) {
        text += " " + marker_token(q.dimension);
      }
      q.actions.push_back(std::move(text));
    }
    out.push_back(std::move(q));
  }
  return out;
}

void to_json(nlohmann::json& j, const PolicyParams& p) {
  j = nlohmann::json{{"logits", p.logits},
                     {"trained_query_ids", p.trained_query_ids}};
}

void from_json(const nlohmann::json& j, PolicyParams& p) {
  j.at("logits").get_to(p.logits);
  j.at("trained_query_ids").get_to(p.trained_query_ids);
}

std::vector<double> log_softmax(const std::vector<double>& logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  const double lz = mx + std::log(z);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lz;
  return out;
}

int greedy_action(const std::vector<double>& logits) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(logits.size()); ++i) {
    if (logits[static_cast<std::size_t>(i)] >
        logits[static_cast<std::size_t>(best)]) {
      best = i;
    }
  }
  return best;
}

std::pair<double, std::vector<double>> grpo_objective(
    const std::vector<double>& theta_logits,
    const std::vector<double>& ref_logits, const GroupSample& group,
    const GrpoConfig& config) {
  const std::size_t n_actions = theta_logits.size();
  if (ref_logits.size() != n_actions) {
    throw DataError("theta and reference action sets differ");
  }
  const std::size_t g = group.responses.size();
  if (g < 2 || group.rewards.size() != g || group.old_logprobs.size() != g) {
    throw PreconditionError("malformed group sample");
  }
  for (int a : group.responses) {
    if (a < 0 || a >= static_cast<int>(n_actions)) {
      throw DataError("action id " + std::to_string(a) +
                      " outside the action set");
    }
  }

  const std::vector<double> logp = log_softmax(theta_logits);
  const std::vector<double> logref = log_softmax(ref_logits);
  std::vector<double> p(n_actions);
  for (std::size_t a = 0; a < n_actions; ++a) p[a] = std::exp(logp[a]);

  const std::vector<double> adv =
      grpo_advantages(group.rewards, config.std_floor);

  // Clipped surrogate, mean over the group.
  const double lo = 1.0 - config.clip_epsilon;
  const double hi = 1.0 + config.clip_epsilon;
  double surrogate = 0.0;
  // coeff[i]: d(min term)/d logp[o_i]; zero when the clipped branch is
  // active and binding.
  std::vector<double> coeff(g, 0.0);
  for (std::size_t i = 0; i < g; ++i) {
    const int a = group.responses[i];
    const double rho = std::exp(logp[static_cast<std::size_t>(a)] -
                                group.old_logprobs[i]);
    const double unclipped = rho * adv[i];
    const double clipped = std::clamp(rho, lo, hi) * adv[i];
    if (unclipped <= clipped) {
      surrogate += unclipped;
      coeff[i] = adv[i] * rho;
    } else {
      surrogate += clipped;
      coeff[i] = 0.0;  // clip(rho) is flat where it binds
    }
  }
  surrogate /= static_cast<double>(g);

  // Exact KL(pi_theta || pi_ref) over the action set.
  double kl = 0.0;
  for (std::size_t a = 0; a < n_actions; ++a) {
    kl += p[a] * (logp[a] - logref[a]);
  }

  const double objective = surrogate - config.kl_coeff * kl;

  std::vector<double> grad(n_actions, 0.0);
  const double inv_g = 1.0 / static_cast<double>(g);
  for (std::size_t i = 0; i < g; ++i) {
    if (coeff[i] == 0.0) continue;
    const int a = group.responses[i];
    // d logp[a] / d theta[k] = delta(a, k) - p[k]
    grad[static_cast<std::size_t>(a)] += coeff[i] * inv_g;
    for (std::size_t k = 0; k < n_actions; ++k) {
      grad[k] -= coeff[i] * inv_g * p[k];
    }
  }
  for (std::size_t k = 0; k < n_actions; ++k) {
    const double dkl = p[k] * ((logp[k] - logref[k]) - kl);
    grad[k] -= config.kl_coeff * dkl;
  }
  return {objective, grad};
}

double HeldoutTally::win_share() const {
  return battles == 0 ? 0.0
                      : static_cast<double>(comprehensive.wins) /
                            static_cast<double>(battles);
}

double HeldoutTally::loss_share() const {
  return battles == 0 ? 0.0
                      : static_cast<double>(comprehensive.losses) /
                            static_cast<double>(battles);
}

double HeldoutTally::tie_share() const {
  return battles == 0 ? 0.0
                      : static_cast<double>(comprehensive.ties) /
                            static_cast<double>(battles);
}

GrpoTrainResult train_policy_grpo(const PolicyParams& initial,
                                  const RewardParams& reward,
                                  const std::vector<Query>& queries,
                                  const GrpoConfig& config,
                                  std::uint64_t seed) {
  if (queries.empty()) throw PreconditionError("no queries to train on");
  const std::size_t n_actions = queries.front().actions.size();
  if (n_actions < 2) {
    throw PreconditionError("queries need at least 2 actions");
  }
  for (const Query& q : queries) {
    if (q.actions.size() != n_actions) {
      throw PreconditionError(
          "all queries must share one action-slot layout");
    }
  }

  GrpoTrainResult result;
  result.policy.logits = initial.logits.empty()
                             ? std::vector<double>(n_actions, 0.0)
                             : initial.logits;
  if (result.policy.logits.size() != n_actions) {
    throw PreconditionError("initial policy does not match the action set");
  }
  const std::vector<double> ref_logits = result.policy.logits;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<double> old_logits = result.policy.logits;
    const std::vector<double> old_logp = log_softmax(old_logits);
    const std::vector<double> ref_logp = log_softmax(ref_logits);

    // Sample every query's group under theta_old. Randomness is keyed by
    // (seed, epoch, query id), never by iteration order.
    std::vector<GroupSample> groups;
    groups.reserve(queries.size());
    double reward_sum = 0.0;
    long long reward_count = 0;
    for (const Query& q : queries) {
      Rng rng(mix64(mix64(seed, static_cast<std::uint64_t>(epoch)),
                    fnv1a64(q.id)));
      GroupSample group;
      group.query_id = q.id;
      for (int i = 0; i < config.group_size; ++i) {
        const double u = rng.next_double();
        double acc = 0.0;
        int pick = static_cast<int>(n_actions) - 1;
        for (std::size_t a = 0; a < n_actions; ++a) {
          acc += std::exp(old_logp[a]);
          if (u < acc) {
            pick = static_cast<int>(a);
            break;
          }
        }
        group.responses.push_back(pick);
        group.old_logprobs.push_back(old_logp[static_cast<std::size_t>(pick)]);
        group.ref_logprobs.push_back(ref_logp[static_cast<std::size_t>(pick)]);
        const double r = reward.score(
            q.context, q.actions[static_cast<std::size_t>(pick)], q.dimension);
        group.rewards.push_back(r);
        reward_sum += r;
        ++reward_count;
      }
      groups.push_back(std::move(group));
    }
    result.epoch_mean_reward.push_back(reward_sum /
                                       static_cast<double>(reward_count));

    // Batched ascent: per-query gradients are summed, so the fold is
    // independent of query order up to float associativity.
    for (int step = 0; step < config.inner_steps; ++step) {
      std::vector<double> grad(n_actions, 0.0);
      for (const GroupSample& group : groups) {
        auto [obj, g] =
            grpo_objective(result.policy.logits, ref_logits, group, config);
        (void)obj;
        for (std::size_t k = 0; k < n_actions; ++k) grad[k] += g[k];
      }
      const double scale =
          config.learning_rate / static_cast<double>(groups.size());
      for (std::size_t k = 0; k < n_actions; ++k) {
        result.policy.logits[k] += scale * grad[k];
        if (!std::isfinite(result.policy.logits[k])) {
          throw NumericalError("policy training diverged");
        }
      }
    }
  }

  std::set<std::string> trained(initial.trained_query_ids.begin(),
                                initial.trained_query_ids.end());
  for (const Query& q : queries) trained.insert(q.id);
  result.policy.trained_query_ids.assign(trained.begin(), trained.end());
  return result;
}

HeldoutTally heldout_battle_eval(const PolicyParams& before,
                                 const PolicyParams& after,
                                 const std::vector<Query>& heldout,
                                 ChatBackend& judge,
                                 const PromptTemplates& templates,
                                 const JudgeOptions& options) {
  if (heldout.empty()) throw PreconditionError("no held-out queries");
  std::set<std::string> trained(after.trained_query_ids.begin(),
                                after.trained_query_ids.end());
  trained.insert(before.trained_query_ids.begin(),
                 before.trained_query_ids.end());
  for (const Query& q : heldout) {
    if (trained.count(q.id)) {
      throw DataError("held-out query overlaps training set: " + q.id);
    }
  }

  auto rollout = [](const PolicyParams& policy, const Query& q,
                    const std::string& model_id) {
    SessionTranscript t;
    t.session_id = model_id + "__" + q.id;
    t.model_id = model_id;
    t.client_id = q.id;
    t.script_id = "heldout";
    std::vector<double> logits = policy.logits.empty()
                                     ? std::vector<double>(q.actions.size(), 0.0)
                                     : policy.logits;
    if (logits.size() != q.actions.size()) {
      throw DataError("policy does not match the query's action set");
    }
    DialogueTurn turn;
    turn.turn = 0;
    turn.client_utterance = q.context;
    turn.therapist_utterance =
        q.actions[static_cast<std::size_t>(greedy_action(logits))];
    turn.phase = Phase::kAllianceBuilding;
    turn.triggered_dimension = q.dimension;
    t.turns.push_back(std::move(turn));
    return t;
  };

  HeldoutTally tally;
  for (const Query& q : heldout) {
    const SessionTranscript after_t = rollout(after, q, "policy_after");
    const SessionTranscript before_t = rollout(before, q, "policy_before");

    for (int order = 0; order < 2; ++order) {
      const bool after_is_a = order == 0;
      const SessionTranscript& side_a = after_is_a ? after_t : before_t;
      const SessionTranscript& side_b = after_is_a ? before_t : after_t;
      Presentation presentation =
          interleave(slice_stages(side_a), slice_stages(side_b),
                     side_a.model_id, side_b.model_id);
      Judgment judgment =
          judge_battle(judge, presentation, templates, options);
      tally.battles += 1;

      auto credit = [&](Relation rel, TallyRow& row) {
        if (rel == Relation::kTie) {
          row.ties += 1;
        } else if ((rel == Relation::kAWins) == after_is_a) {
          row.wins += 1;
        } else {
          row.losses += 1;
        }
      };
      credit(judgment.comprehensive.relation, tally.comprehensive);
      for (Dimension d : all_dimensions()) {
        credit(judgment.at(d).relation,
               tally.per_dimension[static_cast<std::size_t>(
                   static_cast<int>(d))]);
      }
    }
  }
  return tally;
}

}  // namespace caliper
