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
// Shared fixtures for the test suites.

#ifndef CALIPER_TESTS_HELPERS_HPP_
#define CALIPER_TESTS_HELPERS_HPP_

#include <string>
#include <vector>

#include <algorithm>
#include <cmath>

#include "caliper/backends.hpp"
#include "caliper/domain.hpp"
#include "caliper/preflearn.hpp"
#include "caliper/simulate.hpp"
#include "caliper/synthcheck.hpp"

namespace caliper::test {

inline ClientProfile sample_profile(const std::string& id = "client_000") {
  std::vector<ClientProfile> profiles = generate_profiles(1, fnv1a64(id));
  profiles[0].id = id;
  return profiles[0];
}

inline BackendConfig replay_client(std::uint64_t seed = 11) {
  BackendConfig c;
  c.kind = BackendKind::kScriptReplay;
  c.seed = seed;
  return c;
}

inline BackendConfig therapist_backend(double skill, std::uint64_t seed) {
  BackendConfig c;
  c.kind = BackendKind::kSyntheticTherapist;
  c.skill = uniform_skill(skill, seed);
  c.seed = seed;
  return c;
}

inline BackendConfig judge_backend(double noise, std::uint64_t seed) {
  BackendConfig c;
  c.kind = BackendKind::kSyntheticJudge;
  c.noise = noise;
  c.seed = seed;
  return c;
}

// A full synthetic session for one (model skill, client) combination.
inline SessionTranscript sample_transcript(const std::string& model_id,
                                           double skill,
                                           const std::string& client_id,
                                           int total_turns = 14,
                                           std::uint64_t seed = 7) {
  ClientProfile profile = sample_profile(client_id);
  SimulationScript script = make_default_script(profile, total_turns, seed);
  ChatBackend client(replay_client(mix64(seed, 1)));
  ChatBackend therapist(therapist_backend(skill, mix64(seed, fnv1a64(model_id))));
  SessionOptions options;
  options.model_id = model_id;
  return run_session(client, therapist, profile, script, default_templates(),
                     seed, options);
}

// A judgment with every relation set to the same value.
inline Judgment uniform_judgment(Relation r) {
  Judgment j;
  for (Dimension d : all_dimensions()) j.at(d) = {r, ""};
  j.comprehensive = {r, ""};
  return j;
}

inline BattleRecord make_record(const std::string& id, int round,
                                const std::string& client,
                                const std::string& model_a,
                                const std::string& model_b,
                                PositionOrder order, const Judgment& judgment) {
  BattleRecord r;
  r.battle_id = id;
  r.round = round;
  r.client_id = client;
  r.model_a = model_a;
  r.model_b = model_b;
  r.position_order = order;
  r.judgment = judgment;
  r.judge_id = "test-judge";
  r.timestamp = "1970-01-01T00:00:00.000Z";
  return r;
}

// A reward model that scores exactly the marker density of the probed
// dimension.
inline RewardParams marker_reward() {
  RewardParams params;
  for (Dimension d : all_dimensions()) {
    params.weights[static_cast<int>(d) * kFeaturesPerBlock + 3] = 1.0;
  }
  return params;
}

// Max mismatch between the analytic reward-model gradient and central
// differences, relative to max(|analytic|, |fd|, 1e-3) per component.
inline double rm_fd_error(const RewardParams& params,
                          const PreferencePair& pair) {
  const std::vector<double> analytic = rm_loss_gradient(params, pair);
  double worst = 0.0;
  const double h = 1e-5;
  for (int i = 0; i < kFeatureDim; ++i) {
    RewardParams up = params, down = params;
    up.weights[i] += h;
    down.weights[i] -= h;
    const double fd = (rm_loss(up, pair) - rm_loss(down, pair)) / (2 * h);
    const double denom =
        std::max({std::fabs(fd), std::fabs(analytic[i]), 1e-3});
    worst = std::max(worst, std::fabs(fd - analytic[i]) / denom);
  }
  return worst;
}

inline double grpo_fd_error(const std::vector<double>& theta,
                            const std::vector<double>& ref,
                            const GroupSample& group,
                            const GrpoConfig& config) {
  const std::vector<double> analytic =
      grpo_objective(theta, ref, group, config).second;
  double worst = 0.0;
  const double h = 1e-5;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    std::vector<double> up = theta, down = theta;
    up[k] += h;
    down[k] -= h;
    const double fd = (grpo_objective(up, ref, group, config).first -
                       grpo_objective(down, ref, group, config).first) /
                      (2 * h);
    const double denom =
        std::max({std::fabs(fd), std::fabs(analytic[k]), 1e-3});
    worst = std::max(worst, std::fabs(fd - analytic[k]) / denom);
  }
  return worst;
}

// Random clip-safe group for finite-difference checks: configurations too
// close to a clip kink or with near-floor reward spread are rejected because
// central differences are meaningless across a non-differentiable point.
inline bool random_group(Rng& rng, int n_actions, int g,
                         const GrpoConfig& config, std::vector<double>& theta,
                         std::vector<double>& ref, GroupSample& group) {
  theta.assign(static_cast<std::size_t>(n_actions), 0.0);
  ref.assign(static_cast<std::size_t>(n_actions), 0.0);
  std::vector<double> old_logits(static_cast<std::size_t>(n_actions));
  for (int a = 0; a < n_actions; ++a) {
    theta[a] = rng.next_in(-1.0, 1.0);
    ref[a] = rng.next_in(-1.0, 1.0);
    old_logits[a] = theta[a] + rng.next_in(-0.3, 0.3);
  }
  const std::vector<double> old_logp = log_softmax(old_logits);
  const std::vector<double> ref_logp = log_softmax(ref);
  const std::vector<double> theta_logp = log_softmax(theta);

  group = GroupSample{};
  group.query_id = "q";
  for (int i = 0; i < g; ++i) {
    const int a = static_cast<int>(rng.next_below(n_actions));
    group.responses.push_back(a);
    group.old_logprobs.push_back(old_logp[static_cast<std::size_t>(a)]);
    group.ref_logprobs.push_back(ref_logp[static_cast<std::size_t>(a)]);
    group.rewards.push_back(rng.next_in(-1.0, 1.0));
  }

  for (int i = 0; i < g; ++i) {
    const double rho = std::exp(
        theta_logp[static_cast<std::size_t>(group.responses[i])] -
        group.old_logprobs[static_cast<std::size_t>(i)]);
    if (std::fabs(rho - (1.0 - config.clip_epsilon)) < 1e-3) return false;
    if (std::fabs(rho - (1.0 + config.clip_epsilon)) < 1e-3) return false;
  }
  double mean = 0, var = 0;
  for (double r : group.rewards) mean += r;
  mean /= g;
  for (double r : group.rewards) var += (r - mean) * (r - mean);
  if (std::sqrt(var / g) < 1e-3) return false;
  return true;
}

}  // namespace caliper::test

#endif  // CALIPER_TESTS_HELPERS_HPP_
