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
// Uniform chat-completion abstraction over remote HTTP endpoints plus the
// deterministic synthetic agents (therapist, judge, scripted client) used
// for desk-scale verification. Synthetic replies are pure functions of
// (seed, request), so every pipeline built on them replays bit-exactly.

#ifndef CALIPER_BACKENDS_HPP_
#define CALIPER_BACKENDS_HPP_

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "caliper/common.hpp"
#include "caliper/domain.hpp"

namespace caliper {

// Rating-scale constants used across the rating fit and the synthetic judge.
inline const double kDefaultXi = 400.0 / 2.302585092994046;  // 400 / ln 10
inline const double kBaselineRating = 100.0;

enum class MessageRole { kSystem, kUser, kAssistant };

struct ChatMessage {
  MessageRole role = MessageRole::kUser;
  std::string content;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  std::string model_name;
  int max_tokens = 1024;
  double temperature = 0.0;
  std::optional<std::uint64_t> seed;
};

enum class FinishReason { kStop, kLength, kError };

struct ChatResponse {
  std::string content;
  FinishReason finish_reason = FinishReason::kStop;
  std::int64_t latency_ms = 0;
  int attempt_count = 1;
};

// Latent per-dimension skill of a synthetic therapist, in rating points.
struct SkillVector {
  std::array<double, kDimensionCount> per_dimension{};
  std::uint64_t seed = 0;

  double at(Dimension d) const { return per_dimension[static_cast<int>(d)]; }
  double& at(Dimension d) { return per_dimension[static_cast<int>(d)]; }
  double mean() const;
};

SkillVector uniform_skill(double value, std::uint64_t seed);

enum class BackendKind {
  kRemoteHttp,
  kSyntheticTherapist,
  kSyntheticJudge,
  kScriptReplay,
};

const std::string& backend_kind_name(BackendKind k);
BackendKind backend_kind_from_name(const std::string& name);

struct BackendConfig {
  BackendKind kind = BackendKind::kScriptReplay;
  std::optional<std::string> endpoint_url;
  std::optional<std::string> api_key_env;  // env var NAME; never the key
  int timeout_ms = 30000;
  int max_retries = 3;
  int backoff_base_ms = 250;
  std::optional<int> rate_limit_per_min;
  std::optional<SkillVector> skill;   // required for SyntheticTherapist
  std::optional<double> noise;        // required for SyntheticJudge, in [0,1]
  std::uint64_t seed = 0;             // synthetic determinism root
  // Synthetic judge: measured gaps at or below this margin are ties.
  double tie_margin = 0.0;
  // Optional per-model system prompt override (therapist side).
  std::optional<std::string> system_prompt;
};

void to_json(nlohmann::json& j, const SkillVector& s);
void from_json(const nlohmann::json& j, SkillVector& s);
void to_json(nlohmann::json& j, const BackendConfig& c);
void from_json(const nlohmann::json& j, BackendConfig& c);

// Throws ConfigError when the config is inconsistent for its kind.
void validate_backend_config(const BackendConfig& config);

// Stable 64-bit digest of a request; part of the synthetic determinism
// contract.
std::uint64_t request_hash(const ChatRequest& request);

// Raw wire transfer result. status 0 means no HTTP status was obtained
// (connect failure or timeout).
struct WireResult {
  int status = 0;
  std::string body;
  bool timed_out = false;
  std::string error;
};

using Header = std::pair<std::string, std::string>;
using Transport = std::function<WireResult(
    const std::string& url, const std::vector<Header>& headers,
    const std::string& body, int timeout_ms)>;

// cpp-httplib POST transport for chat-completion style endpoints.
Transport default_http_transport();

// One backend instance. Thread-safe; the rate limiter and retry jitter
// stream are shared across concurrent callers of the same instance.
class ChatBackend {
 public:
  explicit ChatBackend(BackendConfig config,
                       std::shared_ptr<Clock> clock = system_clock(),
                       Transport transport = {});

  ChatResponse chat(const ChatRequest& request);

  const BackendConfig& config() const { return config_; }

 private:
  ChatResponse chat_remote(const ChatRequest& request);
  void rate_limit_wait();

  BackendConfig config_;
  std::shared_ptr<Clock> clock_;
  Transport transport_;
  std::mutex mu_;
  std::uint64_t next_slot_ms_ = 0;
  Rng jitter_rng_;
};

// Convenience wrapper constructing a one-shot backend. Remote callers that
// need persistent rate-limit state should hold a ChatBackend instead.
ChatResponse chat(const BackendConfig& config, const ChatRequest& request);

// Draws AWins with probability (1-noise) * sigmoid((skill_a-skill_b)/xi)
// + noise * 0.5, else BWins. Never returns Tie; tie behavior is a separate
// judge-level concern.
Relation synthetic_judge_relation(double noise, double skill_a, double skill_b,
                                  double xi, Rng& rng);

// --- Synthetic text engines (exposed for tests and feature extraction) ---

// Marker repetitions used to encode a skill level into therapist text, and
// the inverse mapping the judge applies to counted markers.
int marker_repetitions(double skill);
double skill_from_marker_rate(double markers_per_occasion);

std::string synthetic_therapist_reply(const SkillVector& skill,
                                      const ChatRequest& request);
std::string script_replay_reply(std::uint64_t seed, const ChatRequest& request);
std::string synthetic_judge_reply(const BackendConfig& config,
                                  const ChatRequest& request);

// Evidence the synthetic judge extracts from one rendered presentation side.
struct SideEvidence {
  std::array<double, kDimensionCount> marker_counts{};
  std::array<double, kDimensionCount> probe_counts{};
  int therapist_lines = 0;
  std::vector<std::string> therapist_tokens;
};

// Parses a rendered presentation (see battle rendering grammar in
// domain.hpp) into per-side evidence. Exposed for tests.
std::pair<SideEvidence, SideEvidence> extract_side_evidence(
    const std::string& rendered);

}  // namespace caliper

#endif  // CALIPER_BACKENDS_HPP_
