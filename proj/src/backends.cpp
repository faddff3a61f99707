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

#include "caliper/backends.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string_view>
#include <unordered_map>
#include <sstream>

#include "httplib.h"

namespace caliper {

namespace {

const char* role_name(MessageRole r) {
  switch (r) {
    case MessageRole::kSystem:
      return "system";
    case MessageRole::kUser:
      return "user";
    case MessageRole::kAssistant:
      return "assistant";
  }
  return "user";
}

// Skill is encoded as marker repetitions at a 20-point resolution. The
// judge inverts the same mapping, so quantization error stays within half a
// step.
constexpr double kMarkerResolution = 20.0;

// Filler lexicon for synthetic therapist text. Vocabulary breadth scales
// with the Diversity skill so Distinct-N moves monotonically with it.
const std::vector<std::string>& therapist_lexicon() {
  static const std::vector<std::string> words = {
      "notice", "moment", "feeling", "together", "slowly", "space", "breath",
      "weight", "pattern", "step", "ground", "present", "listen", "stay",
      "gentle", "steady", "name", "carry", "hold", "shift", "open", "pause",
      "sense", "voice", "inner", "critic", "care", "trust", "safe", "pace",
      "anchor", "settle", "return", "body", "tension", "release", "allow",
      "honest", "curious", "wonder", "explore", "meaning", "value", "choice",
      "boundary", "kind", "strength", "resource", "support", "change",
      "practice", "small", "concrete", "tonight", "morning", "ritual",
      "journal", "walk", "music", "garden", "detail", "memory", "thread",
      "bridge", "mirror", "window", "door", "path", "root", "branch", "leaf",
      "stone", "river", "tide", "season", "winter", "spring", "light",
      "shadow", "quiet", "storm", "calm", "distance", "closeness", "edge",
      "center", "balance", "repair", "mend", "grow", "learn", "unlearn",
      "repeat", "differ", "compare", "accept", "resist", "soften", "harden",
      "protect", "risk", "reach", "rest", "wake", "dream", "plan", "review",
      "begin", "continue", "finish", "almost", "enough", "perfect", "flaw",
      "whole", "part", "piece", "puzzle", "map", "compass", "guide", "story",
      "chapter", "page", "word", "silence", "echo", "question", "answer",
      "maybe", "perhaps", "certain", "doubt", "hope", "fear", "anger",
      "grief", "joy", "relief", "shame", "pride", "guilt", "forgive",
      "remember", "forget", "imagine", "observe", "describe", "express",
      "contain", "expand", "narrow", "widen", "deepen", "surface", "beneath",
      "beside", "toward", "against", "within", "without", "because", "since",
      "although", "instead", "meanwhile", "afterwards", "gradually",
  };
  return words;
}

const std::vector<std::string>& therapist_openers() {
  static const std::vector<std::string> openers = {
      "I hear how much this carries for you.",
      "Let's slow down and stay with that for a moment.",
      "Thank you for trusting me with this.",
      "That sounds important; tell me more about it.",
      "I notice something shifted just now.",
      "Let's look at what happened from a little distance.",
      "You have been working hard at this.",
      "It makes sense that this feels heavy.",
  };
  return openers;
}

const std::vector<std::string>& client_lexicon() {
  static const std::vector<std::string> words = {
      "yesterday", "again", "always", "never", "school", "home", "friend",
      "mother", "father", "teacher", "classroom", "evening", "tired",
      "stuck", "confused", "quiet", "alone", "busy", "worried", "trying",
      "failed", "forgot", "promised", "argued", "avoided", "pretended",
      "hoped", "waited", "watched", "wrote", "deleted", "practiced",
      "ruined", "fixed", "started", "stopped", "smiled", "cried", "slept",
      "awake", "heavy", "empty", "loud", "small", "messy", "perfect",
      "wrong", "right", "late", "early", "everything", "nothing",
  };
  return words;
}

const std::vector<std::string>& client_acks() {
  static const std::vector<std::string> acks = {
      "Mm, okay.", "I see.", "Yeah.", "Alright.", "Mm-hm.", "Okay, I guess.",
  };
  return acks;
}

double count_token(const std::string& text, const std::string& token) {
  double c = 0;
  std::size_t pos = 0;
  while ((pos = text.find(token, pos)) != std::string::npos) {
    c += 1;
    pos += token.size();
  }
  return c;
}

std::string fmt2(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

double SkillVector::mean() const {
  double s = 0;
  for (double v : per_dimension) s += v;
  return s / kDimensionCount;
}

SkillVector uniform_skill(double value, std::uint64_t seed) {
  SkillVector s;
  s.per_dimension.fill(value);
  s.seed = seed;
  return s;
}

const std::string& backend_kind_name(BackendKind k) {
  static const std::array<std::string, 4> names = {
      "RemoteHttp", "SyntheticTherapist", "SyntheticJudge", "ScriptReplay"};
  return names[static_cast<int>(k)];
}

BackendKind backend_kind_from_name(const std::string& name) {
  for (int i = 0; i < 4; ++i) {
    if (backend_kind_name(static_cast<BackendKind>(i)) == name) {
      return static_cast<BackendKind>(i);
    }
  }
  throw ParseError("unknown backend kind: " + name);
}

void to_json(nlohmann::json& j, const SkillVector& s) {
  nlohmann::json dims = nlohmann::json::object();
  for (Dimension d : all_dimensions()) {
    dims[dimension_name(d)] = s.at(d);
  }
  j = nlohmann::json{{"per_dimension", dims}, {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SkillVector& s) {
  const auto& dims = j.at("per_dimension");
  for (Dimension d : all_dimensions()) {
    s.at(d) = dims.at(dimension_name(d)).get<double>();
  }
  j.at("seed").get_to(s.seed);
}

void to_json(nlohmann::json& j, const BackendConfig& c) {
  j = nlohmann::json{{"kind", backend_kind_name(c.kind)},
                     {"timeout_ms", c.timeout_ms},
                     {"max_retries", c.max_retries},
                     {"backoff_base_ms", c.backoff_base_ms},
                     {"seed", c.seed},
                     {"tie_margin", c.tie_margin}};
  if (c.endpoint_url) j["endpoint_url"] = *c.endpoint_url;
  if (c.api_key_env) j["api_key_env"] = *c.api_key_env;
  if (c.rate_limit_per_min) j["rate_limit_per_min"] = *c.rate_limit_per_min;
  if (c.skill) j["skill"] = *c.skill;
  if (c.noise) j["noise"] = *c.noise;
  if (c.system_prompt) j["system_prompt"] = *c.system_prompt;
}

void from_json(const nlohmann::json& j, BackendConfig& c) {
  c = BackendConfig{};
  c.kind = backend_kind_from_name(j.at("kind").get<std::string>());
  c.timeout_ms = j.value("timeout_ms", 30000);
  c.max_retries = j.value("max_retries", 3);
  c.backoff_base_ms = j.value("backoff_base_ms", 250);
  c.seed = j.value("seed", std::uint64_t{0});
  c.tie_margin = j.value("tie_margin", 0.0);
  if (j.contains("endpoint_url")) c.endpoint_url = j.at("endpoint_url").get<std::string>();
  if (j.contains("api_key_env")) c.api_key_env = j.at("api_key_env").get<std::string>();
  if (j.contains("rate_limit_per_min")) c.rate_limit_per_min = j.at("rate_limit_per_min").get<int>();
  if (j.contains("skill")) c.skill = j.at("skill").get<SkillVector>();
  if (j.contains("noise")) c.noise = j.at("noise").get<double>();
  if (j.contains("system_prompt")) c.system_prompt = j.at("system_prompt").get<std::string>();
}

void validate_backend_config(const BackendConfig& config) {
  if (config.timeout_ms <= 0) throw ConfigError("timeout_ms must be positive");
  if (config.backoff_base_ms <= 0) {
    throw ConfigError("backoff_base_ms must be positive");
  }
  if (config.max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (config.rate_limit_per_min && *config.rate_limit_per_min <= 0) {
    throw ConfigError("rate_limit_per_min must be positive");
  }
  if (config.tie_margin < 0) throw ConfigError("tie_margin must be >= 0");
  switch (config.kind) {
    case BackendKind::kRemoteHttp:
      if (!config.endpoint_url) {
        throw ConfigError("RemoteHttp backend requires endpoint_url");
      }
      break;
    case BackendKind::kSyntheticTherapist:
      if (!config.skill) {
        throw ConfigError("SyntheticTherapist backend requires skill");
      }
      break;
    case BackendKind::kSyntheticJudge:
      if (!config.noise) {
        throw ConfigError("SyntheticJudge backend requires noise");
      }
      if (*config.noise < 0.0 || *config.noise > 1.0) {
        throw ConfigError("noise must be in [0, 1]");
      }
      break;
    case BackendKind::kScriptReplay:
      break;
  }
}

std::uint64_t request_hash(const ChatRequest& request) {
  std::uint64_t h = kFnvOffset;
  auto feed = [&h](std::string_view s) {
    h = fnv1a64(s, h);
    h = fnv1a64(std::string_view("\x1f", 1), h);
  };
  for (const ChatMessage& m : request.messages) {
    feed(role_name(m.role));
    feed(m.content);
  }
  feed(request.model_name);
  feed(std::to_string(request.max_tokens));
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", request.temperature);
  feed(buf);
  feed(request.seed ? std::to_string(*request.seed) : "none");
  return h;
}

Transport default_http_transport() {
  return [](const std::string& url, const std::vector<Header>& headers,
            const std::string& body, int timeout_ms) -> WireResult {
    std::size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
      return WireResult{0, "", false, "malformed url: " + url};
    }
    std::size_t path_start = url.find('/', scheme_end + 3);
    std::string base =
        path_start == std::string::npos ? url : url.substr(0, path_start);
    std::string path =
        path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client cli(base);
    cli.set_connection_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    cli.set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);
    cli.set_write_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000);

    httplib::Headers hl;
    for (const Header& h : headers) hl.emplace(h.first, h.second);
    auto res = cli.Post(path, hl, body, "application/json");
    if (!res) {
      WireResult out;
      out.error = httplib::to_string(res.error());
      out.timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                      res.error() == httplib::Error::Read;
      return out;
    }
    return WireResult{res->status, res->body, false, ""};
  };
}

ChatBackend::ChatBackend(BackendConfig config, std::shared_ptr<Clock> clock,
                         Transport transport)
    : config_(std::move(config)),
      clock_(std::move(clock)),
      transport_(std::move(transport)),
      jitter_rng_(mix64(config_.seed, 0x7261746a69747465ULL)) {
  validate_backend_config(config_);
  if (config_.kind == BackendKind::kRemoteHttp && !transport_) {
    transport_ = default_http_transport();
  }
}

ChatResponse ChatBackend::chat(const ChatRequest& request) {
  if (request.messages.empty()) {
    throw PreconditionError("chat request has no messages");
  }
  switch (config_.kind) {
    case BackendKind::kRemoteHttp:
      return chat_remote(request);
    case BackendKind::kSyntheticTherapist:
      return ChatResponse{synthetic_therapist_reply(*config_.skill, request),
                          FinishReason::kStop, 0, 1};
    case BackendKind::kScriptReplay:
      return ChatResponse{script_replay_reply(config_.seed, request),
                          FinishReason::kStop, 0, 1};
    case BackendKind::kSyntheticJudge:
      return ChatResponse{synthetic_judge_reply(config_, request),
                          FinishReason::kStop, 0, 1};
  }
  throw ConfigError("unhandled backend kind");
}

void ChatBackend::rate_limit_wait() {
  if (!config_.rate_limit_per_min) return;
  const int limit = *config_.rate_limit_per_min;
  const std::uint64_t interval =
      (60000ULL + static_cast<std::uint64_t>(limit) - 1) /
      static_cast<std::uint64_t>(limit);
  std::uint64_t slot;
  {
    std::lock_guard<std::mutex> lock(mu_);
    const std::uint64_t now = clock_->now_ms();
    slot = std::max(next_slot_ms_, now);
    next_slot_ms_ = slot + interval;
  }
  const std::uint64_t now = clock_->now_ms();
  if (slot > now) clock_->sleep_ms(slot - now);
}

ChatResponse ChatBackend::chat_remote(const ChatRequest& request) {
  const std::string& url = *config_.endpoint_url;
  std::vector<Header> headers = {{"Content-Type", "application/json"}};
  if (config_.api_key_env) {
    const char* key = std::getenv(config_.api_key_env->c_str());
    if (key == nullptr || *key == '\0') {
      throw ConfigError("api key environment variable '" +
                        *config_.api_key_env + "' is not set");
    }
    headers.push_back({"Authorization", std::string("Bearer ") + key});
  }

  nlohmann::json messages = nlohmann::json::array();
  for (const ChatMessage& m : request.messages) {
    messages.push_back({{"role", role_name(m.role)}, {"content", m.content}});
  }
  nlohmann::json body = {{"model", request.model_name},
                         {"messages", messages},
                         {"max_tokens", request.max_tokens},
                         {"temperature", request.temperature}};
  if (request.seed) body["seed"] = *request.seed;
  const std::string payload = body.dump();

  int last_status = 0;
  std::string last_error;
  for (int attempt = 0;; ++attempt) {
    rate_limit_wait();
    const std::uint64_t t0 = clock_->now_ms();
    WireResult wire = transport_(url, headers, payload, config_.timeout_ms);
    const std::int64_t latency =
        static_cast<std::int64_t>(clock_->now_ms() - t0);

    if (wire.status >= 200 && wire.status < 300) {
      nlohmann::json parsed;
      try {
        parsed = nlohmann::json::parse(wire.body);
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("unparseable chat response: ") + e.what());
      }
      std::string content;
      std::string finish = "stop";
      if (parsed.contains("choices") && parsed["choices"].is_array() &&
          !parsed["choices"].empty()) {
        const auto& choice = parsed["choices"][0];
        content = choice.at("message").at("content").get<std::string>();
        finish = choice.value("finish_reason", "stop");
      } else if (parsed.contains("content") && parsed["content"].is_string()) {
        content = parsed["content"].get<std::string>();
      } else {
        throw ParseError("unrecognized chat response shape");
      }
      ChatResponse out;
      out.content = std::move(content);
      out.finish_reason =
          finish == "length" ? FinishReason::kLength : FinishReason::kStop;
      if (out.content.empty()) out.finish_reason = FinishReason::kError;
      out.latency_ms = latency;
      out.attempt_count = attempt + 1;
      return out;
    }

    if (wire.status >= 400 && wire.status < 500 && wire.status != 429) {
      throw RequestError("chat request rejected with status " +
                             std::to_string(wire.status) + ": " + wire.body,
                         wire.status);
    }

    // Timeout, connect failure, 429, or 5xx: retryable.
    last_status = wire.status;
    last_error = wire.error.empty() ? wire.body : wire.error;
    if (attempt >= config_.max_retries) {
      throw TransportError(
          "chat transport failed after " + std::to_string(attempt + 1) +
              " attempts (last status " + std::to_string(last_status) + ")" +
              (last_error.empty() ? "" : ": " + last_error),
          last_status);
    }
    // Exponential backoff with full jitter; the cap doubles per attempt.
    const std::uint64_t cap = static_cast<std::uint64_t>(config_.backoff_base_ms)
                              << std::min(attempt, 20);
    std::uint64_t pause;
    {
      std::lock_guard<std::mutex> lock(mu_);
      pause = jitter_rng_.next_below(cap + 1);
    }
    clock_->sleep_ms(pause);
  }
}

ChatResponse chat(const BackendConfig& config, const ChatRequest& request) {
  ChatBackend backend(config);
  return backend.chat(request);
}

Relation synthetic_judge_relation(double noise, double skill_a, double skill_b,
                                  double xi, Rng& rng) {
  if (noise < 0.0 || noise > 1.0) {
    throw PreconditionError("noise must be in [0, 1]");
  }
  if (xi <= 0.0) throw PreconditionError("xi must be positive");
  const double z = (skill_a - skill_b) / xi;
  const double p_logistic = 1.0 / (1.0 + std::exp(-z));
  const double p = (1.0 - noise) * p_logistic + noise * 0.5;
  return rng.next_double() < p ? Relation::kAWins : Relation::kBWins;
}

int marker_repetitions(double skill) {
  const long reps = std::llround(skill / kMarkerResolution);
  return reps < 0 ? 0 : static_cast<int>(reps);
}

double skill_from_marker_rate(double markers_per_occasion) {
  return markers_per_occasion * kMarkerResolution;
}

std::string synthetic_therapist_reply(const SkillVector& skill,
                                      const ChatRequest& request) {
  Rng rng(mix64(skill.seed, request_hash(request)));

  // The latest user message is the client's current utterance; probe cues in
  // it decide which local dimensions this reply demonstrates.
  const std::string* last_user = nullptr;
  for (const ChatMessage& m : request.messages) {
    if (m.role == MessageRole::kUser) last_user = &m.content;
  }
  std::vector<Dimension> probed;
  if (last_user != nullptr) {
    for (Dimension d : local_dimensions()) {
      if (last_user->find(probe_token(d)) != std::string::npos) {
        probed.push_back(d);
      }
    }
  }

  std::vector<std::string> parts;
  const auto& openers = therapist_openers();
  parts.push_back(openers[rng.next_below(openers.size())]);

  // Filler mixes fresh coinages with a tiny stock pool; the fresh-token rate
  // follows the Diversity skill, which is what Distinct-N measures.
  const auto& lex = therapist_lexicon();
  const double fresh_rate = std::clamp(
      0.1 + skill.at(Dimension::kDiversity) / 500.0, 0.05, 0.95);
  constexpr int kFillerLen = 16;
  static const std::array<const char*, 4> kStock = {"steady", "moment",
                                                    "together", "breath"};
  for (int i = 0; i < kFillerLen; ++i) {
    if (rng.next_double() < fresh_rate) {
      parts.push_back(lex[rng.next_below(lex.size())] + "-" +
                      std::to_string(rng.next_below(997)));
    } else {
      parts.push_back(kStock[rng.next_below(kStock.size())]);
    }
  }

  // Markers carry the judged skill signal: counted by prefix, numbered with
  // draw-specific suffixes so repeats never flatten distinct-n.
  auto emit_markers = [&parts, &rng](Dimension d, double value) {
    const int reps = marker_repetitions(value);
    for (int i = 0; i < reps; ++i) {
      parts.push_back(marker_token(d) + "_" +
                      std::to_string(rng.next_below(997)));
    }
  };
  emit_markers(Dimension::kEmpathy, skill.at(Dimension::kEmpathy));
  emit_markers(Dimension::kEngagement, skill.at(Dimension::kEngagement));
  for (Dimension d : probed) emit_markers(d, skill.at(d));
  return join(parts, " ");
}

std::string script_replay_reply(std::uint64_t seed,
                                const ChatRequest& request) {
  Rng rng(mix64(seed, request_hash(request)));

  const std::string* sys = nullptr;
  for (const ChatMessage& m : request.messages) {
    if (m.role == MessageRole::kSystem) {
      sys = &m.content;
      break;
    }
  }

  bool neutral = false;
  std::vector<Dimension> probes;
  if (sys != nullptr) {
    if (sys->find(neutral_ack_directive()) != std::string::npos) {
      neutral = true;
    }
    // Scan directive lines only; history lines would leak earlier probes.
    std::istringstream is(*sys);
    std::string line;
    while (std::getline(is, line)) {
      if (starts_with(line, kClientLinePrefix) ||
          starts_with(line, kTherapistLinePrefix)) {
        continue;
      }
      for (Dimension d : local_dimensions()) {
        if (line.find(probe_token(d)) != std::string::npos) {
          if (std::find(probes.begin(), probes.end(), d) == probes.end()) {
            probes.push_back(d);
          }
        }
      }
    }
  }

  if (neutral) {
    const auto& acks = client_acks();
    return acks[rng.next_below(acks.size())];
  }

  const auto& lex = client_lexicon();
  std::vector<std::string> parts;
  const int len = 5 + static_cast<int>(rng.next_below(6));
  for (int i = 0; i < len; ++i) {
    parts.push_back(lex[rng.next_below(lex.size())]);
  }
  for (Dimension d : probes) parts.push_back(probe_token(d));
  return join(parts, " ");
}

namespace {

// Reduced per-side statistics, computed in one pass and memoized by content
// hash: a transcript side reappears in every battle it fights, so the parse
// runs once per (model, case) instead of once per battle.
struct SideStats {
  std::array<double, kDimensionCount> marker_counts{};
  std::array<double, kDimensionCount> probe_counts{};
  int therapist_lines = 0;
  double distinct2 = 0.0;
};

const std::map<std::string, Dimension, std::less<>>& lower_dim_lookup() {
  static const std::map<std::string, Dimension, std::less<>> table = [] {
    std::map<std::string, Dimension, std::less<>> out;
    for (Dimension d : all_dimensions()) {
      std::string name = dimension_name(d);
      for (char& c : name) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      }
      out[name] = d;
    }
    return out;
  }();
  return table;
}

// The alphabetic run at the head of `tail` resolved as a dimension name.
std::optional<Dimension> dim_from_tail(std::string_view tail) {
  std::size_t len = 0;
  while (len < tail.size() &&
         std::isalpha(static_cast<unsigned char>(tail[len]))) {
    ++len;
  }
  const auto& table = lower_dim_lookup();
  auto it = table.find(tail.substr(0, len));
  if (it == table.end()) return std::nullopt;
  return it->second;
}

SideStats compute_side_stats(std::string_view text) {
  SideStats stats;
  std::set<std::uint64_t> bigrams;
  std::size_t pos = 0;
  long long token_count = 0;
  std::uint64_t prev_hash = 0;
  bool have_prev = false;

  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;

    const bool therapist = starts_with(line, kTherapistLinePrefix);
    const bool client = !therapist && starts_with(line, kClientLinePrefix);
    if (!therapist && !client) continue;
    line.remove_prefix(therapist ? kTherapistLinePrefix.size()
                                 : kClientLinePrefix.size());
    if (therapist) stats.therapist_lines += 1;

    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() &&
             std::isspace(static_cast<unsigned char>(line[i]))) {
        ++i;
      }
      const std::size_t start = i;
      while (i < line.size() &&
             !std::isspace(static_cast<unsigned char>(line[i]))) {
        ++i;
      }
      if (i == start) break;
      std::string_view tok = line.substr(start, i - start);

      if (therapist) {
        if (starts_with(tok, "mk_")) {
          if (auto d = dim_from_tail(tok.substr(3))) {
            stats.marker_counts[static_cast<int>(*d)] += 1;
          }
        }
        const std::uint64_t h = fnv1a64(tok);
        if (have_prev) bigrams.insert(mix64(prev_hash, h));
        prev_hash = h;
        have_prev = true;
        ++token_count;
      } else if (starts_with(tok, "probe-")) {
        if (auto d = dim_from_tail(tok.substr(6))) {
          stats.probe_counts[static_cast<int>(*d)] += 1;
        }
      }
    }
  }
  if (token_count >= 2) {
    stats.distinct2 = static_cast<double>(bigrams.size()) /
                      static_cast<double>(token_count - 1);
  }
  return stats;
}

SideStats cached_side_stats(std::string_view text) {
  static std::mutex mu;
  static std::unordered_map<std::uint64_t, SideStats> cache;
  const std::uint64_t h = fnv1a64(text);
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(h);
    if (it != cache.end()) return it->second;
  }
  SideStats stats = compute_side_stats(text);
  {
    std::lock_guard<std::mutex> lock(mu);
    cache.emplace(h, stats);
  }
  return stats;
}

// Splits a rendered presentation into the raw text belonging to each side.
std::pair<std::string, std::string> route_sides(const std::string& rendered) {
  std::string a, b;
  std::string* side = nullptr;
  std::size_t pos = 0;
  while (pos < rendered.size()) {
    std::size_t eol = rendered.find('\n', pos);
    if (eol == std::string::npos) eol = rendered.size();
    std::string_view line(rendered.data() + pos, eol - pos);
    pos = eol + 1;
    if (starts_with(line, kSideAHeader)) {
      side = &a;
      continue;
    }
    if (starts_with(line, kSideBHeader)) {
      side = &b;
      continue;
    }
    if (side != nullptr) {
      side->append(line);
      side->push_back('\n');
    }
  }
  return {std::move(a), std::move(b)};
}

}  // namespace

std::pair<SideEvidence, SideEvidence> extract_side_evidence(
    const std::string& rendered) {
  SideEvidence a, b;
  SideEvidence* side = nullptr;
  std::istringstream is(rendered);
  std::string line;
  while (std::getline(is, line)) {
    if (starts_with(line, kSideAHeader)) {
      side = &a;
      continue;
    }
    if (starts_with(line, kSideBHeader)) {
      side = &b;
      continue;
    }
    if (side == nullptr) continue;
    if (starts_with(line, kTherapistLinePrefix)) {
      side->therapist_lines += 1;
      const std::string text = line.substr(kTherapistLinePrefix.size());
      for (Dimension d : all_dimensions()) {
        side->marker_counts[static_cast<int>(d)] +=
            count_token(text, marker_token(d));
      }
      for (std::string& tok : split_ws(text)) {
        side->therapist_tokens.push_back(std::move(tok));
      }
    } else if (starts_with(line, kClientLinePrefix)) {
      const std::string text = line.substr(kClientLinePrefix.size());
      for (Dimension d : local_dimensions()) {
        side->probe_counts[static_cast<int>(d)] +=
            count_token(text, probe_token(d));
      }
    }
  }
  return {a, b};
}

std::string synthetic_judge_reply(const BackendConfig& config,
                                  const ChatRequest& request) {
  const double noise = config.noise.value_or(0.0);
  Rng rng(mix64(config.seed, request_hash(request)));

  std::string rendered;
  for (const ChatMessage& m : request.messages) {
    rendered += m.content;
    rendered += '\n';
  }
  auto [text_a, text_b] = route_sides(rendered);
  const SideStats ea = cached_side_stats(text_a);
  const SideStats eb = cached_side_stats(text_b);

  nlohmann::json verdicts = nlohmann::json::object();
  double comp_a = 0, comp_b = 0;
  int comp_dims = 0;

  for (Dimension d : all_dimensions()) {
    const int di = static_cast<int>(d);
    std::string rel = "0";
    std::string why;

    if (d == Dimension::kDiversity) {
      const double da = ea.distinct2;
      const double db = eb.distinct2;
      if (std::fabs(da - db) > 0.01) rel = da > db ? "A" : "B";
      why = "distinct-2 " + fmt2(da) + " vs " + fmt2(db);
    } else {
      const bool local = scope_of(d) == DimensionScope::kLocal;
      const double occ_a =
          local ? ea.probe_counts[di] : static_cast<double>(ea.therapist_lines);
      const double occ_b =
          local ? eb.probe_counts[di] : static_cast<double>(eb.therapist_lines);
      if (occ_a <= 0 && occ_b <= 0) {
        why = "no evidence";
      } else {
        const double rate_a = ea.marker_counts[di] / std::max(1.0, occ_a);
        const double rate_b = eb.marker_counts[di] / std::max(1.0, occ_b);
        const double skill_a = skill_from_marker_rate(rate_a);
        const double skill_b = skill_from_marker_rate(rate_b);
        // Only dimensions with actual marker evidence enter the overall
        // comparison; an all-zero dimension says nothing about either side.
        if (ea.marker_counts[di] > 0 || eb.marker_counts[di] > 0) {
          comp_a += skill_a;
          comp_b += skill_b;
          comp_dims += 1;
        }
        if (std::fabs(skill_a - skill_b) > config.tie_margin) {
          rel = synthetic_judge_relation(noise, skill_a, skill_b, kDefaultXi,
                                         rng) == Relation::kAWins
                    ? "A"
                    : "B";
        }
        why = "evidence " + fmt2(skill_a) + " vs " + fmt2(skill_b);
      }
    }
    verdicts[dimension_name(d)] = {{"relation", rel}, {"rationale", why}};
  }

  std::string comp_rel = "0";
  std::string comp_why = "no evidence";
  if (comp_dims > 0) {
    const double sa = comp_a / comp_dims;
    const double sb = comp_b / comp_dims;
    if (std::fabs(sa - sb) > config.tie_margin) {
      comp_rel = synthetic_judge_relation(noise, sa, sb, kDefaultXi, rng) ==
                         Relation::kAWins
                     ? "A"
                     : "B";
    }
    comp_why = "mean evidence " + fmt2(sa) + " vs " + fmt2(sb);
  }
  verdicts["comprehensive"] = {{"relation", comp_rel}, {"rationale", comp_why}};

  // Emit leading commentary plus a fenced block; the parser is expected to
  // discard everything before the JSON object.
  return "Compared both sides stage by stage.\n```json\n" + verdicts.dump() +
         "\n```\n";
}

}  // namespace caliper
