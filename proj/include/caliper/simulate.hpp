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
// Trajectory-anchored session runner: rebuilds the client system prompt
// every turn from the profile, the current phase, and the turn directive,
// then alternates client/therapist completions until the script ends.

#ifndef CALIPER_SIMULATE_HPP_
#define CALIPER_SIMULATE_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "caliper/backends.hpp"
#include "caliper/domain.hpp"

namespace caliper {

constexpr int kDefaultHistoryWindow = 12;

struct PromptTemplates {
  std::string client_template;
  std::string therapist_template;
  std::string judge_template;
};

// Built-in templates; external template files replace any subset.
PromptTemplates default_templates();
void to_json(nlohmann::json& j, const PromptTemplates& t);
void from_json(const nlohmann::json& j, PromptTemplates& t);

// Single-pass "{name}" substitution. Placeholders with non-empty values must
// appear in the template exactly once; unknown brace text passes through.
// Throws TemplateError naming the offending placeholder.
std::string fill_template(
    const std::string& tpl,
    const std::vector<std::pair<std::string, std::string>>& slots);

struct ClientPromptComponents {
  std::string profile_summary;
  std::string phase_label;
  std::string dimension_probe;  // empty when the turn probes nothing
  std::string turn_directives;
};

struct ClientPrompt {
  std::string text;
  int turn = 0;
  ClientPromptComponents components;
};

// Fills the client template for turn t. History is truncated to the most
// recent history_window turns. Empty-turn directives drop the probe and
// acting sections in favor of the neutral acknowledgement directive.
// Throws PreconditionError for out-of-range t and TemplateError when a
// needed placeholder is missing from the template.
ClientPrompt build_client_prompt(const ClientProfile& profile,
                                 const SimulationScript& script, int t,
                                 const std::vector<DialogueTurn>& history,
                                 const PromptTemplates& templates,
                                 int history_window = kDefaultHistoryWindow);

// Per-dimension client-side probe instruction (carries the probe cue token).
std::string dimension_probe_text(Dimension d);

// Raised when a backend failure aborts a session mid-way. The completed
// turns are preserved for post-mortem and excluded from battles.
class PartialSessionError : public Error {
 public:
  PartialSessionError(const std::string& what, SessionTranscript partial)
      : Error(what), partial_(std::move(partial)) {}
  const SessionTranscript& partial() const { return partial_; }

 private:
  SessionTranscript partial_;
};

struct SessionOptions {
  std::string model_id = "model";  // recorded in the transcript
  int history_window = kDefaultHistoryWindow;
  int max_tokens = 512;
  double temperature = 0.0;
};

SessionTranscript run_session(ChatBackend& client_backend,
                              ChatBackend& therapist_backend,
                              const ClientProfile& profile,
                              const SimulationScript& script,
                              const PromptTemplates& templates,
                              std::uint64_t seed,
                              const SessionOptions& options = {});

// Stable per-(model, client) seed: FNV-1a over the UTF-8 concatenation of
// the decimal campaign seed, the model id, and the client id.
std::uint64_t derive_session_seed(std::uint64_t campaign_seed,
                                  const std::string& model_id,
                                  const std::string& client_id);

struct ModelSpec {
  std::string model_id;
  BackendConfig backend;
};

struct ClientCase {
  ClientProfile profile;
  SimulationScript script;
};

struct CampaignFailure {
  std::string model_id;
  std::string client_id;
  std::string error;
  int completed_turns = 0;
};

void to_json(nlohmann::json& j, const CampaignFailure& f);
void from_json(const nlohmann::json& j, CampaignFailure& f);

struct CampaignConfig {
  std::uint64_t campaign_seed = 0;
  int workers = 4;
  BackendConfig client_backend;  // the simulated-client side, shared
  PromptTemplates templates;
  SessionOptions session;
};

struct CampaignResult {
  std::vector<SessionTranscript> transcripts;  // sorted by session_id
  std::vector<CampaignFailure> failures;       // sorted by (model, client)
};

// One transcript per (model, client) pair, executed with bounded
// parallelism. Output is canonically sorted, so the result is identical for
// any scheduling or input order.
CampaignResult run_campaign(const std::vector<ModelSpec>& models,
                            const std::vector<ClientCase>& clients,
                            const CampaignConfig& config);

}  // namespace caliper

#endif  // CALIPER_SIMULATE_HPP_
