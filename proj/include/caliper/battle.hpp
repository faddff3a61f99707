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
// A single debiased pairwise battle: phase-slice two transcripts, interleave
// the slices with alternating lead side, ask the judge once for all twelve
// dimensions, and parse the verdict. The Diversity dimension is decided
// locally by Distinct-N and overrides whatever the judge said.

#ifndef CALIPER_BATTLE_HPP_
#define CALIPER_BATTLE_HPP_

#include <string>
#include <vector>

#include "caliper/backends.hpp"
#include "caliper/domain.hpp"
#include "caliper/simulate.hpp"

namespace caliper {

// Judge replies that stay unparseable after the configured re-asks.
class JudgmentError : public Error {
 public:
  using Error::Error;
};

enum class BattleSide { kA, kB };

// One contiguous run of same-phase turns.
struct PhaseSlice {
  int stage_index = 1;  // the phase's 1-based ordinal
  Phase phase = Phase::kAllianceBuilding;
  std::vector<DialogueTurn> turns;
  std::vector<Dimension> highlighted;  // local dims triggered in this slice
  // Turn lines pre-rendered by slice_stages; reused across battles.
  std::string rendered;
};

struct StageSlice {
  BattleSide side = BattleSide::kA;
  int stage_index = 1;
  Phase phase = Phase::kAllianceBuilding;
  std::vector<DialogueTurn> turns;
  std::string label;
  std::string rendered;  // turn lines; rebuilt from turns when empty
};

struct Presentation {
  std::vector<StageSlice> slices;
  std::string model_a;
  std::string model_b;
};

// One slice per phase present, in phase order; concatenating the slices
// reproduces the transcript. Non-contiguous phase tags raise StructuralError.
std::vector<PhaseSlice> slice_stages(const SessionTranscript& transcript);

// Cross-positioned interleaving: stage k (1-based list position) contributes
// (A_k, B_k) when k is odd and (B_k, A_k) when k is even.
Presentation interleave(const std::vector<PhaseSlice>& slices_a,
                        const std::vector<PhaseSlice>& slices_b,
                        const std::string& model_a,
                        const std::string& model_b);

// Renders the presentation with the side-header / line-prefix grammar from
// domain.hpp; this string is the judge prompt's {history}.
std::string render_presentation(const Presentation& presentation);

enum class TokenizerMode { kWhitespace, kCodepoint };

// Distinct n-gram ratio over a token stream. Throws UndefinedMetricError
// when fewer than n tokens are available.
double distinct_n_tokens(const std::vector<std::string>& tokens, int n);

// Distinct-N over the concatenated therapist utterances of a transcript.
double distinct_n(const SessionTranscript& transcript, int n,
                  TokenizerMode mode = TokenizerMode::kWhitespace);

// Tie within epsilon, otherwise the higher score wins.
Relation diversity_verdict(double score_a, double score_b, double epsilon);

// Extracts the first JSON object from a raw judge reply (leading prose and
// code fences are discarded), requiring all 12 dimension keys plus
// "comprehensive". Relation tokens: "A", "B", "0".
Judgment parse_judgment(const std::string& raw);

// One criterion line per dimension for the judge prompt.
std::string default_eval_principles();
// The JSON skeleton given to the judge as {output_format}.
std::string judgment_output_format();

struct JudgeOptions {
  int distinct_order = 2;
  double diversity_epsilon = 0.01;
  TokenizerMode tokenizer = TokenizerMode::kWhitespace;
  int max_reasks = 2;  // re-asks after a parse failure, then JudgmentError
  int max_tokens = 2048;
};

Judgment judge_battle(ChatBackend& judge, const Presentation& presentation,
                      const PromptTemplates& templates,
                      const JudgeOptions& options = {});

}  // namespace caliper

#endif  // CALIPER_BATTLE_HPP_
