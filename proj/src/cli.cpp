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

#include "caliper/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include "CLI11.hpp"
#include "caliper/agreement.hpp"
#include "caliper/backends.hpp"
#include "caliper/battle.hpp"
#include "caliper/domain.hpp"
#include "caliper/jsonl.hpp"
#include "caliper/preflearn.hpp"
#include "caliper/rating.hpp"
#include "caliper/report.hpp"
#include "caliper/simulate.hpp"
#include "caliper/synthcheck.hpp"
#include "caliper/tournament.hpp"

namespace caliper {

namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kCliJudgeSalt = 0x6a756467652d636cULL;

// Every file-producing run leaves a machine-readable effective-config record
// next to its output so the command can be replayed.
void write_runconfig(const std::string& out_path, const std::string& command,
                     nlohmann::json params) {
  nlohmann::json j{{"command", command}, {"params", std::move(params)}};
  std::ofstream f(out_path + ".runconfig.json", std::ios::trunc);
  if (!f) throw DataError("cannot write " + out_path + ".runconfig.json");
  f << j.dump(2) << '\n';
}

PromptTemplates load_templates(const std::string& path) {
  if (path.empty()) return default_templates();
  std::ifstream f(path);
  if (!f) throw DataError("cannot open templates file " + path);
  nlohmann::json j;
  f >> j;
  return j.get<PromptTemplates>();
}

BackendConfig load_judge_config(const std::string& path, std::uint64_t seed,
                                double default_noise) {
  if (!path.empty()) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open judge config " + path);
    nlohmann::json j;
    f >> j;
    return j.get<BackendConfig>();
  }
  BackendConfig judge;
  judge.kind = BackendKind::kSyntheticJudge;
  judge.noise = default_noise;
  judge.seed = mix64(seed, kCliJudgeSalt);
  return judge;
}

std::string resolve_near(const fs::path& base, const std::string& path) {
  fs::path p(path);
  if (p.is_absolute()) return p.string();
  return (base / p).string();
}

void write_failures(const std::string& path,
                    const std::vector<CampaignFailure>& failures) {
  write_jsonl(path, failures);
}

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t comma = s.find(',', start);
    if (comma == std::string::npos) comma = s.size();
    if (comma > start) out.push_back(s.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

std::string relation_tag(Relation r) { return relation_name(r); }

// --- subcommand bodies ---

int cmd_gen_clients(int n, std::uint64_t seed, int turns,
                    const std::string& out_profiles,
                    const std::string& out_scripts) {
  std::vector<ClientProfile> profiles = generate_profiles(n, seed);
  std::vector<SimulationScript> scripts;
  scripts.reserve(profiles.size());
  for (const ClientProfile& p : profiles) {
    scripts.push_back(make_default_script(p, turns, seed));
  }
  write_jsonl(out_profiles, profiles);
  write_jsonl(out_scripts, scripts);
  write_runconfig(out_profiles, "gen-clients",
                  {{"n", n}, {"seed", seed}, {"turns", turns},
                   {"out_profiles", out_profiles},
                   {"out_scripts", out_scripts}});
  std::cerr << "wrote " << profiles.size() << " profiles and scripts\n";
  return 0;
}

int cmd_validate(const std::string& script_path,
                 const std::string& profiles_path) {
  auto profiles = read_jsonl<ClientProfile>(profiles_path);
  auto scripts = read_jsonl<SimulationScript>(script_path);
  std::map<std::string, const ClientProfile*> by_id;
  for (const ClientProfile& p : profiles) by_id[p.id] = &p;

  std::vector<std::string> violations = validate_profiles(profiles);
  for (const SimulationScript& s : scripts) {
    auto it = by_id.find(s.client_id);
    if (it == by_id.end()) {
      violations.push_back("script " + s.script_id +
                           ": no profile with id " + s.client_id);
      continue;
    }
    for (std::string& v : validate_script(s, *it->second)) {
      violations.push_back("script " + s.script_id + ": " + v);
    }
  }
  std::cout << violations.size() << " violations\n";
  for (const std::string& v : violations) std::cout << v << '\n';
  return violations.empty() ? 0 : 1;
}

int cmd_simulate(const std::string& config_path, const std::string& out,
                 std::optional<std::uint64_t> seed_override) {
  std::ifstream f(config_path);
  if (!f) throw DataError("cannot open config " + config_path);
  nlohmann::json cfg;
  f >> cfg;
  const fs::path base = fs::path(config_path).parent_path();

  const auto& backends = cfg.at("backends");
  const auto& sim = cfg.at("simulation");

  CampaignConfig campaign;
  campaign.client_backend = backends.at("client").get<BackendConfig>();
  campaign.campaign_seed = sim.value("campaign_seed", std::uint64_t{0});
  if (seed_override) campaign.campaign_seed = *seed_override;
  campaign.workers = sim.value("workers", 4);
  campaign.session.history_window =
      sim.value("history_window", kDefaultHistoryWindow);
  campaign.session.max_tokens = sim.value("max_tokens", 512);
  campaign.session.temperature = sim.value("temperature", 0.0);
  campaign.templates = load_templates(
      sim.contains("templates_path") && !sim.at("templates_path").is_null()
          ? resolve_near(base, sim.at("templates_path").get<std::string>())
          : "");

  std::vector<ModelSpec> models;
  for (const auto& m : backends.at("models")) {
    models.push_back({m.at("model_id").get<std::string>(),
                      m.at("backend").get<BackendConfig>()});
  }

  auto profiles = read_jsonl<ClientProfile>(
      resolve_near(base, sim.at("clients_path").get<std::string>()));
  auto scripts = read_jsonl<SimulationScript>(
      resolve_near(base, sim.at("scripts_path").get<std::string>()));
  std::map<std::string, const SimulationScript*> script_by_client;
  for (const SimulationScript& s : scripts) script_by_client[s.client_id] = &s;

  std::vector<ClientCase> cases;
  for (const ClientProfile& p : profiles) {
    auto it = script_by_client.find(p.id);
    if (it == script_by_client.end()) {
      throw DataError("no script for client " + p.id);
    }
    cases.push_back({p, *it->second});
  }

  CampaignResult result = run_campaign(models, cases, campaign);
  write_jsonl(out, result.transcripts);
  write_failures(out + ".errors.jsonl", result.failures);
  write_runconfig(out, "simulate",
                  {{"config", config_path},
                   {"campaign_seed", campaign.campaign_seed},
                   {"workers", campaign.workers},
                   {"models", models.size()},
                   {"clients", cases.size()}});
  std::cerr << "wrote " << result.transcripts.size() << " transcripts, "
            << result.failures.size() << " failures\n";
  return 0;
}

int cmd_tournament(const std::string& transcripts_path,
                   const std::string& models_csv, int rounds,
                   const std::string& cases_path, const std::string& mode,
                   const std::string& judge_config_path,
                   const std::string& templates_path, std::uint64_t seed,
                   int workers, bool wall_clock, const std::string& out,
                   const std::string& standings_path) {
  auto transcripts = read_jsonl<SessionTranscript>(transcripts_path);

  std::set<std::string> model_set;
  std::set<std::string> case_set;
  for (const SessionTranscript& t : transcripts) {
    model_set.insert(t.model_id);
    case_set.insert(t.client_id);
  }
  std::vector<std::string> models =
      models_csv.empty()
          ? std::vector<std::string>(model_set.begin(), model_set.end())
          : split_csv_list(models_csv);
  std::vector<std::string> cases;
  if (cases_path.empty()) {
    cases.assign(case_set.begin(), case_set.end());
  } else {
    for (const ClientProfile& p : read_jsonl<ClientProfile>(cases_path)) {
      cases.push_back(p.id);
    }
  }

  TranscriptStore store(std::move(transcripts));
  BackendConfig judge_config =
      load_judge_config(judge_config_path, seed, 0.1);
  ChatBackend judge(judge_config);
  PromptTemplates templates = load_templates(templates_path);

  BattleContext ctx;
  ctx.judge = &judge;
  ctx.templates = &templates;
  ctx.clock = wall_clock ? system_clock()
                         : std::shared_ptr<Clock>(std::make_shared<SimClock>(0));
  ctx.judge_id = backend_kind_name(judge_config.kind);
  ctx.workers = workers;

  TournamentOptions topt;
  topt.mode = mode == "roundrobin" ? TournamentMode::kRoundRobin
                                   : TournamentMode::kSwiss;
  topt.rounds = rounds;
  topt.seed = seed;

  TournamentResult result = run_tournament(models, cases, store, ctx, topt);
  std::sort(result.records.begin(), result.records.end(),
            [](const BattleRecord& a, const BattleRecord& b) {
              return a.battle_id < b.battle_id;
            });
  write_jsonl(out, result.records);
  if (!standings_path.empty()) {
    write_jsonl(standings_path, result.standings_rows);
  }
  if (!result.judgment_failures.empty()) {
    std::ofstream ferr(out + ".errors.jsonl", std::ios::trunc);
    for (const std::string& e : result.judgment_failures) {
      ferr << nlohmann::json{{"error", e}}.dump() << '\n';
    }
  }
  write_runconfig(out, "tournament",
                  {{"transcripts", transcripts_path},
                   {"models", models},
                   {"rounds", topt.rounds},
                   {"cases", cases.size()},
                   {"mode", mode},
                   {"seed", seed},
                   {"judge", backend_kind_name(judge_config.kind)},
                   {"judge_seed", judge_config.seed},
                   {"wall_clock", wall_clock}});
  std::cerr << "wrote " << result.records.size() << " battle records ("
            << result.judgment_failures.size() << " judgment failures)\n";
  return 0;
}

int cmd_rate(const std::string& battles_path, const std::string& out,
             const std::string& dimension, const FitConfig& config) {
  auto records = read_jsonl<BattleRecord>(battles_path);
  if (records.empty()) throw DataError("no battle records in " + battles_path);

  std::vector<RatingTable> tables;
  if (!dimension.empty()) {
    tables.push_back(
        fit_elo(records, config, dimension_from_name(dimension)));
  } else {
    tables.push_back(fit_elo(records, config, std::nullopt));
    for (Dimension d : all_dimensions()) {
      tables.push_back(fit_elo(records, config, d));
    }
  }
  write_jsonl(out, tables);
  write_runconfig(out, "rate",
                  {{"battles", battles_path},
                   {"dimension", dimension},
                   {"xi", config.xi},
                   {"baseline", config.baseline},
                   {"learning_rate", config.learning_rate},
                   {"max_iters", config.max_iters},
                   {"grad_tol", config.grad_tol},
                   {"lambda", config.lambda}});
  for (const RatingTable& t : tables) {
    std::cerr << (t.dimension ? dimension_name(*t.dimension)
                              : std::string("comprehensive"))
              << ": " << t.iterations << " iters, grad "
              << t.final_grad_norm << "\n";
  }
  return 0;
}

int cmd_report(const std::string& ratings_path,
               const std::string& battles_path, const std::string& format,
               const std::string& out) {
  auto tables = read_jsonl<RatingTable>(ratings_path);
  auto records = read_jsonl<BattleRecord>(battles_path);
  const std::string doc = emit_report(
      tables, records,
      format == "csv" ? ReportFormat::kCsv : ReportFormat::kMarkdown);
  if (out.empty()) {
    std::cout << doc;
  } else {
    std::ofstream f(out, std::ios::trunc);
    if (!f) throw DataError("cannot write " + out);
    f << doc;
    write_runconfig(out, "report",
                    {{"ratings", ratings_path},
                     {"battles", battles_path},
                     {"format", format}});
  }
  return 0;
}

int cmd_agree(const std::string& battles_x, const std::string& battles_y,
              const std::string& out) {
  auto rx = read_jsonl<BattleRecord>(battles_x);
  auto ry = read_jsonl<BattleRecord>(battles_y);
  std::map<std::string, const BattleRecord*> by_id;
  for (const BattleRecord& r : ry) by_id[r.battle_id] = &r;

  std::vector<const BattleRecord*> px, py;
  for (const BattleRecord& r : rx) {
    auto it = by_id.find(r.battle_id);
    if (it == by_id.end()) continue;
    px.push_back(&r);
    py.push_back(it->second);
  }
  if (px.empty()) throw DataError("no battles with matching battle_id");

  std::ostringstream csv;
  csv << "label,kappa,pairs\n";
  auto emit = [&](const std::string& label, std::optional<Dimension> d) {
    std::vector<Relation> lx, ly;
    lx.reserve(px.size());
    for (std::size_t i = 0; i < px.size(); ++i) {
      lx.push_back(d ? px[i]->judgment.at(*d).relation
                     : px[i]->judgment.comprehensive.relation);
      ly.push_back(d ? py[i]->judgment.at(*d).relation
                     : py[i]->judgment.comprehensive.relation);
    }
    csv << label << ",";
    try {
      csv << cohens_kappa(lx, ly);
    } catch (const UndefinedMetricError&) {
      csv << "undefined";
    }
    csv << "," << lx.size() << "\n";
  };
  emit("comprehensive", std::nullopt);
  for (Dimension d : all_dimensions()) emit(dimension_name(d), d);

  if (out.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream f(out, std::ios::trunc);
    if (!f) throw DataError("cannot write " + out);
    f << csv.str();
    write_runconfig(out, "agree",
                    {{"battles_x", battles_x}, {"battles_y", battles_y}});
  }
  std::cerr << "paired " << px.size() << " of " << rx.size() << "/"
            << ry.size() << " battles\n";
  return 0;
}

int cmd_bias(const std::string& battles_path) {
  auto records = read_jsonl<BattleRecord>(battles_path);
  PositionShare s = position_share(records);
  std::cout << "first_position_win_share " << s.first_win << "\n";
  std::cout << "second_position_win_share " << s.second_win << "\n";
  std::cout << "tie_share " << s.tie << "\n";
  std::cout << "swap_consistency " << swap_consistency(records) << "\n";
  return 0;
}

int cmd_prefs(const std::string& battles_path,
              const std::string& transcripts_path, const std::string& out) {
  auto records = read_jsonl<BattleRecord>(battles_path);
  TranscriptStore store(read_jsonl<SessionTranscript>(transcripts_path));
  std::vector<PreferencePair> pairs = extract_preferences(records, store);
  write_jsonl(out, pairs);
  write_runconfig(out, "prefs",
                  {{"battles", battles_path},
                   {"transcripts", transcripts_path},
                   {"pairs", pairs.size()}});
  std::cerr << "wrote " << pairs.size() << " preference pairs\n";
  return 0;
}

int cmd_train_rm(const std::string& pairs_path, const std::string& out,
                 const RmTrainConfig& config) {
  auto pairs = read_jsonl<PreferencePair>(pairs_path);
  RmTrainResult result = train_rm(pairs, config);
  {
    std::ofstream f(out, std::ios::trunc);
    if (!f) throw DataError("cannot write " + out);
    nlohmann::json j = result.params;
    f << j.dump() << '\n';
  }
  write_runconfig(out, "train-rm",
                  {{"pairs", pairs_path},
                   {"learning_rate", config.learning_rate},
                   {"epochs", config.epochs},
                   {"seed", config.seed},
                   {"final_loss", result.final_loss},
                   {"pairwise_accuracy", result.pairwise_accuracy}});
  std::cout << "pairwise_accuracy " << result.pairwise_accuracy << "\n";
  std::cout << "final_loss " << result.final_loss << "\n";
  return 0;
}

RewardParams load_reward(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open reward model " + path);
  nlohmann::json j;
  f >> j;
  return j.get<RewardParams>();
}

PolicyParams load_policy(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open policy " + path);
  nlohmann::json j;
  f >> j;
  return j.get<PolicyParams>();
}

int cmd_grpo(const std::string& rm_path, const std::string& queries_path,
             const std::string& out, const std::string& init_path,
             const GrpoConfig& config, std::uint64_t seed) {
  RewardParams reward = load_reward(rm_path);
  auto queries = read_jsonl<Query>(queries_path);
  PolicyParams initial;
  if (!init_path.empty()) initial = load_policy(init_path);

  GrpoTrainResult result = train_policy_grpo(initial, reward, queries, config,
                                             seed);
  {
    std::ofstream f(out, std::ios::trunc);
    if (!f) throw DataError("cannot write " + out);
    nlohmann::json j = result.policy;
    f << j.dump() << '\n';
  }
  write_runconfig(out, "grpo",
                  {{"rm", rm_path},
                   {"queries", queries_path},
                   {"init", init_path},
                   {"seed", seed},
                   {"clip_epsilon", config.clip_epsilon},
                   {"kl_coeff", config.kl_coeff},
                   {"group_size", config.group_size},
                   {"learning_rate", config.learning_rate},
                   {"epochs", config.epochs},
                   {"inner_steps", config.inner_steps}});
  if (!result.epoch_mean_reward.empty()) {
    std::cout << "mean_reward_first_epoch " << result.epoch_mean_reward.front()
              << "\n";
    std::cout << "mean_reward_last_epoch " << result.epoch_mean_reward.back()
              << "\n";
  }
  return 0;
}

int cmd_eval_heldout(const std::string& before_path,
                     const std::string& after_path,
                     const std::string& queries_path,
                     const std::string& judge_config_path, double noise,
                     std::uint64_t seed) {
  PolicyParams before = load_policy(before_path);
  PolicyParams after = load_policy(after_path);
  auto queries = read_jsonl<Query>(queries_path);

  BackendConfig judge_config = load_judge_config(judge_config_path, seed, noise);
  ChatBackend judge(judge_config);
  PromptTemplates templates = default_templates();

  HeldoutTally tally =
      heldout_battle_eval(before, after, queries, judge, templates);

  std::cout << "battles " << tally.battles << "\n";
  std::cout << "comprehensive " << tally.comprehensive.wins << ":"
            << tally.comprehensive.losses << ":" << tally.comprehensive.ties
            << " win_share " << tally.win_share() << "\n";
  for (Dimension d : all_dimensions()) {
    const TallyRow& row = tally.per_dimension[static_cast<int>(d)];
    std::cout << dimension_name(d) << " " << row.wins << ":" << row.losses
              << ":" << row.ties << "\n";
  }
  return 0;
}

int cmd_gen_bandit(int n_train, int n_heldout, int n_actions,
                   std::uint64_t seed, const std::string& out_train,
                   const std::string& out_heldout) {
  write_jsonl(out_train,
              generate_bandit_queries("q_train", n_train, n_actions, seed));
  write_jsonl(out_heldout, generate_bandit_queries("q_heldout", n_heldout,
                                                   n_actions, seed));
  write_runconfig(out_train, "gen-bandit",
                  {{"train", n_train},
                   {"heldout", n_heldout},
                   {"actions", n_actions},
                   {"seed", seed}});
  std::cerr << "wrote " << n_train << " train and " << n_heldout
            << " held-out queries\n";
  return 0;
}

int cmd_synthcheck(const std::string& mode, int n_models, int rounds,
                   int cases, double noise, int seeds, double spacing,
                   int turns, std::uint64_t base_seed,
                   const std::string& out) {
  std::ostringstream csv;
  csv << "seed,mode,round,cumulative_battles,spearman,kendall\n";
  auto emit_mode = [&csv](std::uint64_t seed, const std::string& label,
                          const ModeOutcome& m, std::optional<double> kendall) {
    for (std::size_t r = 0; r < m.per_round_spearman.size(); ++r) {
      csv << seed << "," << label << "," << (r + 1) << ","
          << m.per_round_battles[r] << "," << m.per_round_spearman[r] << ",\n";
    }
    csv << seed << "," << label << ",final," << m.battles << ","
        << m.spearman_vs_latent << ",";
    if (kendall) csv << *kendall;
    csv << "\n";
  };

  for (int s = 0; s < seeds; ++s) {
    const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(s);
    std::vector<PoolModel> pool = generate_pool(n_models, spacing, seed);
    RecoveryOptions opts;
    opts.mode = mode == "swiss"
                    ? RecoveryMode::kSwiss
                    : (mode == "roundrobin" ? RecoveryMode::kRoundRobin
                                            : RecoveryMode::kBoth);
    opts.rounds = rounds;
    opts.cases = cases;
    opts.judge_noise = noise;
    opts.seed = seed;
    opts.total_turns = turns;
    RecoveryResult r = recovery_experiment(pool, opts);
    if (r.swiss) {
      emit_mode(seed, "swiss", *r.swiss, r.kendall_swiss_vs_roundrobin);
      std::cerr << "seed " << seed << " swiss spearman "
                << r.swiss->spearman_vs_latent << "\n";
    }
    if (r.round_robin) {
      emit_mode(seed, "roundrobin", *r.round_robin, std::nullopt);
      std::cerr << "seed " << seed << " roundrobin spearman "
                << r.round_robin->spearman_vs_latent << "\n";
    }
    if (r.kendall_swiss_vs_roundrobin) {
      std::cerr << "seed " << seed << " kendall "
                << *r.kendall_swiss_vs_roundrobin << "\n";
    }
  }

  std::ofstream f(out, std::ios::trunc);
  if (!f) throw DataError("cannot write " + out);
  f << csv.str();
  write_runconfig(out, "synthcheck",
                  {{"mode", mode},
                   {"models", n_models},
                   {"rounds", rounds},
                   {"cases", cases},
                   {"noise", noise},
                   {"seeds", seeds},
                   {"spacing", spacing},
                   {"turns", turns},
                   {"base_seed", base_seed}});
  return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"calibration engine for conversational counseling agents"};
  app.require_subcommand(1);

  // gen-clients
  auto* gen = app.add_subcommand("gen-clients",
                                 "generate synthetic client profiles and "
                                 "default execution scripts");
  int gen_n = 8;
  std::uint64_t gen_seed = 0;
  int gen_turns = kDefaultTotalTurns;
  std::string gen_profiles = "profiles.jsonl";
  std::string gen_scripts = "scripts.jsonl";
  gen->add_option("--n", gen_n, "profile count");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--turns", gen_turns, "script length");
  gen->add_option("--out-profiles", gen_profiles, "profiles output");
  gen->add_option("--out-scripts", gen_scripts, "scripts output");

  // validate
  auto* validate = app.add_subcommand("validate",
                                      "check scripts against profiles");
  std::string val_script, val_profiles;
  validate->add_option("--script", val_script, "scripts jsonl")->required();
  validate->add_option("--profiles", val_profiles, "profiles jsonl")
      ->required();

  // simulate
  auto* simulate = app.add_subcommand("simulate",
                                      "run trajectory-anchored sessions");
  std::string sim_config, sim_out;
  std::uint64_t sim_seed = 0;
  bool sim_seed_set = false;
  simulate->add_option("--config", sim_config, "run config json")->required();
  simulate->add_option("--out", sim_out, "transcripts jsonl")->required();
  simulate->add_option("--seed", sim_seed, "override campaign seed")
      ->each([&sim_seed_set](const std::string&) { sim_seed_set = true; });

  // tournament
  auto* tournament = app.add_subcommand("tournament",
                                        "schedule and judge battles");
  std::string t_transcripts, t_models, t_cases, t_mode = "swiss";
  std::string t_judge, t_templates, t_out, t_standings;
  int t_rounds = 0;
  int t_workers = 4;
  std::uint64_t t_seed = 0;
  bool t_wall = false;
  tournament->add_option("--transcripts", t_transcripts)->required();
  tournament->add_option("--models", t_models,
                         "comma list; default all in transcripts");
  tournament->add_option("--rounds", t_rounds, "0 = default for the mode");
  tournament->add_option("--cases", t_cases, "profiles jsonl for case ids");
  tournament->add_option("--mode", t_mode)->check(
      CLI::IsMember({"swiss", "roundrobin"}));
  tournament->add_option("--judge-config", t_judge, "backend config json");
  tournament->add_option("--templates", t_templates, "templates json");
  tournament->add_option("--seed", t_seed);
  tournament->add_option("--workers", t_workers);
  tournament->add_flag("--wall-clock", t_wall,
                       "stamp records with wall time instead of the "
                       "deterministic logical clock");
  tournament->add_option("--out", t_out)->required();
  tournament->add_option("--standings", t_standings, "standings jsonl");

  // rate
  auto* rate = app.add_subcommand("rate", "fit Elo ratings from battles");
  std::string r_battles, r_out, r_dimension;
  FitConfig r_config;
  rate->add_option("--battles", r_battles)->required();
  rate->add_option("--out", r_out)->required();
  rate->add_option("--dimension", r_dimension,
                   "fit only this dimension (default: comprehensive + all)");
  rate->add_option("--xi", r_config.xi);
  rate->add_option("--baseline", r_config.baseline);
  rate->add_option("--learning-rate", r_config.learning_rate);
  rate->add_option("--max-iters", r_config.max_iters);
  rate->add_option("--grad-tol", r_config.grad_tol);
  rate->add_option("--lambda", r_config.lambda);

  // report
  auto* report = app.add_subcommand("report", "emit the leaderboard");
  std::string rep_ratings, rep_battles, rep_format = "md", rep_out;
  report->add_option("--ratings", rep_ratings)->required();
  report->add_option("--battles", rep_battles)->required();
  report->add_option("--format", rep_format)
      ->check(CLI::IsMember({"md", "csv"}));
  report->add_option("--out", rep_out, "default: stdout");

  // agree
  auto* agree = app.add_subcommand("agree",
                                   "Cohen's kappa between two battle files");
  std::string a_x, a_y, a_out;
  agree->add_option("--battles-x", a_x)->required();
  agree->add_option("--battles-y", a_y)->required();
  agree->add_option("--out", a_out, "csv output; default stdout");

  // bias
  auto* bias = app.add_subcommand("bias",
                                  "position shares and swap consistency");
  std::string b_battles;
  bias->add_option("--battles", b_battles)->required();

  // prefs
  auto* prefs = app.add_subcommand("prefs",
                                   "extract preference pairs from battles");
  std::string p_battles, p_transcripts, p_out;
  prefs->add_option("--battles", p_battles)->required();
  prefs->add_option("--transcripts", p_transcripts)->required();
  prefs->add_option("--out", p_out)->required();

  // train-rm
  auto* train = app.add_subcommand("train-rm", "train the reward model");
  std::string trm_pairs, trm_out;
  RmTrainConfig trm_config;
  train->add_option("--pairs", trm_pairs)->required();
  train->add_option("--out", trm_out)->required();
  train->add_option("--learning-rate", trm_config.learning_rate);
  train->add_option("--epochs", trm_config.epochs);
  train->add_option("--seed", trm_config.seed);

  // grpo
  auto* grpo = app.add_subcommand("grpo", "optimize the tabular policy");
  std::string g_rm, g_queries, g_out, g_init;
  GrpoConfig g_config;
  std::uint64_t g_seed = 0;
  grpo->add_option("--rm", g_rm)->required();
  grpo->add_option("--queries", g_queries)->required();
  grpo->add_option("--out", g_out)->required();
  grpo->add_option("--init", g_init, "initial policy json");
  grpo->add_option("--clip", g_config.clip_epsilon);
  grpo->add_option("--kl", g_config.kl_coeff);
  grpo->add_option("--group-size", g_config.group_size);
  grpo->add_option("--learning-rate", g_config.learning_rate);
  grpo->add_option("--epochs", g_config.epochs);
  grpo->add_option("--inner-steps", g_config.inner_steps);
  grpo->add_option("--seed", g_seed);

  // eval-heldout
  auto* eval = app.add_subcommand("eval-heldout",
                                  "battle two policy snapshots on held-out "
                                  "queries");
  std::string e_before, e_after, e_queries, e_judge;
  double e_noise = 0.1;
  std::uint64_t e_seed = 0;
  eval->add_option("--before", e_before)->required();
  eval->add_option("--after", e_after)->required();
  eval->add_option("--queries", e_queries)->required();
  eval->add_option("--judge-config", e_judge);
  eval->add_option("--noise", e_noise, "synthetic judge noise");
  eval->add_option("--seed", e_seed);

  // gen-bandit
  auto* bandit = app.add_subcommand("gen-bandit",
                                    "generate toy preference-bandit queries");
  int gb_train = 100, gb_heldout = 100, gb_actions = 6;
  std::uint64_t gb_seed = 0;
  std::string gb_out_train = "train.jsonl", gb_out_heldout = "heldout.jsonl";
  bandit->add_option("--train", gb_train);
  bandit->add_option("--heldout", gb_heldout);
  bandit->add_option("--actions", gb_actions);
  bandit->add_option("--seed", gb_seed);
  bandit->add_option("--out-train", gb_out_train);
  bandit->add_option("--out-heldout", gb_out_heldout);

  // synthcheck
  auto* synth = app.add_subcommand("synthcheck",
                                   "latent-skill recovery experiments");
  std::string s_mode = "both", s_out = "results.csv";
  int s_models = 12, s_rounds = 4, s_cases = 100, s_seeds = 5;
  int s_turns = kDefaultTotalTurns;
  double s_noise = 0.1, s_spacing = 20.0;
  std::uint64_t s_seed = 0;
  synth->add_option("--mode", s_mode)
      ->check(CLI::IsMember({"swiss", "roundrobin", "both"}));
  synth->add_option("--models", s_models);
  synth->add_option("--rounds", s_rounds);
  synth->add_option("--cases", s_cases);
  synth->add_option("--noise", s_noise);
  synth->add_option("--seeds", s_seeds);
  synth->add_option("--spacing", s_spacing);
  synth->add_option("--turns", s_turns);
  synth->add_option("--seed", s_seed, "base seed");
  synth->add_option("--out", s_out);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      return cmd_gen_clients(gen_n, gen_seed, gen_turns, gen_profiles,
                             gen_scripts);
    }
    if (validate->parsed()) return cmd_validate(val_script, val_profiles);
    if (simulate->parsed()) {
      return cmd_simulate(sim_config, sim_out,
                          sim_seed_set
                              ? std::optional<std::uint64_t>(sim_seed)
                              : std::nullopt);
    }
    if (tournament->parsed()) {
      return cmd_tournament(t_transcripts, t_models, t_rounds, t_cases,
                            t_mode, t_judge, t_templates, t_seed, t_workers,
                            t_wall, t_out, t_standings);
    }
    if (rate->parsed()) return cmd_rate(r_battles, r_out, r_dimension, r_config);
    if (report->parsed()) {
      return cmd_report(rep_ratings, rep_battles, rep_format, rep_out);
    }
    if (agree->parsed()) return cmd_agree(a_x, a_y, a_out);
    if (bias->parsed()) return cmd_bias(b_battles);
    if (prefs->parsed()) return cmd_prefs(p_battles, p_transcripts, p_out);
    if (train->parsed()) return cmd_train_rm(trm_pairs, trm_out, trm_config);
    if (grpo->parsed()) {
      return cmd_grpo(g_rm, g_queries, g_out, g_init, g_config, g_seed);
    }
    if (eval->parsed()) {
      return cmd_eval_heldout(e_before, e_after, e_queries, e_judge, e_noise,
                              e_seed);
    }
    if (bandit->parsed()) {
      return cmd_gen_bandit(gb_train, gb_heldout, gb_actions, gb_seed,
                            gb_out_train, gb_out_heldout);
    }
    if (synth->parsed()) {
      return cmd_synthcheck(s_mode, s_models, s_rounds, s_cases, s_noise,
                            s_seeds, s_spacing, s_turns, s_seed, s_out);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args;
  args.reserve(static_cast<std::size_t>(argc > 0 ? argc - 1 : 0));
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args);
}

}  // namespace caliper
