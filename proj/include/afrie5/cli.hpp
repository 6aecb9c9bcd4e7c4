// Copyright 2026 The AfriE5 Toolkit Authors.
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
#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "afrie5/datamodel.hpp"
#include "afrie5/encoder.hpp"
#include "afrie5/error.hpp"
#include "afrie5/mining.hpp"
#include "afrie5/pipeline.hpp"
#include "afrie5/registry.hpp"
#include "afrie5/selftest.hpp"
#include "afrie5/synthetic.hpp"
#include "afrie5/trainer.hpp"

namespace afrie5 {

namespace cli {

namespace fs = std::filesystem;

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

using ConfigEntries = std::vector<std::pair<std::string, json>>;

/// TOML section holding every resolved option of one command; loadable through --config.
inline std::string config_toml(const std::string& command, const ConfigEntries& entries) {
  std::string out = "[" + command + "]\n";
  for (const auto& [key, value] : entries) out += key + " = " + value.dump() + "\n";
  return out;
}

/// Writes <command>.resolved_config.toml and <command>.run_meta.json into dir. Timestamps live
/// only in the metadata file so the other outputs stay byte-identical across re-runs.
inline void write_run_files(const fs::path& dir, const std::string& command, const ConfigEntries& entries,
                            const std::string& started) {
  fs::create_directories(dir);
  write_file((dir / (command + ".resolved_config.toml")).string(), config_toml(command, entries));
  const json meta{{"command", command}, {"started_at", started}, {"finished_at", utc_now()}};
  write_file((dir / (command + ".run_meta.json")).string(), meta.dump(2) + "\n");
}

inline fs::path parent_dir(const std::string& file) {
  const fs::path p = fs::path(file).parent_path();
  return p.empty() ? fs::path(".") : p;
}

inline std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  for (auto& s : split(csv, ',')) {
    if (!s.empty()) out.push_back(s);
  }
  return out;
}

inline std::vector<TrainInstance> read_instances(const std::string& path) {
  try {
    return parse_train_lines(read_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

inline std::vector<std::string> read_corpus(const std::string& path) {
  std::vector<std::string> out;
  const auto lines = split_lines(read_file(path));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (detail::blank(lines[i])) continue;
    const json j = detail::parse_json_line(lines[i], i + 1);
    out.push_back(nfc(detail::string_field(j, "text", i + 1)));
  }
  return out;
}

// --- build-data -------------------------------------------------------------

struct BuildDataArgs {
  std::string nli, translations, langs, configs = "TGT_SRC,SRC_TGT,TGT_TGT,SRC_SRC", out;
  double qe_threshold = kDefaultQeThreshold;
  bool no_expansion = false;
  int synthetic = 0;
  double synthetic_qe_min = 0.0;
  std::uint64_t seed = 13;

  ConfigEntries config() const {
    return {{"nli", nli}, {"translations", translations}, {"langs", langs}, {"configs", configs},
            {"qe-threshold", qe_threshold}, {"no-expansion", no_expansion}, {"synthetic", synthetic},
            {"synthetic-qe-min", synthetic_qe_min}, {"seed", seed}, {"out", out}};
  }
};

inline int build_data(const BuildDataArgs& a, std::ostream& out) {
  if (a.out.empty()) throw ValidationError("--out is required");
  ExpansionSettings s;
  for (const auto& code : split_csv(a.langs)) {
    if (!LangCode::is_valid(code)) throw ValidationError("invalid language code '" + code + "'");
    s.target_langs.emplace_back(code);
  }
  s.configs.clear();
  for (const auto& c : split_csv(a.configs)) {
    auto d = parse_direction(c);
    if (!d) throw ValidationError("unknown config '" + c + "'");
    s.configs.push_back(*d);
  }
  s.qe_threshold = a.qe_threshold;
  if (a.no_expansion) s.configs = {Direction::kSrcSrc};
  s.validate();

  std::vector<NliExample> examples;
  std::vector<TranslationRecord> records;
  if (a.synthetic > 0) {
    examples = synthetic_nli(a.synthetic, a.seed);
    records = synthetic_translations(default_world(), examples, s.target_langs, a.seed + 1, a.synthetic_qe_min, 1.0);
    const fs::path dir = parent_dir(a.out);
    fs::create_directories(dir);
    write_file((dir / "synthetic_nli.jsonl").string(), to_jsonl(examples));
    write_file((dir / "synthetic_translations.jsonl").string(), to_jsonl(records));
  } else {
    if (a.nli.empty() || a.translations.empty()) {
      throw ValidationError("--nli and --translations are required unless --synthetic is given");
    }
    try {
      examples = parse_nli_lines(read_file(a.nli));
    } catch (const ValidationError& e) {
      throw ValidationError(a.nli + ": " + e.what());
    }
    try {
      records = parse_translation_lines(read_file(a.translations));
    } catch (const ValidationError& e) {
      throw ValidationError(a.translations + ": " + e.what());
    }
  }
  BuildStats stats;
  const auto instances = build_dataset(examples, TranslationCache(records), s, &stats);
  fs::create_directories(parent_dir(a.out));
  write_file(a.out, to_jsonl(instances));
  json js{{"examples", stats.examples},
          {"expanded_pairs", stats.expanded_pairs},
          {"retained_pairs", stats.retained_pairs},
          {"instances", stats.instances},
          {"retained_by_lang", stats.retained_by_lang}};
  write_file((parent_dir(a.out) / "build_stats.json").string(), js.dump(2) + "\n");
  out << "examples " << stats.examples << ", pairs " << stats.expanded_pairs << ", retained " << stats.retained_pairs
      << ", instances " << stats.instances << "\n";
  return 0;
}

// --- mine -------------------------------------------------------------------

struct MineArgs {
  std::string in, corpus, encoder = "toy:42:32", window = "2:100", strategy = "uniform", instruction, out;
  int max_neg = kDefaultMaxNegatives;
  std::uint64_t seed = 13;

  ConfigEntries config() const {
    return {{"in", in},         {"corpus", corpus},   {"encoder", encoder}, {"max-neg", max_neg},
            {"window", window}, {"strategy", strategy}, {"instruction", instruction}, {"seed", seed},
            {"out", out}};
  }
};

inline int mine(const MineArgs& a, std::ostream& out) {
  if (a.in.empty() || a.corpus.empty() || a.out.empty()) throw ValidationError("--in, --corpus and --out are required");
  MiningSettings s;
  s.max_negatives = a.max_neg;
  s.seed = a.seed;
  const auto w = split(a.window, ':');
  try {
    if (w.size() != 2) throw std::invalid_argument("window");
    s.window_lo = std::stoi(w[0]);
    s.window_hi = std::stoi(w[1]);
  } catch (const std::logic_error&) {
    throw ValidationError("--window must be lo:hi");
  }
  if (a.strategy == "uniform") {
    s.strategy = MiningStrategy::kUniform;
  } else if (a.strategy == "topk") {
    s.strategy = MiningStrategy::kTopK;
  } else {
    throw ValidationError("--strategy must be uniform or topk");
  }
  s.validate();
  auto instances = read_instances(a.in);
  const auto corpus = read_corpus(a.corpus);
  auto encoder = make_encoder(a.encoder);
  const Matrix corpus_emb = corpus.empty() ? Matrix(0, encoder->dim()) : encoder->embed(corpus);
  std::vector<std::string> queries;
  for (const auto& inst : instances) queries.push_back(inst.query);
  const Matrix query_emb = queries.empty() ? Matrix(0, encoder->dim()) : encoder->embed(queries, a.instruction);
  std::size_t added = 0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const std::size_t before = instances[i].neg.size();
    instances[i] = mine_hard_negatives(instances[i], corpus, corpus_emb, query_emb.row(static_cast<Eigen::Index>(i)), s);
    added += instances[i].neg.size() - before;
  }
  fs::create_directories(parent_dir(a.out));
  write_file(a.out, to_jsonl(instances));
  out << "instances " << instances.size() << ", negatives added " << added << "\n";
  return 0;
}

// --- score-teacher ----------------------------------------------------------

struct ScoreTeacherArgs {
  std::string in, teacher, out;

  ConfigEntries config() const { return {{"in", in}, {"teacher", teacher}, {"out", out}}; }
};

inline int score_teacher_cmd(const ScoreTeacherArgs& a, std::ostream& out) {
  if (a.in.empty() || a.teacher.empty() || a.out.empty()) {
    throw ValidationError("--in, --teacher and --out are required");
  }
  auto instances = read_instances(a.in);
  auto teacher = make_teacher(a.teacher);
  for (auto& inst : instances) inst = score_teacher(inst, *teacher);
  fs::create_directories(parent_dir(a.out));
  write_file(a.out, to_jsonl(instances));
  out << "scored " << instances.size() << " instances\n";
  return 0;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  TrainConfig cfg;
  std::string data, out, init;
  int dim = kDefaultToyDim;
  int buckets = kDefaultToyBuckets;
  double init_scale = kDefaultInitScale;
  bool no_kd = false;

  ConfigEntries config() const {
    return {{"data", data},
            {"epochs", cfg.epochs},
            {"batch-size", cfg.batch_size},
            {"group-size", cfg.group_size},
            {"lr", cfg.learning_rate},
            {"warmup-ratio", cfg.warmup_ratio},
            {"temperature", cfg.temperature},
            {"max-query-len", cfg.max_query_len},
            {"max-passage-len", cfg.max_passage_len},
            {"same-dataset-within-batch", cfg.same_dataset_within_batch},
            {"log-every", cfg.log_every},
            {"checkpoint-every", cfg.checkpoint_every},
            {"shards", cfg.shards},
            {"query-instruction", cfg.query_instruction},
            {"no-kd", no_kd},
            {"seed", cfg.seed},
            {"dim", dim},
            {"buckets", buckets},
            {"init-scale", init_scale},
            {"init", init},
            {"out", out}};
  }
};

inline int train(TrainArgs a, std::ostream& out) {
  a.cfg.use_kd = !a.no_kd;
  a.cfg.validate();
  if (a.data.empty()) throw ValidationError("--data is required");
  if (a.out.empty()) throw ValidationError("--out is required");
  const auto instances = read_instances(a.data);
  ToyEncoderParams params = a.init.empty() ? ToyEncoderParams::init(a.cfg.seed, a.dim, a.buckets, kDefaultNgramOrder,
                                                                    a.init_scale)
                                           : read_checkpoint(a.init).params;
  const TrainResult r = train_epoch(instances, std::move(params), a.cfg, a.out);
  write_checkpoint((fs::path(a.out) / "model.ckpt").string(),
                   Checkpoint{r.params, static_cast<std::uint64_t>(r.steps), config_hash(a.cfg)});
  out << "steps " << r.steps << "\n";
  for (const auto& m : r.log) {
    out << "step " << m.step << " loss " << format_fixed(m.loss, 6) << " (contrastive "
        << format_fixed(m.loss_contrastive, 6) << ", kd " << format_fixed(m.loss_kd, 6) << ")\n";
  }
  return 0;
}

// --- evaluate / report ------------------------------------------------------

struct EvaluateArgs {
  std::string suite = "lite-synthetic", encoder, out, run, data_root;
  std::uint64_t seed = 0;
  int threads = 1;

  ConfigEntries config() const {
    return {{"suite", suite}, {"encoder", encoder}, {"run", run},   {"data-root", data_root},
            {"threads", threads}, {"seed", seed},   {"out", out}};
  }
};

inline int evaluate(const EvaluateArgs& a, std::ostream& out) {
  if (a.encoder.empty()) throw ValidationError("--encoder is required");
  if (a.out.empty()) throw ValidationError("--out is required");
  const SuiteManifest m = load_suite(a.suite);
  auto encoder = make_encoder(a.encoder);
  const ScoreTable table = run_suite(m, *encoder, a.seed, SuiteOptions{a.data_root, a.threads});
  const Summary s = aggregate(table, m.aggregation, a.run.empty() ? a.encoder : a.run);
  fs::create_directories(a.out);
  write_file((fs::path(a.out) / "scores.json").string(), to_json(s).dump(2) + "\n");
  const std::string table_text = text_table({s});
  write_file((fs::path(a.out) / "report.txt").string(), table_text);
  out << table_text;
  return 0;
}

inline Summary read_summary(const std::string& path) {
  fs::path p(path);
  if (fs::is_directory(p)) p /= "scores.json";
  try {
    return summary_from_json(json::parse(read_file(p.string())));
  } catch (const json::parse_error&) {
    throw ValidationError(p.string() + ": malformed JSON");
  }
}

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string format = "text", task, out;
  int decimals = -1;
};

inline int report(const ReportArgs& a, std::ostream& out) {
  if (a.inputs.empty()) throw ValidationError("report needs at least one run directory or scores file");
  std::vector<Summary> runs;
  for (const auto& in : a.inputs) runs.push_back(read_summary(in));
  std::string text;
  if (a.format == "machine") {
    json arr = json::array();
    for (const auto& s : runs) arr.push_back(to_json(s));
    text = (runs.size() == 1 ? arr[0] : arr).dump(2) + "\n";
  } else if (a.format == "text") {
    text = a.task.empty() ? text_table(runs, a.decimals < 0 ? 1 : a.decimals)
                          : language_table(runs, a.task, a.decimals < 0 ? 2 : a.decimals);
  } else {
    throw ValidationError("--format must be text or machine");
  }
  if (!a.out.empty()) {
    fs::create_directories(parent_dir(a.out));
    write_file(a.out, text);
  }
  out << text;
  return 0;
}

inline int selftest_cmd(std::ostream& out) {
  bool ok = true;
  for (const auto& r : run_selftest()) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
    ok = ok && r.passed;
  }
  return ok ? 0 : 2;
}

}  // namespace cli

/// Entry point shared by the executable and the tests. Exit codes: 0 success, 1 validation or
/// usage error, 2 runtime error.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  namespace c = cli;
  CLI::App app{"AfriE5 toolkit: cross-lingual data construction, contrastive distillation and AfriMTEB evaluation",
               "afrie5"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML file with one [subcommand] section; explicit flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);

  c::BuildDataArgs bd;
  auto* build = app.add_subcommand("build-data", "Expand, QE-filter and group NLI data into training instances");
  build->add_option("--nli", bd.nli, "NLI examples (JSONL)");
  build->add_option("--translations", bd.translations, "Translation records with qe_score (JSONL)");
  build->add_option("--langs", bd.langs, "Comma-separated target languages")->required();
  build->add_option("--configs", bd.configs, "Comma-separated directions")->capture_default_str();
  build->add_option("--qe-threshold", bd.qe_threshold, "Drop pairs whose min translated QE is below this")
      ->capture_default_str();
  build->add_flag("--no-expansion", bd.no_expansion, "Keep only the English-English pairs");
  build->add_option("--synthetic", bd.synthetic, "Generate this many synthetic premises instead of reading inputs");
  build->add_option("--synthetic-qe-min", bd.synthetic_qe_min, "Lower bound of the synthetic uniform QE scores")
      ->capture_default_str();
  build->add_option("--seed", bd.seed, "Seed for synthetic generation")->capture_default_str();
  build->add_option("--out", bd.out, "Output training instances (JSONL)");

  c::MineArgs mn;
  auto* mine = app.add_subcommand("mine", "Add hard negatives ranked by a student encoder");
  mine->add_option("--in", mn.in, "Training instances (JSONL)");
  mine->add_option("--corpus", mn.corpus, "Candidate passages, JSONL {\"text\": ...}");
  mine->add_option("--encoder", mn.encoder, "Encoder spec: toy:<seed>:<dim> | file:<path> | ckpt:<path>")
      ->capture_default_str();
  mine->add_option("--max-neg", mn.max_neg, "Negative budget per instance")->capture_default_str();
  mine->add_option("--window", mn.window, "Rank window lo:hi (1-based, inclusive)")->capture_default_str();
  mine->add_option("--strategy", mn.strategy, "uniform | topk")->capture_default_str();
  mine->add_option("--instruction", mn.instruction, "Query instruction");
  mine->add_option("--seed", mn.seed, "Sampling seed")->capture_default_str();
  mine->add_option("--out", mn.out, "Output training instances (JSONL)");

  c::ScoreTeacherArgs st;
  auto* score = app.add_subcommand("score-teacher", "Attach teacher scores to each instance group");
  score->add_option("--in", st.in, "Training instances (JSONL)");
  score->add_option("--teacher", st.teacher, "Teacher spec: file:<path> | dot:<encoder-spec> | const:<v>");
  score->add_option("--out", st.out, "Output training instances (JSONL)");

  c::TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train the toy student with contrastive + distillation loss");
  train->add_option("--data", tr.data, "Training instances (JSONL)");
  train->add_option("--epochs", tr.cfg.epochs)->capture_default_str();
  train->add_option("--batch-size", tr.cfg.batch_size)->capture_default_str();
  train->add_option("--group-size", tr.cfg.group_size)->capture_default_str();
  train->add_option("--lr", tr.cfg.learning_rate)->capture_default_str();
  train->add_option("--warmup-ratio", tr.cfg.warmup_ratio)->capture_default_str();
  train->add_option("--temperature", tr.cfg.temperature)->capture_default_str();
  train->add_option("--max-query-len", tr.cfg.max_query_len, "Characters")->capture_default_str();
  train->add_option("--max-passage-len", tr.cfg.max_passage_len, "Characters")->capture_default_str();
  train->add_flag("--same-dataset-within-batch,!--mixed-batches", tr.cfg.same_dataset_within_batch)
      ->capture_default_str();
  train->add_option("--log-every", tr.cfg.log_every)->capture_default_str();
  train->add_option("--checkpoint-every", tr.cfg.checkpoint_every)->capture_default_str();
  train->add_option("--shards", tr.cfg.shards, "Simulated devices sharing pooled negatives")->capture_default_str();
  train->add_option("--query-instruction", tr.cfg.query_instruction);
  train->add_flag("--no-kd", tr.no_kd, "Contrastive loss only");
  train->add_option("--seed", tr.cfg.seed)->capture_default_str();
  train->add_option("--dim", tr.dim, "Toy embedding dimension")->capture_default_str();
  train->add_option("--buckets", tr.buckets, "Toy n-gram hash buckets")->capture_default_str();
  train->add_option("--init-scale", tr.init_scale, "Std of the initial toy weights")->capture_default_str();
  train->add_option("--init", tr.init, "Start from this checkpoint instead of a fresh init");
  train->add_option("--out", tr.out, "Output directory");

  c::EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Run a benchmark suite and write scores.json");
  evaluate->add_option("--suite", ev.suite, "Manifest path or shipped suite name")->capture_default_str();
  evaluate->add_option("--encoder", ev.encoder, "Encoder spec: toy:<seed>:<dim> | file:<path> | ckpt:<path>");
  evaluate->add_option("--run", ev.run, "Row label in reports (defaults to the encoder spec)");
  evaluate->add_option("--data-root", ev.data_root, "Directory that relative dataset paths resolve against");
  evaluate->add_option("--threads", ev.threads)->capture_default_str();
  evaluate->add_option("--seed", ev.seed)->capture_default_str();
  evaluate->add_option("--out", ev.out, "Output directory");

  c::ReportArgs rp;
  auto* report = app.add_subcommand("report", "Print tables from one or more evaluate outputs");
  report->add_option("inputs", rp.inputs, "Run directories or scores.json files");
  report->add_option("--format", rp.format, "text | machine")->capture_default_str();
  report->add_option("--task", rp.task, "Per-language table for this task");
  report->add_option("--decimals", rp.decimals, "Defaults to 1 (summary) or 2 (per-language)");
  report->add_option("--out", rp.out, "Also write the report to this file");

  auto* selftest = app.add_subcommand("selftest", "Run the built-in oracle checks");

  for (auto* sub : {build, mine, score, train, evaluate, report, selftest}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    const auto used = app.get_subcommands();
    out << (used.empty() ? app.help() : used.front()->help());
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << app.help();
    return 1;
  }

  const std::string started = c::utc_now();
  try {
    if (build->parsed()) {
      const int rc = c::build_data(bd, out);
      c::write_run_files(c::parent_dir(bd.out), "build-data", bd.config(), started);
      return rc;
    }
    if (mine->parsed()) {
      const int rc = c::mine(mn, out);
      c::write_run_files(c::parent_dir(mn.out), "mine", mn.config(), started);
      return rc;
    }
    if (score->parsed()) {
      const int rc = c::score_teacher_cmd(st, out);
      c::write_run_files(c::parent_dir(st.out), "score-teacher", st.config(), started);
      return rc;
    }
    if (train->parsed()) {
      const int rc = c::train(tr, out);
      c::write_run_files(tr.out, "train", tr.config(), started);
      return rc;
    }
    if (evaluate->parsed()) {
      const int rc = c::evaluate(ev, out);
      c::write_run_files(ev.out, "evaluate", ev.config(), started);
      return rc;
    }
    if (report->parsed()) return c::report(rp, out);
    if (selftest->parsed()) return c::selftest_cmd(out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const RuntimeError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  err << app.help();
  return 1;
}

}  // namespace afrie5
