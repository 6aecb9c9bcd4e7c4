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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "afrie5/datamodel.hpp"
#include "afrie5/datasets.hpp"
#include "afrie5/encoder.hpp"
#include "afrie5/error.hpp"
#include "afrie5/metrics.hpp"
#include "afrie5/synthetic.hpp"
#include "afrie5/text.hpp"

#ifndef AFRIE5_DEFAULT_FIXTURE_ROOT
#define AFRIE5_DEFAULT_FIXTURE_ROOT "fixtures"
#endif
#ifndef AFRIE5_DEFAULT_MANIFEST_ROOT
#define AFRIE5_DEFAULT_MANIFEST_ROOT "manifests"
#endif

namespace afrie5 {

enum class Aggregation { kFamilyMacro, kTaskMacro };

inline std::string_view to_string(Aggregation a) { return a == Aggregation::kFamilyMacro ? "family_macro" : "task_macro"; }

inline std::optional<Aggregation> parse_aggregation(std::string_view s) {
  if (s == "family_macro") return Aggregation::kFamilyMacro;
  if (s == "task_macro") return Aggregation::kTaskMacro;
  return std::nullopt;
}

inline const std::vector<LangCode>& lite_languages() {
  static const std::vector<LangCode> langs = {
      LangCode("amh_Ethi"), LangCode("gaz_Latn"), LangCode("hau_Latn"), LangCode("ibo_Latn"), LangCode("kin_Latn"),
      LangCode("swh_Latn"), LangCode("xho_Latn"), LangCode("yor_Latn"), LangCode("zul_Latn")};
  return langs;
}

inline std::string_view metric_id(Family f) {
  switch (f) {
    case Family::kBtxt: return "f1";
    case Family::kPrClf: return "ap";
    case Family::kClf: return "accuracy";
    case Family::kMultiClf: return "lrap";
    case Family::kClust: return "v_measure";
    case Family::kSts: return "spearman";
    case Family::kRtrvl: return "ndcg_at_10";
    case Family::kRrnk: return "map";
  }
  return "";
}

inline constexpr std::string_view kSyntheticPrefix = "synthetic:";

struct TaskSpec {
  std::string name;
  Family family = Family::kClf;
  std::vector<LangCode> languages;
  std::vector<std::string> datasets;
  std::string source;                          // path template with {lang}, or synthetic:<family>
  std::map<std::string, std::string> sources;  // per-language overrides
  std::string metric;
  std::string split = "test";
  std::string instruction;

  std::string source_for(const LangCode& lang) const {
    auto it = sources.find(lang.str());
    std::string s = it == sources.end() ? source : it->second;
    for (std::size_t pos; (pos = s.find("{lang}")) != std::string::npos;) s.replace(pos, 6, lang.str());
    return s;
  }
};

struct SuiteManifest {
  std::string suite;  // full | lite | custom
  std::string name;
  Aggregation aggregation = Aggregation::kTaskMacro;
  std::vector<TaskSpec> tasks;
  std::string base_dir;  // relative sources resolve against this

  std::size_t dataset_count() const {
    std::set<std::string> names;
    for (const auto& t : tasks) names.insert(t.datasets.begin(), t.datasets.end());
    return names.size();
  }
};

namespace detail {

inline const json& task_field(const json& t, const std::string& task, const char* name) {
  auto it = t.find(name);
  if (it == t.end()) throw ValidationError("task '" + task + "': missing field '" + name + "'");
  return *it;
}

inline std::string task_string(const json& t, const std::string& task, const char* name) {
  const json& v = task_field(t, task, name);
  if (!v.is_string()) throw ValidationError("task '" + task + "': field '" + name + "' must be a string");
  return v.get<std::string>();
}

inline std::vector<std::string> task_strings(const json& t, const std::string& task, const char* name) {
  const json& v = task_field(t, task, name);
  if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_string(); })) {
    throw ValidationError("task '" + task + "': field '" + name + "' must be a list of strings");
  }
  return v.get<std::vector<std::string>>();
}

}  // namespace detail

inline SuiteManifest parse_manifest(const json& j, const std::string& base_dir = ".") {
  if (!j.is_object()) throw ValidationError("manifest must be a JSON object");
  SuiteManifest m;
  m.base_dir = base_dir;
  if (!j.contains("suite") || !j["suite"].is_string()) throw ValidationError("manifest: missing field 'suite'");
  m.suite = j["suite"].get<std::string>();
  if (m.suite != "full" && m.suite != "lite" && m.suite != "custom") {
    throw ValidationError("manifest: suite must be full, lite or custom");
  }
  m.name = j.value("name", m.suite);
  if (!j.contains("aggregation") || !j["aggregation"].is_string()) {
    throw ValidationError("manifest: missing field 'aggregation'");
  }
  auto agg = parse_aggregation(j["aggregation"].get<std::string>());
  if (!agg) throw ValidationError("manifest: aggregation must be family_macro or task_macro");
  m.aggregation = *agg;
  if (j.contains("data_root")) {
    const std::filesystem::path root(j["data_root"].get<std::string>());
    m.base_dir = root.is_absolute() ? root.string() : (std::filesystem::path(base_dir) / root).string();
  }
  if (!j.contains("tasks") || !j["tasks"].is_array() || j["tasks"].empty()) {
    throw ValidationError("manifest: missing field 'tasks'");
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < j["tasks"].size(); ++i) {
    const json& t = j["tasks"][i];
    if (!t.is_object() || !t.contains("name") || !t["name"].is_string()) {
      throw ValidationError("task #" + std::to_string(i + 1) + ": missing field 'name'");
    }
    TaskSpec spec;
    spec.name = t["name"].get<std::string>();
    if (!seen.insert(spec.name).second) throw ValidationError("task '" + spec.name + "': duplicate task name");
    const std::string family = detail::task_string(t, spec.name, "family");
    auto fam = parse_family(family);
    if (!fam) throw ValidationError("task '" + spec.name + "': unknown family '" + family + "'");
    spec.family = *fam;
    for (const auto& code : detail::task_strings(t, spec.name, "languages")) {
      if (!LangCode::is_valid(code)) throw ValidationError("task '" + spec.name + "': invalid language '" + code + "'");
      spec.languages.emplace_back(code);
    }
    if (spec.languages.empty()) throw ValidationError("task '" + spec.name + "': languages must be non-empty");
    spec.datasets = t.contains("datasets") ? detail::task_strings(t, spec.name, "datasets")
                                           : std::vector<std::string>{spec.name};
    spec.source = detail::task_string(t, spec.name, "source");
    if (t.contains("sources")) {
      const json& s = t["sources"];
      if (!s.is_object()) throw ValidationError("task '" + spec.name + "': field 'sources' must be an object");
      for (const auto& [lang, path] : s.items()) {
        if (!path.is_string()) throw ValidationError("task '" + spec.name + "': sources must map to strings");
        spec.sources[lang] = path.get<std::string>();
      }
    }
    spec.metric = detail::task_string(t, spec.name, "metric");
    if (spec.metric != metric_id(spec.family)) {
      throw ValidationError("task '" + spec.name + "': metric '" + spec.metric + "' does not match family " +
                            std::string(to_string(spec.family)));
    }
    spec.split = t.value("split", "test");
    spec.instruction = t.value("instruction", "");
    if (m.suite == "lite") {
      std::vector<std::string> missing;
      for (const auto& lang : lite_languages()) {
        if (std::find(spec.languages.begin(), spec.languages.end(), lang) == spec.languages.end()) {
          missing.push_back(lang.str());
        }
      }
      if (!missing.empty()) {
        std::string list;
        for (const auto& l : missing) list += (list.empty() ? "" : ", ") + l;
        throw ValidationError("task '" + spec.name + "': lite coverage violated, missing " + list);
      }
    }
    m.tasks.push_back(std::move(spec));
  }
  return m;
}

inline SuiteManifest load_manifest(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error&) {
    throw ValidationError(path + ": malformed JSON");
  }
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_manifest(j, dir.empty() ? "." : dir.string());
}

inline std::string manifest_root() {
  if (const char* env = std::getenv("AFRIE5_MANIFEST_ROOT"); env && *env) return env;
  return AFRIE5_DEFAULT_MANIFEST_ROOT;
}

/// Resolves a suite argument: an existing file path, or the name of a shipped manifest.
inline SuiteManifest load_suite(const std::string& suite) {
  if (std::filesystem::is_regular_file(suite)) return load_manifest(suite);
  const auto shipped = std::filesystem::path(manifest_root()) / (suite + ".json");
  if (std::filesystem::is_regular_file(shipped)) return load_manifest(shipped.string());
  throw ValidationError("unknown suite '" + suite + "'");
}

// ---------------------------------------------------------------------------
// Scores and aggregation

struct TaskScores {
  Family family = Family::kClf;
  std::map<std::string, double> languages;
  bool operator==(const TaskScores&) const = default;
};

/// Per-cell main scores on the 0-100 scale, tasks kept in insertion order.
class ScoreTable {
 public:
  void set(const std::string& task, Family family, const std::string& lang, double score) {
    const double lo = 100.0 * min_main_score(family);
    if (!std::isfinite(score) || score < lo || score > 100.0) {
      throw ValidationError("score for " + task + "/" + lang + " outside [" + std::to_string(static_cast<int>(lo)) +
                            ", 100]");
    }
    auto it = std::find_if(tasks_.begin(), tasks_.end(), [&](const auto& t) { return t.first == task; });
    if (it == tasks_.end()) {
      tasks_.push_back({task, TaskScores{family, {}}});
      it = std::prev(tasks_.end());
    } else if (it->second.family != family) {
      throw ValidationError("task " + task + " recorded under two families");
    }
    it->second.languages[lang] = score;
  }

  const std::vector<std::pair<std::string, TaskScores>>& tasks() const { return tasks_; }
  bool empty() const { return tasks_.empty(); }
  std::size_t cells() const {
    std::size_t n = 0;
    for (const auto& [name, t] : tasks_) n += t.languages.size();
    return n;
  }
  bool operator==(const ScoreTable&) const = default;

 private:
  std::vector<std::pair<std::string, TaskScores>> tasks_;
};

struct TaskSummary {
  std::string name;
  Family family = Family::kClf;
  std::map<std::string, double> languages;
  double mean = 0.0;
  bool operator==(const TaskSummary&) const = default;
};

struct Summary {
  std::string run;
  Aggregation mode = Aggregation::kTaskMacro;
  std::vector<TaskSummary> tasks;
  std::vector<std::pair<Family, double>> families;  // canonical family order, present families only
  double overall = 0.0;
  bool operator==(const Summary&) const = default;
};

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Unweighted means at every level; overall is over family means or task means per mode.
inline Summary aggregate(const ScoreTable& table, Aggregation mode, std::string run = "run") {
  if (table.empty()) throw ValidationError("cannot aggregate an empty score table");
  Summary s;
  s.run = std::move(run);
  s.mode = mode;
  std::map<Family, std::vector<double>> by_family;
  std::vector<double> task_means;
  for (const auto& [name, t] : table.tasks()) {
    if (t.languages.empty()) throw ValidationError("task " + name + " has no language scores");
    std::vector<double> vals;
    for (const auto& [lang, v] : t.languages) vals.push_back(v);
    const double m = mean_of(vals);
    s.tasks.push_back({name, t.family, t.languages, m});
    by_family[t.family].push_back(m);
    task_means.push_back(m);
  }
  std::vector<double> family_means;
  for (Family f : kAllFamilies) {
    auto it = by_family.find(f);
    if (it == by_family.end()) continue;
    s.families.emplace_back(f, mean_of(it->second));
    family_means.push_back(s.families.back().second);
  }
  s.overall = mode == Aggregation::kFamilyMacro ? mean_of(family_means) : mean_of(task_means);
  return s;
}

/// A table with one cell per named column, each holding an already averaged score. Used to
/// feed published task or family means back through aggregate.
inline ScoreTable table_from_means(const std::vector<std::string>& names, const std::vector<Family>& families,
                                   const std::vector<double>& values) {
  if (names.size() != values.size() || families.size() != values.size()) {
    throw ValidationError("table_from_means: length mismatch");
  }
  ScoreTable t;
  for (std::size_t i = 0; i < names.size(); ++i) t.set(names[i], families[i], "all", values[i]);
  return t;
}

// ---------------------------------------------------------------------------
// Suite execution

struct SuiteOptions {
  std::string data_root;  // overrides the manifest's base directory when non-empty
  int threads = 1;
};

struct Cell {
  std::size_t task = 0;
  LangCode lang;
  std::string source;
};

inline bool is_synthetic(const std::string& source) { return source.rfind(kSyntheticPrefix, 0) == 0; }

inline const ToyWorld& default_world() {
  static const ToyWorld world;
  return world;
}

inline std::uint64_t synthetic_cell_seed(const TaskSpec& task, const LangCode& lang) {
  return fnv1a(task.name + "|" + lang.str());
}

/// All synthetic cells of a manifest, generated in manifest order against one shared text set
/// so that no text appears in two cells.
class SyntheticSuite {
 public:
  explicit SyntheticSuite(const SuiteManifest& m) {
    std::set<std::string> taken;
    for (const auto& task : m.tasks) {
      for (const auto& lang : task.languages) {
        const std::string source = task.source_for(lang);
        if (!is_synthetic(source)) continue;
        const auto fam = parse_family(source.substr(kSyntheticPrefix.size()));
        if (!fam || *fam != task.family) {
          throw ValidationError("task '" + task.name + "': fixture id " + source + " does not match family " +
                                std::string(to_string(task.family)));
        }
        cells_.emplace(key(task.name, lang),
                       synthetic_cell(default_world(), task.family, lang, synthetic_cell_seed(task, lang), &taken));
      }
    }
  }

  const SyntheticCell& at(const std::string& task, const LangCode& lang) const {
    auto it = cells_.find(key(task, lang));
    if (it == cells_.end()) throw ValidationError("no synthetic fixture for " + task + "/" + lang.str());
    return it->second;
  }

  bool empty() const { return cells_.empty(); }
  const std::map<std::string, SyntheticCell>& cells() const { return cells_; }

 private:
  static std::string key(const std::string& task, const LangCode& lang) { return task + "|" + lang.str(); }
  std::map<std::string, SyntheticCell> cells_;
};

/// Resolves every (task, language) cell to a fixture id or an existing file; throws listing all
/// unresolved cells otherwise.
inline std::vector<Cell> resolve_cells(const SuiteManifest& m, const SuiteOptions& opt = {}) {
  const std::filesystem::path root(opt.data_root.empty() ? m.base_dir : opt.data_root);
  std::vector<Cell> cells;
  std::vector<std::string> unresolved;
  for (std::size_t t = 0; t < m.tasks.size(); ++t) {
    for (const auto& lang : m.tasks[t].languages) {
      std::string source = m.tasks[t].source_for(lang);
      if (!is_synthetic(source)) {
        std::filesystem::path p(source);
        if (p.is_relative()) p = root / p;
        source = p.string();
        if (!std::filesystem::is_regular_file(p)) {
          unresolved.push_back(m.tasks[t].name + "/" + lang.str() + " (" + source + ")");
          continue;
        }
      }
      cells.push_back({t, lang, source});
    }
  }
  if (!unresolved.empty()) {
    std::string msg = "unresolved cells:";
    for (const auto& u : unresolved) msg += "\n  " + u;
    throw RuntimeError(msg);
  }
  return cells;
}

inline LabeledDataset load_cell(const TaskSpec& task, const Cell& cell, const SyntheticSuite& synthetic) {
  if (is_synthetic(cell.source)) return synthetic.at(task.name, cell.lang).dataset;
  try {
    return parse_dataset(task.family, read_file(cell.source));
  } catch (const ValidationError& e) {
    throw ValidationError(cell.source + ": " + e.what());
  }
}

/// Evaluates every cell and records main scores x100. Cells fan out across threads only when
/// the encoder declares itself concurrent-safe.
inline ScoreTable run_suite(const SuiteManifest& m, EncoderPort& encoder, std::uint64_t seed,
                            const SuiteOptions& opt = {}) {
  const auto cells = resolve_cells(m, opt);
  const SyntheticSuite synthetic(m);
  auto eval = [&](const Cell& c) {
    const TaskSpec& task = m.tasks[c.task];
    const auto ds = load_cell(task, c, synthetic);
    const std::uint64_t cell_seed = seed ^ fnv1a(task.name + "|" + c.lang.str());
    return evaluate_dataset(ds, encoder, task.instruction, cell_seed).main_score;
  };
  std::vector<double> scores(cells.size());
  const int threads = encoder.concurrent_safe() ? std::max(1, opt.threads) : 1;
  if (threads == 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) scores[i] = eval(cells[i]);
  } else {
    for (std::size_t start = 0; start < cells.size(); start += static_cast<std::size_t>(threads)) {
      std::vector<std::future<double>> jobs;
      const std::size_t end = std::min(cells.size(), start + static_cast<std::size_t>(threads));
      for (std::size_t i = start; i < end; ++i) jobs.push_back(std::async(std::launch::async, eval, std::cref(cells[i])));
      for (std::size_t i = start; i < end; ++i) scores[i] = jobs[i - start].get();
    }
  }
  ScoreTable table;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const TaskSpec& task = m.tasks[cells[i].task];
    table.set(task.name, task.family, cells[i].lang.str(), 100.0 * scores[i]);
  }
  return table;
}

/// Lookup encoder whose vectors are built from the gold labels of every synthetic cell.
inline FileEncoder synthetic_oracle_encoder(const SuiteManifest& m) {
  FileEncoder enc;
  const SyntheticSuite suite(m);
  for (const auto& [key, cell] : suite.cells()) {
    for (const auto& [text, vec] : cell.oracle) enc.add_text(text, vec);
  }
  return enc;
}

// ---------------------------------------------------------------------------
// Reports

inline json to_json(const Summary& s) {
  json tasks = json::array();
  for (const auto& t : s.tasks) {
    tasks.push_back({{"name", t.name}, {"family", to_string(t.family)}, {"mean", t.mean}, {"languages", t.languages}});
  }
  json families = json::array();
  for (const auto& [f, v] : s.families) families.push_back({{"family", to_string(f)}, {"mean", v}});
  return {{"run", s.run}, {"mode", to_string(s.mode)}, {"overall", s.overall}, {"families", families}, {"tasks", tasks}};
}

inline Summary summary_from_json(const json& j) {
  try {
    Summary s;
    s.run = j.at("run").get<std::string>();
    auto mode = parse_aggregation(j.at("mode").get<std::string>());
    if (!mode) throw ValidationError("summary: unknown mode");
    s.mode = *mode;
    s.overall = j.at("overall").get<double>();
    for (const auto& f : j.at("families")) {
      auto fam = parse_family(f.at("family").get<std::string>());
      if (!fam) throw ValidationError("summary: unknown family");
      s.families.emplace_back(*fam, f.at("mean").get<double>());
    }
    for (const auto& t : j.at("tasks")) {
      auto fam = parse_family(t.at("family").get<std::string>());
      if (!fam) throw ValidationError("summary: unknown family");
      s.tasks.push_back({t.at("name").get<std::string>(), *fam, t.at("languages").get<std::map<std::string, double>>(),
                         t.at("mean").get<double>()});
    }
    return s;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("summary: ") + e.what());
  }
}

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

namespace detail {

inline std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& r : rows) width[c] = std::max(width[c], r[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out += " | ";
      const std::string pad(width[c] - cells[c].size(), ' ');
      out += c == 0 ? cells[c] + pad : pad + cells[c];
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  std::string out = line(header);
  std::string rule;
  for (std::size_t c = 0; c < header.size(); ++c) rule += (c ? "-|-" : "") + std::string(width[c], '-');
  out += rule + "\n";
  for (const auto& r : rows) out += line(r);
  return out;
}

}  // namespace detail

/// One row per run; columns are task means (task_macro) or family means (family_macro) followed
/// by Avg. Column order follows the first run.
inline std::string text_table(const std::vector<Summary>& runs, int decimals = 1) {
  if (runs.empty()) return "";
  const bool by_family = runs.front().mode == Aggregation::kFamilyMacro;
  std::vector<std::string> header = {"Model"};
  if (by_family) {
    for (const auto& [f, v] : runs.front().families) header.emplace_back(to_string(f));
  } else {
    for (const auto& t : runs.front().tasks) header.push_back(t.name);
  }
  header.emplace_back("Avg");
  std::vector<std::vector<std::string>> rows;
  for (const auto& s : runs) {
    std::vector<std::string> row = {s.run};
    for (std::size_t c = 1; c + 1 < header.size(); ++c) {
      std::optional<double> v;
      if (by_family) {
        for (const auto& [f, m] : s.families)
          if (to_string(f) == header[c]) v = m;
      } else {
        for (const auto& t : s.tasks)
          if (t.name == header[c]) v = t.mean;
      }
      row.push_back(v ? format_fixed(*v, decimals) : "--");
    }
    row.push_back(format_fixed(s.overall, decimals));
    rows.push_back(std::move(row));
  }
  return detail::render_table(header, rows);
}

/// Per-language breakdown of one task across runs, 2 decimals by default.
inline std::string language_table(const std::vector<Summary>& runs, const std::string& task, int decimals = 2) {
  std::set<std::string> langs;
  for (const auto& s : runs)
    for (const auto& t : s.tasks)
      if (t.name == task) for (const auto& [l, v] : t.languages) langs.insert(l);
  std::vector<std::string> header = {task};
  header.insert(header.end(), langs.begin(), langs.end());
  header.emplace_back("Avg");
  std::vector<std::vector<std::string>> rows;
  for (const auto& s : runs) {
    auto it = std::find_if(s.tasks.begin(), s.tasks.end(), [&](const TaskSummary& t) { return t.name == task; });
    if (it == s.tasks.end()) continue;
    std::vector<std::string> row = {s.run};
    for (const auto& l : langs) {
      auto v = it->languages.find(l);
      row.push_back(v == it->languages.end() ? "--" : format_fixed(v->second, decimals));
    }
    row.push_back(format_fixed(it->mean, decimals));
    rows.push_back(std::move(row));
  }
  return detail::render_table(header, rows);
}

// ---------------------------------------------------------------------------
// Published-table fixtures

inline std::string fixture_root() {
  if (const char* env = std::getenv("AFRIE5_FIXTURE_ROOT"); env && *env) return env;
  return AFRIE5_DEFAULT_FIXTURE_ROOT;
}

inline json load_fixture_json(const std::string& name) {
  const auto path = (std::filesystem::path(fixture_root()) / name).string();
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error&) {
    throw ValidationError(path + ": malformed JSON");
  }
}

struct FixtureRow {
  std::string model;
  std::vector<std::optional<double>> scores;  // nullopt for cells printed as "--"
  double average = 0.0;
};

struct ResultsFixture {
  std::vector<std::string> columns;
  Aggregation aggregation = Aggregation::kTaskMacro;
  std::vector<FixtureRow> rows;
};

namespace detail {

inline FixtureRow fixture_row(const json& r, const char* label) {
  FixtureRow row;
  row.model = r.value(label, "");
  for (const auto& v : r.at("scores")) row.scores.push_back(v.is_null() ? std::nullopt : std::optional(v.get<double>()));
  row.average = r.at("average").get<double>();
  return row;
}

}  // namespace detail

inline ResultsFixture load_results_fixture(const std::string& name) {
  const json j = load_fixture_json(name);
  ResultsFixture f;
  f.columns = j.at("columns").get<std::vector<std::string>>();
  f.aggregation = parse_aggregation(j.at("aggregation").get<std::string>()).value();
  for (const auto& r : j.at("rows")) {
    f.rows.push_back(detail::fixture_row(r, "model"));
    if (f.rows.back().scores.size() != f.columns.size()) throw ValidationError(name + ": row width mismatch");
  }
  return f;
}

struct PerLanguageFixture {
  std::vector<std::string> languages;
  std::vector<std::pair<std::string, std::vector<FixtureRow>>> tasks;
};

inline PerLanguageFixture load_per_language_fixture(const std::string& name = "per_language.json") {
  const json j = load_fixture_json(name);
  PerLanguageFixture f;
  f.languages = j.at("languages").get<std::vector<std::string>>();
  for (const auto& t : j.at("tasks")) {
    std::vector<FixtureRow> rows;
    for (const auto& r : t.at("rows")) rows.push_back(detail::fixture_row(r, "model"));
    f.tasks.emplace_back(t.at("task").get<std::string>(), std::move(rows));
  }
  return f;
}

struct RetentionRow {
  std::string language;
  std::string code;
  std::vector<long> counts;
};

struct RetentionFixture {
  std::vector<double> thresholds;
  std::vector<RetentionRow> rows;
  std::vector<long> total;
};

inline RetentionFixture load_retention_fixture(const std::string& name = "qe_retention.json") {
  const json j = load_fixture_json(name);
  RetentionFixture f;
  f.thresholds = j.at("thresholds").get<std::vector<double>>();
  for (const auto& r : j.at("rows")) {
    f.rows.push_back({r.at("language").get<std::string>(), r.at("code").get<std::string>(),
                      r.at("counts").get<std::vector<long>>()});
  }
  f.total = j.at("total").get<std::vector<long>>();
  return f;
}

struct AblationRow {
  bool expansion = true;
  double qe_threshold = 0.0;
  std::vector<double> scores;
  double average = 0.0;
};

inline std::vector<AblationRow> load_ablation_fixture(const std::string& name = "ablation.json") {
  const json j = load_fixture_json(name);
  std::vector<AblationRow> rows;
  for (const auto& r : j.at("rows")) {
    rows.push_back({r.at("expansion").get<bool>(), r.at("qe_threshold").get<double>(),
                    r.at("scores").get<std::vector<double>>(), r.at("average").get<double>()});
  }
  return rows;
}

/// Aggregates one published row: each column becomes a single pre-averaged cell. Missing cells
/// are skipped.
inline Summary summarize_fixture_row(const std::vector<std::string>& columns, const std::vector<Family>& families,
                                     const FixtureRow& row, Aggregation mode) {
  std::vector<std::string> names;
  std::vector<Family> fams;
  std::vector<double> vals;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (!row.scores[i]) continue;
    names.push_back(columns[i]);
    fams.push_back(families[i]);
    vals.push_back(*row.scores[i]);
  }
  return aggregate(table_from_means(names, fams, vals), mode, row.model);
}

}  // namespace afrie5
