#include "qfool/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "qfool/attack_nontargeted.hpp"
#include "qfool/attack_targeted.hpp"
#include "qfool/baseline.hpp"
#include "qfool/io.hpp"

namespace qfool {

namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

nlohmann::json FiniteOrNull(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double NumberOrInf(const nlohmann::json& j) { return j.is_null() ? kInf : j.get<double>(); }

std::string ResolvePath(const std::string& path, const std::string& base_dir) {
  if (path.empty()) return path;
  const fs::path p(path);
  return p.is_absolute() ? p.string() : (fs::path(base_dir) / p).lexically_normal().string();
}

std::string JsonToConfigText(const nlohmann::json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_boolean()) return value.get<bool>() ? "true" : "false";
  return value.dump();
}

}  // namespace

// ---------------------------------------------------------------------------
// Attack dispatch

const std::vector<std::string>& AttackNames() {
  static const std::vector<std::string> names = {
      "qfool", "qfool-subspace", "qfool-targeted", "qfool-targeted-subspace",
      "boundary", "boundary-targeted", "gaussian"};
  return names;
}

bool AttackNeedsAnchor(const std::string& name) {
  return name == "qfool-targeted" || name == "qfool-targeted-subspace" ||
         name == "boundary-targeted";
}

AttackTrace RunNamedAttack(const std::string& name, const DecisionOracle& oracle, const Point& x0,
                           const std::optional<Point>& anchor, const AttackConfig& config,
                           QueryLedger& ledger) {
  const auto names = AttackNames();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    throw ContractViolation("unknown attack '" + name + "'");
  }
  if (AttackNeedsAnchor(name) && !anchor) {
    throw ContractViolation("attack '" + name + "' needs a target anchor");
  }
  AttackConfig cfg = config;
  if (name.ends_with("-subspace") && !cfg.subspace_side) {
    cfg.subspace_side = DefaultSubspaceSide(x0.shape());
  }
  const std::int64_t before = ledger.used();
  try {
    if (name == "qfool" || name == "qfool-subspace") return RunQFool(oracle, x0, cfg, ledger);
    if (name == "qfool-targeted" || name == "qfool-targeted-subspace") {
      return RunTargetedQFool(oracle, x0, *anchor, cfg, ledger);
    }
    if (name == "boundary") return RunBoundaryAttack(oracle, x0, cfg, ledger);
    if (name == "boundary-targeted") return RunBoundaryAttack(oracle, x0, cfg, ledger, anchor);
    return RunGaussianNoiseAttack(oracle, x0, cfg, ledger);
  } catch (const InitialPointNotFound& e) {
    AttackTrace trace;
    trace.attack = name;
    trace.original = x0;
    trace.final_point = x0;
    trace.anchor = AttackNeedsAnchor(name) ? anchor : std::nullopt;
    trace.success = false;
    trace.failure = std::string("initial point not found: ") + e.what();
    trace.total_queries = ledger.used() - before;
    return trace;
  }
}

// ---------------------------------------------------------------------------
// Dataset

Dataset LoadDataset(const std::string& directory) {
  const fs::path manifest_path = fs::path(directory) / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw FormatError("cannot open dataset manifest " + manifest_path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  Dataset dataset;
  try {
    const auto& shape = manifest.at("shape");
    dataset.shape = {shape.at(0).get<int>(), shape.at(1).get<int>(), shape.at(2).get<int>()};
    if (manifest.contains("box")) {
      dataset.box = {manifest["box"].at(0).get<double>(), manifest["box"].at(1).get<double>()};
    }
    if (dataset.shape.height < 1 || dataset.shape.width < 1 || dataset.shape.channels < 1) {
      throw FormatError(manifest_path.string() + ": shape entries must be positive");
    }
    for (const auto& item : manifest.at("items")) {
      DatasetItem entry;
      entry.id = item.at("id").get<std::string>();
      const std::string file = (fs::path(directory) / item.at("file").get<std::string>()).string();
      entry.point = ReadPointFile(file, dataset.shape, dataset.box);
      if (item.contains("label") && !item["label"].is_null()) entry.label = item["label"].get<int>();
      if (item.contains("anchor") && !item["anchor"].is_null()) {
        const std::string anchor =
            (fs::path(directory) / item["anchor"].get<std::string>()).string();
        entry.anchor = ReadPointFile(anchor, dataset.shape, dataset.box);
      }
      dataset.items.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  if (dataset.items.empty()) throw FormatError(manifest_path.string() + ": no items");
  return dataset;
}

void WriteDataset(const std::string& directory, const Dataset& dataset) {
  fs::create_directories(directory);
  nlohmann::json items = nlohmann::json::array();
  for (const auto& item : dataset.items) {
    nlohmann::json entry = {{"id", item.id}, {"file", item.id + ".f32"}};
    WriteRawF32((fs::path(directory) / (item.id + ".f32")).string(), item.point.values());
    if (item.label) entry["label"] = *item.label;
    if (item.anchor) {
      entry["anchor"] = item.id + ".anchor.f32";
      WriteRawF32((fs::path(directory) / (item.id + ".anchor.f32")).string(),
                  item.anchor->values());
    }
    items.push_back(entry);
  }
  const nlohmann::json manifest = {
      {"shape", {dataset.shape.height, dataset.shape.width, dataset.shape.channels}},
      {"box", {dataset.box.lo, dataset.box.hi}},
      {"items", items}};
  std::ofstream out(fs::path(directory) / "manifest.json");
  if (!out) throw FormatError("cannot write manifest in " + directory);
  out << manifest.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Spec

ExperimentSpec ParseExperimentSpec(const nlohmann::json& json, const std::string& base_dir) {
  std::vector<std::string> errors;
  ExperimentSpec spec;
  if (!json.is_object()) throw FormatError("experiment spec must be a JSON object");

  const auto get_string = [&](const char* key, std::string& out) {
    if (!json.contains(key)) {
      errors.push_back(std::string("missing \"") + key + "\"");
    } else if (!json[key].is_string()) {
      errors.push_back(std::string("\"") + key + "\" must be a string");
    } else {
      out = json[key].get<std::string>();
    }
  };
  get_string("oracle", spec.oracle);
  get_string("dataset", spec.dataset);
  get_string("output", spec.output);
  spec.dataset = ResolvePath(spec.dataset, base_dir);
  spec.output = ResolvePath(spec.output, base_dir);
  // File-backed oracle specs carry a path that is relative to the spec too.
  for (const char* kind : {"affine:", "mlp:"}) {
    if (spec.oracle.rfind(kind, 0) == 0) {
      const std::string prefix(kind);
      spec.oracle = prefix + ResolvePath(spec.oracle.substr(prefix.size()), base_dir);
    }
  }

  const auto parse_entry = [&](const nlohmann::json& name, const nlohmann::json* label,
                               const nlohmann::json* config, const std::string& where) {
    AttackEntry entry;
    if (!name.is_string()) {
      errors.push_back(where + ": attack name must be a string");
      return;
    }
    entry.name = name.get<std::string>();
    const auto& names = AttackNames();
    if (std::find(names.begin(), names.end(), entry.name) == names.end()) {
      errors.push_back(where + ": unknown attack '" + entry.name + "'");
    }
    entry.label = (label && label->is_string()) ? label->get<std::string>() : entry.name;
    if (config) {
      if (!config->is_object()) {
        errors.push_back(where + ": config must be an object");
      } else {
        for (const auto& [key, value] : config->items()) {
          try {
            SetConfigValue(entry.config, key, JsonToConfigText(value));
          } catch (const FormatError& e) {
            errors.push_back(where + ": " + e.what());
          }
        }
      }
    }
    spec.attacks.push_back(std::move(entry));
  };
  if (json.contains("attacks")) {
    if (!json["attacks"].is_array() || json["attacks"].empty()) {
      errors.push_back("\"attacks\" must be a non-empty array");
    } else {
      for (std::size_t i = 0; i < json["attacks"].size(); ++i) {
        const auto& a = json["attacks"][i];
        const std::string where = "attacks[" + std::to_string(i) + "]";
        if (!a.is_object() || !a.contains("name")) {
          errors.push_back(where + ": needs a \"name\"");
          continue;
        }
        parse_entry(a["name"], a.contains("label") ? &a["label"] : nullptr,
                    a.contains("config") ? &a["config"] : nullptr, where);
      }
    }
  } else if (json.contains("attack")) {
    parse_entry(json["attack"], nullptr, json.contains("config") ? &json["config"] : nullptr,
                "attack");
  } else {
    errors.push_back("missing \"attacks\" (or \"attack\")");
  }

  if (!json.contains("budgets") || !json["budgets"].is_array() || json["budgets"].empty()) {
    errors.push_back("\"budgets\" must be a non-empty array of integers");
  } else {
    for (const auto& b : json["budgets"]) {
      if (!b.is_number_integer() || b.get<std::int64_t>() < 0) {
        errors.push_back("budget " + b.dump() + " is not a non-negative integer");
      } else {
        spec.budgets.push_back(b.get<std::int64_t>());
      }
    }
  }
  if (!json.contains("seeds")) {
    spec.seeds = {0};
  } else if (!json["seeds"].is_array() || json["seeds"].empty()) {
    errors.push_back("\"seeds\" must be a non-empty array of integers");
  } else {
    for (const auto& s : json["seeds"]) {
      if (!s.is_number_unsigned()) {
        errors.push_back("seed " + s.dump() + " is not a non-negative integer");
      } else {
        spec.seeds.push_back(s.get<std::uint64_t>());
      }
    }
  }
  if (json.contains("workers")) {
    if (!json["workers"].is_number_integer() || json["workers"].get<int>() < 1) {
      errors.push_back("\"workers\" must be a positive integer");
    } else {
      spec.workers = json["workers"].get<int>();
    }
  }
  if (json.contains("sweep_sides")) {
    if (!json["sweep_sides"].is_array()) {
      errors.push_back("\"sweep_sides\" must be an array of integers");
    } else {
      for (const auto& s : json["sweep_sides"]) {
        if (!s.is_number_integer() || s.get<int>() < 1) {
          errors.push_back("sweep side " + s.dump() + " is not a positive integer");
        } else {
          spec.sweep_sides.push_back(s.get<int>());
        }
      }
    }
  }

  std::set<std::string> labels;
  for (const auto& a : spec.attacks) {
    if (!labels.insert(a.label).second) errors.push_back("duplicate attack label '" + a.label + "'");
  }

  if (!errors.empty()) {
    std::string message = "invalid experiment spec:";
    for (const auto& e : errors) message += "\n  " + e;
    throw FormatError(message);
  }
  return spec;
}

ExperimentSpec LoadExperimentSpec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open experiment spec " + path);
  nlohmann::json json;
  try {
    json = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  return ParseExperimentSpec(json, fs::absolute(path).parent_path().lexically_normal().string());
}

std::vector<std::string> ValidateExperimentSpec(const ExperimentSpec& spec) {
  std::vector<std::string> errors;
  std::optional<Dataset> dataset;
  if (!fs::is_directory(spec.dataset)) {
    errors.push_back("dataset directory not found: " + spec.dataset);
  } else {
    try {
      dataset = LoadDataset(spec.dataset);
    } catch (const Error& e) {
      errors.push_back(std::string("dataset: ") + e.what());
    }
  }
  const auto colon = spec.oracle.find(':');
  const std::string kind = spec.oracle.substr(0, colon);
  bool check_oracle = true;
  if (kind == "affine" || kind == "mlp") {
    const std::string file = spec.oracle.substr(colon + 1);
    if (!fs::exists(file)) {
      errors.push_back("oracle file not found: " + file);
      check_oracle = false;
    }
  } else if (kind == "http" || kind == "https") {
    check_oracle = false;  // never contacted during validation
  } else if (kind != "sphere") {
    errors.push_back("unknown oracle kind in '" + spec.oracle + "'");
    check_oracle = false;
  }
  if (dataset && check_oracle) {
    try {
      MakeOracle(spec.oracle, dataset->shape.size());
    } catch (const Error& e) {
      errors.push_back(std::string("oracle: ") + e.what());
    }
  }
  if (dataset) {
    for (const auto& attack : spec.attacks) {
      if (AttackNeedsAnchor(attack.name)) {
        for (const auto& item : dataset->items) {
          if (!item.anchor) {
            errors.push_back("attack '" + attack.label + "' needs an anchor but item '" +
                             item.id + "' has none");
          }
        }
      }
      const int limit = std::min(dataset->shape.height, dataset->shape.width);
      if (attack.config.subspace_side && *attack.config.subspace_side > limit) {
        errors.push_back("attack '" + attack.label + "': subspace_side " +
                         std::to_string(*attack.config.subspace_side) + " exceeds " +
                         std::to_string(limit));
      }
    }
    for (int side : spec.sweep_sides) {
      if (side > std::min(dataset->shape.height, dataset->shape.width)) {
        errors.push_back("sweep side " + std::to_string(side) + " exceeds min(h, w) of " +
                         dataset->shape.ToString());
      }
    }
  }
  for (const auto& attack : spec.attacks) {
    try {
      AttackConfig probe = attack.config;
      probe.unit_batch.reset();
      probe.Validate();
    } catch (const ContractViolation& e) {
      errors.push_back("attack '" + attack.label + "': " + e.what());
    }
  }
  return errors;
}

// ---------------------------------------------------------------------------
// Cells and records

std::string Cell::Key() const {
  return image_id + "|" + std::to_string(seed) + "|" + attack + "|" + std::to_string(budget);
}

std::vector<Cell> PlanCells(const ExperimentSpec& spec, const Dataset& dataset) {
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < dataset.items.size(); ++i) {
    for (std::uint64_t seed : spec.seeds) {
      for (std::size_t a = 0; a < spec.attacks.size(); ++a) {
        for (std::int64_t budget : spec.budgets) {
          cells.push_back({dataset.items[i].id, i, seed, a, spec.attacks[a].label, budget});
        }
      }
    }
  }
  return cells;
}

std::string RunRecord::Key() const {
  return image_id + "|" + std::to_string(seed) + "|" + attack + "|" + std::to_string(budget);
}

nlohmann::json RunRecord::ToJson() const {
  nlohmann::json curve_json = nlohmann::json::array();
  for (const auto& c : curve) curve_json.push_back({c.query, c.mse});
  nlohmann::json iterations_json = nlohmann::json::array();
  for (const auto& it : iterations) {
    iterations_json.push_back({{"estimation_queries", it.estimation_queries},
                               {"queries", it.queries},
                               {"perturbation_norm", it.perturbation_norm}});
  }
  nlohmann::json j = {{"image_id", image_id},
                      {"seed", seed},
                      {"attack", attack},
                      {"budget", budget},
                      {"success", success},
                      {"original_label", original_label},
                      {"final_label", final_label},
                      {"final_mse", FiniteOrNull(final_mse)},
                      {"final_norm", FiniteOrNull(final_norm)},
                      {"total_queries", total_queries},
                      {"queries_by_phase", queries_by_phase},
                      {"curve", curve_json},
                      {"iterations", iterations_json},
                      {"wall_seconds", wall_seconds}};
  if (!failure.empty()) j["failure"] = failure;
  if (target_label) j["target_label"] = *target_label;
  if (queries_to_threshold) j["queries_to_threshold"] = *queries_to_threshold;
  if (parallelism_cosine) j["parallelism_cosine"] = *parallelism_cosine;
  return j;
}

RunRecord RunRecord::FromJson(const nlohmann::json& j) {
  RunRecord r;
  r.image_id = j.at("image_id").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.attack = j.at("attack").get<std::string>();
  r.budget = j.at("budget").get<std::int64_t>();
  r.success = j.at("success").get<bool>();
  r.failure = j.value("failure", "");
  r.original_label = j.at("original_label").get<int>();
  if (j.contains("target_label")) r.target_label = j["target_label"].get<int>();
  r.final_label = j.at("final_label").get<int>();
  r.final_mse = NumberOrInf(j.at("final_mse"));
  r.final_norm = NumberOrInf(j.at("final_norm"));
  r.total_queries = j.at("total_queries").get<std::int64_t>();
  r.queries_by_phase = j.at("queries_by_phase").get<std::map<std::string, std::int64_t>>();
  for (const auto& c : j.at("curve")) {
    r.curve.push_back({c.at(0).get<std::int64_t>(), c.at(1).get<double>()});
  }
  if (j.contains("queries_to_threshold")) {
    r.queries_to_threshold = j["queries_to_threshold"].get<std::int64_t>();
  }
  if (j.contains("parallelism_cosine")) r.parallelism_cosine = j["parallelism_cosine"].get<double>();
  for (const auto& it : j.at("iterations")) {
    r.iterations.push_back({it.at("estimation_queries").get<std::int64_t>(),
                            it.at("queries").get<std::int64_t>(),
                            it.at("perturbation_norm").get<double>()});
  }
  r.wall_seconds = j.value("wall_seconds", 0.0);
  return r;
}

std::vector<CurvePoint> DownsampleCurve(const std::vector<CurvePoint>& curve,
                                        std::int64_t budget, std::int64_t total_queries,
                                        double final_mse, std::size_t max_points) {
  std::vector<CurvePoint> out;
  if (curve.empty() || !std::isfinite(final_mse) || max_points < 2) {
    if (!curve.empty() && std::isfinite(final_mse)) out.push_back({total_queries, final_mse});
    return out;
  }
  const std::int64_t top = std::max<std::int64_t>(budget, 1);
  const std::size_t grid_points = max_points - 1;
  std::vector<std::int64_t> grid;
  for (std::size_t j = 0; j < grid_points; ++j) {
    const double t = grid_points == 1 ? 1.0 : static_cast<double>(j) / (grid_points - 1);
    const auto g = static_cast<std::int64_t>(std::llround(std::pow(static_cast<double>(top), t)));
    if (grid.empty() || g > grid.back()) grid.push_back(g);
  }
  std::size_t next = 0;
  double best = kInf;
  for (std::int64_t g : grid) {
    if (g >= total_queries) break;
    while (next < curve.size() && curve[next].query <= g) best = std::min(best, curve[next++].mse);
    if (std::isfinite(best)) out.push_back({g, best});
  }
  out.push_back({total_queries, final_mse});
  return out;
}

RunRecord MakeRunRecord(const Cell& cell, const AttackTrace& trace, double wall_seconds) {
  RunRecord r;
  r.image_id = cell.image_id;
  r.seed = cell.seed;
  r.attack = cell.attack;
  r.budget = cell.budget;
  r.success = trace.success;
  r.failure = trace.failure;
  r.original_label = trace.original_label.id;
  if (trace.target_label) r.target_label = trace.target_label->id;
  r.final_label = trace.final_label.id;
  r.final_mse = trace.success ? trace.final_mse() : kInf;
  r.final_norm = trace.success ? trace.final_norm() : kInf;
  r.total_queries = trace.total_queries;
  r.queries_by_phase = trace.queries_by_phase;
  r.curve = DownsampleCurve(trace.curve, cell.budget, trace.total_queries, r.final_mse);
  r.queries_to_threshold = trace.queries_to_threshold;
  r.parallelism_cosine = trace.parallelism_cosine;
  for (const auto& it : trace.iterations) {
    r.iterations.push_back({it.estimation_queries, it.queries, it.perturbation_norm});
  }
  r.wall_seconds = wall_seconds;
  return r;
}

std::vector<SummaryRow> Summarize(const std::vector<RunRecord>& records) {
  std::map<std::pair<std::string, std::int64_t>, std::vector<const RunRecord*>> groups;
  std::vector<std::pair<std::string, std::int64_t>> order;
  for (const auto& r : records) {
    auto key = std::make_pair(r.attack, r.budget);
    if (!groups.contains(key)) order.push_back(key);
    groups[key].push_back(&r);
  }
  std::vector<SummaryRow> rows;
  for (const auto& key : order) {
    const auto& group = groups[key];
    std::vector<double> mse;
    std::vector<double> to_tau;
    std::size_t successes = 0;
    for (const auto* r : group) {
      mse.push_back(r->success ? r->final_mse : kInf);
      to_tau.push_back(r->queries_to_threshold ? static_cast<double>(*r->queries_to_threshold)
                                               : kInf);
      successes += r->success ? 1 : 0;
    }
    SummaryRow row;
    row.attack = key.first;
    row.budget = key.second;
    row.median_mse = Median(mse);
    row.success_rate = static_cast<double>(successes) / static_cast<double>(group.size());
    row.median_queries_to_tau = Median(to_tau);
    row.runs = group.size();
    rows.push_back(row);
  }
  return rows;
}

namespace {

std::string CsvNumber(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream out;
  out.precision(10);
  out << v;
  return out.str();
}

}  // namespace

void WriteSummaryCsv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "attack,budget,median_mse,success_rate,median_queries_to_tau\n";
  for (const auto& r : rows) {
    out << r.attack << ',' << r.budget << ',' << CsvNumber(r.median_mse) << ','
        << CsvNumber(r.success_rate) << ',' << CsvNumber(r.median_queries_to_tau) << '\n';
  }
}

int ResolveWorkerCount(std::optional<int> requested) {
  if (requested && *requested >= 1) return *requested;
  if (const char* env = std::getenv("QFOOL_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::vector<RunRecord> ReadRecords(const std::string& path) {
  std::vector<RunRecord> records;
  std::ifstream in(path);
  if (!in) return records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto json = nlohmann::json::parse(line, nullptr, false);
    // A torn line from an interrupted run is skipped; its cell is re-run.
    if (json.is_discarded()) continue;
    try {
      records.push_back(RunRecord::FromJson(json));
    } catch (const nlohmann::json::exception&) {
      continue;
    }
  }
  return records;
}

// ---------------------------------------------------------------------------
// Runner

std::vector<RunRecord> RunExperiment(const ExperimentSpec& spec, const RunOptions& options) {
  const auto errors = ValidateExperimentSpec(spec);
  if (!errors.empty()) {
    std::string message = "experiment spec is not runnable:";
    for (const auto& e : errors) message += "\n  " + e;
    throw FormatError(message);
  }
  const Dataset dataset = LoadDataset(spec.dataset);
  const auto oracle = MakeOracle(spec.oracle, dataset.shape.size());
  const auto cells = PlanCells(spec, dataset);

  fs::create_directories(spec.output);
  const std::string records_path = (fs::path(spec.output) / "records.ndjson").string();
  std::map<std::string, RunRecord> done;
  if (!options.force) {
    for (auto& r : ReadRecords(records_path)) done[r.Key()] = std::move(r);
  }

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!done.contains(cells[i].Key())) todo.push_back(i);
  }

  // Terminate a torn last line so the next record starts on its own line.
  bool torn_tail = false;
  if (std::ifstream existing{records_path, std::ios::binary}; existing) {
    char last = '\n';
    if (existing.seekg(-1, std::ios::end)) existing.get(last);
    torn_tail = last != '\n';
  }
  std::ofstream appender(records_path, std::ios::app);
  if (!appender) throw FormatError("cannot append to " + records_path);
  if (torn_tail) appender << '\n';
  std::mutex append_mu;
  std::vector<std::optional<RunRecord>> fresh(cells.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> finished{0};

  const auto worker = [&] {
    while (true) {
      const std::size_t slot = next.fetch_add(1);
      if (slot >= todo.size()) return;
      const Cell& cell = cells[todo[slot]];
      const auto& entry = spec.attacks[cell.attack_index];
      const auto& item = dataset.items[cell.image_index];
      AttackConfig config = entry.config;
      config.total_budget = cell.budget;
      config.rng_seed = cell.seed;
      if (config.unit_batch && *config.unit_batch > std::max<std::int64_t>(cell.budget, 1)) {
        config.unit_batch = std::max<std::int64_t>(cell.budget, 1);
      }
      QueryLedger ledger;
      const auto start = std::chrono::steady_clock::now();
      RunRecord record;
      try {
        const AttackTrace trace =
            RunNamedAttack(entry.name, *oracle, item.point, item.anchor, config, ledger);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        record = MakeRunRecord(cell, trace, secs);
      } catch (const std::exception& e) {
        AttackTrace failed;
        failed.failure = std::string("error: ") + e.what();
        failed.total_queries = ledger.used();
        record = MakeRunRecord(cell, failed, 0.0);
      }
      {
        std::lock_guard<std::mutex> lock(append_mu);
        appender << record.ToJson().dump() << '\n';
        appender.flush();
        const std::size_t n = ++finished;
        if (options.progress) {
          *options.progress << "[" << n << "/" << todo.size() << "] " << cell.Key()
                            << (record.success ? "" : " (unsuccessful)") << '\n';
        }
      }
      fresh[todo[slot]] = std::move(record);
    }
  };

  const int workers = std::min<int>(ResolveWorkerCount(options.workers ? options.workers
                                                                       : spec.workers),
                                    static_cast<int>(std::max<std::size_t>(todo.size(), 1)));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<RunRecord> records;
  records.reserve(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    records.push_back(fresh[i] ? std::move(*fresh[i]) : done.at(cells[i].Key()));
  }
  std::ofstream summary(fs::path(spec.output) / "summary.csv", std::ios::trunc);
  if (!summary) throw FormatError("cannot write summary in " + spec.output);
  WriteSummaryCsv(summary, Summarize(records));
  return records;
}

std::vector<SweepRow> SubspaceSweep(const ExperimentSpec& spec, const std::vector<int>& sides,
                                    const RunOptions& options) {
  if (sides.empty()) throw ContractViolation("subspace sweep needs at least one side");
  const Dataset dataset = LoadDataset(spec.dataset);
  const int limit = std::min(dataset.shape.height, dataset.shape.width);
  for (int side : sides) {
    if (side < 1 || side > limit) {
      throw ContractViolation("sweep side " + std::to_string(side) + " outside [1, " +
                              std::to_string(limit) + "]");
    }
  }
  AttackConfig base;
  for (const auto& a : spec.attacks) {
    if (a.name == "qfool" || a.name == "qfool-subspace") {
      base = a.config;
      break;
    }
  }
  ExperimentSpec sweep = spec;
  sweep.attacks.clear();
  for (int side : sides) {
    AttackEntry entry{"qfool-subspace", "qfool-subspace-s" + std::to_string(side), base};
    entry.config.subspace_side = side;
    sweep.attacks.push_back(std::move(entry));
  }
  sweep.sweep_sides.clear();
  const auto records = RunExperiment(sweep, options);

  std::vector<SweepRow> rows;
  for (int side : sides) {
    const std::string label = "qfool-subspace-s" + std::to_string(side);
    for (std::int64_t budget : spec.budgets) {
      std::vector<double> norms;
      std::vector<double> mses;
      for (const auto& r : records) {
        if (r.attack == label && r.budget == budget) {
          norms.push_back(r.success ? r.final_norm : kInf);
          mses.push_back(r.success ? r.final_mse : kInf);
        }
      }
      rows.push_back({side, budget, Median(norms), Median(mses)});
    }
  }
  return rows;
}

void WriteSweepCsv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "side,budget,median_norm,median_mse\n";
  for (const auto& r : rows) {
    out << r.side << ',' << r.budget << ',' << CsvNumber(r.median_norm) << ','
        << CsvNumber(r.median_mse) << '\n';
  }
}

}  // namespace qfool
