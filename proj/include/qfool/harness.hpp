#ifndef QFOOL_HARNESS_HPP
#define QFOOL_HARNESS_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qfool/config.hpp"
#include "qfool/core.hpp"
#include "qfool/ledger.hpp"
#include "qfool/oracle.hpp"
#include "qfool/trace.hpp"

namespace qfool {

// Attack names understood by RunNamedAttack.
//   qfool                      non-targeted, full space unless subspace_side is set
//   qfool-subspace             non-targeted, DCT subspace (default side if unset)
//   qfool-targeted             targeted, needs an anchor
//   qfool-targeted-subspace    targeted in the DCT subspace
//   boundary                   Boundary-attack baseline, non-targeted
//   boundary-targeted          Boundary-attack baseline from the anchor
//   gaussian                   Gaussian-noise baseline
const std::vector<std::string>& AttackNames();
bool AttackNeedsAnchor(const std::string& name);

// Runs one attack. A missing starting point yields an unsuccessful trace
// instead of an exception.
AttackTrace RunNamedAttack(const std::string& name, const DecisionOracle& oracle, const Point& x0,
                           const std::optional<Point>& anchor, const AttackConfig& config,
                           QueryLedger& ledger);

// ---------------------------------------------------------------------------
// Dataset: a directory holding manifest.json
//
//   {"shape": [h, w, c], "box": [lo, hi],
//    "items": [{"id": "img0", "file": "img0.f32", "label": 3, "anchor": "t0.f32"}, ...]}
//
// Files are headerless little-endian f32 (or point files with a header).
// "box", "label" and "anchor" are optional.

struct DatasetItem {
  std::string id;
  Point point;
  std::optional<int> label;
  std::optional<Point> anchor;
};

struct Dataset {
  Shape shape;
  Box box;
  std::vector<DatasetItem> items;
};

Dataset LoadDataset(const std::string& directory);
void WriteDataset(const std::string& directory, const Dataset& dataset);

// ---------------------------------------------------------------------------
// Experiment spec (JSON). Relative paths are resolved against the spec file.
//
//   {"oracle": "mlp:weights.bin",
//    "dataset": "data",
//    "attacks": [{"name": "qfool", "label": "qfool", "config": {"unit_batch": 100}}],
//    "budgets": [500, 1000, 2000],
//    "seeds": [0, 1, 2],
//    "output": "results",
//    "workers": 4,
//    "sweep_sides": [2, 4, 8]}
//
// A single "attack" (string) plus "config" (object) may replace "attacks".
// "label" defaults to the name and keys records and summary rows.

struct AttackEntry {
  std::string name;
  std::string label;
  AttackConfig config;
};

struct ExperimentSpec {
  std::string oracle;
  std::string dataset;
  std::vector<AttackEntry> attacks;
  std::vector<std::int64_t> budgets;
  std::vector<std::uint64_t> seeds;
  std::string output;
  std::optional<int> workers;
  std::vector<int> sweep_sides;
};

// Throws FormatError listing every problem found (one per line).
ExperimentSpec ParseExperimentSpec(const nlohmann::json& json, const std::string& base_dir = ".");
ExperimentSpec LoadExperimentSpec(const std::string& path);
// Every problem with referenced files and values; empty when the spec is runnable.
std::vector<std::string> ValidateExperimentSpec(const ExperimentSpec& spec);

struct Cell {
  std::string image_id;
  std::size_t image_index = 0;
  std::uint64_t seed = 0;
  std::size_t attack_index = 0;
  std::string attack;  // label
  std::int64_t budget = 0;

  std::string Key() const;
};

std::vector<Cell> PlanCells(const ExperimentSpec& spec, const Dataset& dataset);

struct IterationSummary {
  std::int64_t estimation_queries = 0;
  std::int64_t queries = 0;
  double perturbation_norm = 0.0;
};

struct RunRecord {
  std::string image_id;
  std::uint64_t seed = 0;
  std::string attack;
  std::int64_t budget = 0;
  bool success = false;
  std::string failure;
  int original_label = 0;
  std::optional<int> target_label;
  int final_label = 0;
  double final_mse = 0.0;  // +inf when unsuccessful
  double final_norm = 0.0;
  std::int64_t total_queries = 0;
  std::map<std::string, std::int64_t> queries_by_phase;
  std::vector<CurvePoint> curve;
  std::optional<std::int64_t> queries_to_threshold;
  std::optional<double> parallelism_cosine;
  std::vector<IterationSummary> iterations;
  double wall_seconds = 0.0;

  std::string Key() const;
  nlohmann::json ToJson() const;
  static RunRecord FromJson(const nlohmann::json& json);
};

// Best-so-far MSE at up to `max_points` log-spaced query counts in
// [1, budget], plus the exact final value.
std::vector<CurvePoint> DownsampleCurve(const std::vector<CurvePoint>& curve,
                                        std::int64_t budget, std::int64_t total_queries,
                                        double final_mse, std::size_t max_points = 128);

RunRecord MakeRunRecord(const Cell& cell, const AttackTrace& trace, double wall_seconds);

struct SummaryRow {
  std::string attack;
  std::int64_t budget = 0;
  double median_mse = 0.0;
  double success_rate = 0.0;
  double median_queries_to_tau = 0.0;  // +inf when fewer than half the runs reach tau
  std::size_t runs = 0;
};

// One row per (attack, budget); unsuccessful runs count as +inf MSE.
std::vector<SummaryRow> Summarize(const std::vector<RunRecord>& records);
void WriteSummaryCsv(std::ostream& out, const std::vector<SummaryRow>& rows);

struct RunOptions {
  bool force = false;  // re-run cells already present in the record file
  std::optional<int> workers;
  std::ostream* progress = nullptr;
};

// Runs every planned cell not yet recorded, appending each record to
// <output>/records.ndjson as it completes, then writes <output>/summary.csv.
// Returns the records of all planned cells in plan order.
std::vector<RunRecord> RunExperiment(const ExperimentSpec& spec, const RunOptions& options = {});

struct SweepRow {
  int side = 0;
  std::int64_t budget = 0;
  double median_norm = 0.0;
  double median_mse = 0.0;
};

// Runs the spec's first non-targeted qfool attack in the subspace of each
// side (labels "qfool-subspace-s<side>") and tabulates median final l2.
std::vector<SweepRow> SubspaceSweep(const ExperimentSpec& spec, const std::vector<int>& sides,
                                    const RunOptions& options = {});
void WriteSweepCsv(std::ostream& out, const std::vector<SweepRow>& rows);

// Worker count: explicit value, else QFOOL_WORKERS, else hardware threads.
int ResolveWorkerCount(std::optional<int> requested);

std::vector<RunRecord> ReadRecords(const std::string& path);

}  // namespace qfool

#endif  // QFOOL_HARNESS_HPP
