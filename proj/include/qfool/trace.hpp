#ifndef QFOOL_TRACE_HPP
#define QFOOL_TRACE_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qfool/core.hpp"

namespace qfool {

// One outer iteration of an attack.
struct IterationRecord {
  Point start;                // boundary point the gradient was estimated at
  Vector direction;           // last estimate of the iteration; empty if none succeeded
  Point adversarial;          // candidate kept at the end of the iteration
  double perturbation_norm = 0.0;
  std::int64_t estimation_queries = 0;  // n^(i)
  std::int64_t queries = 0;             // everything spent in the iteration
  double noise_norm = 0.0;              // omega when the iteration ended
  double positive_fraction = 0.0;       // of the last probe batch
};

struct CurvePoint {
  std::int64_t query = 0;
  double mse = 0.0;
  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct AttackTrace {
  std::string attack;
  Point original;
  Label original_label;
  std::optional<Label> target_label;
  std::optional<Point> anchor;

  std::vector<IterationRecord> iterations;

  Point final_point;
  Label final_label;
  bool success = false;
  std::string failure;  // why success is false

  std::int64_t total_queries = 0;
  std::map<std::string, std::int64_t> queries_by_phase;
  // Best-so-far MSE, one entry per improvement; non-increasing.
  std::vector<CurvePoint> curve;
  // Query index at which ||v|| first dropped to the configured threshold.
  std::optional<std::int64_t> queries_to_threshold;
  // cos(P_m - x0, xi_m) at the final iterate of a targeted walk.
  std::optional<double> parallelism_cosine;

  double final_norm() const;
  double final_mse() const;
};

// Tracks the best adversarial point seen so far and the distance curve.
class ProgressRecorder {
 public:
  explicit ProgressRecorder(Point original, std::optional<double> norm_threshold = {});

  // Records the candidate if it is closer than the current best.
  bool Offer(const Point& candidate, Label label, std::int64_t query_index);

  bool has_best() const { return has_best_; }
  const Point& best() const { return best_; }
  Label best_label() const { return best_label_; }
  double best_norm() const { return best_norm_; }
  const std::vector<CurvePoint>& curve() const { return curve_; }
  std::optional<std::int64_t> queries_to_threshold() const { return queries_to_threshold_; }

 private:
  Point original_;
  std::optional<double> norm_threshold_;
  bool has_best_ = false;
  Point best_;
  Label best_label_;
  double best_norm_ = 0.0;
  std::vector<CurvePoint> curve_;
  std::optional<std::int64_t> queries_to_threshold_;
};

nlohmann::json PointToJson(const Point& point);
Point PointFromJson(const nlohmann::json& json);

// NDJSON: a header line, one line per iteration, one result line.
// `header` is merged into the first line (config echo, oracle spec, seed).
void WriteTraceNdjson(std::ostream& out, const AttackTrace& trace, const nlohmann::json& header,
                      bool include_vectors = true);

}  // namespace qfool

#endif  // QFOOL_TRACE_HPP
