#include "qfool/trace.hpp"

namespace qfool {

double AttackTrace::final_norm() const {
  if (final_point.empty() || original.empty()) return 0.0;
  return original.DistanceTo(final_point);
}

double AttackTrace::final_mse() const {
  if (final_point.empty() || original.empty()) return 0.0;
  return MeanSquaredPerturbation(original, final_point);
}

ProgressRecorder::ProgressRecorder(Point original, std::optional<double> norm_threshold)
    : original_(std::move(original)), norm_threshold_(norm_threshold) {}

bool ProgressRecorder::Offer(const Point& candidate, Label label, std::int64_t query_index) {
  const double norm = original_.DistanceTo(candidate);
  if (has_best_ && norm >= best_norm_) return false;
  has_best_ = true;
  best_ = candidate;
  best_label_ = label;
  best_norm_ = norm;
  curve_.push_back({query_index, MeanSquaredPerturbation(original_, candidate)});
  if (norm_threshold_ && !queries_to_threshold_ && norm <= *norm_threshold_) {
    queries_to_threshold_ = query_index;
  }
  return true;
}

nlohmann::json PointToJson(const Point& point) {
  const auto& v = point.values();
  return {{"shape", {point.shape().height, point.shape().width, point.shape().channels}},
          {"box", {point.box().lo, point.box().hi}},
          {"values", std::vector<double>(v.data(), v.data() + v.size())}};
}

Point PointFromJson(const nlohmann::json& json) {
  const auto shape_json = json.at("shape");
  Shape shape{shape_json.at(0).get<int>(), shape_json.at(1).get<int>(),
              shape_json.at(2).get<int>()};
  Box box;
  if (json.contains("box")) box = {json["box"].at(0).get<double>(), json["box"].at(1).get<double>()};
  const auto values = json.at("values").get<std::vector<double>>();
  return Point(Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size())),
               shape, box);
}

namespace {

nlohmann::json VectorToJson(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

void WriteTraceNdjson(std::ostream& out, const AttackTrace& trace, const nlohmann::json& header,
                      bool include_vectors) {
  nlohmann::json head = header.is_object() ? header : nlohmann::json::object();
  head["type"] = "header";
  head["attack"] = trace.attack;
  head["original_label"] = trace.original_label.id;
  if (trace.target_label) head["target_label"] = trace.target_label->id;
  if (include_vectors) {
    head["original"] = PointToJson(trace.original);
    if (trace.anchor) head["anchor"] = PointToJson(*trace.anchor);
  }
  out << head.dump() << '\n';

  for (std::size_t i = 0; i < trace.iterations.size(); ++i) {
    const auto& it = trace.iterations[i];
    nlohmann::json line = {{"type", "iteration"},
                           {"index", i},
                           {"perturbation_norm", it.perturbation_norm},
                           {"estimation_queries", it.estimation_queries},
                           {"queries", it.queries},
                           {"noise_norm", it.noise_norm},
                           {"positive_fraction", it.positive_fraction}};
    if (include_vectors) {
      line["start"] = PointToJson(it.start);
      line["direction"] = VectorToJson(it.direction);
      line["adversarial"] = PointToJson(it.adversarial);
    }
    out << line.dump() << '\n';
  }

  nlohmann::json curve = nlohmann::json::array();
  for (const auto& c : trace.curve) curve.push_back({c.query, c.mse});
  nlohmann::json result = {{"type", "result"},
                           {"success", trace.success},
                           {"final_label", trace.final_label.id},
                           {"total_queries", trace.total_queries},
                           {"queries_by_phase", trace.queries_by_phase},
                           {"final_norm", trace.final_norm()},
                           {"final_mse", trace.final_mse()},
                           {"curve", curve}};
  if (!trace.failure.empty()) result["failure"] = trace.failure;
  if (trace.queries_to_threshold) result["queries_to_threshold"] = *trace.queries_to_threshold;
  if (trace.parallelism_cosine) result["parallelism_cosine"] = *trace.parallelism_cosine;
  if (include_vectors && !trace.final_point.empty()) {
    result["final_point"] = PointToJson(trace.final_point);
  }
  out << result.dump() << '\n';
}

}  // namespace qfool
