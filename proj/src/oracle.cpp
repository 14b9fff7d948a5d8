#include "qfool/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <thread>

namespace qfool {
namespace {

int ArgmaxLowest(const Vector& scores) {
  int best = 0;
  for (Eigen::Index k = 1; k < scores.size(); ++k) {
    if (scores[k] > scores[best]) best = static_cast<int>(k);
  }
  return best;
}

// Runs fn(i) for i in [0, n) on up to hardware_concurrency threads. Each
// index writes only its own slot, so output order never depends on scheduling.
template <typename Fn>
void ParallelFor(std::size_t n, Fn fn) {
  constexpr std::size_t kMinPerThread = 32;
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t threads = std::min(hw, (n + kMinPerThread - 1) / kMinPerThread);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t * chunk; i < std::min(n, (t + 1) * chunk); ++i) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void CheckPoint(const Point& point, std::size_t dimension) {
  if (point.empty()) throw ContractViolation("empty point");
  if (point.dim() != dimension) {
    throw ContractViolation("point has dimension " + std::to_string(point.dim()) +
                            ", oracle expects " + std::to_string(dimension));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// DecisionOracle

Label DecisionOracle::Classify(const Point& point) const {
  CheckPoint(point, dimension());
  return ClassifyOne(point);
}

std::vector<Label> DecisionOracle::ClassifyBatch(std::span<const Point> points) const {
  if (points.empty()) throw ContractViolation("empty batch");
  const Shape& shape = points.front().shape();
  for (std::size_t i = 0; i < points.size(); ++i) {
    try {
      CheckPoint(points[i], dimension());
    } catch (const ContractViolation& e) {
      throw BatchError(i, e.what());
    }
    if (!(points[i].shape() == shape)) throw BatchError(i, "shape differs from first element");
  }
  auto labels = ClassifyMany(points);
  if (labels.size() != points.size()) {
    throw Error("oracle returned " + std::to_string(labels.size()) + " labels for " +
                std::to_string(points.size()) + " points");
  }
  return labels;
}

Decisions DecisionOracle::Decide(std::span<const Point> points) const {
  Decisions out;
  out.labels = ClassifyBatch(points);
  out.billed = points.size();
  return out;
}

std::vector<Label> DecisionOracle::ClassifyMany(std::span<const Point> points) const {
  std::vector<Label> labels;
  labels.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    try {
      labels.push_back(ClassifyOne(points[i]));
    } catch (const BatchError&) {
      throw;
    } catch (const std::exception& e) {
      throw BatchError(i, e.what());
    }
  }
  return labels;
}

// ---------------------------------------------------------------------------
// AffineMulticlassOracle

AffineMulticlassOracle::AffineMulticlassOracle(Eigen::MatrixXd weights, Vector bias)
    : weights_(std::move(weights)), bias_(std::move(bias)) {
  if (weights_.rows() < 2) throw ContractViolation("affine oracle needs at least two classes");
  if (weights_.cols() < 1) throw ContractViolation("affine oracle needs a positive dimension");
  if (bias_.size() != weights_.rows()) {
    throw ContractViolation("bias length must equal the number of classes");
  }
}

AffineMulticlassOracle AffineMulticlassOracle::Binary(const Vector& w, double offset) {
  Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(2, w.size());
  weights.row(1) = w.transpose();
  Vector bias(2);
  bias << 0.0, -offset;
  return AffineMulticlassOracle(std::move(weights), std::move(bias));
}

Label AffineMulticlassOracle::ClassifyOne(const Point& point) const {
  return {ArgmaxLowest(Scores(point.values()))};
}

std::vector<Label> AffineMulticlassOracle::ClassifyMany(std::span<const Point> points) const {
  std::vector<Label> labels(points.size());
  ParallelFor(points.size(), [&](std::size_t i) { labels[i] = ClassifyOne(points[i]); });
  return labels;
}

// ---------------------------------------------------------------------------
// SphereOracle

SphereOracle::SphereOracle(Vector center, double radius)
    : center_(std::move(center)), radius_(radius) {
  if (center_.size() < 1) throw ContractViolation("sphere oracle needs a positive dimension");
  if (!(radius_ > 0.0) || !std::isfinite(radius_)) {
    throw ContractViolation("sphere radius must be positive and finite");
  }
}

Label SphereOracle::ClassifyOne(const Point& point) const {
  return (point.values() - center_).norm() <= radius_ ? kInside : kOutside;
}

// ---------------------------------------------------------------------------
// MlpOracle

MlpOracle::MlpOracle(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ContractViolation("network has no layers");
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& layer = layers_[k];
    if (layer.weights.rows() < 1 || layer.weights.cols() < 1) {
      throw ContractViolation("layer " + std::to_string(k) + " is empty");
    }
    if (layer.bias.size() != layer.weights.rows()) {
      throw ContractViolation("layer " + std::to_string(k) + " bias length mismatch");
    }
    if (k > 0 && layer.weights.cols() != layers_[k - 1].weights.rows()) {
      throw ContractViolation("layer " + std::to_string(k) + " input width mismatch");
    }
  }
  if (layers_.back().weights.rows() < 2) {
    throw ContractViolation("network must output at least two classes");
  }
}

Vector MlpOracle::Logits(const Vector& x) const {
  Vector h = x;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    Vector next = layers_[k].weights * h + layers_[k].bias;
    if (k + 1 < layers_.size()) next = next.cwiseMax(0.0);
    h = std::move(next);
  }
  return h;
}

Label MlpOracle::ClassifyOne(const Point& point) const {
  return {ArgmaxLowest(Logits(point.values()))};
}

// Same per-point kernel as ClassifyOne, so batch and sequential labels agree
// bit for bit; only the work is spread over threads.
std::vector<Label> MlpOracle::ClassifyMany(std::span<const Point> points) const {
  std::vector<Label> labels(points.size());
  ParallelFor(points.size(), [&](std::size_t i) { labels[i] = ClassifyOne(points[i]); });
  return labels;
}

// ---------------------------------------------------------------------------
// CountingOracle

CountingOracle::CountingOracle(const DecisionOracle& inner, QueryLedger* ledger, std::string phase)
    : inner_(inner), ledger_(ledger), phase_(std::move(phase)) {}

void CountingOracle::Add(std::size_t n) const {
  count_.fetch_add(static_cast<std::int64_t>(n), std::memory_order_acq_rel);
  if (ledger_ != nullptr) ledger_->Charge(phase_, static_cast<std::int64_t>(n));
}

Label CountingOracle::ClassifyOne(const Point& point) const {
  const Label label = inner_.Classify(point);
  Add(1);
  return label;
}

std::vector<Label> CountingOracle::ClassifyMany(std::span<const Point> points) const {
  auto labels = inner_.ClassifyBatch(points);
  Add(points.size());
  return labels;
}

Decisions CountingOracle::Decide(std::span<const Point> points) const {
  if (points.empty()) throw ContractViolation("empty batch");
  auto decisions = inner_.Decide(points);
  Add(points.size());
  return decisions;
}

// ---------------------------------------------------------------------------
// CachingOracle

CachingOracle::CachingOracle(const DecisionOracle& inner, CacheBilling billing)
    : inner_(inner), billing_(billing) {}

std::string CachingOracle::Key(const Point& point) {
  const auto& v = point.values();
  std::string key(static_cast<std::size_t>(v.size()) * sizeof(double), '\0');
  std::memcpy(key.data(), v.data(), key.size());
  return key;
}

Label CachingOracle::ClassifyOne(const Point& point) const {
  const Point one[] = {point};
  return Decide(one).labels.front();
}

Decisions CachingOracle::Decide(std::span<const Point> points) const {
  if (points.empty()) throw ContractViolation("empty batch");
  Decisions out;
  out.labels.resize(points.size());
  std::vector<std::string> keys(points.size());
  std::vector<std::size_t> miss_index;
  std::vector<Point> miss_points;
  {
    std::lock_guard<std::mutex> lock(mu_);
    std::unordered_map<std::string, std::size_t> pending;
    for (std::size_t i = 0; i < points.size(); ++i) {
      keys[i] = Key(points[i]);
      if (auto it = cache_.find(keys[i]); it != cache_.end()) {
        out.labels[i] = it->second;
      } else if (!pending.contains(keys[i])) {
        pending.emplace(keys[i], i);
        miss_index.push_back(i);
        miss_points.push_back(points[i]);
      }
    }
  }
  if (!miss_points.empty()) {
    const auto labels = inner_.ClassifyBatch(miss_points);
    std::lock_guard<std::mutex> lock(mu_);
    for (std::size_t j = 0; j < miss_index.size(); ++j) {
      cache_.emplace(keys[miss_index[j]], labels[j]);
    }
  }
  {
    std::lock_guard<std::mutex> lock(mu_);
    for (std::size_t i = 0; i < points.size(); ++i) out.labels[i] = cache_.at(keys[i]);
  }
  const auto misses = static_cast<std::int64_t>(miss_points.size());
  misses_.fetch_add(misses);
  hits_.fetch_add(static_cast<std::int64_t>(points.size()) - misses);
  out.billed = billing_ == CacheBilling::kFree ? miss_points.size() : points.size();
  return out;
}

// ---------------------------------------------------------------------------
// QuerySession

QuerySession::QuerySession(const DecisionOracle& oracle, QueryLedger& ledger, std::int64_t budget)
    : oracle_(oracle), ledger_(ledger), budget_(budget) {
  if (budget < 0) throw ContractViolation("budget must be non-negative");
}

Label QuerySession::Classify(const Point& point, std::string_view phase) {
  const Point one[] = {point};
  return ClassifyBatch(one, phase).front();
}

std::vector<Label> QuerySession::ClassifyBatch(std::span<const Point> points,
                                               std::string_view phase) {
  if (points.empty()) throw ContractViolation("empty batch");
  if (static_cast<std::int64_t>(points.size()) > remaining()) {
    throw BudgetExhausted("batch of " + std::to_string(points.size()) + " exceeds the " +
                          std::to_string(remaining()) + " remaining queries");
  }
  auto decisions = oracle_.Decide(points);
  const auto billed = static_cast<std::int64_t>(decisions.billed);
  used_ += billed;
  ledger_.Charge(phase, billed);
  if (billed > 0) {
    auto it = phases_.find(phase);
    if (it == phases_.end()) it = phases_.emplace(std::string(phase), 0).first;
    it->second += billed;
  }
  return std::move(decisions.labels);
}

// ---------------------------------------------------------------------------
// TrueBoundaryNormal

Vector TrueBoundaryNormal(const DecisionOracle& oracle, const Point& point) {
  const DecisionOracle* o = &oracle;
  while (o->inner() != nullptr) o = o->inner();

  if (const auto* affine = dynamic_cast<const AffineMulticlassOracle*>(o)) {
    CheckPoint(point, affine->dimension());
    const Vector scores = affine->Scores(point.values());
    const int own = ArgmaxLowest(scores);
    // Nearest competitor: smallest margin divided by the pairwise normal length.
    int best = -1;
    double best_distance = std::numeric_limits<double>::infinity();
    for (int k = 0; k < affine->num_classes(); ++k) {
      if (k == own) continue;
      const Vector diff = (affine->weights().row(k) - affine->weights().row(own)).transpose();
      const double norm = diff.norm();
      if (norm == 0.0) continue;
      const double distance = (scores[own] - scores[k]) / norm;
      if (distance < best_distance) {
        best_distance = distance;
        best = k;
      }
    }
    if (best < 0) throw ContractViolation("no class has a boundary with the point's class");
    const Vector diff = (affine->weights().row(best) - affine->weights().row(own)).transpose();
    return diff / diff.norm();
  }

  if (const auto* sphere = dynamic_cast<const SphereOracle*>(o)) {
    CheckPoint(point, sphere->dimension());
    const Vector radial = point.values() - sphere->center();
    const double r = radial.norm();
    if (r == 0.0) throw ContractViolation("boundary normal undefined at the sphere center");
    const Vector outward = radial / r;
    return sphere->Classify(point) == SphereOracle::kInside ? Vector(outward) : Vector(-outward);
  }

  throw ContractViolation("boundary normal is only available for affine and sphere oracles");
}

}  // namespace qfool
