#ifndef QFOOL_ORACLE_HPP
#define QFOOL_ORACLE_HPP

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "qfool/core.hpp"
#include "qfool/ledger.hpp"

namespace qfool {

// Labels for a batch plus how many of them should be billed as queries.
struct Decisions {
  std::vector<Label> labels;
  std::size_t billed = 0;
};

// The only channel to the model: a point in, its top-1 label out.
//
// Implementations must be deterministic and safe to call from several
// threads at once. Classify/ClassifyBatch validate their inputs and then
// dispatch to the protected hooks.
class DecisionOracle {
 public:
  virtual ~DecisionOracle() = default;

  virtual std::size_t dimension() const = 0;
  // True when the oracle evaluates batches natively (rather than by a loop).
  virtual bool supports_batch() const { return false; }

  Label Classify(const Point& point) const;
  // Element-wise identical to calling Classify in order. Empty batches and
  // mismatched elements are rejected with the index of the first offender.
  std::vector<Label> ClassifyBatch(std::span<const Point> points) const;

  // Labels plus the number of billable queries. Plain oracles bill every
  // point; a free-mode cache bills only misses.
  virtual Decisions Decide(std::span<const Point> points) const;

  // Wrapped oracle for decorators, nullptr otherwise.
  virtual const DecisionOracle* inner() const { return nullptr; }

 protected:
  virtual Label ClassifyOne(const Point& point) const = 0;
  virtual std::vector<Label> ClassifyMany(std::span<const Point> points) const;
};

// label = argmax_k (W_k . x + b_k); ties go to the lowest index.
class AffineMulticlassOracle : public DecisionOracle {
 public:
  AffineMulticlassOracle(Eigen::MatrixXd weights, Vector bias);

  // Two classes: label 1 iff w . x - offset > 0, label 0 otherwise.
  static AffineMulticlassOracle Binary(const Vector& w, double offset);

  std::size_t dimension() const override { return static_cast<std::size_t>(weights_.cols()); }
  bool supports_batch() const override { return true; }
  int num_classes() const { return static_cast<int>(weights_.rows()); }
  const Eigen::MatrixXd& weights() const { return weights_; }
  const Vector& bias() const { return bias_; }

  Vector Scores(const Vector& x) const { return weights_ * x + bias_; }

 protected:
  Label ClassifyOne(const Point& point) const override;
  std::vector<Label> ClassifyMany(std::span<const Point> points) const override;

 private:
  Eigen::MatrixXd weights_;
  Vector bias_;
};

// Label 0 inside the closed ball ||x - c|| <= R, label 1 outside.
class SphereOracle : public DecisionOracle {
 public:
  static constexpr Label kInside{0};
  static constexpr Label kOutside{1};

  SphereOracle(Vector center, double radius);

  std::size_t dimension() const override { return static_cast<std::size_t>(center_.size()); }
  const Vector& center() const { return center_; }
  double radius() const { return radius_; }
  double curvature() const { return 1.0 / radius_; }

 protected:
  Label ClassifyOne(const Point& point) const override;

 private:
  Vector center_;
  double radius_;
};

struct DenseLayer {
  Eigen::MatrixXd weights;  // rows = outputs, cols = inputs
  Vector bias;
};

// Fully connected ReLU network; the last layer is linear and its argmax is
// the label (lowest index on ties).
class MlpOracle : public DecisionOracle {
 public:
  explicit MlpOracle(std::vector<DenseLayer> layers);
  static MlpOracle Load(const std::string& path);

  std::size_t dimension() const override { return static_cast<std::size_t>(layers_.front().weights.cols()); }
  bool supports_batch() const override { return true; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  Vector Logits(const Vector& x) const;

 protected:
  Label ClassifyOne(const Point& point) const override;
  std::vector<Label> ClassifyMany(std::span<const Point> points) const override;

 private:
  std::vector<DenseLayer> layers_;
};

// Counts every point that reaches the wrapped oracle, independently of any
// attack-side accounting. Optionally mirrors the count into a ledger.
class CountingOracle : public DecisionOracle {
 public:
  explicit CountingOracle(const DecisionOracle& inner, QueryLedger* ledger = nullptr,
                          std::string phase = "oracle");

  std::size_t dimension() const override { return inner_.dimension(); }
  bool supports_batch() const override { return inner_.supports_batch(); }
  Decisions Decide(std::span<const Point> points) const override;
  const DecisionOracle* inner() const override { return &inner_; }

  std::int64_t count() const { return count_.load(std::memory_order_acquire); }
  void Reset() { count_.store(0, std::memory_order_release); }

 protected:
  Label ClassifyOne(const Point& point) const override;
  std::vector<Label> ClassifyMany(std::span<const Point> points) const override;

 private:
  void Add(std::size_t n) const;

  const DecisionOracle& inner_;
  QueryLedger* ledger_;
  std::string phase_;
  mutable std::atomic<std::int64_t> count_{0};
};

enum class CacheBilling {
  kBilled,  // repeated points still cost a query
  kFree,    // cache hits are not billed
};

// Memoizes labels by exact point value. Never changes a label.
class CachingOracle : public DecisionOracle {
 public:
  explicit CachingOracle(const DecisionOracle& inner, CacheBilling billing = CacheBilling::kBilled);

  std::size_t dimension() const override { return inner_.dimension(); }
  bool supports_batch() const override { return inner_.supports_batch(); }
  Decisions Decide(std::span<const Point> points) const override;
  const DecisionOracle* inner() const override { return &inner_; }

  std::int64_t hits() const { return hits_.load(); }
  std::int64_t misses() const { return misses_.load(); }

 protected:
  Label ClassifyOne(const Point& point) const override;

 private:
  static std::string Key(const Point& point);

  const DecisionOracle& inner_;
  CacheBilling billing_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, Label> cache_;
  mutable std::atomic<std::int64_t> hits_{0};
  mutable std::atomic<std::int64_t> misses_{0};
};

// An oracle bound to a ledger and a budget. Attacks issue every query through
// a session: nothing is evaluated once the budget is spent.
class QuerySession {
 public:
  QuerySession(const DecisionOracle& oracle, QueryLedger& ledger, std::int64_t budget);

  Label Classify(const Point& point, std::string_view phase);
  std::vector<Label> ClassifyBatch(std::span<const Point> points, std::string_view phase);

  const DecisionOracle& oracle() const { return oracle_; }
  std::int64_t budget() const { return budget_; }
  std::int64_t used() const { return used_; }
  std::int64_t remaining() const { return budget_ - used_; }
  bool exhausted() const { return used_ >= budget_; }
  // Queries billed through this session, by phase.
  const std::map<std::string, std::int64_t, std::less<>>& per_phase() const { return phases_; }

 private:
  const DecisionOracle& oracle_;
  QueryLedger& ledger_;
  std::int64_t budget_;
  std::int64_t used_ = 0;
  std::map<std::string, std::int64_t, std::less<>> phases_;
};

// Test-only: unit normal of the boundary between the point's class and its
// nearest competitor, pointing out of the point's class. Supports affine and
// sphere oracles (through any wrappers). Attacks never call this.
Vector TrueBoundaryNormal(const DecisionOracle& oracle, const Point& point);

// Oracle from a textual spec: "affine:FILE", "sphere:C,R", "mlp:FILE",
// "http:URL". `dimension` sizes the sphere center (C is a scalar filled into
// every coordinate) and is checked against file-backed oracles.
std::unique_ptr<DecisionOracle> MakeOracle(const std::string& spec, std::size_t dimension);

}  // namespace qfool

#endif  // QFOOL_ORACLE_HPP
