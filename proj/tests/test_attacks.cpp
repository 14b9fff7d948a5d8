#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "qfool/attack_nontargeted.hpp"
#include "qfool/attack_targeted.hpp"
#include "qfool/subspace.hpp"
#include "support.hpp"

using namespace qfool;
using namespace qfool::testing;

namespace {

// Invariants every trace must satisfy.
void CheckTraceInvariants(const AttackTrace& trace, const QueryLedger& ledger,
                          const CountingOracle& counter, std::int64_t budget) {
  CHECK(trace.total_queries == ledger.used());
  CHECK(trace.total_queries == counter.count());
  CHECK(trace.total_queries <= budget);
  std::int64_t by_phase = 0;
  for (const auto& [phase, n] : trace.queries_by_phase) by_phase += n;
  CHECK(by_phase == trace.total_queries);
  for (std::size_t i = 1; i < trace.curve.size(); ++i) {
    CHECK(trace.curve[i].mse <= trace.curve[i - 1].mse);
    CHECK(trace.curve[i].query >= trace.curve[i - 1].query);
  }
  for (std::size_t i = 1; i < trace.iterations.size(); ++i) {
    CHECK(trace.iterations[i].perturbation_norm <= trace.iterations[i - 1].perturbation_norm);
  }
  if (trace.success) {
    REQUIRE_FALSE(trace.curve.empty());
    CHECK(trace.curve.back().mse == trace.final_mse());
  }
}

std::string Serialize(const AttackTrace& trace) {
  std::ostringstream out;
  WriteTraceNdjson(out, trace, nlohmann::json::object(), true);
  return out.str();
}

}  // namespace

TEST_SUITE("attack_nontargeted") {
  TEST_CASE("inner loop gate") {
    CHECK(InnerLoopGate(5.0, 1.0, 0, 100, 0.9));
    CHECK(InnerLoopGate(1.0, 1.0, 100, 100, 0.9));
    CHECK_FALSE(InnerLoopGate(0.5, 1.0, 100, 100, 0.001));
    const Point ref(Vector::Zero(2), Shape::Flat(2));
    const Point a(Vector{{0.6, 0.8}}, Shape::Flat(2));
    const Point b(Vector{{0.3, 0.4}}, Shape::Flat(2));
    CHECK(InnerLoopGate(b, a, ref, 100, 100, 0.9));
    CHECK_FALSE(InnerLoopGate(b, a, ref, 100, 100, 0.001));
  }

  TEST_CASE("recovers the closed-form perturbation on a hyperplane") {
    for (std::uint64_t inst = 0; inst < 3; ++inst) {
      const BinaryInstance bi = MakeBinaryInstance(inst + 50, 100);
      const auto oracle = AffineMulticlassOracle::Binary(bi.w, bi.offset);
      CountingOracle counter(oracle);
      QueryLedger ledger;
      AttackConfig config;
      config.total_budget = 2000;
      config.rng_seed = inst;
      const AttackTrace trace = RunQFool(counter, Point(bi.x0, Shape::Flat(100)), config, ledger);
      REQUIRE(trace.success);
      const double optimum = HyperplaneDistance(bi.w, bi.offset, bi.x0);
      CHECK(trace.final_norm() >= optimum * (1 - 1e-9));
      CHECK(trace.final_norm() <= 1.10 * optimum);
      CHECK(oracle.Classify(trace.final_point).id == 1);
      CheckTraceInvariants(trace, ledger, counter, 2000);
    }
  }

  TEST_CASE("nearly flat sphere") {
    const std::size_t d = 50;
    const double R = 50.0, gap = 0.2;
    Rng rng = MakeRng(12);
    const Vector u = GaussianVector(rng, d).normalized();
    const Vector x = Vector::Constant(d, 0.5);
    const SphereOracle oracle(x - (R - gap) * u, R);
    AttackConfig config;
    config.total_budget = 2000;
    const AttackTrace trace = RunQFool(oracle, Point(x, Shape::Flat(d)), config);
    REQUIRE(trace.success);
    CHECK(trace.final_norm() <= 1.10 * gap);
    CHECK(trace.final_norm() >= gap * (1 - 1e-9));
  }

  TEST_CASE("starved budgets") {
    const BinaryInstance bi = MakeBinaryInstance(3, 20);
    const auto oracle = AffineMulticlassOracle::Binary(bi.w, bi.offset);
    AttackConfig config;
    for (std::int64_t budget : {0, 1, 2}) {
      config.total_budget = budget;
      CountingOracle counter(oracle);
      QueryLedger ledger;
      CHECK_THROWS_AS(RunQFool(counter, Point(bi.x0, Shape::Flat(20)), config, ledger),
                      InitialPointNotFound);
      CHECK(ledger.used() == counter.count());
      CHECK(ledger.used() <= budget);
    }
    const ConstantOracle constant(20, 0);
    config.total_budget = 500;
    CHECK_THROWS_AS(RunQFool(constant, Point(bi.x0, Shape::Flat(20)), config), InitialPointNotFound);
  }

  TEST_CASE("small budgets return the best point found") {
    const BinaryInstance bi = MakeBinaryInstance(4, 100);
    const auto oracle = AffineMulticlassOracle::Binary(bi.w, bi.offset);
    for (std::int64_t budget : {40, 80, 150, 300}) {
      AttackConfig config;
      config.total_budget = budget;
      CountingOracle counter(oracle);
      QueryLedger ledger;
      const AttackTrace trace = RunQFool(counter, Point(bi.x0, Shape::Flat(100)), config, ledger);
      CheckTraceInvariants(trace, ledger, counter, budget);
      if (trace.success) CHECK(oracle.Classify(trace.final_point).id == 1);
    }
  }

  TEST_CASE("subspace variant on a multichannel image") {
    const Shape shape{12, 12, 3};
    const DctSubspace band(shape, 3);
    Rng rng = MakeRng(3);
    const Vector w = band.Lift(GaussianVector(rng, band.dimension()));
    const Vector x = Vector::Constant(static_cast<Eigen::Index>(shape.size()), 0.5);
    const auto oracle = AffineMulticlassOracle::Binary(w, w.dot(x) + 0.2 * w.norm());
    for (bool per_channel : {false, true}) {
      AttackConfig config;
      config.total_budget = 1500;
      config.subspace_side = 3;
      config.per_channel_subspace = per_channel;
      CountingOracle counter(oracle);
      QueryLedger ledger;
      const AttackTrace trace = RunQFool(counter, Point(x, shape), config, ledger);
      CHECK(trace.attack == "qfool-subspace");
      REQUIRE(trace.success);
      CHECK(trace.final_norm() <= 1.10 * 0.2);
      CheckTraceInvariants(trace, ledger, counter, 1500);
    }
  }

  TEST_CASE("identical seeds give identical traces") {
    const BinaryInstance bi = MakeBinaryInstance(6, 40);
    const auto oracle = AffineMulticlassOracle::Binary(bi.w, bi.offset);
    AttackConfig config;
    config.total_budget = 800;
    config.rng_seed = 21;
    const Point x0(bi.x0, Shape::Flat(40));
    CHECK(Serialize(RunQFool(oracle, x0, config)) == Serialize(RunQFool(oracle, x0, config)));
    config.rng_seed = 22;
    const AttackTrace other = RunQFool(oracle, x0, config);
    config.rng_seed = 21;
    CHECK(Serialize(other) != Serialize(RunQFool(oracle, x0, config)));
  }

  TEST_CASE("perturbation threshold stops early") {
    const BinaryInstance bi = MakeBinaryInstance(7, 100);
    const auto oracle = AffineMulticlassOracle::Binary(bi.w, bi.offset);
    const double optimum = HyperplaneDistance(bi.w, bi.offset, bi.x0);
    AttackConfig config;
    config.total_budget = 5000;
    config.perturbation_threshold = 1.5 * optimum;
    const AttackTrace trace = RunQFool(oracle, Point(bi.x0, Shape::Flat(100)), config);
    REQUIRE(trace.success);
    REQUIRE(trace.queries_to_threshold.has_value());
    CHECK(*trace.queries_to_threshold <= trace.total_queries);
    CHECK(trace.final_norm() <= 1.5 * optimum);
    CHECK(trace.total_queries < 5000);
  }
}

TEST_SUITE("attack_targeted") {
  TEST_CASE("converges to the two-halfspace optimum") {
    for (std::uint64_t inst = 0; inst < 4; ++inst) {
      const TargetedInstance ti = MakeTargetedInstance(inst + 30, 50);
      const AffineMulticlassOracle oracle(ti.W, ti.b);
      const auto region = ClassRegion(ti.W, ti.b, ti.target);
      const double optimum = TwoHalfspaceDistance(region, ti.x0);
      // Independent cross-check of the analytic optimum.
      CHECK((DykstraProjection(region, ti.x0) - ti.x0).norm() ==
            doctest::Approx(optimum).epsilon(1e-6));

      CountingOracle counter(oracle);
      QueryLedger ledger;
      AttackConfig config;
      config.total_budget = 5000;
      config.rng_seed = inst;
      const AttackTrace trace = RunTargetedQFool(counter, Point(ti.x0, Shape::Flat(50)),
                                                 Point(ti.anchor, Shape::Flat(50)), config, ledger,
                                                 Label{ti.target});
      REQUIRE(trace.success);
      CHECK(oracle.Classify(trace.final_point).id == ti.target);
      CHECK(trace.final_norm() >= optimum * (1 - 1e-9));
      CHECK(trace.final_norm() <= 1.15 * optimum);
      REQUIRE(trace.parallelism_cosine.has_value());
      CHECK(trace.target_label.value().id == ti.target);
      for (const auto& it : trace.iterations) CHECK(oracle.Classify(it.adversarial).id == ti.target);
      CheckTraceInvariants(trace, ledger, counter, 5000);
    }
  }

  TEST_CASE("anchor preconditions") {
    const TargetedInstance ti = MakeTargetedInstance(2, 10);
    const AffineMulticlassOracle oracle(ti.W, ti.b);
    const Point x0(ti.x0, Shape::Flat(10));
    const Point anchor(ti.anchor, Shape::Flat(10));
    AttackConfig config;
    config.total_budget = 500;
    const Label wrong{3 - ti.target};
    CHECK_THROWS_AS(RunTargetedQFool(oracle, x0, anchor, config, wrong), ContractViolation);
    CHECK_THROWS_AS(RunTargetedQFool(oracle, x0, x0, config), ContractViolation);
  }

  TEST_CASE("starting next to the target region") {
    const std::size_t d = 10;
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(2, d);
    W(1, 0) = 1.0;
    const Vector x = Vector::Constant(d, 0.5);
    AttackConfig config;
    config.total_budget = 2000;
    const Point x0(x, Shape::Flat(d));
    const double tol = Resolve(config, x0, AttackMode::kTargeted).tolerance;
    const AffineMulticlassOracle oracle(W, Vector{{0.0, -(0.5 + 0.5 * tol)}});
    Vector a = x;
    a[0] = 0.9;
    const AttackTrace trace = RunTargetedQFool(oracle, x0, Point(a, Shape::Flat(d)), config);
    REQUIRE(trace.success);
    CHECK(trace.final_norm() <= 2 * tol);
  }
}
