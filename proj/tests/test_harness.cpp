#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "qfool/harness.hpp"
#include "qfool/io.hpp"
#include "qfool/synthetic.hpp"
#include "support.hpp"

using namespace qfool;
using namespace qfool::testing;

namespace {

// Binary affine oracle on 4x4 images plus a dataset of `count` inputs.
ExperimentSpec SmallExperiment(const std::filesystem::path& dir, int count) {
  const Shape shape{4, 4, 1};
  Rng rng = MakeRng(101);
  const Vector w = GaussianVector(rng, 16);
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(2, 16);
  W.row(1) = w.transpose();
  const double offset = w.dot(Vector::Constant(16, 0.5)) + 0.3 * w.norm();
  WriteLayerFile((dir / "oracle.bin").string(), {DenseLayer{W, Vector{{0.0, -offset}}}});
  Dataset dataset;
  dataset.shape = shape;
  std::uniform_real_distribution<double> u(0.4, 0.6);
  for (int i = 0; i < count; ++i) {
    Vector x(16);
    for (auto& v : x) v = u(rng);
    dataset.items.push_back({"img" + std::to_string(i), Point(x, shape), 0, std::nullopt});
  }
  WriteDataset((dir / "data").string(), dataset);
  ExperimentSpec spec;
  spec.oracle = "affine:" + (dir / "oracle.bin").string();
  spec.dataset = (dir / "data").string();
  spec.attacks.push_back({"qfool", "qfool", {}});
  spec.budgets = {100, 300};
  spec.seeds = {0};
  spec.output = (dir / "out").string();
  return spec;
}

std::size_t CountLines(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

std::string Slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), {}};
}

RunOptions Serial(bool force = false) {
  RunOptions o;
  o.workers = 1;
  o.force = force;
  return o;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("cell count and summary size") {
    const auto dir = FreshDirectory("harness-cells");
    const ExperimentSpec spec = SmallExperiment(dir, 2);
    const auto records = RunExperiment(spec, Serial());
    CHECK(records.size() == 4);
    const auto summary = Summarize(records);
    REQUIRE(summary.size() == 2);
    CHECK(summary[0].budget == 100);
    CHECK(summary[1].budget == 300);
    CHECK(summary[0].runs == 2);
    CHECK(std::filesystem::exists(dir / "out" / "records.ndjson"));
    CHECK(std::filesystem::exists(dir / "out" / "summary.csv"));
    CHECK(CountLines(dir / "out" / "records.ndjson") == 4);
  }

  TEST_CASE("records satisfy their invariants") {
    const auto dir = FreshDirectory("harness-records");
    const auto records = RunExperiment(SmallExperiment(dir, 2), Serial());
    for (const auto& r : records) {
      REQUIRE(r.success);
      REQUIRE_FALSE(r.curve.empty());
      CHECK(r.curve.size() <= 128);
      for (std::size_t i = 1; i < r.curve.size(); ++i) {
        CHECK(r.curve[i].mse <= r.curve[i - 1].mse);
        CHECK(r.curve[i].query > r.curve[i - 1].query);
      }
      CHECK(r.curve.back().mse == r.final_mse);
      CHECK(r.curve.back().query == r.total_queries);
      CHECK(r.total_queries <= r.budget);
      std::int64_t sum = 0;
      for (const auto& [phase, n] : r.queries_by_phase) sum += n;
      CHECK(sum == r.total_queries);
    }
  }

  TEST_CASE("summary is recomputable from the record file") {
    const auto dir = FreshDirectory("harness-summary");
    RunExperiment(SmallExperiment(dir, 3), Serial());
    std::ostringstream recomputed;
    WriteSummaryCsv(recomputed, Summarize(ReadRecords((dir / "out" / "records.ndjson").string())));
    CHECK(recomputed.str() == Slurp(dir / "out" / "summary.csv"));
  }

  TEST_CASE("re-runs skip completed cells unless forced") {
    const auto dir = FreshDirectory("harness-resume");
    const ExperimentSpec spec = SmallExperiment(dir, 2);
    const auto first = RunExperiment(spec, Serial());
    const auto second = RunExperiment(spec, Serial());
    CHECK(CountLines(dir / "out" / "records.ndjson") == 4);
    for (std::size_t i = 0; i < first.size(); ++i) {
      CHECK(first[i].ToJson() == second[i].ToJson());  // read back, wall time included
    }
    RunExperiment(spec, Serial(true));
    CHECK(CountLines(dir / "out" / "records.ndjson") == 8);
  }

  TEST_CASE("torn trailing lines are skipped and their cells re-run") {
    const auto dir = FreshDirectory("harness-torn");
    const ExperimentSpec spec = SmallExperiment(dir, 2);
    RunExperiment(spec, Serial());
    const auto path = dir / "out" / "records.ndjson";
    std::string text = Slurp(path);
    // Drop the last record and leave half of it behind.
    text.pop_back();
    const auto cut = text.rfind('\n');
    const std::string torn = text.substr(0, cut + 1) + text.substr(cut + 1, 40);
    std::ofstream(path, std::ios::trunc) << torn;
    CHECK(ReadRecords(path.string()).size() == 3);
    const auto records = RunExperiment(spec, Serial());
    CHECK(records.size() == 4);
    CHECK(ReadRecords(path.string()).size() == 4);
  }

  TEST_CASE("records are identical across runs and worker counts") {
    const auto a = FreshDirectory("harness-det-a");
    const auto b = FreshDirectory("harness-det-b");
    RunOptions parallel;
    parallel.workers = 3;
    const auto ra = RunExperiment(SmallExperiment(a, 3), Serial());
    const auto rb = RunExperiment(SmallExperiment(b, 3), parallel);
    REQUIRE(ra.size() == rb.size());
    for (std::size_t i = 0; i < ra.size(); ++i) {
      auto ja = ra[i].ToJson();
      auto jb = rb[i].ToJson();
      ja.erase("wall_seconds");
      jb.erase("wall_seconds");
      CHECK(ja == jb);
    }
  }

  TEST_CASE("per-cell failures are recorded without aborting") {
    const auto dir = FreshDirectory("harness-failures");
    ExperimentSpec spec = SmallExperiment(dir, 2);
    spec.budgets = {0, 100};
    const auto records = RunExperiment(spec, Serial());
    REQUIRE(records.size() == 4);
    CHECK_FALSE(records[0].success);
    CHECK_FALSE(records[0].failure.empty());
    CHECK(records[1].success);
    const auto summary = Summarize(records);
    CHECK(summary[0].success_rate == 0.0);
    CHECK(std::isinf(summary[0].median_mse));
  }

  TEST_CASE("record json round-trip keeps infinities") {
    RunRecord r;
    r.image_id = "a";
    r.attack = "qfool";
    r.budget = 10;
    r.final_mse = std::numeric_limits<double>::infinity();
    r.final_norm = std::numeric_limits<double>::infinity();
    r.curve = {{1, 0.5}, {4, 0.25}};
    r.queries_by_phase = {{"origin", 1}};
    r.iterations = {{100, 120, 0.3}};
    const auto json = r.ToJson();
    CHECK(json["final_mse"].is_null());
    const RunRecord back = RunRecord::FromJson(nlohmann::json::parse(json.dump()));
    CHECK(std::isinf(back.final_mse));
    CHECK(back.curve == r.curve);
    CHECK(back.ToJson() == json);
  }

  TEST_CASE("curve downsampling") {
    std::vector<CurvePoint> curve;
    double mse = 1.0;
    for (std::int64_t q = 1; q <= 10000; q += 3) {
      curve.push_back({q, mse});
      mse *= 0.999;
    }
    const auto down = DownsampleCurve(curve, 10000, 10000, 0.001);
    CHECK(down.size() <= 128);
    CHECK(down.back().query == 10000);
    CHECK(down.back().mse == 0.001);
    for (std::size_t i = 1; i < down.size(); ++i) {
      CHECK(down[i].query > down[i - 1].query);
      CHECK(down[i].mse <= down[i - 1].mse);
    }
    // Logarithmic spacing: many points below 100 queries.
    std::size_t early = 0;
    for (const auto& p : down) early += p.query < 100;
    CHECK(early >= 30);
    CHECK(DownsampleCurve({}, 100, 0, std::numeric_limits<double>::infinity()).empty());
  }

  TEST_CASE("spec parsing collects every problem") {
    const auto bad = nlohmann::json::parse(R"({
      "oracle": 5,
      "attacks": [{"name": "teleport"}],
      "budgets": [-3],
      "seeds": "zero"
    })");
    try {
      ParseExperimentSpec(bad);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      const std::string what = e.what();
      CHECK(what.find("oracle") != std::string::npos);
      CHECK(what.find("dataset") != std::string::npos);
      CHECK(what.find("teleport") != std::string::npos);
      CHECK(what.find("budget") != std::string::npos);
      CHECK(what.find("seeds") != std::string::npos);
      CHECK(what.find("output") != std::string::npos);
    }
  }

  TEST_CASE("spec parsing resolves relative paths") {
    const auto json = nlohmann::json::parse(R"({
      "oracle": "mlp:net.bin", "dataset": "data", "attack": "qfool",
      "config": {"unit_batch": 50, "improvement_threshold": 0.9},
      "budgets": [100], "output": "out", "workers": 2, "sweep_sides": [2, 4]
    })");
    const ExperimentSpec spec = ParseExperimentSpec(json, "/base");
    CHECK(spec.oracle == "mlp:/base/net.bin");
    CHECK(spec.dataset == "/base/data");
    CHECK(spec.output == "/base/out");
    REQUIRE(spec.attacks.size() == 1);
    CHECK(spec.attacks[0].config.unit_batch == 50);
    CHECK(spec.seeds == std::vector<std::uint64_t>{0});
    CHECK(spec.workers == 2);
    CHECK(spec.sweep_sides == std::vector<int>{2, 4});
  }

  TEST_CASE("validation names missing files") {
    const auto dir = FreshDirectory("harness-validate");
    ExperimentSpec spec = SmallExperiment(dir, 1);
    spec.dataset = (dir / "nowhere").string();
    spec.oracle = "mlp:" + (dir / "missing.bin").string();
    const auto errors = ValidateExperimentSpec(spec);
    REQUIRE(errors.size() >= 2);
    bool dataset_named = false, oracle_named = false;
    for (const auto& e : errors) {
      dataset_named |= e.find((dir / "nowhere").string()) != std::string::npos;
      oracle_named |= e.find((dir / "missing.bin").string()) != std::string::npos;
    }
    CHECK(dataset_named);
    CHECK(oracle_named);
    CHECK_THROWS_AS(RunExperiment(spec, Serial()), FormatError);
  }

  TEST_CASE("targeted attacks need anchors") {
    const auto dir = FreshDirectory("harness-anchors");
    ExperimentSpec spec = SmallExperiment(dir, 1);
    spec.attacks = {{"qfool-targeted", "qfool-targeted", {}}};
    CHECK_FALSE(ValidateExperimentSpec(spec).empty());
  }

  TEST_CASE("subspace sweep") {
    const auto dir = FreshDirectory("harness-sweep");
    const ExperimentSpec spec = SmallExperiment(dir, 2);
    const auto one = SubspaceSweep(spec, {2}, Serial());
    REQUIRE(one.size() == 2);  // one side, two budgets
    CHECK(one[0].side == 2);
    CHECK(one[0].budget == 100);
    CHECK_THROWS_AS(SubspaceSweep(spec, {5}, Serial()), ContractViolation);
    CHECK_THROWS_AS(SubspaceSweep(spec, {}, Serial()), ContractViolation);
    std::ostringstream csv;
    WriteSweepCsv(csv, one);
    CHECK(csv.str().rfind("side,budget,median_norm,median_mse\n", 0) == 0);
  }

  TEST_CASE("dataset round-trip") {
    const auto dir = FreshDirectory("harness-dataset");
    Dataset ds;
    ds.shape = Shape{2, 2, 1};
    ds.items.push_back({"a", Point(Vector{{0.0, 0.25, 0.5, 1.0}}, ds.shape), 3,
                        Point(Vector{{1.0, 1.0, 0.0, 0.0}}, ds.shape)});
    WriteDataset(dir.string(), ds);
    const Dataset back = LoadDataset(dir.string());
    CHECK(back.shape == ds.shape);
    REQUIRE(back.items.size() == 1);
    CHECK(back.items[0].label == 3);
    CHECK(back.items[0].point.values() == ds.items[0].point.values());
    CHECK(back.items[0].anchor->values() == ds.items[0].anchor->values());
    CHECK_THROWS_AS(LoadDataset((dir / "nope").string()), FormatError);
  }

  TEST_CASE("worker count resolution") {
    CHECK(ResolveWorkerCount(3) == 3);
    setenv("QFOOL_WORKERS", "5", 1);
    CHECK(ResolveWorkerCount(std::nullopt) == 5);
    CHECK(ResolveWorkerCount(2) == 2);
    unsetenv("QFOOL_WORKERS");
    CHECK(ResolveWorkerCount(std::nullopt) >= 1);
  }

  TEST_CASE("named attacks") {
    const Point x0(Vector::Constant(16, 0.5), Shape{4, 4, 1});
    const auto oracle = AffineMulticlassOracle::Binary(Vector::Constant(16, 1.0), 8.5);
    AttackConfig config;
    config.total_budget = 300;
    for (const auto& name : AttackNames()) {
      QueryLedger ledger;
      std::optional<Point> anchor;
      if (AttackNeedsAnchor(name)) anchor = Point(Vector::Constant(16, 0.9), Shape{4, 4, 1});
      const AttackTrace trace = RunNamedAttack(name, oracle, x0, anchor, config, ledger);
      CHECK(trace.total_queries == ledger.used());
      CHECK(trace.success);
    }
    QueryLedger ledger;
    CHECK_THROWS_AS(RunNamedAttack("qfool-targeted", oracle, x0, std::nullopt, config, ledger),
                    ContractViolation);
    CHECK_THROWS_AS(RunNamedAttack("warp", oracle, x0, std::nullopt, config, ledger),
                    ContractViolation);
  }
}
