// qfool command-line tool.
//
// Exit codes: 0 success, 1 usage or I/O error, 2 attack ran but found no
// adversarial point.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qfool/config.hpp"
#include "qfool/harness.hpp"
#include "qfool/io.hpp"
#include "qfool/oracle.hpp"
#include "qfool/random.hpp"
#include "qfool/synthetic.hpp"
#include "qfool/trace.hpp"

namespace {

using namespace qfool;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitUnsuccessful = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<int> ParseIntList(const std::string& text, const std::string& what) {
  std::vector<int> out;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw UsageError("bad " + what + " '" + text + "'");
    }
  }
  if (out.empty()) throw UsageError("empty " + what);
  return out;
}

Shape ParseShape(const std::string& text) {
  const auto v = ParseIntList(text, "shape");
  if (v.size() != 3 || v[0] < 1 || v[1] < 1 || v[2] < 1) {
    throw UsageError("shape must be H,W,C with positive entries, got '" + text + "'");
  }
  return {v[0], v[1], v[2]};
}

nlohmann::json ConfigJson(const AttackConfig& config) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, value] : ConfigEntries(config)) j[key] = value;
  return j;
}

// ---------------------------------------------------------------------------
// attack

struct AttackArgs {
  std::string oracle;
  std::string input;
  std::string mode = "nontargeted";
  std::string attack = "qfool";
  std::string target_image;
  std::optional<std::int64_t> budget;
  std::optional<int> subspace_side;
  std::optional<std::uint64_t> seed;
  std::string config_file;
  std::string out;
  std::string adv_out;
  std::string shape;
  bool no_vectors = false;
};

int RunAttackCommand(const AttackArgs& args) {
  const bool targeted = args.mode == "targeted";
  if (targeted && args.target_image.empty()) {
    throw UsageError("--target-image is required in targeted mode");
  }
  if (targeted && args.attack == "gaussian") {
    throw UsageError("the gaussian attack has no targeted mode");
  }

  AttackConfig config;
  if (!args.config_file.empty()) config = LoadConfigFile(args.config_file);
  if (args.budget) config.total_budget = *args.budget;
  if (args.subspace_side) config.subspace_side = *args.subspace_side;
  if (args.seed) config.rng_seed = *args.seed;

  std::optional<Shape> shape;
  if (!args.shape.empty()) shape = ParseShape(args.shape);
  const Point x0 = ReadPointFile(args.input, shape);
  std::optional<Point> anchor;
  if (targeted) anchor = ReadPointFile(args.target_image, x0.shape());
  const auto oracle = MakeOracle(args.oracle, x0.dim());

  std::string name = args.attack;
  if (targeted) name += "-targeted";

  QueryLedger ledger;
  const AttackTrace trace = RunNamedAttack(name, *oracle, x0, anchor, config, ledger);

  const nlohmann::json header = {{"tool", "qfool"},
                                 {"command", "attack"},
                                 {"attack", name},
                                 {"mode", args.mode},
                                 {"oracle", args.oracle},
                                 {"input", args.input},
                                 {"target_image", args.target_image},
                                 {"seed", config.rng_seed},
                                 {"config", ConfigJson(config)}};
  if (args.out.empty() || args.out == "-") {
    WriteTraceNdjson(std::cout, trace, header, !args.no_vectors);
  } else {
    std::ofstream out(args.out);
    if (!out) throw FormatError("cannot write " + args.out);
    WriteTraceNdjson(out, trace, header, !args.no_vectors);
  }
  std::string adv_out = args.adv_out;
  if (adv_out.empty() && !args.out.empty() && args.out != "-") adv_out = args.out + ".adv";
  if (trace.success && !adv_out.empty()) WritePointFile(adv_out, trace.final_point);

  std::cerr << name << ": " << (trace.success ? "success" : "unsuccessful") << ", "
            << trace.total_queries << " queries";
  if (trace.success) {
    std::cerr << ", l2 " << trace.final_norm() << ", mse " << trace.final_mse() << ", label "
              << trace.original_label.id << " -> " << trace.final_label.id;
  } else if (!trace.failure.empty()) {
    std::cerr << " (" << trace.failure << ")";
  }
  std::cerr << '\n';
  return trace.success ? kExitOk : kExitUnsuccessful;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
  std::string spec;
  bool dry_run = false;
  bool force = false;
  bool sweep = false;
  std::string sides;
  std::optional<int> workers;
};

int RunBenchCommand(const BenchArgs& args) {
  ExperimentSpec spec;
  try {
    spec = LoadExperimentSpec(args.spec);
  } catch (const FormatError& e) {
    std::cerr << e.what() << '\n';
    return kExitError;
  }
  if (!args.sides.empty()) spec.sweep_sides = ParseIntList(args.sides, "side list");
  const auto errors = ValidateExperimentSpec(spec);
  if (!errors.empty()) {
    std::cerr << "experiment spec " << args.spec << " is not runnable:\n";
    for (const auto& e : errors) std::cerr << "  " << e << '\n';
    return kExitError;
  }
  if (args.sweep && spec.sweep_sides.empty()) {
    throw UsageError("--sweep needs sweep_sides in the spec or --sides");
  }

  const Dataset dataset = LoadDataset(spec.dataset);
  if (args.dry_run) {
    std::map<std::string, bool> done;
    if (!args.force) {
      const auto path = (std::filesystem::path(spec.output) / "records.ndjson").string();
      for (const auto& r : ReadRecords(path)) done[r.Key()] = true;
    }
    std::cout << "image,seed,attack,budget,status\n";
    if (args.sweep) {
      for (int side : spec.sweep_sides) {
        for (const auto& item : dataset.items) {
          for (auto seed : spec.seeds) {
            for (auto budget : spec.budgets) {
              std::cout << item.id << ',' << seed << ",qfool-subspace-s" << side << ','
                        << budget << ",planned\n";
            }
          }
        }
      }
      return kExitOk;
    }
    for (const auto& cell : PlanCells(spec, dataset)) {
      std::cout << cell.image_id << ',' << cell.seed << ',' << cell.attack << ',' << cell.budget
                << ',' << (done.contains(cell.Key()) ? "done" : "planned") << '\n';
    }
    return kExitOk;
  }

  RunOptions options;
  options.force = args.force;
  options.workers = args.workers;
  options.progress = &std::cerr;
  if (args.sweep) {
    const auto rows = SubspaceSweep(spec, spec.sweep_sides, options);
    WriteSweepCsv(std::cout, rows);
    std::ofstream out(std::filesystem::path(spec.output) / "sweep.csv");
    WriteSweepCsv(out, rows);
  } else {
    const auto records = RunExperiment(spec, options);
    WriteSummaryCsv(std::cout, Summarize(records));
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// utilities

int RunClassifyCommand(const std::string& oracle_spec, const std::string& input,
                       const std::string& shape_text) {
  std::optional<Shape> shape;
  if (!shape_text.empty()) shape = ParseShape(shape_text);
  const Point x = ReadPointFile(input, shape);
  const auto oracle = MakeOracle(oracle_spec, x.dim());
  std::cout << oracle->Classify(x).id << '\n';
  return kExitOk;
}

int RunMakeMlpCommand(const std::string& out, const std::string& layers, std::uint64_t seed,
                      double center) {
  WriteLayerFile(out, RandomReluNetwork(ParseIntList(layers, "layer list"), seed, center));
  std::cerr << "wrote " << out << '\n';
  return kExitOk;
}

int RunMakeAffineCommand(const std::string& out, int classes, int dimension, std::uint64_t seed,
                         double center) {
  WriteLayerFile(out, {RandomAffineLayer(classes, dimension, seed, center)});
  std::cerr << "wrote " << out << '\n';
  return kExitOk;
}

struct DatasetArgs {
  std::string out;
  std::string shape;
  int count = 10;
  std::uint64_t seed = 0;
  double lo = 0.0;
  double hi = 1.0;
  std::string oracle;
  bool anchors = false;
  int max_anchor_draws = 10000;
};

int RunMakeDatasetCommand(const DatasetArgs& args) {
  if (args.count < 1) throw UsageError("--count must be positive");
  if (!(args.lo < args.hi)) throw UsageError("--lo must be below --hi");
  if (args.anchors && args.oracle.empty()) throw UsageError("--anchors needs --oracle");
  Dataset dataset;
  dataset.shape = ParseShape(args.shape);
  std::unique_ptr<DecisionOracle> oracle;
  if (!args.oracle.empty()) oracle = MakeOracle(args.oracle, dataset.shape.size());
  Rng rng = MakeRng(args.seed);
  std::uniform_real_distribution<double> value(args.lo, args.hi);
  std::uniform_real_distribution<double> anywhere(dataset.box.lo, dataset.box.hi);
  for (int i = 0; i < args.count; ++i) {
    Vector v(static_cast<Eigen::Index>(dataset.shape.size()));
    for (auto& x : v) x = value(rng);
    DatasetItem item{"item" + std::to_string(i), Point(v, dataset.shape, dataset.box), {}, {}};
    if (oracle) item.label = oracle->Classify(item.point).id;
    if (args.anchors) {
      for (int draw = 0; draw < args.max_anchor_draws && !item.anchor; ++draw) {
        for (auto& x : v) x = anywhere(rng);
        Point candidate(v, dataset.shape, dataset.box);
        if (oracle->Classify(candidate).id != *item.label) item.anchor = candidate;
      }
      if (!item.anchor) throw Error("no differently labelled anchor found for " + item.id);
    }
    dataset.items.push_back(std::move(item));
  }
  WriteDataset(args.out, dataset);
  std::cerr << "wrote " << dataset.items.size() << " items to " << args.out << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decision-based adversarial attacks against label-only classifiers"};
  app.require_subcommand(1);

  AttackArgs attack;
  auto* attack_cmd = app.add_subcommand("attack", "Run one attack and write its trace");
  attack_cmd->add_option("--oracle", attack.oracle, "affine:FILE, sphere:C,R, mlp:FILE or http:URL")
      ->required();
  attack_cmd->add_option("--input", attack.input, "Input point file")->required();
  attack_cmd->add_option("--mode", attack.mode)
      ->check(CLI::IsMember({"nontargeted", "targeted"}));
  attack_cmd->add_option("--attack", attack.attack)
      ->check(CLI::IsMember({"qfool", "boundary", "gaussian"}));
  attack_cmd->add_option("--target-image", attack.target_image, "Anchor of the target class");
  attack_cmd->add_option("--budget", attack.budget, "Total query budget");
  attack_cmd->add_option("--subspace-side", attack.subspace_side, "Sample probes in a DCT subspace");
  attack_cmd->add_option("--seed", attack.seed);
  attack_cmd->add_option("--config", attack.config_file, "key = value config file");
  attack_cmd->add_option("--out", attack.out, "Trace NDJSON (default stdout)");
  attack_cmd->add_option("--adv-out", attack.adv_out, "Adversarial point file (default OUT.adv)");
  attack_cmd->add_option("--shape", attack.shape, "H,W,C for headerless inputs");
  attack_cmd->add_flag("--no-vectors", attack.no_vectors, "Omit point vectors from the trace");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Run an experiment spec");
  bench_cmd->add_option("--spec", bench.spec, "Experiment spec (JSON)")->required();
  bench_cmd->add_flag("--dry-run", bench.dry_run, "Print the cell plan and exit");
  bench_cmd->add_flag("--force", bench.force, "Re-run cells that already have records");
  bench_cmd->add_flag("--sweep", bench.sweep, "Run the subspace-side sweep");
  bench_cmd->add_option("--sides", bench.sides, "Comma-separated sweep sides");
  bench_cmd->add_option("--workers", bench.workers, "Worker threads (default QFOOL_WORKERS)");

  std::string classify_oracle, classify_input, classify_shape;
  auto* classify_cmd = app.add_subcommand("classify", "Print an oracle's label for a point");
  classify_cmd->add_option("--oracle", classify_oracle)->required();
  classify_cmd->add_option("--input", classify_input)->required();
  classify_cmd->add_option("--shape", classify_shape);

  std::string mlp_out, mlp_layers = "784,128,64,10";
  std::uint64_t mlp_seed = 0;
  double mlp_center = 0.5;
  auto* mlp_cmd = app.add_subcommand("make-mlp", "Write a random ReLU network");
  mlp_cmd->add_option("--out", mlp_out)->required();
  mlp_cmd->add_option("--layers", mlp_layers, "Comma-separated widths, input first");
  mlp_cmd->add_option("--seed", mlp_seed);
  mlp_cmd->add_option("--center", mlp_center, "Input value the first layer is centred on");

  std::string affine_out;
  int affine_classes = 2, affine_dim = 0;
  std::uint64_t affine_seed = 0;
  double affine_center = 0.5;
  auto* affine_cmd = app.add_subcommand("make-affine", "Write a random affine classifier");
  affine_cmd->add_option("--out", affine_out)->required();
  affine_cmd->add_option("--classes", affine_classes);
  affine_cmd->add_option("--dim", affine_dim)->required();
  affine_cmd->add_option("--seed", affine_seed);
  affine_cmd->add_option("--center", affine_center, "Point scored equally by every class");

  DatasetArgs dataset;
  auto* dataset_cmd = app.add_subcommand("make-dataset", "Write a random dataset directory");
  dataset_cmd->add_option("--out", dataset.out)->required();
  dataset_cmd->add_option("--shape", dataset.shape, "H,W,C")->required();
  dataset_cmd->add_option("--count", dataset.count);
  dataset_cmd->add_option("--seed", dataset.seed);
  dataset_cmd->add_option("--lo", dataset.lo, "Lowest sampled value");
  dataset_cmd->add_option("--hi", dataset.hi, "Highest sampled value");
  dataset_cmd->add_option("--oracle", dataset.oracle, "Label items with this oracle");
  dataset_cmd->add_flag("--anchors", dataset.anchors, "Add a differently labelled anchor per item");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitError;
  }

  try {
    if (*attack_cmd) return RunAttackCommand(attack);
    if (*bench_cmd) return RunBenchCommand(bench);
    if (*classify_cmd) return RunClassifyCommand(classify_oracle, classify_input, classify_shape);
    if (*mlp_cmd) return RunMakeMlpCommand(mlp_out, mlp_layers, mlp_seed, mlp_center);
    if (*affine_cmd) {
      return RunMakeAffineCommand(affine_out, affine_classes, affine_dim, affine_seed,
                                  affine_center);
    }
    if (*dataset_cmd) return RunMakeDatasetCommand(dataset);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
