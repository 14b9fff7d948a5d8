#ifndef QFOOL_CONFIG_HPP
#define QFOOL_CONFIG_HPP

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qfool/core.hpp"

namespace qfool {

enum class AttackMode { kNonTargeted, kTargeted };

// User-facing attack settings. Unset optionals take defaults that depend on
// the input (dimension, box) or on the attack mode; see Resolve().
//
// Plain-text file form, one `key = value` per line, `#` starts a comment:
//
//   total_budget = 2000
//   unit_batch = 100
//   subspace_side = 8
//
// Keys are the field names below.
struct AttackConfig {
  std::int64_t total_budget = 1000;
  std::optional<std::int64_t> unit_batch;
  std::optional<double> improvement_threshold;
  // Step off the boundary in the targeted walk, as a fraction of ||P_i - x0||.
  double targeted_step = 1.0;
  std::optional<double> initial_noise_norm;
  // Per-coordinate standard deviation of the first initial-point draw.
  std::optional<double> initial_sigma;
  double sigma_growth = 2.0;
  std::optional<double> binary_search_tolerance;
  std::optional<int> subspace_side;
  bool per_channel_subspace = false;
  std::optional<double> perturbation_threshold;
  std::uint64_t rng_seed = 0;

  int max_initial_draws = 64;
  int targeted_scan_probes = 32;
  int max_degenerate_retries = 3;
  int max_step_halvings = 5;

  // Boundary-attack baseline.
  double spherical_step = 0.1;
  double source_step = 0.05;

  // Throws ContractViolation on out-of-range values.
  void Validate() const;
};

// Fully resolved settings for one attack run on one input.
struct ResolvedConfig {
  AttackMode mode = AttackMode::kNonTargeted;
  std::int64_t total_budget = 0;
  std::int64_t unit_batch = 0;
  double improvement_threshold = 0.0;
  double targeted_step = 0.0;
  double initial_noise_norm = 0.0;
  double initial_sigma = 0.0;
  double sigma_growth = 0.0;
  double tolerance = 0.0;
  double sigma_cap = 0.0;
  std::optional<int> subspace_side;
  bool per_channel_subspace = false;
  std::optional<double> perturbation_threshold;
  std::uint64_t rng_seed = 0;
  int max_initial_draws = 0;
  int targeted_scan_probes = 0;
  int max_degenerate_retries = 0;
  int max_step_halvings = 0;
  double spherical_step = 0.0;
  double source_step = 0.0;
};

ResolvedConfig Resolve(const AttackConfig& config, const Point& x0, AttackMode mode);

// Default subspace side for an h x w input: round(0.33 * min(h, w)), at least 1.
int DefaultSubspaceSide(const Shape& shape);

// Sets one field from its textual form. Throws FormatError for unknown keys
// or unparsable values.
void SetConfigValue(AttackConfig& config, const std::string& key, const std::string& value);

AttackConfig ParseConfig(std::istream& in, const AttackConfig& base = {});
AttackConfig LoadConfigFile(const std::string& path, const AttackConfig& base = {});

// Every field as (key, value) text, unset optionals omitted. Round-trips
// through ParseConfig.
std::vector<std::pair<std::string, std::string>> ConfigEntries(const AttackConfig& config);

}  // namespace qfool

#endif  // QFOOL_CONFIG_HPP
