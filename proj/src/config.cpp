#include "qfool/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace qfool {

namespace {

std::string Trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T ParseNumber(const std::string& key, const std::string& text) {
  T value{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw FormatError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

// from_chars for double is missing from older libstdc++ builds.
template <>
double ParseNumber<double>(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  double value = 0.0;
  in >> value;
  if (in.fail() || !in.eof()) {
    throw FormatError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

bool ParseBool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw FormatError("config key '" + key + "': expected a boolean, got '" + text + "'");
}

std::string Format(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

using Setter = std::function<void(AttackConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& Setters() {
  static const std::map<std::string, Setter> setters = {
      {"total_budget", [](AttackConfig& c, const std::string& k, const std::string& v) {
         c.total_budget = ParseNumber<std::int64_t>(k, v);
       }},
      {"unit_batch", [](AttackConfig& c, const std::string& k, const std::string& v) {
         c.unit_batch = ParseNumber<std::int64_t>(k, v);
       }},
      {"improvement_threshold", [](AttackConfig& c, const std::string& k, const std::string& v) {
         c.improvement_threshold = ParseNumber<double>(k, v);
       }},
      {"targeted_step", [](AttackConfig& c, const std::string& k, const std::string& v) {
         c.targeted_step = ParseNumber<double>(k, v);
       }},
      {"initial_noise_norm", [](AttackConfig& c, const std::string& k, const std::string& v) {
         c.initial_noise_norm = ParseNumber<double>(k, v);
       }},
      {"initial_sigma", [](AttackConfig& c, const std::string& k, const std::string& v) {
         c.initial_sigma = ParseNumber<double>(k, v);
       }},
      {"sigma_growth", [](AttackConfig& c, const std::string& k, const std::string& v) {
         c.sigma_growth = ParseNumber<double>(k, v);
       }},
      {"binary_search_tolerance", [](AttackConfig& c, const std::string& k, const std::string& v) {
         c.binary_search_tolerance = ParseNumber<double>(k, v);
       }},
      {"subspace_side", [](AttackConfig& c, const std::string& k, const std::string& v) {
         c.subspace_side = ParseNumber<int>(k, v);
       }},
      {"per_channel_subspace", [](AttackConfig& c, const std::string& k, const std::string& v) {
         c.per_channel_subspace = ParseBool(k, v);
       }},
      {"perturbation_threshold", [](AttackConfig& c, const std::string& k, const std::string& v) {
         c.perturbation_threshold = ParseNumber<double>(k, v);
       }},
      {"rng_seed", [](AttackConfig& c, const std::string& k, const std::string& v) {
         c.rng_seed = ParseNumber<std::uint64_t>(k, v);
       }},
      {"max_initial_draws", [](AttackConfig& c, const std::string& k, const std::string& v) {
         c.max_initial_draws = ParseNumber<int>(k, v);
       }},
      {"targeted_scan_probes", [](AttackConfig& c, const std::string& k, const std::string& v) {
         c.targeted_scan_probes = ParseNumber<int>(k, v);
       }},
      {"max_degenerate_retries", [](AttackConfig& c, const std::string& k, const std::string& v) {
         c.max_degenerate_retries = ParseNumber<int>(k, v);
       }},
      {"max_step_halvings", [](AttackConfig& c, const std::string& k, const std::string& v) {
         c.max_step_halvings = ParseNumber<int>(k, v);
       }},
      {"spherical_step", [](AttackConfig& c, const std::string& k, const std::string& v) {
         c.spherical_step = ParseNumber<double>(k, v);
       }},
      {"source_step", [](AttackConfig& c, const std::string& k, const std::string& v) {
         c.source_step = ParseNumber<double>(k, v);
       }},
  };
  return setters;
}

void Require(bool ok, const std::string& message) {
  if (!ok) throw ContractViolation("invalid config: " + message);
}

}  // namespace

void AttackConfig::Validate() const {
  Require(total_budget >= 0, "total_budget must be >= 0");
  if (unit_batch) {
    Require(*unit_batch >= 1, "unit_batch must be >= 1");
    Require(*unit_batch <= std::max<std::int64_t>(total_budget, 1), "unit_batch must not exceed total_budget");
  }
  if (improvement_threshold) {
    Require(*improvement_threshold > 0.0 && *improvement_threshold < 1.0,
            "improvement_threshold must be in (0, 1)");
  }
  Require(targeted_step > 0.0, "targeted_step must be positive");
  if (initial_noise_norm) Require(*initial_noise_norm > 0.0, "initial_noise_norm must be positive");
  if (initial_sigma) Require(*initial_sigma > 0.0, "initial_sigma must be positive");
  Require(sigma_growth > 1.0, "sigma_growth must be > 1");
  if (binary_search_tolerance) {
    Require(*binary_search_tolerance > 0.0, "binary_search_tolerance must be positive");
  }
  if (subspace_side) Require(*subspace_side >= 1, "subspace_side must be >= 1");
  if (perturbation_threshold) {
    Require(*perturbation_threshold > 0.0, "perturbation_threshold must be positive");
  }
  Require(max_initial_draws >= 1, "max_initial_draws must be >= 1");
  Require(targeted_scan_probes >= 1, "targeted_scan_probes must be >= 1");
  Require(max_degenerate_retries >= 1, "max_degenerate_retries must be >= 1");
  Require(max_step_halvings >= 0, "max_step_halvings must be >= 0");
  Require(spherical_step > 0.0 && source_step > 0.0, "boundary-attack steps must be positive");
}

int DefaultSubspaceSide(const Shape& shape) {
  const int side = static_cast<int>(std::lround(0.33 * std::min(shape.height, shape.width)));
  return std::max(side, 1);
}

ResolvedConfig Resolve(const AttackConfig& config, const Point& x0, AttackMode mode) {
  config.Validate();
  if (config.subspace_side &&
      *config.subspace_side > std::min(x0.shape().height, x0.shape().width)) {
    throw ContractViolation("subspace_side " + std::to_string(*config.subspace_side) +
                            " exceeds min(h, w) of shape " + x0.shape().ToString());
  }
  const bool targeted = mode == AttackMode::kTargeted;
  const double diameter = x0.box().Diameter(x0.dim());

  ResolvedConfig r;
  r.mode = mode;
  r.total_budget = config.total_budget;
  const std::int64_t default_batch = targeted ? 200 : 100;
  r.unit_batch = config.unit_batch.value_or(
      std::max<std::int64_t>(1, std::min(default_batch, config.total_budget)));
  r.improvement_threshold = config.improvement_threshold.value_or(targeted ? 0.9 : 0.99);
  r.targeted_step = config.targeted_step;
  r.initial_noise_norm = config.initial_noise_norm.value_or(1e-3 * diameter);
  r.initial_sigma = config.initial_sigma.value_or(0.02 * x0.box().range());
  r.sigma_growth = config.sigma_growth;
  r.tolerance = config.binary_search_tolerance.value_or(1e-5 * diameter);
  // Per-coordinate std of the full box range puts the draw norm at the diameter.
  r.sigma_cap = x0.box().range();
  r.subspace_side = config.subspace_side;
  r.per_channel_subspace = config.per_channel_subspace;
  r.perturbation_threshold = config.perturbation_threshold;
  r.rng_seed = config.rng_seed;
  r.max_initial_draws = config.max_initial_draws;
  r.targeted_scan_probes = config.targeted_scan_probes;
  r.max_degenerate_retries = config.max_degenerate_retries;
  r.max_step_halvings = config.max_step_halvings;
  r.spherical_step = config.spherical_step;
  r.source_step = config.source_step;
  return r;
}

void SetConfigValue(AttackConfig& config, const std::string& key, const std::string& value) {
  const auto& setters = Setters();
  auto it = setters.find(key);
  if (it == setters.end()) throw FormatError("unknown config key '" + key + "'");
  it->second(config, key, value);
}

AttackConfig ParseConfig(std::istream& in, const AttackConfig& base) {
  AttackConfig config = base;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    try {
      SetConfigValue(config, key, value);
    } catch (const FormatError& e) {
      throw FormatError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

AttackConfig LoadConfigFile(const std::string& path, const AttackConfig& base) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config file " + path);
  return ParseConfig(in, base);
}

std::vector<std::pair<std::string, std::string>> ConfigEntries(const AttackConfig& c) {
  std::vector<std::pair<std::string, std::string>> out;
  out.emplace_back("total_budget", std::to_string(c.total_budget));
  if (c.unit_batch) out.emplace_back("unit_batch", std::to_string(*c.unit_batch));
  if (c.improvement_threshold) {
    out.emplace_back("improvement_threshold", Format(*c.improvement_threshold));
  }
  out.emplace_back("targeted_step", Format(c.targeted_step));
  if (c.initial_noise_norm) out.emplace_back("initial_noise_norm", Format(*c.initial_noise_norm));
  if (c.initial_sigma) out.emplace_back("initial_sigma", Format(*c.initial_sigma));
  out.emplace_back("sigma_growth", Format(c.sigma_growth));
  if (c.binary_search_tolerance) {
    out.emplace_back("binary_search_tolerance", Format(*c.binary_search_tolerance));
  }
  if (c.subspace_side) out.emplace_back("subspace_side", std::to_string(*c.subspace_side));
  out.emplace_back("per_channel_subspace", c.per_channel_subspace ? "true" : "false");
  if (c.perturbation_threshold) {
    out.emplace_back("perturbation_threshold", Format(*c.perturbation_threshold));
  }
  out.emplace_back("rng_seed", std::to_string(c.rng_seed));
  out.emplace_back("max_initial_draws", std::to_string(c.max_initial_draws));
  out.emplace_back("targeted_scan_probes", std::to_string(c.targeted_scan_probes));
  out.emplace_back("max_degenerate_retries", std::to_string(c.max_degenerate_retries));
  out.emplace_back("max_step_halvings", std::to_string(c.max_step_halvings));
  out.emplace_back("spherical_step", Format(c.spherical_step));
  out.emplace_back("source_step", Format(c.source_step));
  return out;
}

}  // namespace qfool
