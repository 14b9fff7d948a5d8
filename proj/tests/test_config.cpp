#include <doctest.h>

#include <sstream>

#include "qfool/config.hpp"

using namespace qfool;

TEST_SUITE("config") {
  TEST_CASE("defaults resolve per mode") {
    const Point x0(Vector::Constant(100, 0.5), Shape::Flat(100));
    AttackConfig config;
    config.total_budget = 5000;
    const ResolvedConfig nt = Resolve(config, x0, AttackMode::kNonTargeted);
    CHECK(nt.unit_batch == 100);
    CHECK(nt.improvement_threshold == 0.99);
    CHECK(nt.initial_noise_norm == doctest::Approx(1e-2));
    CHECK(nt.tolerance == doctest::Approx(1e-4));
    CHECK(nt.initial_sigma == doctest::Approx(0.02));
    const ResolvedConfig t = Resolve(config, x0, AttackMode::kTargeted);
    CHECK(t.unit_batch == 200);
    CHECK(t.improvement_threshold == 0.9);
  }

  TEST_CASE("unit batch never exceeds a small budget") {
    const Point x0(Vector::Constant(10, 0.5), Shape::Flat(10));
    AttackConfig config;
    config.total_budget = 30;
    CHECK(Resolve(config, x0, AttackMode::kNonTargeted).unit_batch == 30);
    config.total_budget = 0;
    CHECK(Resolve(config, x0, AttackMode::kNonTargeted).unit_batch == 1);
  }

  TEST_CASE("validation") {
    const auto invalid = [](auto mutate) {
      AttackConfig c;
      mutate(c);
      CHECK_THROWS_AS(c.Validate(), ContractViolation);
    };
    invalid([](AttackConfig& c) { c.total_budget = -1; });
    invalid([](AttackConfig& c) { c.unit_batch = 0; });
    invalid([](AttackConfig& c) { c.unit_batch = 2000; });
    invalid([](AttackConfig& c) { c.improvement_threshold = 1.0; });
    invalid([](AttackConfig& c) { c.sigma_growth = 1.0; });
    invalid([](AttackConfig& c) { c.subspace_side = 0; });
    invalid([](AttackConfig& c) { c.initial_noise_norm = -1.0; });
    CHECK_NOTHROW(AttackConfig{}.Validate());
  }

  TEST_CASE("subspace side is bounded by the image") {
    const Point x0(Vector::Constant(64, 0.5), Shape{8, 8, 1});
    AttackConfig config;
    config.subspace_side = 9;
    CHECK_THROWS_AS(Resolve(config, x0, AttackMode::kNonTargeted), ContractViolation);
    config.subspace_side = 8;
    CHECK_NOTHROW(Resolve(config, x0, AttackMode::kNonTargeted));
  }

  TEST_CASE("default subspace side") {
    CHECK(DefaultSubspaceSide(Shape{32, 32, 1}) == 11);
    CHECK(DefaultSubspaceSide(Shape{224, 224, 3}) == 74);
    CHECK(DefaultSubspaceSide(Shape{1, 1, 1}) == 1);
  }

  TEST_CASE("config file parsing") {
    std::istringstream in(
        "# comment\n"
        "total_budget = 750\n"
        "unit_batch=50   # trailing comment\n"
        "\n"
        "subspace_side = 4\n"
        "per_channel_subspace = true\n"
        "improvement_threshold = 0.5\n");
    const AttackConfig c = ParseConfig(in);
    CHECK(c.total_budget == 750);
    CHECK(c.unit_batch == 50);
    CHECK(c.subspace_side == 4);
    CHECK(c.per_channel_subspace);
    CHECK(c.improvement_threshold == 0.5);
  }

  TEST_CASE("config file errors") {
    std::istringstream unknown("frobnicate = 1\n");
    CHECK_THROWS_AS(ParseConfig(unknown), FormatError);
    std::istringstream bad_value("total_budget = lots\n");
    CHECK_THROWS_AS(ParseConfig(bad_value), FormatError);
    std::istringstream no_equals("total_budget 5\n");
    CHECK_THROWS_AS(ParseConfig(no_equals), FormatError);
    AttackConfig c;
    CHECK_THROWS_AS(SetConfigValue(c, "per_channel_subspace", "maybe"), FormatError);
  }

  TEST_CASE("entries round-trip through the parser") {
    AttackConfig c;
    c.total_budget = 1234;
    c.unit_batch = 17;
    c.initial_sigma = 0.1 + 0.2;
    c.rng_seed = 18446744073709551615ull;
    c.perturbation_threshold = 1.0 / 3.0;
    std::ostringstream text;
    for (const auto& [key, value] : ConfigEntries(c)) text << key << " = " << value << "\n";
    std::istringstream in(text.str());
    const AttackConfig back = ParseConfig(in);
    std::ostringstream again;
    for (const auto& [key, value] : ConfigEntries(back)) again << key << " = " << value << "\n";
    CHECK(again.str() == text.str());
    CHECK(back.initial_sigma == c.initial_sigma);
    CHECK(back.rng_seed == c.rng_seed);
  }

  TEST_CASE("unset optionals are omitted from entries") {
    for (const auto& [key, value] : ConfigEntries(AttackConfig{})) {
      CHECK(key != "unit_batch");
      CHECK(key != "subspace_side");
    }
  }
}
