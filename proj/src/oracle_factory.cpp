#include <sstream>

#include "qfool/http_oracle.hpp"
#include "qfool/io.hpp"
#include "qfool/oracle.hpp"

namespace qfool {
namespace {

double ParseNumber(const std::string& text, const std::string& spec) {
  std::istringstream in(text);
  double value = 0.0;
  if (!(in >> value) || !(in >> std::ws).eof()) {
    throw FormatError("bad number '" + text + "' in oracle spec '" + spec + "'");
  }
  return value;
}

void CheckDimension(const DecisionOracle& oracle, std::size_t dimension, const std::string& spec) {
  if (dimension != 0 && oracle.dimension() != dimension) {
    throw FormatError("oracle '" + spec + "' takes " + std::to_string(oracle.dimension()) +
                      " inputs, expected " + std::to_string(dimension));
  }
}

}  // namespace

std::unique_ptr<DecisionOracle> MakeOracle(const std::string& spec, std::size_t dimension) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) {
    throw FormatError("oracle spec '" + spec + "' must look like KIND:ARGS");
  }
  const std::string kind = spec.substr(0, colon);
  const std::string args = spec.substr(colon + 1);

  if (kind == "affine") {
    auto layers = ReadLayerFile(args);
    if (layers.size() != 1) {
      throw FormatError(args + ": affine oracle file must hold exactly one layer");
    }
    auto oracle = std::make_unique<AffineMulticlassOracle>(std::move(layers.front().weights),
                                                           std::move(layers.front().bias));
    CheckDimension(*oracle, dimension, spec);
    return oracle;
  }
  if (kind == "mlp") {
    auto oracle = std::make_unique<MlpOracle>(MlpOracle::Load(args));
    CheckDimension(*oracle, dimension, spec);
    return oracle;
  }
  if (kind == "sphere") {
    const auto comma = args.find(',');
    if (comma == std::string::npos) throw FormatError("sphere spec must be sphere:C,R");
    if (dimension == 0) throw FormatError("sphere oracle needs the input dimension");
    const double c = ParseNumber(args.substr(0, comma), spec);
    const double r = ParseNumber(args.substr(comma + 1), spec);
    return std::make_unique<SphereOracle>(
        Vector::Constant(static_cast<Eigen::Index>(dimension), c), r);
  }
  if (kind == "http" || kind == "https") {
    if (dimension == 0) throw FormatError("HTTP oracle needs the input dimension");
    // "http:http://host/..." and "http://host/..." are both accepted.
    const std::string url = args.rfind("//", 0) == 0 ? spec : args;
    return std::make_unique<HttpOracle>(url, dimension);
  }
  throw FormatError("unknown oracle kind '" + kind + "' (expected affine, sphere, mlp or http)");
}

MlpOracle MlpOracle::Load(const std::string& path) { return MlpOracle(ReadLayerFile(path)); }

}  // namespace qfool
