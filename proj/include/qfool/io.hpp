#ifndef QFOOL_IO_HPP
#define QFOOL_IO_HPP

#include <optional>
#include <string>
#include <vector>

#include "qfool/core.hpp"
#include "qfool/oracle.hpp"

namespace qfool {

// Layer file, little-endian:
//   8 bytes  magic "QFMLP001"
//   u32      layer count L >= 1
//   L times: u32 rows, u32 cols, rows*cols f32 weights (row-major), rows f32 biases
// Consecutive layers must chain (cols of layer k+1 == rows of layer k) and
// the file must end exactly after the last layer.
inline constexpr char kLayerMagic[8] = {'Q', 'F', 'M', 'L', 'P', '0', '0', '1'};

std::vector<DenseLayer> ReadLayerFile(const std::string& path);
void WriteLayerFile(const std::string& path, const std::vector<DenseLayer>& layers);

// Point file, little-endian:
//   4 bytes  magic "QFPT"
//   u32      height, width, channels
//   h*w*c    f32 values, HWC row-major
// Files without the magic are read as headerless f32 arrays and need a
// shape (or are treated as flat).
inline constexpr char kPointMagic[4] = {'Q', 'F', 'P', 'T'};

Point ReadPointFile(const std::string& path, std::optional<Shape> shape = {}, Box box = {});
void WritePointFile(const std::string& path, const Point& point);

std::vector<float> ReadRawF32(const std::string& path);
void WriteRawF32(const std::string& path, const Vector& values);

}  // namespace qfool

#endif  // QFOOL_IO_HPP
