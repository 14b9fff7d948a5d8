#include "qfool/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

namespace qfool {
namespace {

std::string ReadAll(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void WriteAll(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for " + path);
}

template <typename T>
T FromLittle(T value) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return value;
}

class Reader {
 public:
  Reader(const std::string& bytes, std::string path) : bytes_(bytes), path_(std::move(path)) {}

  template <typename T>
  T Get(const char* what) {
    if (remaining() < sizeof(T)) {
      throw FormatError(path_ + ": truncated while reading " + what);
    }
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return FromLittle(value);
  }

  void GetFloats(double* dst, std::size_t count, const char* what) {
    if (remaining() / sizeof(float) < count) {
      throw FormatError(path_ + ": truncated while reading " + what);
    }
    for (std::size_t i = 0; i < count; ++i) dst[i] = static_cast<double>(Get<float>(what));
  }

  bool Match(const char* magic, std::size_t n) {
    if (remaining() < n || std::memcmp(bytes_.data() + pos_, magic, n) != 0) return false;
    pos_ += n;
    return true;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::string& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

template <typename T>
void Put(std::string& out, T value) {
  value = FromLittle(value);
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

void PutFloats(std::string& out, const double* src, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) Put(out, static_cast<float>(src[i]));
}

}  // namespace

std::vector<DenseLayer> ReadLayerFile(const std::string& path) {
  const std::string bytes = ReadAll(path);
  Reader r(bytes, path);
  if (!r.Match(kLayerMagic, sizeof(kLayerMagic))) throw FormatError(path + ": bad magic");
  const auto count = r.Get<std::uint32_t>("layer count");
  if (count == 0) throw FormatError(path + ": no layers");
  std::vector<DenseLayer> layers;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto rows = r.Get<std::uint32_t>("rows");
    const auto cols = r.Get<std::uint32_t>("cols");
    if (rows == 0 || cols == 0) {
      throw FormatError(path + ": layer " + std::to_string(k) + " has an empty dimension");
    }
    if (!layers.empty() && static_cast<Eigen::Index>(cols) != layers.back().weights.rows()) {
      throw FormatError(path + ": layer " + std::to_string(k) + " expects " +
                        std::to_string(cols) + " inputs but previous layer has " +
                        std::to_string(layers.back().weights.rows()) + " outputs");
    }
    // Row-major on disk; fill a row-major buffer and copy into Eigen storage.
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w(rows, cols);
    r.GetFloats(w.data(), static_cast<std::size_t>(rows) * cols, "weights");
    Vector b(rows);
    r.GetFloats(b.data(), rows, "biases");
    layers.push_back({w, b});
  }
  if (r.remaining() != 0) throw FormatError(path + ": trailing bytes after last layer");
  return layers;
}

void WriteLayerFile(const std::string& path, const std::vector<DenseLayer>& layers) {
  if (layers.empty()) throw ContractViolation("no layers to write");
  std::string out(kLayerMagic, sizeof(kLayerMagic));
  Put(out, static_cast<std::uint32_t>(layers.size()));
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& layer = layers[k];
    if (layer.bias.size() != layer.weights.rows()) {
      throw ContractViolation("bias length does not match layer outputs");
    }
    if (k > 0 && layer.weights.cols() != layers[k - 1].weights.rows()) {
      throw ContractViolation("layer " + std::to_string(k) + " does not chain to the previous one");
    }
    Put(out, static_cast<std::uint32_t>(layer.weights.rows()));
    Put(out, static_cast<std::uint32_t>(layer.weights.cols()));
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w = layer.weights;
    PutFloats(out, w.data(), static_cast<std::size_t>(w.size()));
    PutFloats(out, layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
  }
  WriteAll(path, out);
}

Point ReadPointFile(const std::string& path, std::optional<Shape> shape, Box box) {
  const std::string bytes = ReadAll(path);
  Reader r(bytes, path);
  if (r.Match(kPointMagic, sizeof(kPointMagic))) {
    Shape stored;
    stored.height = static_cast<int>(r.Get<std::uint32_t>("height"));
    stored.width = static_cast<int>(r.Get<std::uint32_t>("width"));
    stored.channels = static_cast<int>(r.Get<std::uint32_t>("channels"));
    if (stored.size() == 0) throw FormatError(path + ": empty shape");
    if (shape && !(*shape == stored)) {
      throw FormatError(path + ": shape " + stored.ToString() + " does not match expected " +
                        shape->ToString());
    }
    if (r.remaining() != stored.size() * sizeof(float)) {
      throw FormatError(path + ": expected " + std::to_string(stored.size()) + " values");
    }
    Vector v(static_cast<Eigen::Index>(stored.size()));
    r.GetFloats(v.data(), stored.size(), "values");
    return Point(std::move(v), stored, box);
  }
  if (bytes.size() % sizeof(float) != 0 || bytes.empty()) {
    throw FormatError(path + ": not a point file and not a whole number of f32 values");
  }
  const std::size_t n = bytes.size() / sizeof(float);
  const Shape s = shape ? *shape : Shape::Flat(n);
  if (s.size() != n) {
    throw FormatError(path + ": holds " + std::to_string(n) + " values, shape " + s.ToString() +
                      " needs " + std::to_string(s.size()));
  }
  Vector v(static_cast<Eigen::Index>(n));
  r.GetFloats(v.data(), n, "values");
  return Point(std::move(v), s, box);
}

void WritePointFile(const std::string& path, const Point& point) {
  std::string out(kPointMagic, sizeof(kPointMagic));
  Put(out, static_cast<std::uint32_t>(point.shape().height));
  Put(out, static_cast<std::uint32_t>(point.shape().width));
  Put(out, static_cast<std::uint32_t>(point.shape().channels));
  PutFloats(out, point.values().data(), point.dim());
  WriteAll(path, out);
}

std::vector<float> ReadRawF32(const std::string& path) {
  const std::string bytes = ReadAll(path);
  if (bytes.size() % sizeof(float) != 0) {
    throw FormatError(path + ": size is not a multiple of 4 bytes");
  }
  Reader r(bytes, path);
  std::vector<float> out(bytes.size() / sizeof(float));
  for (auto& f : out) f = r.Get<float>("values");
  return out;
}

void WriteRawF32(const std::string& path, const Vector& values) {
  std::string out;
  PutFloats(out, values.data(), static_cast<std::size_t>(values.size()));
  WriteAll(path, out);
}

}  // namespace qfool
