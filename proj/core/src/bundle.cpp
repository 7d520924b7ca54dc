// Classifier bundle file layout (all integers and floats little-endian):
//
//   char[4]  magic "SQLB"
//   u32      format version (1)
//   u32      entry count
//   per entry:
//     u8     class label        (ClassLabel ordinal)
//     u8     input kind         (0 = T1, 1 = T2)
//     u8     normalization      (0 none, 1 max_abs, 2 sum)
//     u8     hidden activation  (0 relu, 1 tanh)
//     i32    channel
//     u32    feature half-width w
//     u32    layer count L (input + hidden + output)
//     u32[L] layer sizes
//     f64[]  per layer: weights row-major (out x in), then biases (out)
//     f64    cutoff
//     f64    precision

#include "squashloc/classify.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>

namespace squashloc {

namespace {

constexpr char kMagic[4] = {'S', 'Q', 'L', 'B'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}
  void bytes(const void* p, std::size_t n) { os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 4);
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    bytes(b, 8);
  }

 private:
  std::ostream& os_;
};

class Reader {
 public:
  Reader(std::istream& is, std::string path) : is_(is), path_(std::move(path)) {}
  void bytes(void* p, std::size_t n) {
    is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!is_) throw DataError("classifier bundle '" + path_ + "' is truncated");
  }
  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() {
    unsigned char b[8];
    bytes(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(v);
  }

 private:
  std::istream& is_;
  std::string path_;
};

template <typename E>
E checked_enum(std::uint8_t v, std::uint8_t count, const char* what) {
  if (v >= count) throw DataError(std::string("classifier bundle has an invalid ") + what);
  return static_cast<E>(v);
}

}  // namespace

void ClassifierBundle::save(const std::string& path) const {
  validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write classifier bundle '" + path + "'");
  Writer w(os);
  w.bytes(kMagic, 4);
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    w.u8(static_cast<std::uint8_t>(e.label));
    w.u8(static_cast<std::uint8_t>(e.input_kind));
    w.u8(static_cast<std::uint8_t>(e.model.normalization));
    w.u8(static_cast<std::uint8_t>(e.model.hidden));
    w.i32(e.channel);
    w.u32(static_cast<std::uint32_t>(e.feature_half_width));
    w.u32(static_cast<std::uint32_t>(e.model.layer_sizes.size()));
    for (auto s : e.model.layer_sizes) w.u32(static_cast<std::uint32_t>(s));
    for (const auto& layer : e.model.layers) {
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) w.f64(layer.weights(r, c));
      }
      for (Eigen::Index r = 0; r < layer.bias.size(); ++r) w.f64(layer.bias(r));
    }
    w.f64(e.cutoff);
    w.f64(e.precision);
  }
  if (!os) throw DataError("failed writing classifier bundle '" + path + "'");
}

ClassifierBundle ClassifierBundle::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open classifier bundle '" + path + "'");
  Reader r(is, path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw DataError("'" + path + "' is not a classifier bundle");
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion) {
    throw DataError("unsupported classifier bundle version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  if (count > 64) throw DataError("classifier bundle entry count is implausible");
  ClassifierBundle b;
  for (std::uint32_t k = 0; k < count; ++k) {
    BundleEntry e;
    e.label = checked_enum<ClassLabel>(r.u8(), 5, "class label");
    e.input_kind = checked_enum<FeatureKind>(r.u8(), 2, "input kind");
    const auto norm = checked_enum<Normalization>(r.u8(), 3, "normalization");
    const auto act = checked_enum<Activation>(r.u8(), 2, "activation");
    e.channel = r.i32();
    e.feature_half_width = r.u32();
    const std::uint32_t nlayers = r.u32();
    if (nlayers < 2 || nlayers > 1024) throw DataError("classifier bundle layer count is implausible");
    std::vector<std::size_t> sizes;
    for (std::uint32_t i = 0; i < nlayers; ++i) {
      const std::uint32_t s = r.u32();
      if (s == 0 || s > (1u << 20)) throw DataError("classifier bundle layer size is implausible");
      sizes.push_back(s);
    }
    e.model = MlpModel::zeros(sizes);
    e.model.normalization = norm;
    e.model.hidden = act;
    for (auto& layer : e.model.layers) {
      for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
        for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) layer.weights(i, j) = r.f64();
      }
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = r.f64();
    }
    e.cutoff = r.f64();
    e.precision = r.f64();
    b.entries.push_back(std::move(e));
  }
  b.validate();
  return b;
}

std::string ClassifierBundle::manifest() const {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : entries) {
    j["entries"].push_back({
        {"class", to_string(e.label)},
        {"channel", e.channel},
        {"input_kind", to_string(e.input_kind)},
        {"feature_half_width", e.feature_half_width},
        {"architecture", e.model.layer_sizes},
        {"activation", to_string(e.model.hidden)},
        {"normalization", to_string(e.model.normalization)},
        {"parameters", e.model.parameter_count()},
        {"cutoff", e.cutoff},
        {"precision", e.precision},
    });
  }
  return j.dump(2);
}

}  // namespace squashloc
