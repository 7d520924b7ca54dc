#include "squashloc/features.hpp"

#include "squashloc/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace squashloc {

std::string_view to_string(ClassLabel c) {
  switch (c) {
    case ClassLabel::front_wall: return "front_wall";
    case ClassLabel::racquet: return "racquet";
    case ClassLabel::floor: return "floor";
    case ClassLabel::glass: return "glass";
    case ClassLabel::false_event: return "false_event";
  }
  return "false_event";
}

ClassLabel class_label_from_string(std::string_view s) {
  for (ClassLabel c : {ClassLabel::front_wall, ClassLabel::racquet, ClassLabel::floor,
                       ClassLabel::glass, ClassLabel::false_event}) {
    if (s == to_string(c)) return c;
  }
  throw DataError("unknown class label '" + std::string(s) + "'");
}

std::string_view to_string(FeatureKind k) { return k == FeatureKind::T1 ? "T1" : "T2"; }

FeatureKind feature_kind_from_string(std::string_view s) {
  if (s == "T1" || s == "t1") return FeatureKind::T1;
  if (s == "T2" || s == "t2") return FeatureKind::T2;
  throw ConfigError("unknown feature kind '" + std::string(s) + "'");
}

namespace {

std::size_t checked_offset(std::span<const float> stream, std::int64_t first, std::size_t len,
                           std::int64_t stream_start) {
  const std::int64_t begin = first - stream_start;
  if (begin < 0 || begin + static_cast<std::int64_t>(len) > static_cast<std::int64_t>(stream.size())) {
    throw DataError("feature window [" + std::to_string(first) + ", +" + std::to_string(len) +
                    ") exceeds the stream");
  }
  return static_cast<std::size_t>(begin);
}

}  // namespace

FeatureVector extract_t1(std::span<const float> stream, const Detection& detection, std::size_t w,
                         std::int64_t stream_start) {
  const std::size_t len = 2 * w + 1;
  const std::size_t off = checked_offset(stream, detection.sample_index - static_cast<std::int64_t>(w),
                                         len, stream_start);
  FeatureVector fv{FeatureKind::T1, {}, detection.channel, detection.sample_index};
  fv.values.assign(stream.begin() + static_cast<std::ptrdiff_t>(off),
                   stream.begin() + static_cast<std::ptrdiff_t>(off + len));
  return fv;
}

FeatureVector extract_t2(std::span<const float> stream, const Detection& detection, std::size_t w,
                         std::int64_t stream_start) {
  const std::size_t off = checked_offset(stream, detection.sample_index, w, stream_start);
  std::vector<double> window(stream.begin() + static_cast<std::ptrdiff_t>(off),
                             stream.begin() + static_cast<std::ptrdiff_t>(off + w));
  const auto spectrum = dft(window);
  FeatureVector fv{FeatureKind::T2, std::vector<double>(w), detection.channel, detection.sample_index};
  std::transform(spectrum.begin(), spectrum.end(), fv.values.begin(), [](auto z) { return std::abs(z); });
  return fv;
}

FeatureVector extract(FeatureKind kind, std::span<const float> stream, const Detection& detection,
                      std::size_t w, std::int64_t stream_start) {
  return kind == FeatureKind::T1 ? extract_t1(stream, detection, w, stream_start)
                                 : extract_t2(stream, detection, w, stream_start);
}

std::string_view to_string(Normalization n) {
  switch (n) {
    case Normalization::none: return "none";
    case Normalization::max_abs: return "max_abs";
    case Normalization::sum: return "sum";
  }
  return "none";
}

Normalization normalization_from_string(std::string_view s) {
  if (s == "none") return Normalization::none;
  if (s == "max_abs") return Normalization::max_abs;
  if (s == "sum") return Normalization::sum;
  throw DataError("unknown normalization '" + std::string(s) + "'");
}

Normalization default_normalization(FeatureKind kind) {
  return kind == FeatureKind::T1 ? Normalization::max_abs : Normalization::sum;
}

std::vector<double> normalize(std::span<const double> x, Normalization n) {
  std::vector<double> out(x.begin(), x.end());
  double scale = 0.0;
  if (n == Normalization::max_abs) {
    for (double v : x) scale = std::max(scale, std::abs(v));
  } else if (n == Normalization::sum) {
    for (double v : x) scale += std::abs(v);
  }
  if (scale > 0.0) {
    for (double& v : out) v /= scale;
  }
  return out;
}

}  // namespace squashloc
