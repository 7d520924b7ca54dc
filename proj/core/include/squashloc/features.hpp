#pragma once

#include "squashloc/detect.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace squashloc {

/// Impact-surface classes. `false_event` covers onsets that are not ball
/// impacts.
enum class ClassLabel { front_wall, racquet, floor, glass, false_event };

inline constexpr ClassLabel kImpactClasses[] = {ClassLabel::front_wall, ClassLabel::racquet,
                                                ClassLabel::floor, ClassLabel::glass};

std::string_view to_string(ClassLabel c);
ClassLabel class_label_from_string(std::string_view s);

/// Temporal (T1) or spectral (T2) feature set.
enum class FeatureKind { T1, T2 };

std::string_view to_string(FeatureKind k);
FeatureKind feature_kind_from_string(std::string_view s);

struct FeatureVector {
  FeatureKind kind = FeatureKind::T1;
  std::vector<double> values;
  int channel = 0;
  std::int64_t detection_index = 0;
};

inline constexpr std::size_t kDefaultFeatureHalfWidth = 300;

/// 2w+1 raw samples centred on the detection. `stream_start` is the absolute
/// index of stream[0]. Throws DataError when the window leaves the stream.
FeatureVector extract_t1(std::span<const float> stream, const Detection& detection,
                         std::size_t w = kDefaultFeatureHalfWidth, std::int64_t stream_start = 0);

/// |DFT| of the w samples starting at the detection.
FeatureVector extract_t2(std::span<const float> stream, const Detection& detection,
                         std::size_t w = kDefaultFeatureHalfWidth, std::int64_t stream_start = 0);

FeatureVector extract(FeatureKind kind, std::span<const float> stream, const Detection& detection,
                      std::size_t w = kDefaultFeatureHalfWidth, std::int64_t stream_start = 0);

/// Per-vector scaling applied before the network sees a feature.
enum class Normalization { none, max_abs, sum };

std::string_view to_string(Normalization n);
Normalization normalization_from_string(std::string_view s);
/// Default for each feature kind: T1 by max |x|, T2 by sum.
Normalization default_normalization(FeatureKind kind);

std::vector<double> normalize(std::span<const double> x, Normalization n);

}  // namespace squashloc
