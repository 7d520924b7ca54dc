#pragma once

#include "squashloc/detect.hpp"
#include "squashloc/geometry.hpp"
#include "squashloc/localize.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace squashloc {

struct MatcherParams {
  std::int64_t max_spread = 0;  // [samples]; 0 = physical bound of the court
  std::size_t min_channels = 4;

  /// ceil(court diagonal / c * sample_rate).
  static std::int64_t physical_bound(const CourtGeometry& court, const MicArray& array);
};

struct ClassifierConfig {
  std::optional<std::string> bundle;  // absent: classification disabled
};

struct IoConfig {
  std::vector<std::string> inputs;  // one multichannel WAV or one mono WAV per channel
  std::vector<int> channel_map;     // mic i reads source channel channel_map[i]; empty = identity
  std::string output;               // empty: stdout
  std::size_t block_size = 0;       // streaming block in samples; 0 = whole stream
};

struct PipelineConfig {
  CourtGeometry geometry = CourtGeometry::standard();
  MicArray array = MicArray::default_layout(CourtGeometry::standard());
  DetectionMethod method = DetectionMethod::surprise;
  DetectorParams detector = DetectorParams::surprise_defaults();
  MatcherParams matcher;
  LocalizerOptions localizer;
  ClassifierConfig classifier;
  IoConfig io;

  /// Fills derived defaults (max_spread) and checks every section. Throws
  /// ConfigError.
  void finalize();
};

/// Parses the JSON configuration. Every section and key is optional;
/// unknown keys are rejected at every level. Relative paths in `io` and
/// `classifier` are resolved against `base_dir` when it is non-empty.
PipelineConfig parse_config(const std::string& json_text, const std::string& base_dir = {});
PipelineConfig load_config(const std::string& path);
/// Fully expanded JSON for `config` (round-trips through parse_config).
std::string dump_config(const PipelineConfig& config);

}  // namespace squashloc
