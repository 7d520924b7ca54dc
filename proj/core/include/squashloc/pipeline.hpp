#pragma once

#include "squashloc/classify.hpp"
#include "squashloc/config.hpp"
#include "squashloc/detect.hpp"
#include "squashloc/localize.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace squashloc {

struct ClassifiedLocatedEvent {
  std::string event_id;              // "<channel>:<sample_index>" of the earliest detection
  std::optional<ClassLabel> label;   // absent when classification is disabled
  std::optional<Vec3> position;      // absent for false events and unsolvable groups
  double event_time = 0.0;           // [s]
  std::optional<double> residual;
  std::vector<Detection> detections;
  std::map<ClassLabel, double> confidences;
};

/// Greedy temporal clustering over the merged timeline. The earliest free
/// detection seeds a group that takes the first detection of every other
/// channel within max_spread of it. A group smaller than min_channels is
/// dropped and only its seed is consumed.
std::vector<EventGroup> match_detections(const std::vector<std::vector<Detection>>& per_channel,
                                         std::int64_t max_spread, std::size_t min_channels);

/// Per-event classifier used by run().
class EventClassifier {
 public:
  virtual ~EventClassifier() = default;
  /// Confidence per impact class for one matched group.
  virtual std::map<ClassLabel, double> confidences(const EventGroup& group, const AudioBlock& audio) const = 0;
  virtual ClassLabel decide(const std::map<ClassLabel, double>& confidences) const = 0;
};

/// Bundle-backed classifier: each class's network sees the feature taken
/// at that class's designated channel. A class whose channel did not
/// detect the event (or whose feature window leaves the stream) gets
/// confidence 0.
class BundleClassifier : public EventClassifier {
 public:
  explicit BundleClassifier(ClassifierBundle bundle);
  std::map<ClassLabel, double> confidences(const EventGroup& group, const AudioBlock& audio) const override;
  ClassLabel decide(const std::map<ClassLabel, double>& confidences) const override;
  const ClassifierBundle& bundle() const { return bundle_; }

 private:
  ClassifierBundle bundle_;
};

struct RunOptions {
  Execution execution = Execution::concurrent;
};

/// Detect, match, classify and localize. Events come back sorted by
/// event_time (then event_id). Stage errors are rethrown with the stage
/// name and event id prefixed, keeping their kind.
std::vector<ClassifiedLocatedEvent> run(const PipelineConfig& config, const AudioBlock& audio,
                                        const EventClassifier* classifier, const RunOptions& opts = {});

/// Reads the configured inputs and bundle, then runs.
std::vector<ClassifiedLocatedEvent> run(const PipelineConfig& config, const RunOptions& opts = {});

/// Audio read from config.io with the channel map applied and checked
/// against the array.
AudioBlock ingest_configured(const PipelineConfig& config);

/// Localizes one group the way run() does for the given class.
std::optional<LocalizedEvent> localize_group(const EventGroup& group, std::optional<ClassLabel> label,
                                             const PipelineConfig& config);

struct LocalizationComparison {
  std::size_t count = 0;  // pairs where both sides have a position
  double mean_distance = 0.0;
  double std_distance = 0.0;  // population
};

/// Pairs must share event ids position by position; throws DataError
/// otherwise or when the lengths differ.
LocalizationComparison compare_localizations(const std::vector<ClassifiedLocatedEvent>& a,
                                             const std::vector<ClassifiedLocatedEvent>& b);

std::string make_event_id(int channel, std::int64_t sample_index);

}  // namespace squashloc
