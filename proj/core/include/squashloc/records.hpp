#pragma once

#include "squashloc/detect.hpp"
#include "squashloc/features.hpp"
#include "squashloc/localize.hpp"
#include "squashloc/pipeline.hpp"
#include "squashloc/simulate.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace squashloc {

/// x rounded to 9 significant digits.
double round_sig9(double x);

/// One JSON object per line with keys event_id, class, x_m, y_m, z_m, t_s,
/// residual, confidences, detections. Missing values are null.
void write_event(std::ostream& os, const ClassifiedLocatedEvent& event);
void write_events(std::ostream& os, const std::vector<ClassifiedLocatedEvent>& events);
std::vector<ClassifiedLocatedEvent> read_events(std::istream& is);

/// CSV `channel,sample_index,score,method`.
void write_detections(std::ostream& os, const std::vector<Detection>& detections);
std::vector<Detection> read_detections(std::istream& is);

/// JSON Lines, one group per line: {"arrivals":[{"channel","sample_index","score"}...]}.
void write_groups(std::ostream& os, const std::vector<EventGroup>& groups);
std::vector<EventGroup> read_groups(std::istream& is);

/// CSV `channel,sample_index,class`.
struct LabelRecord {
  int channel = 0;
  std::int64_t sample_index = 0;
  ClassLabel label = ClassLabel::false_event;
};
void write_labels(std::ostream& os, const std::vector<LabelRecord>& labels);
std::vector<LabelRecord> read_labels(std::istream& is);

/// CSV `event,x_m,y_m,z_m,t_s,class,amplitude` of simulated ground truth.
void write_truth(std::ostream& os, const std::vector<SyntheticEvent>& events);
std::vector<SyntheticEvent> read_truth(std::istream& is);

}  // namespace squashloc
