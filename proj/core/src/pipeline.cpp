#include "squashloc/pipeline.hpp"

#include "squashloc/error.hpp"
#include "squashloc/simulate.hpp"
#include "squashloc/wav.hpp"

#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace squashloc {

std::string make_event_id(int channel, std::int64_t sample_index) {
  return std::to_string(channel) + ":" + std::to_string(sample_index);
}

std::vector<EventGroup> match_detections(const std::vector<std::vector<Detection>>& per_channel,
                                         std::int64_t max_spread, std::size_t min_channels) {
  struct Item {
    std::int64_t t;
    int channel;
    double score;
  };
  std::vector<Item> timeline;
  for (const auto& list : per_channel) {
    for (const auto& d : list) timeline.push_back({d.sample_index, d.channel, d.score});
  }
  std::stable_sort(timeline.begin(), timeline.end(),
                   [](const Item& a, const Item& b) { return std::tie(a.t, a.channel) < std::tie(b.t, b.channel); });

  std::vector<char> used(timeline.size(), 0);
  std::vector<EventGroup> groups;
  std::vector<std::size_t> members;
  for (std::size_t seed = 0; seed < timeline.size(); ++seed) {
    if (used[seed]) continue;
    members.assign(1, seed);
    for (std::size_t j = seed + 1; j < timeline.size() && timeline[j].t - timeline[seed].t <= max_spread; ++j) {
      if (used[j]) continue;
      const bool taken = std::any_of(members.begin(), members.end(),
                                     [&](std::size_t m) { return timeline[m].channel == timeline[j].channel; });
      if (!taken) members.push_back(j);
    }
    if (members.size() < min_channels) {
      used[seed] = 1;
      continue;
    }
    EventGroup g;
    for (std::size_t m : members) {
      used[m] = 1;
      g.arrivals.push_back(Arrival{timeline[m].channel, static_cast<double>(timeline[m].t), timeline[m].score});
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

BundleClassifier::BundleClassifier(ClassifierBundle bundle) : bundle_(std::move(bundle)) {
  bundle_.validate();
}

std::map<ClassLabel, double> BundleClassifier::confidences(const EventGroup& group, const AudioBlock& audio) const {
  std::map<ClassLabel, double> out;
  for (const auto& entry : bundle_.entries) {
    double conf = 0.0;
    const auto it = std::find_if(group.arrivals.begin(), group.arrivals.end(),
                                 [&](const Arrival& a) { return a.channel == entry.channel; });
    if (it != group.arrivals.end() && entry.channel >= 0 &&
        static_cast<std::size_t>(entry.channel) < audio.channels()) {
      const Detection d{it->channel, std::llround(it->sample_index), it->score};
      try {
        const FeatureVector fv = extract(entry.input_kind, audio.samples[entry.channel], d,
                                         entry.feature_half_width, audio.start_index);
        conf = predict(entry.model, fv);
      } catch (const DataError&) {
        conf = 0.0;  // window runs off the stream
      }
    }
    out[entry.label] = conf;
  }
  return out;
}

ClassLabel BundleClassifier::decide(const std::map<ClassLabel, double>& confidences) const {
  return fuse(confidences, bundle_);
}

std::optional<LocalizedEvent> localize_group(const EventGroup& group, std::optional<ClassLabel> label,
                                             const PipelineConfig& config) {
  const auto surface = label ? surface_for_class(*label) : std::nullopt;
  try {
    if (surface && group.size() >= 3) {
      return localize_on_plane(group, config.array, config.geometry, config.geometry.surface(*surface),
                               config.localizer);
    }
    if (group.size() >= 4) return localize_3d(group, config.array, config.geometry, config.localizer);
  } catch (const NoSolutionError&) {
    return std::nullopt;
  }
  return std::nullopt;
}

namespace {

template <typename Fn>
auto tagged(const char* stage, const std::string& id, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    std::string where = std::string("stage '") + stage + "'";
    if (!id.empty()) where += " (" + id + ")";
    throw Error(e.kind(), where + ": " + e.what());
  }
}

}  // namespace

std::vector<ClassifiedLocatedEvent> run(const PipelineConfig& config, const AudioBlock& audio,
                                        const EventClassifier* classifier, const RunOptions& opts) {
  tagged("ingest", "", [&] {
    audio.validate();
    if (audio.channels() != config.array.size()) {
      throw DataError("ingestion error (channels): audio has " + std::to_string(audio.channels()) +
                      " channels, array has " + std::to_string(config.array.size()));
    }
    if (audio.sample_rate != config.array.sample_rate) {
      throw DataError("ingestion error (sample_rate): audio rate differs from array.sample_rate");
    }
  });

  const auto per_channel = tagged("detect", "", [&] {
    return detect_channels(audio, config.method, config.detector, opts.execution, config.io.block_size);
  });
  const auto groups = match_detections(per_channel, config.matcher.max_spread, config.matcher.min_channels);

  std::vector<ClassifiedLocatedEvent> events(groups.size());
  auto process = [&](std::size_t i) {
    const EventGroup& g = groups[i];
    const Arrival& ref = g.reference();
    ClassifiedLocatedEvent& e = events[i];
    e.event_id = make_event_id(ref.channel, std::llround(ref.sample_index));
    for (const auto& a : g.arrivals) {
      e.detections.push_back(Detection{a.channel, std::llround(a.sample_index), a.score, config.method});
    }
    std::sort(e.detections.begin(), e.detections.end(),
              [](const Detection& a, const Detection& b) { return a.channel < b.channel; });
    e.event_time = ref.sample_index / config.array.sample_rate;
    if (classifier != nullptr) {
      tagged("classify", e.event_id, [&] {
        e.confidences = classifier->confidences(g, audio);
        e.label = classifier->decide(e.confidences);
      });
      if (e.label == ClassLabel::false_event) return;
    }
    const auto loc = tagged("localize", e.event_id, [&] { return localize_group(g, e.label, config); });
    if (loc) {
      e.position = loc->position;
      e.event_time = loc->event_time;
      e.residual = loc->residual;
    }
  };
  if (opts.execution == Execution::concurrent) {
    detail::parallel_for(groups.size(), process, 1);
  } else {
    for (std::size_t i = 0; i < groups.size(); ++i) process(i);
  }

  std::stable_sort(events.begin(), events.end(), [](const auto& a, const auto& b) {
    return std::tie(a.event_time, a.event_id) < std::tie(b.event_time, b.event_id);
  });
  return events;
}

AudioBlock ingest_configured(const PipelineConfig& config) {
  IngestExpectation expect;
  expect.sample_rate = config.array.sample_rate;
  if (config.io.channel_map.empty()) expect.channels = config.array.size();
  AudioBlock audio = ingest(config.io.inputs, expect);
  if (!config.io.channel_map.empty()) {
    AudioBlock mapped;
    mapped.sample_rate = audio.sample_rate;
    mapped.start_index = audio.start_index;
    for (int src : config.io.channel_map) {
      if (static_cast<std::size_t>(src) >= audio.channels()) {
        throw DataError("ingestion error (channels): channel_map refers to channel " + std::to_string(src) +
                        " but the input has " + std::to_string(audio.channels()));
      }
      mapped.samples.push_back(audio.samples[src]);
    }
    audio = std::move(mapped);
  }
  return audio;
}

std::vector<ClassifiedLocatedEvent> run(const PipelineConfig& config, const RunOptions& opts) {
  const AudioBlock audio = tagged("ingest", "", [&] { return ingest_configured(config); });
  std::optional<BundleClassifier> classifier;
  if (config.classifier.bundle) {
    classifier.emplace(tagged("classify", "", [&] { return ClassifierBundle::load(*config.classifier.bundle); }));
  }
  return run(config, audio, classifier ? &*classifier : nullptr, opts);
}

LocalizationComparison compare_localizations(const std::vector<ClassifiedLocatedEvent>& a,
                                             const std::vector<ClassifiedLocatedEvent>& b) {
  if (a.size() != b.size()) {
    throw DataError("cannot compare " + std::to_string(a.size()) + " events with " + std::to_string(b.size()));
  }
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].event_id != b[i].event_id) {
      throw DataError("event id mismatch at position " + std::to_string(i) + ": '" + a[i].event_id + "' vs '" +
                      b[i].event_id + "'");
    }
    if (a[i].position && b[i].position) d.push_back((*a[i].position - *b[i].position).norm());
  }
  LocalizationComparison out;
  out.count = d.size();
  if (d.empty()) return out;
  out.mean_distance = std::accumulate(d.begin(), d.end(), 0.0) / d.size();
  double ss = 0.0;
  for (double x : d) ss += (x - out.mean_distance) * (x - out.mean_distance);
  out.std_distance = std::sqrt(ss / d.size());
  return out;
}

}  // namespace squashloc
