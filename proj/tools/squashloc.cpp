#include "squashloc/classify.hpp"
#include "squashloc/config.hpp"
#include "squashloc/error.hpp"
#include "squashloc/pipeline.hpp"
#include "squashloc/records.hpp"
#include "squashloc/simulate.hpp"
#include "squashloc/wav.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>

using namespace squashloc;

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  std::string output;
};

PipelineConfig load(const Common& c) { return c.config.empty() ? parse_config("{}") : load_config(c.config); }

/// Output stream for --output, stdout when empty.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
    if (!*file_) throw DataError("cannot write '" + path + "'");
  }
  std::ostream& os() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open '" + path + "'");
  return is;
}

std::vector<std::vector<Detection>> by_channel(const std::vector<Detection>& all, std::size_t channels) {
  std::vector<std::vector<Detection>> out(channels);
  for (const auto& d : all) {
    if (d.channel < 0 || static_cast<std::size_t>(d.channel) >= channels) {
      throw DataError("detection on channel " + std::to_string(d.channel) + " outside the array");
    }
    out[d.channel].push_back(d);
  }
  for (auto& l : out) {
    std::stable_sort(l.begin(), l.end(), [](const auto& a, const auto& b) { return a.sample_index < b.sample_index; });
  }
  return out;
}

AudioBlock configured_audio(PipelineConfig& cfg, const std::vector<std::string>& inputs) {
  if (!inputs.empty()) cfg.io.inputs = inputs;
  return ingest_configured(cfg);
}

ClassifiedLocatedEvent event_from_group(const EventGroup& g, const PipelineConfig& cfg) {
  ClassifiedLocatedEvent e;
  const auto& ref = g.reference();
  e.event_id = make_event_id(ref.channel, std::llround(ref.sample_index));
  e.event_time = ref.sample_index / cfg.array.sample_rate;
  for (const auto& a : g.arrivals) {
    e.detections.push_back(Detection{a.channel, std::llround(a.sample_index), a.score, cfg.method});
  }
  std::sort(e.detections.begin(), e.detections.end(), [](auto& a, auto& b) { return a.channel < b.channel; });
  return e;
}

// -- subcommands --------------------------------------------------------------

void cmd_detect(const Common& c, const std::vector<std::string>& inputs, const std::string& method) {
  auto cfg = load(c);
  if (!method.empty()) {
    cfg.method = detection_method_from_string(method);
    cfg.detector = cfg.method == DetectionMethod::surprise ? DetectorParams::surprise_defaults()
                                                           : DetectorParams::gaussian_defaults();
  }
  const auto audio = configured_audio(cfg, inputs);
  const auto per = detect_channels(audio, cfg.method, cfg.detector, Execution::concurrent, cfg.io.block_size);
  std::vector<Detection> all;
  for (const auto& l : per) all.insert(all.end(), l.begin(), l.end());
  Sink out(c.output);
  write_detections(out.os(), all);
}

void cmd_match(const Common& c, const std::string& detections) {
  const auto cfg = load(c);
  auto is = open_in(detections);
  const auto groups =
      match_detections(by_channel(read_detections(is), cfg.array.size()), cfg.matcher.max_spread, cfg.matcher.min_channels);
  Sink out(c.output);
  write_groups(out.os(), groups);
}

void cmd_localize(const Common& c, const std::string& groups_path, const std::string& label) {
  const auto cfg = load(c);
  std::optional<ClassLabel> cls;
  if (!label.empty()) cls = class_label_from_string(label);
  auto is = open_in(groups_path);
  const auto groups = read_groups(is);
  std::vector<ClassifiedLocatedEvent> events;
  for (const auto& g : groups) {
    g.validate(3);
    auto e = event_from_group(g, cfg);
    e.label = cls;
    if (const auto loc = localize_group(g, cls, cfg)) {
      e.position = loc->position;
      e.event_time = loc->event_time;
      e.residual = loc->residual;
    }
    events.push_back(std::move(e));
  }
  Sink out(c.output);
  write_events(out.os(), events);
}

struct TrainArgs {
  std::string labels;
  std::vector<std::string> inputs;
  std::string feature = "T2";
  std::size_t epochs = 200;
  double learning_rate = 1e-3;
  std::size_t folds = 8;
  std::size_t half_width = kDefaultFeatureHalfWidth;
};

void cmd_train(const Common& c, const TrainArgs& a) {
  auto cfg = load(c);
  const auto audio = configured_audio(cfg, a.inputs);
  auto is = open_in(a.labels);
  const auto labels = read_labels(is);
  const FeatureKind kind = feature_kind_from_string(a.feature);

  // features per channel
  std::map<int, std::pair<std::vector<FeatureVector>, std::vector<ClassLabel>>> per_channel;
  std::size_t skipped = 0;
  for (const auto& l : labels) {
    if (l.channel < 0 || static_cast<std::size_t>(l.channel) >= audio.channels()) {
      throw DataError("label on channel " + std::to_string(l.channel) + " outside the audio");
    }
    try {
      auto fv = extract(kind, audio.samples[l.channel], Detection{l.channel, l.sample_index, 0.0}, a.half_width,
                        audio.start_index);
      per_channel[l.channel].first.push_back(std::move(fv));
      per_channel[l.channel].second.push_back(l.label);
    } catch (const DataError&) {
      ++skipped;
    }
  }
  if (skipped) std::cerr << "skipped " << skipped << " labels whose window leaves the stream\n";

  TrainHyper hyper;
  hyper.epochs = a.epochs;
  hyper.learning_rate = a.learning_rate;
  hyper.seed = c.seed;
  CvOptions cv;
  cv.folds = a.folds;
  cv.seed = c.seed;
  const auto& arch = kind == FeatureKind::T1 ? kT1Architecture : kT2Architecture;

  // one network per (class, channel); keep the channel with the best CV F1
  ClassifierBundle bundle;
  for (ClassLabel target : kImpactClasses) {
    std::optional<ClassModelReport> best;
    double best_f1 = -1.0;
    for (const auto& [ch, data] : per_channel) {
      const auto positives = std::count(data.second.begin(), data.second.end(), target);
      if (positives <= static_cast<long>(std::max(cv.folds, cv.smote_k))) continue;
      auto report = train_class_model(data.first, data.second, target, arch, hyper, cv);
      const double p = report.cv.mean_precision, r = report.cv.mean_recall;
      const double f1 = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
      std::cerr << to_string(target) << " channel " << ch << ": accuracy " << report.cv.mean_accuracy
                << " precision " << p << " recall " << r << '\n';
      if (f1 > best_f1) {
        best_f1 = f1;
        best = std::move(report);
      }
    }
    if (!best) throw DataError(std::string("not enough labelled '") + std::string(to_string(target)) + "' examples");
    bundle.entries.push_back(std::move(best->entry));
  }
  if (c.output.empty()) throw ConfigError("train needs --output for the bundle file");
  bundle.save(c.output);
  std::cerr << bundle.manifest() << '\n';
}

void cmd_predict(const Common& c, const std::string& groups_path, const std::string& bundle_path,
                 const std::vector<std::string>& inputs) {
  auto cfg = load(c);
  std::string path = bundle_path;
  if (path.empty() && cfg.classifier.bundle) path = *cfg.classifier.bundle;
  if (path.empty()) throw ConfigError("predict needs --bundle or classifier.bundle in the config");
  const BundleClassifier classifier(ClassifierBundle::load(path));
  const auto audio = configured_audio(cfg, inputs);
  auto is = open_in(groups_path);
  std::vector<ClassifiedLocatedEvent> events;
  for (const auto& g : read_groups(is)) {
    auto e = event_from_group(g, cfg);
    e.confidences = classifier.confidences(g, audio);
    e.label = classifier.decide(e.confidences);
    events.push_back(std::move(e));
  }
  Sink out(c.output);
  write_events(out.os(), events);
}

void cmd_run(const Common& c, const std::vector<std::string>& inputs, bool serial) {
  auto cfg = load(c);
  if (!inputs.empty()) cfg.io.inputs = inputs;
  if (cfg.io.inputs.empty()) throw ConfigError("no input audio: set io.inputs or pass --input");
  RunOptions opts;
  if (serial) opts.execution = Execution::serial;
  const auto events = run(cfg, opts);
  Sink out(c.output.empty() ? cfg.io.output : c.output);
  write_events(out.os(), events);
}

struct SimArgs {
  std::size_t events = 20;
  double snr_db = 30.0;
  double spacing_s = 0.3;
  std::string format = "pcm16";
  std::string truth;
  std::string labels;
  std::size_t false_events = 0;
};

void cmd_simulate(const Common& c, const SimArgs& a) {
  const auto cfg = load(c);
  if (c.output.empty()) throw ConfigError("simulate needs --output for the WAV file");
  auto rng = stream_rng(c.seed, 0);
  std::uniform_real_distribution<double> jitter(0.0, 0.5);
  std::vector<SyntheticEvent> events;
  double t = 0.4;
  for (std::size_t i = 0; i < a.events; ++i) {
    events.push_back(random_surface_event(kImpactClasses[i % 4], cfg.geometry, t, rng));
    t += a.spacing_s * (1.0 + jitter(rng));
  }
  const double end = t + 0.2;
  NoiseSpec noise;
  noise.waveform_snr_db = a.snr_db;
  noise.seed = c.seed;
  const auto audio =
      synth_waveform(events, cfg.array, static_cast<std::size_t>(end * cfg.array.sample_rate), noise);
  if (a.format != "pcm16" && a.format != "pcm24" && a.format != "float32") throw ConfigError("unknown --format " + a.format);
  const WavFormat fmt = a.format == "pcm24" ? WavFormat::pcm24 : a.format == "float32" ? WavFormat::float32 : WavFormat::pcm16;
  write_wav(c.output, audio, fmt);

  if (!a.truth.empty()) {
    Sink s(a.truth);
    write_truth(s.os(), events);
  }
  if (!a.labels.empty()) {
    std::vector<LabelRecord> labels;
    for (const auto& e : events) {
      for (const auto& arr : forward_delays(e, cfg.array, true).arrivals) {
        labels.push_back({arr.channel, static_cast<std::int64_t>(arr.sample_index), e.surface});
      }
    }
    // background windows well away from any impact
    std::uniform_real_distribution<double> when(0.05, end - 0.05);
    std::size_t added = 0;
    for (std::size_t tries = 0; added < a.false_events && tries < 100 * a.false_events + 100; ++tries) {
      const double s = when(rng);
      const bool clear = std::none_of(events.begin(), events.end(),
                                      [&](const auto& e) { return std::abs(e.time - s) < 0.06; });
      if (!clear) continue;
      for (const auto& m : cfg.array.mics) {
        labels.push_back({m.id, static_cast<std::int64_t>(s * cfg.array.sample_rate), ClassLabel::false_event});
      }
      ++added;
    }
    std::stable_sort(labels.begin(), labels.end(), [](const auto& x, const auto& y) {
      return std::tie(x.channel, x.sample_index) < std::tie(y.channel, y.sample_index);
    });
    Sink s(a.labels);
    write_labels(s.os(), labels);
  }
}

void cmd_eval_detections(const Common& c, const std::string& detections, const std::string& truth_path,
                         double tolerance) {
  const auto cfg = load(c);
  auto di = open_in(detections);
  auto ti = open_in(truth_path);
  const auto per = by_channel(read_detections(di), cfg.array.size());
  const auto truth = read_truth(ti);
  std::size_t tp = 0, fp = 0, fn = 0;
  std::vector<double> errors;
  Sink out(c.output);
  out.os() << "channel,tp,fp,fn,fdr,fnr,mean_error,std_error\n";
  for (std::size_t ch = 0; ch < per.size(); ++ch) {
    std::vector<double> t;
    for (const auto& e : truth) t.push_back(forward_delays(e, cfg.array).arrivals[ch].sample_index);
    const auto ev = evaluate_detector(per[ch], t, tolerance);
    tp += ev.tp;
    fp += ev.fp;
    fn += ev.fn;
    errors.insert(errors.end(), ev.signed_errors.begin(), ev.signed_errors.end());
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%zu,%.6g,%.6g,%.6g,%.6g\n", ch, ev.tp, ev.fp, ev.fn, ev.fdr, ev.fnr,
                  ev.mean_error(), ev.stddev_error());
    out.os() << buf;
  }
  double mean = 0, ss = 0;
  for (double e : errors) mean += e / errors.size();
  for (double e : errors) ss += (e - mean) * (e - mean);
  char buf[160];
  std::snprintf(buf, sizeof buf, "all,%zu,%zu,%zu,%.6g,%.6g,%.6g,%.6g\n", tp, fp, fn,
                tp + fp ? double(fp) / (tp + fp) : 0.0, tp + fn ? double(fn) / (tp + fn) : 0.0, mean,
                errors.size() > 1 ? std::sqrt(ss / (errors.size() - 1)) : 0.0);
  out.os() << buf;
}

void cmd_eval_compare(const Common& c, const std::string& a_path, const std::string& b_path) {
  auto ai = open_in(a_path);
  auto bi = open_in(b_path);
  const auto r = compare_localizations(read_events(ai), read_events(bi));
  Sink out(c.output);
  char buf[160];
  std::snprintf(buf, sizeof buf, "{\"count\":%zu,\"mean_distance\":%.9g,\"std_distance\":%.9g}\n", r.count,
                r.mean_distance, r.std_distance);
  out.os() << buf;
}

void cmd_eval_localization(const Common& c, const std::string& events_path, const std::string& truth_path) {
  auto ei = open_in(events_path);
  auto ti = open_in(truth_path);
  const auto events = read_events(ei);
  const auto truth = read_truth(ti);
  // nearest emitted event in time per truth event
  Sink out(c.output);
  out.os() << "event,class,matched_id,error_m\n";
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const ClassifiedLocatedEvent* best = nullptr;
    for (const auto& e : events) {
      if (!e.position) continue;
      if (!best || std::abs(e.event_time - truth[i].time) < std::abs(best->event_time - truth[i].time)) best = &e;
    }
    char buf[160];
    if (best && std::abs(best->event_time - truth[i].time) < 0.05) {
      std::snprintf(buf, sizeof buf, "%zu,%s,%s,%.9g\n", i, std::string(to_string(truth[i].surface)).c_str(),
                    best->event_id.c_str(), (*best->position - truth[i].position).norm());
    } else {
      std::snprintf(buf, sizeof buf, "%zu,%s,,\n", i, std::string(to_string(truth[i].surface)).c_str());
    }
    out.os() << buf;
  }
}

void cmd_plot_errors(const Common& c, std::size_t points, const std::vector<double>& sigmas) {
  const auto cfg = load(c);
  const auto table = error_experiment(points, sigmas, cfg.array, cfg.geometry, c.seed, cfg.localizer);
  Sink out(c.output);
  table.write_csv(out.os());
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    std::fprintf(stderr, "sigma %g: median %.4f m, p90 %.4f m, failures %zu\n", sigmas[i], table.median(i),
                 table.percentile(i, 90.0), table.failures[i]);
  }
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::usage: return 1;
    case ErrorKind::data: return 2;
    case ErrorKind::numerical: return 3;
  }
  return 1;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON configuration file");
  sub->add_option("--seed", c.seed, "Random seed");
  sub->add_option("--output", c.output, "Output file (stdout when omitted)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ball-impact detection, localization and classification for multichannel court audio"};
  app.require_subcommand(1);
  Common common;
  std::vector<std::string> inputs;

  auto* detect = app.add_subcommand("detect", "Per-channel onset detection -> detections CSV");
  add_common(detect, common);
  std::string method;
  detect->add_option("--input", inputs, "Audio files (override io.inputs)");
  detect->add_option("--method", method, "gaussian_threshold or surprise (overrides the config)");

  auto* match = app.add_subcommand("match", "Detections CSV -> event groups (JSON Lines)");
  add_common(match, common);
  std::string detections;
  match->add_option("--detections", detections, "Detections CSV")->required();

  auto* localize = app.add_subcommand("localize", "Event groups -> localized events");
  add_common(localize, common);
  std::string groups, label;
  localize->add_option("--groups", groups, "Groups JSON Lines")->required();
  localize->add_option("--class", label, "Treat every group as this class (plane constraint for surfaces)");

  auto* train = app.add_subcommand("train", "Train the per-class classifier bundle from labelled audio");
  add_common(train, common);
  TrainArgs targs;
  train->add_option("--labels", targs.labels, "CSV channel,sample_index,class")->required();
  train->add_option("--input", targs.inputs, "Audio files (override io.inputs)");
  train->add_option("--feature", targs.feature, "T1 or T2")->capture_default_str();
  train->add_option("--epochs", targs.epochs)->capture_default_str();
  train->add_option("--lr", targs.learning_rate)->capture_default_str();
  train->add_option("--folds", targs.folds)->capture_default_str();
  train->add_option("--half-width", targs.half_width, "Feature window half width")->capture_default_str();

  auto* predict = app.add_subcommand("predict", "Classify event groups with a bundle");
  add_common(predict, common);
  std::string bundle;
  predict->add_option("--groups", groups, "Groups JSON Lines")->required();
  predict->add_option("--bundle", bundle, "Classifier bundle (overrides classifier.bundle)");
  predict->add_option("--input", inputs, "Audio files (override io.inputs)");

  auto* runc = app.add_subcommand("run", "Full pipeline -> events JSON Lines");
  add_common(runc, common);
  bool serial = false;
  runc->add_option("--input", inputs, "Audio files (override io.inputs)");
  runc->add_flag("--serial", serial, "Single-threaded execution");

  auto* simulate = app.add_subcommand("simulate", "Render a synthetic multichannel recording");
  add_common(simulate, common);
  SimArgs sargs;
  simulate->add_option("--events", sargs.events)->capture_default_str();
  simulate->add_option("--snr", sargs.snr_db, "Background SNR [dB]")->capture_default_str();
  simulate->add_option("--spacing", sargs.spacing_s, "Minimum gap between events [s]")->capture_default_str();
  simulate->add_option("--format", sargs.format, "pcm16, pcm24 or float32")->capture_default_str();
  simulate->add_option("--truth", sargs.truth, "Write ground truth CSV here");
  simulate->add_option("--labels", sargs.labels, "Write per-channel label CSV here");
  simulate->add_option("--false-events", sargs.false_events, "Background-only label windows to add")
      ->capture_default_str();

  auto* eval = app.add_subcommand("eval", "Evaluation against ground truth or between label sources");
  eval->require_subcommand(1);
  auto* eval_det = eval->add_subcommand("detections", "Detector FDR/FNR/timing against simulated truth");
  add_common(eval_det, common);
  std::string truth;
  double tolerance = 480.0;
  eval_det->add_option("--detections", detections)->required();
  eval_det->add_option("--truth", truth)->required();
  eval_det->add_option("--tolerance", tolerance, "Matching tolerance [samples]")->capture_default_str();
  auto* eval_cmp = eval->add_subcommand("compare", "Mean and std distance between two event files");
  add_common(eval_cmp, common);
  std::string a_path, b_path;
  eval_cmp->add_option("a", a_path)->required();
  eval_cmp->add_option("b", b_path)->required();
  auto* eval_loc = eval->add_subcommand("localization", "Per-event localization error against simulated truth");
  add_common(eval_loc, common);
  std::string events_path;
  eval_loc->add_option("--events", events_path)->required();
  eval_loc->add_option("--truth", truth)->required();

  auto* plot = app.add_subcommand("plot-errors", "Monte-Carlo localization error table (sigma,percentile,error_m)");
  add_common(plot, common);
  std::size_t points = 10000;
  std::vector<double> sigmas{0, 1, 10, 50};
  plot->add_option("--points", points)->capture_default_str();
  plot->add_option("--sigmas", sigmas, "Timestamp noise levels [samples]")->delimiter(',')->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*detect) cmd_detect(common, inputs, method);
    else if (*match) cmd_match(common, detections);
    else if (*localize) cmd_localize(common, groups, label);
    else if (*train) cmd_train(common, targs);
    else if (*predict) cmd_predict(common, groups, bundle, inputs);
    else if (*runc) cmd_run(common, inputs, serial);
    else if (*simulate) cmd_simulate(common, sargs);
    else if (*eval_det) cmd_eval_detections(common, detections, truth, tolerance);
    else if (*eval_cmp) cmd_eval_compare(common, a_path, b_path);
    else if (*eval_loc) cmd_eval_localization(common, events_path, truth);
    else if (*plot) cmd_plot_errors(common, points, sigmas);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
