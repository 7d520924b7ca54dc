#include "squashloc/detect.hpp"

#include "squashloc/error.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <string>

namespace squashloc {

std::string_view to_string(DetectionMethod m) {
  return m == DetectionMethod::gaussian_threshold ? "gaussian_threshold" : "surprise";
}

DetectionMethod detection_method_from_string(std::string_view s) {
  if (s == "gaussian_threshold" || s == "gaussian") return DetectionMethod::gaussian_threshold;
  if (s == "surprise") return DetectionMethod::surprise;
  throw ConfigError("unknown detection method '" + std::string(s) + "'");
}

DetectorParams DetectorParams::gaussian_defaults() { return DetectorParams{}; }

DetectorParams DetectorParams::surprise_defaults() {
  DetectorParams p;
  p.threshold = 5.0 * static_cast<double>(p.window_w);
  return p;
}

void DetectorParams::validate() const {
  if (!(threshold > 0)) throw ConfigError("detector threshold must be positive");
  if (refractory < 0) throw ConfigError("detector refractory must be >= 0");
  if (!is_power_of_two(window_w)) throw ConfigError("detector window_w must be a power of two");
  if (history_n < 2) throw ConfigError("detector history_n must be >= 2");
  if (welford_capacity < 2) throw ConfigError("detector welford_capacity must be >= 2");
  if (!(refine_threshold > 0)) throw ConfigError("detector refine_threshold must be positive");
}

// ---------------------------------------------------------------------------
// Gaussian threshold

GaussianThresholdDetector::GaussianThresholdDetector(int channel, const DetectorParams& params,
                                                     std::int64_t start_index)
    : channel_(channel),
      params_(params),
      stats_(params.welford_capacity),
      next_index_(start_index),
      quiet_until_(std::numeric_limits<std::int64_t>::min()) {
  params_.validate();
}

void GaussianThresholdDetector::process(std::span<const float> block, std::vector<Detection>& out) {
  for (float sample : block) {
    const std::int64_t idx = next_index_++;
    const double x = sample;
    if (stats_.count() < params_.welford_capacity) {
      stats_.push(x);
      continue;
    }
    if (idx < quiet_until_) continue;  // frozen background during refractory

    const double dev = std::abs(x - stats_.mean());
    const double sd = stats_.stddev();
    double z = 0.0;
    if (sd > 0.0) {
      z = dev / sd;
    } else if (dev > 0.0) {
      z = std::numeric_limits<double>::max();
    }
    if (z >= params_.threshold) {
      out.push_back(Detection{channel_, idx, z, DetectionMethod::gaussian_threshold});
      quiet_until_ = idx + std::max<std::int64_t>(params_.refractory, 1);
      continue;
    }
    stats_.push(x);
  }
}

std::vector<Detection> detect_gaussian(std::span<const float> stream, const DetectorParams& params,
                                       int channel, std::int64_t start_index) {
  std::vector<Detection> out;
  if (stream.empty()) return out;
  GaussianThresholdDetector det(channel, params, start_index);
  det.process(stream, out);
  return out;
}

// ---------------------------------------------------------------------------
// Surprise

SurpriseDetector::SurpriseDetector(int channel, const DetectorParams& params,
                                   std::int64_t start_index)
    : channel_(channel),
      params_(params),
      next_index_(start_index),
      quiet_until_(std::numeric_limits<std::int64_t>::min()) {
  params_.validate();
  bins_.assign(params_.window_w, RunningStats(params_.history_n));
  pending_.reserve(params_.window_w);
  scratch_.resize(params_.window_w);
}

std::size_t SurpriseDetector::warmup_windows_left() const {
  const std::size_t have = bins_.front().count();
  return have >= params_.history_n ? 0 : params_.history_n - have;
}

SpectralModel SurpriseDetector::prior_model() const {
  SpectralModel m;
  m.history = bins_.front().count();
  m.mean.resize(bins_.size());
  m.variance.resize(bins_.size());
  for (std::size_t j = 0; j < bins_.size(); ++j) {
    m.mean[j] = bins_[j].mean();
    m.variance[j] = std::max(bins_[j].population_variance(), kVarianceFloor);
  }
  return m;
}

void SurpriseDetector::process(std::span<const float> block, std::vector<Detection>& out) {
  for (float s : block) {
    pending_.push_back(s);
    if (pending_.size() == params_.window_w) {
      handle_window(out);
      next_index_ += static_cast<std::int64_t>(params_.window_w);
      history_.insert(history_.end(), pending_.begin(), pending_.end());
      while (history_.size() > 2 * params_.window_w) history_.pop_front();
      pending_.clear();
    }
  }
}

void SurpriseDetector::handle_window(std::vector<Detection>& out) {
  const std::size_t w = params_.window_w;
  const std::int64_t window_start = next_index_;
  std::copy(pending_.begin(), pending_.end(), scratch_.begin());
  const std::vector<double> spectrum = power_spectrum(scratch_, Taper::hann);

  if (warmup_windows_left() > 0) {
    for (std::size_t j = 0; j < w; ++j) bins_[j].push(spectrum[j]);
    return;
  }
  if (window_start < quiet_until_) return;

  const SpectralModel prior = prior_model();
  const SpectralModel posterior = fold_observation(prior, spectrum);
  const double surprise = kl_gaussian(prior, posterior);
  if (surprise < params_.threshold) {
    for (std::size_t j = 0; j < w; ++j) bins_[j].push(spectrum[j]);
    return;
  }

  // Search region: previous window plus this one, never reaching back into
  // the refractory span of the last detection.
  std::vector<float> samples(history_.begin(), history_.end());
  samples.insert(samples.end(), pending_.begin(), pending_.end());
  const std::int64_t samples_start = window_start - static_cast<std::int64_t>(history_.size());
  std::int64_t region_start = std::max(window_start - static_cast<std::int64_t>(w), samples_start);
  region_start = std::max(region_start, quiet_until_);
  const auto region_off = static_cast<std::size_t>(region_start - samples_start);
  const std::size_t boot_off = region_off > w ? region_off - w : 0;

  const std::span<const float> all(samples);
  const auto region = all.subspan(region_off);
  const auto bootstrap = all.subspan(boot_off, region_off - boot_off);
  const std::size_t offset = refine_time(region, bootstrap, params_.refine_threshold);
  const std::int64_t idx = region_start + static_cast<std::int64_t>(offset);

  out.push_back(Detection{channel_, idx, surprise, DetectionMethod::surprise});
  quiet_until_ = idx + std::max<std::int64_t>(params_.refractory, 1);
}

std::vector<Detection> detect_surprise(std::span<const float> stream, const DetectorParams& params,
                                       int channel, std::int64_t start_index) {
  params.validate();
  const std::size_t need = (params.history_n + 2) * params.window_w;
  if (stream.size() < need) {
    throw DataError("surprise detector warm-up needs " + std::to_string(need) +
                    " samples, stream has " + std::to_string(stream.size()));
  }
  std::vector<Detection> out;
  SurpriseDetector det(channel, params, start_index);
  det.process(stream, out);
  return out;
}

std::size_t refine_time(std::span<const float> window, std::span<const float> bootstrap,
                        double threshold) {
  RunningStats stats;
  for (float v : bootstrap) stats.push(v);
  const double prior_mean = stats.mean();
  const double prior_var = std::max(stats.population_variance(), kVarianceFloor);

  std::size_t best = 0;
  double best_kl = -1.0;
  for (std::size_t i = 0; i < window.size(); ++i) {
    stats.push(window[i]);
    const double kl =
        kl_gaussian_1d(prior_mean, prior_var, stats.mean(), stats.population_variance());
    if (kl >= threshold) return i;
    if (kl > best_kl) {
      best_kl = kl;
      best = i;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------

namespace {

template <typename Detector>
std::vector<Detection> run_streaming(const std::vector<float>& stream, int channel,
                                     const DetectorParams& params, std::int64_t start,
                                     std::size_t block_size) {
  std::vector<Detection> out;
  Detector det(channel, params, start);
  const std::span<const float> all(stream);
  if (block_size == 0) block_size = all.size();
  for (std::size_t off = 0; off < all.size(); off += block_size) {
    det.process(all.subspan(off, std::min(block_size, all.size() - off)), out);
  }
  return out;
}

std::vector<Detection> run_channel(const AudioBlock& audio, std::size_t c, DetectionMethod method,
                                   const DetectorParams& params, std::size_t block_size) {
  const auto ch = static_cast<int>(c);
  if (method == DetectionMethod::gaussian_threshold) {
    return run_streaming<GaussianThresholdDetector>(audio.samples[c], ch, params, audio.start_index,
                                                    block_size);
  }
  return run_streaming<SurpriseDetector>(audio.samples[c], ch, params, audio.start_index,
                                         block_size);
}

}  // namespace

std::vector<std::vector<Detection>> detect_channels(const AudioBlock& audio, DetectionMethod method,
                                                    const DetectorParams& params, Execution exec,
                                                    std::size_t block_size) {
  params.validate();
  std::vector<std::vector<Detection>> result(audio.channels());
  if (exec == Execution::serial) {
    for (std::size_t c = 0; c < audio.channels(); ++c) {
      result[c] = run_channel(audio, c, method, params, block_size);
    }
    return result;
  }
  std::vector<std::future<std::vector<Detection>>> jobs;
  jobs.reserve(audio.channels());
  for (std::size_t c = 0; c < audio.channels(); ++c) {
    jobs.push_back(std::async(std::launch::async, [&, c] {
      return run_channel(audio, c, method, params, block_size);
    }));
  }
  for (std::size_t c = 0; c < jobs.size(); ++c) result[c] = jobs[c].get();
  return result;
}

// ---------------------------------------------------------------------------

double DetectorEvaluation::mean_error() const {
  if (signed_errors.empty()) return 0.0;
  return std::accumulate(signed_errors.begin(), signed_errors.end(), 0.0) /
         static_cast<double>(signed_errors.size());
}

double DetectorEvaluation::stddev_error() const {
  if (signed_errors.size() < 2) return 0.0;
  const double m = mean_error();
  double s = 0.0;
  for (double e : signed_errors) s += (e - m) * (e - m);
  return std::sqrt(s / static_cast<double>(signed_errors.size() - 1));
}

DetectorEvaluation evaluate_detector(std::span<const Detection> detections,
                                     std::span<const double> truth, double tolerance) {
  if (!(tolerance > 0)) throw ConfigError("evaluation tolerance must be positive");

  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].sample_index < detections[b].sample_index;
  });

  struct Pair {
    double gap;
    std::size_t truth;
    std::size_t det;
  };
  std::vector<Pair> pairs;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    auto lo = std::lower_bound(order.begin(), order.end(), truth[t] - tolerance,
                               [&](std::size_t d, double v) {
                                 return static_cast<double>(detections[d].sample_index) < v;
                               });
    for (auto it = lo; it != order.end(); ++it) {
      const double diff = static_cast<double>(detections[*it].sample_index) - truth[t];
      if (diff > tolerance) break;
      pairs.push_back({std::abs(diff), t, *it});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.gap != b.gap) return a.gap < b.gap;
    if (a.truth != b.truth) return a.truth < b.truth;
    return a.det < b.det;
  });

  std::vector<std::ptrdiff_t> match(truth.size(), -1);
  std::vector<bool> used(detections.size(), false);
  for (const auto& p : pairs) {
    if (match[p.truth] >= 0 || used[p.det]) continue;
    match[p.truth] = static_cast<std::ptrdiff_t>(p.det);
    used[p.det] = true;
  }

  DetectorEvaluation ev;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (match[t] < 0) {
      ++ev.fn;
      continue;
    }
    ++ev.tp;
    ev.signed_errors.push_back(
        static_cast<double>(detections[static_cast<std::size_t>(match[t])].sample_index) - truth[t]);
  }
  ev.fp = detections.size() - ev.tp;
  if (ev.tp + ev.fp == 0) {
    ev.fdr_degenerate = true;
  } else {
    ev.fdr = static_cast<double>(ev.fp) / static_cast<double>(ev.tp + ev.fp);
  }
  if (ev.tp + ev.fn == 0) {
    ev.fnr_degenerate = true;
  } else {
    ev.fnr = static_cast<double>(ev.fn) / static_cast<double>(ev.tp + ev.fn);
  }
  return ev;
}

}  // namespace squashloc
