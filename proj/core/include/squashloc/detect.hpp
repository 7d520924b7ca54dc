#pragma once

#include "squashloc/signal.hpp"

#include <cstdint>
#include <deque>
#include <span>
#include <string_view>
#include <vector>

namespace squashloc {

enum class DetectionMethod { gaussian_threshold, surprise };

std::string_view to_string(DetectionMethod m);
DetectionMethod detection_method_from_string(std::string_view s);

/// An onset on one channel.
struct Detection {
  int channel = 0;
  std::int64_t sample_index = 0;  // absolute
  double score = 0.0;             // z-score or surprise, >= threshold at emission
  DetectionMethod method = DetectionMethod::gaussian_threshold;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct DetectorParams {
  double threshold = 8.0;
  std::size_t window_w = 256;          // surprise: spectral window, power of two
  std::size_t history_n = 32;          // surprise: spectra in the prior
  std::int64_t refractory = 4800;      // samples suppressed after a detection
  std::size_t welford_capacity = 9600; // gaussian: background window
  double refine_threshold = 0.01;      // surprise: 1-d KL threshold for time refinement

  static DetectorParams gaussian_defaults();
  static DetectorParams surprise_defaults();

  /// Throws ConfigError on a non-positive threshold, negative refractory or
  /// a window that is not a power of two.
  void validate() const;
};

/// Streaming detector that models the background as Gaussian with windowed
/// Welford statistics and fires on |x - mean| / stddev >= threshold.
/// Background statistics are frozen while a detection's refractory period
/// runs.
class GaussianThresholdDetector {
 public:
  GaussianThresholdDetector(int channel, const DetectorParams& params, std::int64_t start_index = 0);

  /// Consumes the next block of the stream, appending detections to `out`.
  void process(std::span<const float> block, std::vector<Detection>& out);

 private:
  int channel_;
  DetectorParams params_;
  RunningStats stats_;
  std::int64_t next_index_;
  std::int64_t quiet_until_;  // first index allowed to fire again
};

/// Streaming two-stage surprise detector. Non-overlapping w-sample windows
/// are reduced to Hann-tapered power spectra; the prior is a diagonal
/// Gaussian over the last n quiet spectra and the posterior folds in the
/// new one. A window whose KL divergence reaches the threshold triggers a
/// time-domain search (refine_time) over the previous and current windows.
class SurpriseDetector {
 public:
  SurpriseDetector(int channel, const DetectorParams& params, std::int64_t start_index = 0);

  void process(std::span<const float> block, std::vector<Detection>& out);

  /// Number of windows still needed before detections can be emitted.
  std::size_t warmup_windows_left() const;

 private:
  void handle_window(std::vector<Detection>& out);
  SpectralModel prior_model() const;

  int channel_;
  DetectorParams params_;
  std::vector<RunningStats> bins_;       // per-bin stats over the last n spectra
  std::deque<float> history_;            // last 3 windows of raw samples
  std::vector<float> pending_;           // current partial window
  std::int64_t next_index_;              // absolute index of pending_[0]
  std::int64_t quiet_until_;
  std::vector<double> scratch_;
};

/// Whole-stream wrapper of GaussianThresholdDetector.
std::vector<Detection> detect_gaussian(std::span<const float> stream, const DetectorParams& params,
                                       int channel = 0, std::int64_t start_index = 0);

/// Whole-stream wrapper of SurpriseDetector. Throws DataError when the
/// stream is shorter than (history_n + 2) windows.
std::vector<Detection> detect_surprise(std::span<const float> stream, const DetectorParams& params,
                                       int channel = 0, std::int64_t start_index = 0);

/// Time-domain refinement. The prior is the mean/variance of `bootstrap`;
/// the posterior adds window samples one at a time. Returns the first offset
/// whose 1-d KL divergence reaches `threshold`, or the offset of the
/// maximum divergence when none does.
std::size_t refine_time(std::span<const float> window, std::span<const float> bootstrap,
                        double threshold);

enum class Execution { serial, concurrent };

/// Runs one detector per channel. Results are identical for both execution
/// modes.
std::vector<std::vector<Detection>> detect_channels(const AudioBlock& audio, DetectionMethod method,
                                                    const DetectorParams& params,
                                                    Execution exec = Execution::concurrent,
                                                    std::size_t block_size = 0);

struct DetectorEvaluation {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double fdr = 0.0;
  double fnr = 0.0;
  bool fdr_degenerate = false;  // no detections at all; fdr reported as 0
  bool fnr_degenerate = false;  // no truth events; fnr reported as 0
  std::vector<double> signed_errors;  // detection - truth, per matched pair, in truth order

  double mean_error() const;
  double stddev_error() const;
};

/// Greedy nearest-first one-to-one matching within +/- tolerance samples.
/// Throws ConfigError for tolerance <= 0.
DetectorEvaluation evaluate_detector(std::span<const Detection> detections,
                                     std::span<const double> truth, double tolerance);

}  // namespace squashloc
