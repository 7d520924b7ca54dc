#pragma once

#include "squashloc/features.hpp"
#include "squashloc/geometry.hpp"
#include "squashloc/localize.hpp"
#include "squashloc/signal.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <vector>

namespace squashloc {

struct SyntheticEvent {
  Vec3 position = Vec3::Zero();
  double time = 0.0;  // [s]
  ClassLabel surface = ClassLabel::racquet;
  double amplitude = 1.0;  // relative loudness in (0, 1]
};

struct NoiseSpec {
  double timestamp_sigma = 0.0;          // [samples], Gaussian per channel
  std::optional<double> waveform_snr_db; // background noise level; none = silent background
  std::uint64_t seed = 0;
  /// The SNR is the ratio of the impact envelope's initial RMS for a unit
  /// amplitude event heard at this distance to the background RMS.
  double snr_reference_m = 10.0;
};

/// Deterministic per-item RNG derived from (seed, index), so that parallel
/// and serial runs draw the same numbers.
std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t index);

/// Arrival sample index on every microphone: (time + r_i / c) * fs.
/// Fractional unless `round_to_sample`.
EventGroup forward_delays(const SyntheticEvent& event, const MicArray& array,
                          bool round_to_sample = false);

/// Adds i.i.d. N(0, timestamp_sigma^2) sample offsets per channel.
EventGroup perturb(EventGroup group, const NoiseSpec& noise);

/// Impact waveform parameters: an exponentially decaying sum of broadband
/// sinusoids that start in phase (a sharp click followed by a noise-like
/// tail).
struct ImpactTemplate {
  double decay_s = 3e-3;
  double min_hz = 300.0;
  double max_hz = 20000.0;
  int components = 64;
  double gain_m = 0.25;     // received envelope = amplitude * gain_m / distance
  double min_distance_m = 0.05;
};

/// Renders `duration` samples of every channel: Gaussian background at the
/// SNR floor plus one delayed impact per event. Amplitudes clip to [-1, 1].
AudioBlock synth_waveform(std::span<const SyntheticEvent> events, const MicArray& array,
                          std::size_t duration, const NoiseSpec& noise,
                          const ImpactTemplate& tmpl = {});

/// Background noise standard deviation implied by `noise` and `tmpl`.
double background_sigma(const NoiseSpec& noise, const ImpactTemplate& tmpl = {});

/// Uniform random point inside the court box.
Vec3 random_point(const CourtGeometry& court, std::mt19937_64& rng);

/// Random impact on the surface that belongs to `surface` (front wall,
/// floor, back glass) or anywhere in the box for a racquet hit.
SyntheticEvent random_surface_event(ClassLabel surface, const CourtGeometry& court, double time,
                                    std::mt19937_64& rng);

/// Court surface a class pins events to, if any.
std::optional<std::string_view> surface_for_class(ClassLabel c);

/// Per-sigma sorted localization errors.
struct ErrorTable {
  std::vector<double> sigmas;                 // [samples]
  std::vector<std::vector<double>> errors;    // sorted ascending per sigma [m]
  std::vector<std::size_t> failures;          // localizations that found no solution

  /// Linear-interpolated percentile p in [0, 100] of row i.
  double percentile(std::size_t i, double p) const;
  double median(std::size_t i) const { return percentile(i, 50.0); }

  /// "sigma,percentile,error_m" rows for percentiles 0..100.
  void write_csv(std::ostream& os) const;
};

/// Monte-Carlo localization error: uniform court points, forward delays,
/// Gaussian timestamp noise, localize_3d. Failed localizations count as an
/// infinite error.
ErrorTable error_experiment(std::size_t n_points, std::span<const double> sigmas,
                            const MicArray& array, const CourtGeometry& court, std::uint64_t seed,
                            const LocalizerOptions& opts = {});

struct PlaneOffsetStats {
  std::vector<double> offsets;  // signed [m]
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t failures = 0;
};

/// Front-wall events with timestamp noise, localized without constraint;
/// reports the signed offsets from the wall plane.
PlaneOffsetStats plane_offset_experiment(std::size_t n_events, double sigma_samples,
                                         const MicArray& array, const CourtGeometry& court,
                                         std::uint64_t seed, const LocalizerOptions& opts = {});

}  // namespace squashloc
