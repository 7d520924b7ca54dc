#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace squashloc {

/// Multichannel sample buffer, amplitudes normalized to [-1, 1].
struct AudioBlock {
  double sample_rate = 96000.0;
  std::vector<std::vector<float>> samples;  // one array per channel
  std::int64_t start_index = 0;             // absolute index of samples[c][0]

  std::size_t channels() const { return samples.size(); }
  std::size_t frames() const { return samples.empty() ? 0 : samples.front().size(); }

  /// Throws DataError on ragged channels or out-of-range amplitudes.
  void validate() const;
};

inline constexpr double kVarianceFloor = 1e-12;

/// Welford running mean/variance over the most recent `capacity` samples
/// (capacity 0 keeps every sample). On overflow the oldest sample's
/// contribution is removed.
class RunningStats {
 public:
  explicit RunningStats(std::size_t capacity = 0);

  void push(double x);
  void reset();

  std::size_t count() const { return count_; }
  std::size_t capacity() const { return capacity_; }
  double mean() const { return mean_; }
  double m2() const { return m2_; }
  /// Sample variance m2/(count-1); 0 for fewer than two samples.
  double variance() const;
  /// Population variance m2/count; 0 when empty.
  double population_variance() const;
  double stddev() const;

 private:
  std::size_t capacity_;
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  std::vector<double> ring_;
  std::size_t head_ = 0;  // oldest retained sample once the ring is full
};

/// Functional form of RunningStats::push.
RunningStats welford_update(RunningStats stats, double x);

enum class Taper { none, hann };

bool is_power_of_two(std::size_t n);

/// DFT of a real sequence of any length (full, conjugate-symmetric).
std::vector<std::complex<double>> dft(std::span<const double> x);

/// |DFT|^2 of the (optionally Hann-tapered) window. Length must be a power
/// of two; throws DataError otherwise. With Taper::none,
/// sum(x^2) == sum(result) / w.
std::vector<double> power_spectrum(std::span<const double> window, Taper taper = Taper::none);

/// Diagonal Gaussian over w-dimensional spectra.
struct SpectralModel {
  std::vector<double> mean;
  std::vector<double> variance;  // floored at kVarianceFloor
  std::size_t history = 0;       // number of spectra summarized

  std::size_t dim() const { return mean.size(); }
};

/// Posterior after adding one observation to a model summarizing `history`
/// samples: the new point enters with weight 1/(history+1).
SpectralModel fold_observation(const SpectralModel& prior, std::span<const double> x);

/// KL(posterior || prior) for diagonal Gaussians:
/// 1/2 * sum_j [ log(v_j/v'_j) + v'_j/v_j - 1 + (m'_j - m_j)^2 / v_j ].
double kl_gaussian(const SpectralModel& prior, const SpectralModel& posterior);

/// One-dimensional case of kl_gaussian.
double kl_gaussian_1d(double prior_mean, double prior_var, double post_mean, double post_var);

}  // namespace squashloc
