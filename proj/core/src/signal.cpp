#include "squashloc/signal.hpp"

#include "squashloc/error.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

namespace squashloc {

void AudioBlock::validate() const {
  if (!(sample_rate > 0)) throw DataError("audio sample_rate must be positive");
  const std::size_t n = frames();
  for (std::size_t c = 0; c < samples.size(); ++c) {
    if (samples[c].size() != n) {
      throw DataError("audio channel " + std::to_string(c) + " length differs from channel 0");
    }
    for (float v : samples[c]) {
      if (!(v >= -1.0f && v <= 1.0f)) {
        throw DataError("audio channel " + std::to_string(c) + " has amplitude outside [-1, 1]");
      }
    }
  }
}

RunningStats::RunningStats(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ > 0) ring_.reserve(capacity_);
}

void RunningStats::reset() {
  count_ = 0;
  mean_ = 0.0;
  m2_ = 0.0;
  ring_.clear();
  head_ = 0;
}

void RunningStats::push(double x) {
  if (capacity_ == 0 || count_ < capacity_) {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
    if (capacity_ > 0) ring_.push_back(x);
    return;
  }
  // Window full: replace the oldest sample in one step.
  const double old = ring_[head_];
  ring_[head_] = x;
  head_ = (head_ + 1) % capacity_;
  const double old_mean = mean_;
  mean_ += (x - old) / static_cast<double>(count_);
  m2_ += (x - old) * (x - mean_ + old - old_mean);
  if (m2_ < 0.0) m2_ = 0.0;
}

double RunningStats::variance() const {
  return count_ < 2 ? 0.0 : m2_ / static_cast<double>(count_ - 1);
}

double RunningStats::population_variance() const {
  return count_ == 0 ? 0.0 : m2_ / static_cast<double>(count_);
}

double RunningStats::stddev() const { return std::sqrt(variance()); }

RunningStats welford_update(RunningStats stats, double x) {
  stats.push(x);
  return stats;
}

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

namespace {

/// FFTW plans are created once per length under a lock; execution with the
/// new-array interface is thread safe.
fftw_plan r2c_plan(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, fftw_plan> plans;
  std::lock_guard lock(mu);
  auto it = plans.find(n);
  if (it != plans.end()) return it->second;
  double* in = fftw_alloc_real(n);
  fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
  fftw_plan p = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  fftw_free(in);
  fftw_free(out);
  if (p == nullptr) throw NumericalError("FFTW could not plan a transform of length " + std::to_string(n));
  plans.emplace(n, p);
  return p;
}

struct FftBuffers {
  double* in = nullptr;
  fftw_complex* out = nullptr;
  std::size_t size = 0;

  void reserve(std::size_t n) {
    if (n <= size) return;
    release();
    in = fftw_alloc_real(n);
    out = fftw_alloc_complex(n / 2 + 1);
    size = n;
  }
  void release() {
    fftw_free(in);
    fftw_free(out);
    in = nullptr;
    out = nullptr;
  }
  ~FftBuffers() { release(); }
};

/// Half spectrum (bins 0..n/2) of a real sequence.
std::span<const fftw_complex> rfft(std::span<const double> x) {
  thread_local FftBuffers buf;
  const std::size_t n = x.size();
  buf.reserve(n);
  std::copy(x.begin(), x.end(), buf.in);
  fftw_execute_dft_r2c(r2c_plan(n), buf.in, buf.out);
  return {buf.out, n / 2 + 1};
}

}  // namespace

std::vector<std::complex<double>> dft(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  if (n == 0) return out;
  const auto half = rfft(x);
  for (std::size_t k = 0; k < half.size(); ++k) out[k] = {half[k][0], half[k][1]};
  for (std::size_t k = half.size(); k < n; ++k) out[k] = std::conj(out[n - k]);
  return out;
}

std::vector<double> power_spectrum(std::span<const double> window, Taper taper) {
  const std::size_t w = window.size();
  if (!is_power_of_two(w)) {
    throw DataError("invalid window: length " + std::to_string(w) + " is not a power of two");
  }
  std::vector<double> tapered(window.begin(), window.end());
  if (taper == Taper::hann && w > 1) {
    for (std::size_t i = 0; i < w; ++i) {
      tapered[i] *= 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                         static_cast<double>(w - 1));
    }
  }
  const auto half = rfft(tapered);
  std::vector<double> out(w);
  for (std::size_t k = 0; k < half.size(); ++k) out[k] = half[k][0] * half[k][0] + half[k][1] * half[k][1];
  for (std::size_t k = half.size(); k < w; ++k) out[k] = out[w - k];
  return out;
}

SpectralModel fold_observation(const SpectralModel& prior, std::span<const double> x) {
  if (x.size() != prior.dim()) throw DataError("spectral observation dimension mismatch");
  const double n = static_cast<double>(prior.history);
  SpectralModel post;
  post.history = prior.history + 1;
  post.mean.resize(prior.dim());
  post.variance.resize(prior.dim());
  for (std::size_t j = 0; j < prior.dim(); ++j) {
    const double d = x[j] - prior.mean[j];
    const double m = prior.mean[j] + d / (n + 1.0);
    post.mean[j] = m;
    post.variance[j] = std::max((n * prior.variance[j] + d * (x[j] - m)) / (n + 1.0), kVarianceFloor);
  }
  return post;
}

double kl_gaussian_1d(double prior_mean, double prior_var, double post_mean, double post_var) {
  const double v = std::max(prior_var, kVarianceFloor);
  const double vp = std::max(post_var, kVarianceFloor);
  const double dm = post_mean - prior_mean;
  const double e = (vp - v) / v;
  const double core = e - std::log1p(e);
  return 0.5 * (core + dm * dm / v);
}

double kl_gaussian(const SpectralModel& prior, const SpectralModel& posterior) {
  if (prior.dim() != posterior.dim()) throw DataError("kl_gaussian: dimension mismatch");
  double s = 0.0;
  for (std::size_t j = 0; j < prior.dim(); ++j) {
    s += kl_gaussian_1d(prior.mean[j], prior.variance[j], posterior.mean[j], posterior.variance[j]);
  }
  return s;
}

}  // namespace squashloc
