#pragma once
// Independent reference implementations used to compute expected values.
// Deliberately naive: long-double accumulation, dense matrices, grids.

#include "squashloc/geometry.hpp"
#include "squashloc/localize.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

namespace oracle {

inline std::vector<std::complex<double>> direct_dft(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    long double re = 0, im = 0;
    for (std::size_t t = 0; t < n; ++t) {
      const long double ang = -2.0L * std::numbers::pi_v<long double> * static_cast<long double>((k * t) % n) / n;
      re += x[t] * std::cos(ang);
      im += x[t] * std::sin(ang);
    }
    out[k] = {static_cast<double>(re), static_cast<double>(im)};
  }
  return out;
}

inline double two_pass_mean(std::span<const double> x) {
  long double s = 0;
  for (double v : x) s += v;
  return static_cast<double>(s / x.size());
}

/// Sample variance (n - 1 denominator).
inline double two_pass_variance(std::span<const double> x) {
  const long double m = two_pass_mean(x);
  long double s = 0;
  for (double v : x) s += (v - m) * (v - m);
  return static_cast<double>(s / (x.size() - 1));
}

/// KL(N1 || N0) with dense covariance matrices.
inline double kl_full(const Eigen::VectorXd& m0, const Eigen::MatrixXd& s0, const Eigen::VectorXd& m1,
                      const Eigen::MatrixXd& s1) {
  const Eigen::MatrixXd inv0 = s0.inverse();
  const Eigen::VectorXd d = m1 - m0;
  const double w = static_cast<double>(m0.size());
  return 0.5 * (std::log(s0.determinant() / s1.determinant()) + (inv0 * s1).trace() - w + d.dot(inv0 * d));
}

struct Tdoa {
  std::vector<squashloc::Vec3> mics;
  std::vector<double> sigma;    // [s]
  std::vector<double> tau_hat;  // relative to the earliest arrival [s]
  double c = 343.0;

  Tdoa(const squashloc::EventGroup& g, const squashloc::MicArray& array) : c(array.speed_of_sound) {
    double t_ref = std::numeric_limits<double>::infinity();
    for (const auto& a : g.arrivals) t_ref = std::min(t_ref, a.sample_index / array.sample_rate);
    for (const auto& a : g.arrivals) {
      const auto& m = array.mic(a.channel);
      mics.push_back(m.position);
      sigma.push_back(m.sigma);
      tau_hat.push_back(a.sample_index / array.sample_rate - t_ref);
    }
  }

  /// g(t0) = sum_i (c tau_i + c t0 - r_i)^2 / (2 sigma_i^2 c^2).
  double g(const squashloc::Vec3& p, double t0) const {
    long double s = 0;
    for (std::size_t i = 0; i < mics.size(); ++i) {
      const long double r = (p - mics[i]).norm();
      const long double e = c * tau_hat[i] + c * t0 - r;
      s += e * e / (2.0L * sigma[i] * sigma[i] * c * c);
    }
    return static_cast<double>(s);
  }

  /// argmin over t0 on a uniform grid.
  double t0_grid(const squashloc::Vec3& p, double lo, double hi, std::size_t steps) const {
    double best = lo, best_v = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k <= steps; ++k) {
      const double t = lo + (hi - lo) * k / steps;
      const double v = g(p, t);
      if (v < best_v) {
        best_v = v;
        best = t;
      }
    }
    return best;
  }

  /// Pairwise form: (Sigma^4 / 2) sum_i w_i [sum_j w_j ((r_i - r_j)/c - (tau_i - tau_j))]^2.
  double pairwise(const squashloc::Vec3& p) const {
    const std::size_t n = mics.size();
    long double wsum = 0;
    std::vector<long double> w(n), r(n);
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = 1.0L / (static_cast<long double>(sigma[i]) * sigma[i]);
      r[i] = (p - mics[i]).norm();
      wsum += w[i];
    }
    long double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      long double inner = 0;
      for (std::size_t j = 0; j < n; ++j) inner += w[j] * ((r[i] - r[j]) / c - (tau_hat[i] - tau_hat[j]));
      total += w[i] * inner * inner;
    }
    const long double s2 = 1.0L / wsum;
    return static_cast<double>(0.5L * s2 * s2 * total);
  }
};

}  // namespace oracle
