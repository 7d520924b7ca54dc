#pragma once

#include "squashloc/error.hpp"
#include "squashloc/geometry.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace squashloc {

/// Arrival of one event at one channel. Sample indices may be fractional
/// (simulated arrivals keep sub-sample precision).
struct Arrival {
  int channel = 0;
  double sample_index = 0.0;
  double score = 0.0;
};

/// Cross-channel set of arrivals for one physical event, at most one per
/// channel.
struct EventGroup {
  std::vector<Arrival> arrivals;

  std::size_t size() const { return arrivals.size(); }
  /// Channel with the earliest arrival (ties: lowest channel id).
  int reference_channel() const;
  const Arrival& reference() const;
  /// Throws DataError on duplicate channels or fewer than `min_channels` entries.
  void validate(std::size_t min_channels) const;
};

struct LocalizerOptions {
  int max_iters = 100;
  double grad_tol = 1e-8;   // on |grad f|, f in natural (dimensionless) units
  double step_tol = 1e-6;   // [m]
  double box_margin = 0.5;  // solutions outside the inflated court box are rejected
  std::vector<Vec3> starts; // empty: court centroid + the five surface centres
};

struct LocalizedEvent {
  Vec3 position = Vec3::Zero();
  double event_time = 0.0;  // [s], absolute
  double residual = 0.0;    // f(t0*) at the solution
  int iterations = 0;       // descent steps of the winning start
  std::optional<NamedPlane> constrained_plane;
};

/// Likelihood model for one event group. With a_i = r_i/c - tau_hat_i and
/// weights 1/sigma_i^2, the optimal reference delay is the weighted mean of
/// a_i and f(t0*) is half the weighted spread of a_i around it.
class TdoaProblem {
 public:
  TdoaProblem(const EventGroup& group, const MicArray& array);

  std::size_t size() const { return mic_pos_.size(); }

  /// t0* = Sigma^2 * sum_i a_i / sigma_i^2 [s].
  double t0_star(const Vec3& pos) const;
  /// Absolute event time tau_ref - t0* [s].
  double event_time(const Vec3& pos) const;
  /// f(t0*), single-sum form.
  double objective(const Vec3& pos) const;
  /// f(t0*), pairwise form (O(N^2)); algebraically identical to objective().
  double objective_pairwise(const Vec3& pos) const;
  /// Gradient of f(t0*) w.r.t. position [1/m]. Throws NumericalError within
  /// 1 mm of a microphone.
  Vec3 gradient(const Vec3& pos) const;
  /// f(t0) for an arbitrary reference delay (before eliminating t0).
  double objective_at(const Vec3& pos, double t0) const;

 private:
  void residuals(const Vec3& pos, std::vector<double>& a) const;

  std::vector<Vec3> mic_pos_;
  std::vector<double> weight_;   // 1/sigma_i^2 [1/s^2]
  std::vector<double> tau_hat_;  // relative delays [s]
  double tau_ref_ = 0.0;         // absolute reference time [s]
  double sigma2_ = 0.0;          // Sigma^2 = 1/sum(weight)
  double c_ = 343.0;
};

double event_time_star(const Vec3& pos, const EventGroup& group, const MicArray& array);
double objective_f(const Vec3& pos, const EventGroup& group, const MicArray& array);
double objective_f_pairwise(const Vec3& pos, const EventGroup& group, const MicArray& array);
Vec3 grad_f(const Vec3& pos, const EventGroup& group, const MicArray& array);

/// Thrown when every start fails; carries the best residual seen.
class NoSolutionError : public NumericalError {
 public:
  NoSolutionError(const std::string& what, double best_residual)
      : NumericalError(what), best_residual_(best_residual) {}
  double best_residual() const { return best_residual_; }

 private:
  double best_residual_;
};

/// Multi-start gradient descent with Armijo backtracking. Needs >= 4 channels.
LocalizedEvent localize_3d(const EventGroup& group, const MicArray& array,
                           const CourtGeometry& court, const LocalizerOptions& opts = {});

/// Same objective restricted to `plane` (2-D parameterization, projected
/// gradient). Needs >= 3 channels.
LocalizedEvent localize_on_plane(const EventGroup& group, const MicArray& array,
                                 const CourtGeometry& court, const NamedPlane& plane,
                                 const LocalizerOptions& opts = {});

}  // namespace squashloc
