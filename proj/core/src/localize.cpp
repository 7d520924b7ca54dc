#include "squashloc/localize.hpp"

#include "squashloc/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

namespace squashloc {

int EventGroup::reference_channel() const { return reference().channel; }

const Arrival& EventGroup::reference() const {
  if (arrivals.empty()) throw DataError("event group is empty");
  return *std::min_element(arrivals.begin(), arrivals.end(), [](const Arrival& a, const Arrival& b) {
    if (a.sample_index != b.sample_index) return a.sample_index < b.sample_index;
    return a.channel < b.channel;
  });
}

void EventGroup::validate(std::size_t min_channels) const {
  if (arrivals.size() < min_channels) {
    throw DataError("event group has " + std::to_string(arrivals.size()) + " channels, need " +
                    std::to_string(min_channels));
  }
  std::set<int> seen;
  for (const auto& a : arrivals) {
    if (!seen.insert(a.channel).second) {
      throw DataError("event group lists channel " + std::to_string(a.channel) + " twice");
    }
    if (!std::isfinite(a.sample_index)) throw DataError("event group has a non-finite arrival");
  }
}

// ---------------------------------------------------------------------------

TdoaProblem::TdoaProblem(const EventGroup& group, const MicArray& array) : c_(array.speed_of_sound) {
  if (group.arrivals.empty()) throw DataError("event group is empty");
  const Arrival& ref = group.reference();
  const double fs = array.sample_rate;
  tau_ref_ = ref.sample_index / fs;
  double wsum = 0.0;
  for (const auto& a : group.arrivals) {
    const Microphone& m = array.mic(a.channel);
    mic_pos_.push_back(m.position);
    const double w = 1.0 / (m.sigma * m.sigma);
    weight_.push_back(w);
    tau_hat_.push_back((a.sample_index - ref.sample_index) / fs);
    wsum += w;
  }
  sigma2_ = 1.0 / wsum;
}

void TdoaProblem::residuals(const Vec3& pos, std::vector<double>& a) const {
  a.resize(size());
  for (std::size_t i = 0; i < size(); ++i) {
    a[i] = (pos - mic_pos_[i]).norm() / c_ - tau_hat_[i];
  }
}

double TdoaProblem::t0_star(const Vec3& pos) const {
  std::vector<double> a;
  residuals(pos, a);
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i) s += weight_[i] * a[i];
  return sigma2_ * s;
}

double TdoaProblem::event_time(const Vec3& pos) const { return tau_ref_ - t0_star(pos); }

double TdoaProblem::objective(const Vec3& pos) const {
  std::vector<double> a;
  residuals(pos, a);
  // The form is invariant to a common shift of the a_i; centring on their
  // weighted mean keeps the two sums from cancelling near the minimum.
  double shift = 0.0;
  for (std::size_t i = 0; i < size(); ++i) shift += weight_[i] * a[i];
  shift *= sigma2_;
  double s1 = 0.0;
  double s2 = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    const double b = a[i] - shift;
    s1 += weight_[i] * b * b;
    s2 += weight_[i] * b;
  }
  return std::max(0.0, 0.5 * (s1 - sigma2_ * s2 * s2));
}

double TdoaProblem::objective_pairwise(const Vec3& pos) const {
  const std::size_t n = size();
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = (pos - mic_pos_[i]).norm();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double inner = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      inner += weight_[j] * ((r[i] - r[j]) / c_ - (tau_hat_[i] - tau_hat_[j]));
    }
    total += weight_[i] * inner * inner;
  }
  return 0.5 * sigma2_ * sigma2_ * total;
}

double TdoaProblem::objective_at(const Vec3& pos, double t0) const {
  std::vector<double> a;
  residuals(pos, a);
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i) s += 0.5 * weight_[i] * (t0 - a[i]) * (t0 - a[i]);
  return s;
}

Vec3 TdoaProblem::gradient(const Vec3& pos) const {
  const std::size_t n = size();
  std::vector<double> r(n);
  std::vector<double> a(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = (pos - mic_pos_[i]).norm();
    if (r[i] < 1e-3) {
      throw NumericalError("singular geometry: position within 1 mm of a microphone");
    }
    a[i] = r[i] / c_ - tau_hat_[i];
    mean += weight_[i] * a[i];
  }
  mean *= sigma2_;
  // Envelope property: df/dt0 = 0 at t0*, so differentiate at fixed t0*.
  Vec3 g = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    g += weight_[i] * (a[i] - mean) / (c_ * r[i]) * (pos - mic_pos_[i]);
  }
  return g;
}

double event_time_star(const Vec3& pos, const EventGroup& group, const MicArray& array) {
  return TdoaProblem(group, array).t0_star(pos);
}

double objective_f(const Vec3& pos, const EventGroup& group, const MicArray& array) {
  return TdoaProblem(group, array).objective(pos);
}

double objective_f_pairwise(const Vec3& pos, const EventGroup& group, const MicArray& array) {
  return TdoaProblem(group, array).objective_pairwise(pos);
}

Vec3 grad_f(const Vec3& pos, const EventGroup& group, const MicArray& array) {
  return TdoaProblem(group, array).gradient(pos);
}

// ---------------------------------------------------------------------------

namespace {

/// Affine parameterization pos = origin + basis * x.
template <int D>
struct Chart {
  Vec3 origin;
  Eigen::Matrix<double, 3, D> basis;
  Vec3 to_pos(const Eigen::Matrix<double, D, 1>& x) const { return origin + basis * x; }
};

struct DescentResult {
  Vec3 pos;
  double f = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool usable = false;
};

template <int D>
DescentResult descend(const TdoaProblem& problem, const Chart<D>& chart,
                      Eigen::Matrix<double, D, 1> x, const LocalizerOptions& opts) {
  using VecD = Eigen::Matrix<double, D, 1>;
  constexpr double kArmijo = 1e-4;
  constexpr double kMaxStep = 2.0;  // [m] per iteration

  DescentResult res;
  Vec3 pos = chart.to_pos(x);
  double f = problem.objective(pos);
  VecD g;
  try {
    g = chart.basis.transpose() * problem.gradient(pos);
  } catch (const NumericalError&) {
    return res;
  }

  VecD x_prev = x;
  VecD g_prev = g;
  double alpha = 0.0;
  int it = 0;
  for (; it < opts.max_iters; ++it) {
    const double gn = g.norm();
    if (!(gn >= opts.grad_tol)) break;

    // Barzilai-Borwein trial step, then backtrack to the Armijo condition.
    if (it == 0) {
      alpha = 0.5 / gn;
    } else {
      const VecD s = x - x_prev;
      const VecD y = g - g_prev;
      const double sy = s.dot(y);
      alpha = sy > 0.0 ? s.squaredNorm() / sy : 2.0 * alpha;
    }
    alpha = std::min(alpha, kMaxStep / gn);

    bool accepted = false;
    VecD x_new;
    double f_new = f;
    for (int k = 0; k < 80; ++k) {
      x_new = x - alpha * g;
      f_new = problem.objective(chart.to_pos(x_new));
      if (f_new <= f - kArmijo * alpha * gn * gn) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;

    VecD g_new;
    try {
      g_new = chart.basis.transpose() * problem.gradient(chart.to_pos(x_new));
    } catch (const NumericalError&) {
      return res;
    }
    const double step = alpha * gn;
    x_prev = x;
    g_prev = g;
    x = x_new;
    g = g_new;
    f = f_new;
    if (step < opts.step_tol) {
      ++it;
      break;
    }
  }
  res.pos = chart.to_pos(x);
  res.f = f;
  res.iterations = it;
  res.usable = std::isfinite(f) && res.pos.allFinite();
  return res;
}

std::vector<Vec3> default_starts(const CourtGeometry& court, const LocalizerOptions& opts) {
  if (!opts.starts.empty()) return opts.starts;
  std::vector<Vec3> starts{court.centroid()};
  for (const auto& s : court.surfaces) starts.push_back(s.point);
  return starts;
}

LocalizedEvent finish(const std::vector<DescentResult>& runs, const TdoaProblem& problem,
                      const CourtGeometry& court, const LocalizerOptions& opts) {
  const DescentResult* best = nullptr;
  double best_any = std::numeric_limits<double>::infinity();
  for (const auto& r : runs) {
    if (!r.usable) continue;
    best_any = std::min(best_any, r.f);
    if (!court.contains(r.pos, opts.box_margin)) continue;
    if (best == nullptr || r.f < best->f) best = &r;
  }
  if (best == nullptr) {
    throw NoSolutionError("localization failed: no start converged inside the court box", best_any);
  }
  LocalizedEvent ev;
  ev.position = best->pos;
  ev.residual = best->f;
  ev.iterations = best->iterations;
  ev.event_time = problem.event_time(best->pos);
  return ev;
}

}  // namespace

LocalizedEvent localize_3d(const EventGroup& group, const MicArray& array,
                           const CourtGeometry& court, const LocalizerOptions& opts) {
  group.validate(4);
  const TdoaProblem problem(group, array);
  Chart<3> chart{Vec3::Zero(), Eigen::Matrix3d::Identity()};
  std::vector<DescentResult> runs;
  for (const Vec3& s : default_starts(court, opts)) runs.push_back(descend<3>(problem, chart, s, opts));
  return finish(runs, problem, court, opts);
}

LocalizedEvent localize_on_plane(const EventGroup& group, const MicArray& array,
                                 const CourtGeometry& court, const NamedPlane& plane,
                                 const LocalizerOptions& opts) {
  group.validate(3);
  const TdoaProblem problem(group, array);
  const Vec3 n = plane.unit_normal.normalized();
  Eigen::Index axis = 0;
  n.cwiseAbs().minCoeff(&axis);
  const Vec3 helper = Vec3::Unit(axis);
  const Vec3 e1 = n.cross(helper).normalized();
  const Vec3 e2 = n.cross(e1);
  Chart<2> chart{plane.point, Eigen::Matrix<double, 3, 2>()};
  chart.basis.col(0) = e1;
  chart.basis.col(1) = e2;

  std::vector<DescentResult> runs;
  for (const Vec3& s : default_starts(court, opts)) {
    const Vec3 d = s - plane.point;
    runs.push_back(descend<2>(problem, chart, Eigen::Vector2d(d.dot(e1), d.dot(e2)), opts));
  }
  LocalizedEvent ev = finish(runs, problem, court, opts);
  ev.constrained_plane = plane;
  return ev;
}

}  // namespace squashloc
