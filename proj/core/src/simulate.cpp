#include "squashloc/simulate.hpp"

#include "squashloc/error.hpp"

#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>

namespace squashloc {

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

EventGroup forward_delays(const SyntheticEvent& event, const MicArray& array, bool round_to_sample) {
  EventGroup g;
  for (const auto& m : array.mics) {
    double s = (event.time + distance(event.position, m) / array.speed_of_sound) * array.sample_rate;
    if (round_to_sample) s = std::round(s);
    g.arrivals.push_back(Arrival{m.id, s, 0.0});
  }
  return g;
}

EventGroup perturb(EventGroup group, const NoiseSpec& noise) {
  if (noise.timestamp_sigma < 0) throw ConfigError("timestamp_sigma must be >= 0");
  if (noise.timestamp_sigma == 0) return group;
  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> normal(0.0, noise.timestamp_sigma);
  for (auto& a : group.arrivals) a.sample_index += normal(rng);
  return group;
}

double background_sigma(const NoiseSpec& noise, const ImpactTemplate& tmpl) {
  if (!noise.waveform_snr_db) return 0.0;
  return tmpl.gain_m / noise.snr_reference_m / std::pow(10.0, *noise.waveform_snr_db / 20.0);
}

AudioBlock synth_waveform(std::span<const SyntheticEvent> events, const MicArray& array,
                          std::size_t duration, const NoiseSpec& noise, const ImpactTemplate& tmpl) {
  const double fs = array.sample_rate;
  AudioBlock block;
  block.sample_rate = fs;
  block.samples.assign(array.size(), std::vector<float>(duration, 0.0f));

  std::vector<std::vector<double>> acc(array.size(), std::vector<double>(duration, 0.0));
  const double sigma = background_sigma(noise, tmpl);
  if (sigma > 0) {
    for (std::size_t c = 0; c < array.size(); ++c) {
      auto rng = stream_rng(noise.seed ^ 0x6e6f697365ULL, c);
      std::normal_distribution<double> normal(0.0, sigma);
      for (double& v : acc[c]) v = normal(rng);
    }
  }

  const auto k = static_cast<std::size_t>(std::max(tmpl.components, 1));
  const double norm = 1.0 / std::sqrt(static_cast<double>(k) / 2.0);
  const auto tail = static_cast<std::int64_t>(std::ceil(8.0 * tmpl.decay_s * fs));
  for (std::size_t e = 0; e < events.size(); ++e) {
    const SyntheticEvent& ev = events[e];
    auto rng = stream_rng(noise.seed ^ 0x696d70616374ULL, e);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> freq(k);
    for (auto& f : freq) f = tmpl.min_hz * std::pow(tmpl.max_hz / tmpl.min_hz, unit(rng));

    for (std::size_t c = 0; c < array.size(); ++c) {
      const double d = distance(ev.position, array.mics[c]);
      const double amp = ev.amplitude * tmpl.gain_m / std::max(d, tmpl.min_distance_m);
      const double onset = (ev.time + d / array.speed_of_sound) * fs;  // fractional sample
      const auto first = static_cast<std::int64_t>(std::ceil(onset));
      if (first >= static_cast<std::int64_t>(duration)) continue;
      const std::int64_t begin = std::max<std::int64_t>(first, 0);
      const std::int64_t end = std::min<std::int64_t>(first + tail, static_cast<std::int64_t>(duration));
      if (begin >= end) continue;

      const double t0 = (static_cast<double>(begin) - onset) / fs;
      std::vector<std::complex<double>> phase(k), step(k);
      for (std::size_t i = 0; i < k; ++i) {
        phase[i] = std::polar(1.0, 2.0 * std::numbers::pi * freq[i] * t0);
        step[i] = std::polar(1.0, 2.0 * std::numbers::pi * freq[i] / fs);
      }
      const double env_step = std::exp(-1.0 / (tmpl.decay_s * fs));
      double env = amp * std::exp(-t0 / tmpl.decay_s) * norm;
      auto& out = acc[c];
      for (std::int64_t n = begin; n < end; ++n) {
        double s = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
          s += phase[i].real();
          phase[i] *= step[i];
        }
        out[static_cast<std::size_t>(n)] += env * s;
        env *= env_step;
      }
    }
  }

  for (std::size_t c = 0; c < array.size(); ++c) {
    for (std::size_t n = 0; n < duration; ++n) {
      block.samples[c][n] = static_cast<float>(std::clamp(acc[c][n], -1.0, 1.0));
    }
  }
  return block;
}

Vec3 random_point(const CourtGeometry& court, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double x = unit(rng) * court.width;
  const double y = unit(rng) * court.depth;
  const double z = unit(rng) * court.height;
  return {x, y, z};
}

std::optional<std::string_view> surface_for_class(ClassLabel c) {
  switch (c) {
    case ClassLabel::front_wall: return kFrontWall;
    case ClassLabel::floor: return kFloor;
    case ClassLabel::glass: return kBackGlass;
    default: return std::nullopt;
  }
}

SyntheticEvent random_surface_event(ClassLabel surface, const CourtGeometry& court, double time,
                                    std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  constexpr double kEdge = 0.1;  // keep impacts off the seams
  auto span = [&](double extent) { return kEdge + unit(rng) * (extent - 2 * kEdge); };
  SyntheticEvent ev;
  ev.time = time;
  ev.surface = surface;
  switch (surface) {
    case ClassLabel::front_wall: {
      const double x = span(court.width);
      const double z = span(court.height);
      ev.position = {x, 0.0, z};
      break;
    }
    case ClassLabel::floor: {
      const double x = span(court.width);
      const double y = span(court.depth);
      ev.position = {x, y, 0.0};
      break;
    }
    case ClassLabel::glass: {
      const double x = span(court.width);
      const double z = span(court.height);
      ev.position = {x, court.depth, z};
      break;
    }
    default: {
      const double x = span(court.width);
      const double y = span(court.depth);
      const double z = span(court.height);
      ev.position = {x, y, z};
      break;
    }
  }
  return ev;
}

double ErrorTable::percentile(std::size_t i, double p) const {
  const auto& e = errors.at(i);
  if (e.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(e.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, e.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return e[lo];
  return e[lo] + frac * (e[hi] - e[lo]);
}

void ErrorTable::write_csv(std::ostream& os) const {
  os << "sigma,percentile,error_m\n";
  char buf[64];
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    for (int p = 0; p <= 100; ++p) {
      std::snprintf(buf, sizeof buf, "%.9g", percentile(i, p));
      os << sigmas[i] << ',' << p << ',' << buf << '\n';
    }
  }
}

using detail::parallel_for;

ErrorTable error_experiment(std::size_t n_points, std::span<const double> sigmas,
                            const MicArray& array, const CourtGeometry& court, std::uint64_t seed,
                            const LocalizerOptions& opts) {
  if (n_points < 100) throw ConfigError("error_experiment needs at least 100 points");
  ErrorTable table;
  table.sigmas.assign(sigmas.begin(), sigmas.end());
  table.errors.resize(sigmas.size());
  table.failures.assign(sigmas.size(), 0);

  std::vector<Vec3> points(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    auto rng = stream_rng(seed, i);
    points[i] = random_point(court, rng);
  }
  for (std::size_t s = 0; s < sigmas.size(); ++s) {
    std::vector<double> err(n_points);
    parallel_for(n_points, [&](std::size_t i) {
      const SyntheticEvent ev{points[i], 0.0, ClassLabel::racquet, 1.0};
      NoiseSpec noise;
      noise.timestamp_sigma = sigmas[s];
      noise.seed = stream_rng(seed + 0x5bd1e995ULL * (s + 1), i)();
      const EventGroup g = perturb(forward_delays(ev, array), noise);
      try {
        err[i] = (localize_3d(g, array, court, opts).position - points[i]).norm();
      } catch (const NumericalError&) {
        err[i] = std::numeric_limits<double>::infinity();
      }
    });
    table.failures[s] = static_cast<std::size_t>(
        std::count(err.begin(), err.end(), std::numeric_limits<double>::infinity()));
    std::sort(err.begin(), err.end());
    table.errors[s] = std::move(err);
  }
  return table;
}

PlaneOffsetStats plane_offset_experiment(std::size_t n_events, double sigma_samples,
                                         const MicArray& array, const CourtGeometry& court,
                                         std::uint64_t seed, const LocalizerOptions& opts) {
  const NamedPlane& wall = court.surface(kFrontWall);
  PlaneOffsetStats st;
  for (std::size_t i = 0; i < n_events; ++i) {
    auto rng = stream_rng(seed, i);
    const SyntheticEvent ev = random_surface_event(ClassLabel::front_wall, court, 0.0, rng);
    NoiseSpec noise;
    noise.timestamp_sigma = sigma_samples;
    noise.seed = rng();
    try {
      const auto loc = localize_3d(perturb(forward_delays(ev, array), noise), array, court, opts);
      st.offsets.push_back(plane_offset(loc.position, wall));
    } catch (const NumericalError&) {
      ++st.failures;
    }
  }
  if (!st.offsets.empty()) {
    st.mean = std::accumulate(st.offsets.begin(), st.offsets.end(), 0.0) /
              static_cast<double>(st.offsets.size());
    double ss = 0.0;
    for (double d : st.offsets) ss += (d - st.mean) * (d - st.mean);
    st.stddev = st.offsets.size() > 1 ? std::sqrt(ss / static_cast<double>(st.offsets.size() - 1)) : 0.0;
  }
  return st;
}

}  // namespace squashloc
