#include "oracles.hpp"

#include "squashloc/error.hpp"
#include "squashloc/simulate.hpp"

#include <doctest.h>

#include <sstream>

using namespace squashloc;

namespace {
const CourtGeometry kCourt = CourtGeometry::standard();
const MicArray kArray = MicArray::default_layout(kCourt);
}  // namespace

TEST_CASE("forward delays") {
  SyntheticEvent e{kArray.mic(3).position, 0.25, ClassLabel::racquet, 1.0};
  const auto g = forward_delays(e, kArray);
  CHECK(g.arrivals.at(3).sample_index == doctest::Approx(0.25 * kArray.sample_rate).epsilon(1e-15));
  for (const auto& a : g.arrivals) {
    CHECK(a.sample_index == doctest::Approx((0.25 + distance(e.position, kArray.mic(a.channel)) / 343.0) * 96000.0));
  }

  MicArray pair;
  pair.mics = {Microphone{0, Vec3(0, 0, 0)}, Microphone{1, Vec3(2, 0, 0)}};
  const auto sym = forward_delays(SyntheticEvent{Vec3(1, 3, 1), 0.0}, pair);
  CHECK(sym.arrivals[0].sample_index == sym.arrivals[1].sample_index);

  SyntheticEvent later = e;
  later.time += 0.01;
  const auto shifted = forward_delays(later, kArray);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(shifted.arrivals[i].sample_index - g.arrivals[i].sample_index == doctest::Approx(960.0));
  }

  const auto rounded = forward_delays(SyntheticEvent{Vec3(1.1, 2.3, 0.7), 0.0}, kArray, true);
  for (const auto& a : rounded.arrivals) CHECK(a.sample_index == std::round(a.sample_index));
}

TEST_CASE("perturb statistics") {
  const auto g = forward_delays(SyntheticEvent{Vec3(1, 2, 3), 0.1}, kArray);
  NoiseSpec none;
  const auto same = perturb(g, none);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(same.arrivals[i].sample_index == g.arrivals[i].sample_index);

  std::vector<double> draws;
  for (std::uint64_t s = 0; s < 10000; ++s) {
    NoiseSpec n;
    n.timestamp_sigma = 50.0;
    n.seed = s;
    draws.push_back(perturb(g, n).arrivals[0].sample_index - g.arrivals[0].sample_index);
  }
  CHECK(std::sqrt(oracle::two_pass_variance(draws)) == doctest::Approx(50.0).epsilon(0.03));

  NoiseSpec a, b;
  a.timestamp_sigma = b.timestamp_sigma = 10.0;
  a.seed = 1;
  b.seed = 2;
  CHECK(perturb(g, a).arrivals[0].sample_index == perturb(g, a).arrivals[0].sample_index);
  bool differs = false;
  for (std::size_t i = 0; i < g.size(); ++i) {
    differs = differs || perturb(g, a).arrivals[i].sample_index != perturb(g, b).arrivals[i].sample_index;
  }
  CHECK(differs);

  NoiseSpec bad;
  bad.timestamp_sigma = -1.0;
  CHECK_THROWS_AS(perturb(g, bad), ConfigError);
}

TEST_CASE("synthetic waveforms") {
  SUBCASE("noise only") {
    NoiseSpec n;
    n.waveform_snr_db = 20.0;
    n.seed = 3;
    const auto a = synth_waveform({}, kArray, 50000, n);
    CHECK(a.channels() == 6);
    CHECK(a.frames() == 50000);
    std::vector<double> x(a.samples[2].begin(), a.samples[2].end());
    CHECK(std::sqrt(oracle::two_pass_variance(x)) == doctest::Approx(background_sigma(n)).epsilon(0.02));
  }
  SUBCASE("loud event peaks at its arrival") {
    NoiseSpec n;
    n.waveform_snr_db = 60.0;
    n.seed = 4;
    const SyntheticEvent e{Vec3(2.0, 3.0, 1.0), 0.01, ClassLabel::racquet, 1.0};
    const auto a = synth_waveform(std::span(&e, 1), kArray, 9600, n);
    const auto g = forward_delays(e, kArray);
    for (std::size_t c = 0; c < 6; ++c) {
      const auto& ch = a.samples[c];
      const auto peak = std::max_element(ch.begin(), ch.end(), [](float p, float q) { return std::abs(p) < std::abs(q); }) - ch.begin();
      CHECK(std::abs(static_cast<double>(peak) - g.arrivals[c].sample_index) <= 10.0);
    }
  }
  SUBCASE("equidistant channels see the same onset") {
    MicArray pair;
    pair.mics = {Microphone{0, Vec3(0, 0, 0)}, Microphone{1, Vec3(2, 0, 0)}};
    const SyntheticEvent e{Vec3(1, 3, 1), 0.001, ClassLabel::racquet, 1.0};
    const auto a = synth_waveform(std::span(&e, 1), pair, 4000, NoiseSpec{});
    CHECK(a.samples[0] == a.samples[1]);
  }
  SUBCASE("clipping keeps amplitudes in range") {
    const SyntheticEvent e{kArray.mic(0).position + Vec3(0.01, 0.01, 0.01), 0.001, ClassLabel::floor, 1.0};
    const auto a = synth_waveform(std::span(&e, 1), kArray, 4000, NoiseSpec{});
    CHECK_NOTHROW(a.validate());
  }
}

TEST_CASE("surface events") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    for (auto cls : kImpactClasses) {
      const auto e = random_surface_event(cls, kCourt, 0.0, rng);
      CHECK(kCourt.contains(e.position));
      CHECK(e.surface == cls);
      if (const auto s = surface_for_class(cls)) {
        CHECK(std::abs(plane_offset(e.position, kCourt.surface(*s))) <= 0.05);
      }
    }
  }
  CHECK_FALSE(surface_for_class(ClassLabel::racquet).has_value());
}

TEST_CASE("error experiment is reproducible and tabulates percentiles") {
  const std::vector<double> sigmas{0.0, 10.0};
  const auto a = error_experiment(100, sigmas, kArray, kCourt, 42);
  const auto b = error_experiment(100, sigmas, kArray, kCourt, 42);
  CHECK(a.errors == b.errors);
  CHECK(std::is_sorted(a.errors[1].begin(), a.errors[1].end()));
  CHECK(a.percentile(0, 90) < 0.04);
  CHECK(a.median(0) <= a.median(1));
  CHECK(a.percentile(1, 0) == a.errors[1].front());
  CHECK(a.percentile(1, 100) == a.errors[1].back());
  std::ostringstream os;
  a.write_csv(os);
  const std::string csv = os.str();
  CHECK(csv.rfind("sigma,percentile,error_m\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 101);
  CHECK_THROWS_AS(error_experiment(50, sigmas, kArray, kCourt, 1), ConfigError);
}

TEST_CASE("plane offset experiment basics") {
  const auto s = plane_offset_experiment(100, 0.0, kArray, kCourt, 3);
  CHECK(s.offsets.size() + s.failures == 100);
  CHECK(std::abs(s.mean) < 1e-3);
  CHECK(s.stddev < 1e-3);
}
