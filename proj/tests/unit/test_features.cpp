#include "oracles.hpp"

#include "squashloc/error.hpp"
#include "squashloc/features.hpp"

#include <doctest.h>

#include <numeric>
#include <random>

using namespace squashloc;

TEST_CASE("T1 window shape and alignment") {
  std::vector<float> s(2000);
  std::iota(s.begin(), s.end(), 0.0f);
  const auto fv = extract_t1(s, Detection{2, 300}, 300);
  CHECK(fv.values.size() == 601);
  CHECK(fv.kind == FeatureKind::T1);
  CHECK(fv.values.front() == s[0]);
  CHECK(fv.values[300] == s[300]);
  CHECK(fv.channel == 2);
  CHECK(fv.detection_index == 300);

  const auto shifted = extract_t1(s, Detection{0, 1300}, 300, 1000);
  CHECK(shifted.values.front() == s[0]);

  CHECK_THROWS_AS(extract_t1(s, Detection{0, 299}, 300), DataError);
  CHECK_THROWS_AS(extract_t1(s, Detection{0, 1700}, 300), DataError);

  const std::vector<float> silence(1000, 0.0f);
  for (double v : extract_t1(silence, Detection{0, 500}, 300).values) CHECK(v == 0.0);
}

TEST_CASE("T2 spectrum magnitude") {
  const std::vector<float> silence(1000, 0.0f);
  for (double v : extract_t2(silence, Detection{0, 100}, 300).values) CHECK(v == 0.0);

  const std::size_t w = 300, k = 12;
  std::vector<float> tone(1000, 0.0f);
  for (std::size_t t = 0; t < w; ++t) tone[100 + t] = static_cast<float>(std::sin(2 * std::numbers::pi * k * t / w));
  const auto fv = extract_t2(tone, Detection{0, 100}, w);
  CHECK(fv.values.size() == w);
  const auto peak = std::max_element(fv.values.begin(), fv.values.begin() + w / 2) - fv.values.begin();
  CHECK(peak == static_cast<long>(k));
  CHECK(fv.values[w - k] == doctest::Approx(fv.values[k]).epsilon(1e-9));

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 0.2);
  std::vector<float> noise(1000);
  for (auto& v : noise) v = static_cast<float>(n(rng));
  const auto t2 = extract_t2(noise, Detection{0, 37}, w);
  const std::vector<double> window(noise.begin() + 37, noise.begin() + 37 + w);
  const auto ref = oracle::direct_dft(window);
  double energy = 0.0, t2_energy = 0.0;
  for (double v : window) energy += v * v;
  for (std::size_t j = 0; j < w; ++j) {
    t2_energy += t2.values[j] * t2.values[j];
    CHECK(t2.values[j] == doctest::Approx(std::abs(ref[j])).epsilon(1e-9).scale(1.0));
  }
  CHECK(t2_energy == doctest::Approx(w * energy).epsilon(1e-9));

  CHECK_THROWS_AS(extract_t2(silence, Detection{0, 800}, 300), DataError);
}

TEST_CASE("normalization") {
  const std::vector<double> x{-4.0, 2.0, 1.0};
  const auto m = normalize(x, Normalization::max_abs);
  CHECK(m[0] == doctest::Approx(-1.0));
  CHECK(m[1] == doctest::Approx(0.5));
  const auto s = normalize(x, Normalization::sum);
  CHECK(s[0] == doctest::Approx(-4.0 / 7.0));
  CHECK(normalize(x, Normalization::none) == x);
  const std::vector<double> zero(3, 0.0);
  CHECK(normalize(zero, Normalization::sum) == zero);
  CHECK(default_normalization(FeatureKind::T1) == Normalization::max_abs);
  CHECK(default_normalization(FeatureKind::T2) == Normalization::sum);
}

TEST_CASE("label strings") {
  for (auto c : {ClassLabel::front_wall, ClassLabel::racquet, ClassLabel::floor, ClassLabel::glass,
                 ClassLabel::false_event}) {
    CHECK(class_label_from_string(to_string(c)) == c);
  }
  CHECK_THROWS_AS(class_label_from_string("ceiling"), DataError);
  CHECK(feature_kind_from_string("T2") == FeatureKind::T2);
}
