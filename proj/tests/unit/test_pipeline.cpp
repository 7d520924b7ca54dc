#include "squashloc/pipeline.hpp"
#include "squashloc/simulate.hpp"

#include "oracle_classifier.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

using namespace squashloc;

namespace {

std::vector<std::vector<Detection>> by_channel(const std::vector<Detection>& all, std::size_t channels) {
  std::vector<std::vector<Detection>> out(channels);
  for (const auto& d : all) out[d.channel].push_back(d);
  for (auto& l : out) std::sort(l.begin(), l.end(), [](auto& a, auto& b) { return a.sample_index < b.sample_index; });
  return out;
}

std::vector<Detection> from_group(const EventGroup& g) {
  std::vector<Detection> out;
  for (const auto& a : g.arrivals) out.push_back(Detection{a.channel, std::llround(a.sample_index), 1.0});
  return out;
}

struct Scenario {
  std::vector<SyntheticEvent> events;
  AudioBlock audio;
};

Scenario make_scenario(const PipelineConfig& cfg, std::size_t n, double lead_s, double spacing_s,
                       std::optional<double> snr_db, std::uint64_t seed) {
  Scenario s;
  auto rng = stream_rng(seed, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const ClassLabel c = kImpactClasses[i % 4];
    s.events.push_back(random_surface_event(c, cfg.geometry, lead_s + spacing_s * i, rng));
  }
  const auto duration = static_cast<std::size_t>((lead_s + spacing_s * n + 0.2) * cfg.array.sample_rate);
  NoiseSpec noise;
  noise.waveform_snr_db = snr_db;
  noise.seed = seed;
  s.audio = synth_waveform(s.events, cfg.array, duration, noise);
  return s;
}

}  // namespace

TEST_CASE("matching examples") {
  const auto cfg = parse_config("{}");
  const auto spread = cfg.matcher.max_spread;

  SUBCASE("six detections within 1 ms") {
    std::vector<Detection> d;
    for (int c = 0; c < 6; ++c) d.push_back({c, 10000 + 15 * c, 1.0});
    const auto groups = match_detections(by_channel(d, 6), spread, 4);
    REQUIRE(groups.size() == 1);
    CHECK(groups[0].size() == 6);
  }
  SUBCASE("two events 100 ms apart") {
    SyntheticEvent a{Vec3(1.0, 2.0, 0.0), 0.5, ClassLabel::floor, 1.0};
    SyntheticEvent b{Vec3(5.0, 0.0, 3.0), 0.6, ClassLabel::front_wall, 1.0};
    auto d = from_group(forward_delays(a, cfg.array, true));
    const auto db = from_group(forward_delays(b, cfg.array, true));
    d.insert(d.end(), db.begin(), db.end());
    const auto groups = match_detections(by_channel(d, 6), 3456, 4);
    REQUIRE(groups.size() == 2);
    CHECK(groups[0].size() == 6);
    CHECK(groups[1].size() == 6);
    CHECK(groups[0].reference().sample_index < groups[1].reference().sample_index);
  }
  SUBCASE("too few channels") {
    std::vector<Detection> d{{0, 100, 1.0}, {1, 120, 1.0}, {2, 130, 1.0}};
    CHECK(match_detections(by_channel(d, 6), spread, 4).empty());
    CHECK(match_detections(by_channel(d, 6), spread, 3).size() == 1);
  }
  SUBCASE("one detection per channel") {
    std::vector<Detection> d{{0, 100, 1.0}, {0, 110, 1.0}, {1, 120, 1.0}, {2, 130, 1.0}, {3, 140, 1.0}};
    const auto groups = match_detections(by_channel(d, 6), spread, 4);
    REQUIRE(groups.size() == 1);
    CHECK(groups[0].size() == 4);
    CHECK(groups[0].arrivals[0].sample_index == 100.0);
  }
  SUBCASE("empty") { CHECK(match_detections({{}, {}, {}}, spread, 3).empty()); }
}

TEST_CASE("matching invariants on random timelines") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::int64_t> t(0, 200000);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Detection> d;
    const int n = 5 + static_cast<int>(rng() % 60);
    for (int i = 0; i < n; ++i) d.push_back({static_cast<int>(rng() % 6), t(rng), 1.0});
    const std::int64_t spread = 1000 + static_cast<std::int64_t>(rng() % 5000);
    const std::size_t min_ch = 3 + rng() % 3;
    const auto groups = match_detections(by_channel(d, 6), spread, min_ch);
    std::multiset<std::pair<int, std::int64_t>> pool;
    for (const auto& x : d) pool.insert({x.channel, x.sample_index});
    for (const auto& g : groups) {
      CHECK(g.size() >= min_ch);
      std::set<int> chans;
      double lo = 1e18, hi = -1e18;
      for (const auto& a : g.arrivals) {
        chans.insert(a.channel);
        lo = std::min(lo, a.sample_index);
        hi = std::max(hi, a.sample_index);
        const auto it = pool.find({a.channel, static_cast<std::int64_t>(a.sample_index)});
        REQUIRE(it != pool.end());
        pool.erase(it);  // each detection used at most once
      }
      CHECK(chans.size() == g.size());
      CHECK(hi - lo <= static_cast<double>(spread));
    }
  }
}

TEST_CASE("silent input yields no events") {
  const auto cfg = parse_config("{}");
  AudioBlock a;
  a.samples.assign(6, std::vector<float>(96000, 0.0f));
  CHECK(run(cfg, a, nullptr).empty());
  oracle::NothingClassifier none;
  CHECK(run(cfg, a, &none).empty());
}

TEST_CASE("input checks") {
  const auto cfg = parse_config("{}");
  AudioBlock a;
  a.samples.assign(5, std::vector<float>(96000, 0.0f));
  try {
    run(cfg, a, nullptr);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::data);
    CHECK(std::string(e.what()).find("stage 'ingest'") != std::string::npos);
    CHECK(std::string(e.what()).find("channels") != std::string::npos);
  }
  a.samples.assign(6, std::vector<float>(96000, 0.0f));
  a.sample_rate = 44100;
  CHECK_THROWS_AS(run(cfg, a, nullptr), Error);
}

TEST_CASE("small end-to-end scenario") {
  const auto cfg = parse_config("{}");
  const auto s = make_scenario(cfg, 8, 0.2, 0.25, 40.0, 5);
  oracle::TruthClassifier stub(s.events, cfg.array);
  const auto out = run(cfg, s.audio, &stub);
  REQUIRE(out.size() == s.events.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    REQUIRE(out[i].position.has_value());
    CHECK(out[i].label == s.events[i].surface);
    CHECK((*out[i].position - s.events[i].position).norm() < 0.25);
    CHECK(std::abs(out[i].event_time - s.events[i].time) < 1e-3);
    CHECK(out[i].detections.size() >= 4);
    if (i > 0) CHECK(out[i - 1].event_time < out[i].event_time);
    CHECK(out[i].confidences.size() == 4);
  }

  RunOptions serial{Execution::serial};
  const auto again = run(cfg, s.audio, &stub, serial);
  REQUIRE(again.size() == out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(again[i].event_id == out[i].event_id);
    CHECK(*again[i].position == *out[i].position);
    CHECK(again[i].event_time == out[i].event_time);
  }

  SUBCASE("without a classifier every group is localized in 3-D") {
    const auto plain = run(cfg, s.audio, nullptr);
    REQUIRE(plain.size() == out.size());
    for (const auto& e : plain) {
      CHECK_FALSE(e.label.has_value());
      CHECK(e.position.has_value());
    }
  }
  SUBCASE("false events keep no position") {
    oracle::NothingClassifier none;
    const auto rejected = run(cfg, s.audio, &none);
    REQUIRE(rejected.size() == out.size());
    for (const auto& e : rejected) {
      CHECK(e.label == ClassLabel::false_event);
      CHECK_FALSE(e.position.has_value());
      CHECK_FALSE(e.residual.has_value());
    }
  }
}

TEST_CASE("concatenated input equals separate runs") {
  const auto cfg = parse_config("{}");
  const auto a = make_scenario(cfg, 4, 0.2, 0.25, std::nullopt, 11);
  const auto b = make_scenario(cfg, 4, 0.2, 0.25, std::nullopt, 12);
  AudioBlock ab = a.audio;
  for (std::size_t c = 0; c < 6; ++c) {
    ab.samples[c].insert(ab.samples[c].end(), b.audio.samples[c].begin(), b.audio.samples[c].end());
  }
  AudioBlock b_shifted = b.audio;
  b_shifted.start_index = static_cast<std::int64_t>(a.audio.frames());

  const auto joint = run(cfg, ab, nullptr);
  auto separate = run(cfg, a.audio, nullptr);
  const auto second = run(cfg, b_shifted, nullptr);
  separate.insert(separate.end(), second.begin(), second.end());
  REQUIRE(joint.size() == 8);
  REQUIRE(separate.size() == joint.size());
  for (std::size_t i = 0; i < joint.size(); ++i) {
    CHECK(joint[i].event_id == separate[i].event_id);
    CHECK(joint[i].detections == separate[i].detections);
    CHECK(*joint[i].position == *separate[i].position);
    CHECK(joint[i].event_time == separate[i].event_time);
  }
}

TEST_CASE("block size does not change results") {
  auto cfg = parse_config("{}");
  const auto s = make_scenario(cfg, 4, 0.2, 0.25, 30.0, 21);
  const auto whole = run(cfg, s.audio, nullptr);
  cfg.io.block_size = 1000;
  const auto blocked = run(cfg, s.audio, nullptr);
  REQUIRE(whole.size() == blocked.size());
  for (std::size_t i = 0; i < whole.size(); ++i) CHECK(whole[i].detections == blocked[i].detections);
}

TEST_CASE("localize_group policy") {
  const auto cfg = parse_config("{}");
  SyntheticEvent e{Vec3(2.0, 0.0, 2.5), 0.1, ClassLabel::front_wall, 1.0};
  auto g = forward_delays(e, cfg.array);
  g.arrivals.resize(3);
  const auto on_wall = localize_group(g, ClassLabel::front_wall, cfg);
  REQUIRE(on_wall.has_value());
  CHECK((on_wall->position - e.position).norm() < 1e-4);
  CHECK_FALSE(localize_group(g, ClassLabel::racquet, cfg).has_value());
  CHECK_FALSE(localize_group(g, std::nullopt, cfg).has_value());
  const auto full = forward_delays(e, cfg.array);
  CHECK((localize_group(full, ClassLabel::racquet, cfg)->position - e.position).norm() < 1e-4);
}

TEST_CASE("compare_localizations") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 6.0);
  std::vector<ClassifiedLocatedEvent> a;
  for (int i = 0; i < 2000; ++i) {
    ClassifiedLocatedEvent e;
    e.event_id = make_event_id(i % 6, 1000 * i);
    e.position = Vec3(u(rng), u(rng), u(rng));
    a.push_back(e);
  }
  SUBCASE("identical") {
    const auto r = compare_localizations(a, a);
    CHECK(r.count == a.size());
    CHECK(r.mean_distance == 0.0);
    CHECK(r.std_distance == 0.0);
  }
  SUBCASE("uniform shift") {
    auto b = a;
    for (auto& e : b) *e.position += Vec3(0.1, 0, 0);
    const auto r = compare_localizations(a, b);
    CHECK(r.mean_distance == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(r.std_distance < 1e-9);
  }
  SUBCASE("isotropic perturbation") {
    auto b = a;
    std::normal_distribution<double> n(0.0, 0.05);
    std::vector<double> d;
    for (auto& e : b) {
      const Vec3 delta(n(rng), n(rng), n(rng));
      *e.position += delta;
      d.push_back(delta.norm());
    }
    const auto r = compare_localizations(a, b);
    const double mean = oracle::two_pass_mean(d);
    const double pop_std = std::sqrt(oracle::two_pass_variance(d) * (d.size() - 1) / d.size());
    CHECK(r.mean_distance == doctest::Approx(mean).epsilon(1e-9));
    CHECK(r.std_distance == doctest::Approx(pop_std).epsilon(1e-6));
    // Maxwell distribution of |delta|
    CHECK(r.mean_distance == doctest::Approx(0.05 * std::sqrt(8.0 / M_PI)).epsilon(0.03));
  }
  SUBCASE("missing positions are skipped") {
    auto b = a;
    b[0].position.reset();
    CHECK(compare_localizations(a, b).count == a.size() - 1);
  }
  SUBCASE("mismatches") {
    auto b = a;
    b[5].event_id = "9:9";
    CHECK_THROWS_AS(compare_localizations(a, b), DataError);
    b = a;
    b.pop_back();
    CHECK_THROWS_AS(compare_localizations(a, b), DataError);
  }
}
