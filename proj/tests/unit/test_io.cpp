#include "squashloc/config.hpp"
#include "squashloc/error.hpp"
#include "squashloc/records.hpp"
#include "squashloc/wav.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>
#include <algorithm>
#include <cmath>

using namespace squashloc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("squashloc_io_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream os(path, std::ios::binary);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string le(std::uint32_t v, int n) {
  std::string s;
  for (int i = 0; i < n; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  return s;
}

/// Minimal PCM16 file built byte by byte.
std::string pcm16_file(std::uint16_t channels, std::uint32_t rate, const std::vector<std::int16_t>& interleaved) {
  std::string data;
  for (auto v : interleaved) data += le(static_cast<std::uint16_t>(v), 2);
  std::string f = "RIFF" + le(36 + data.size(), 4) + "WAVE";
  f += "fmt " + le(16, 4) + le(1, 2) + le(channels, 2) + le(rate, 4) + le(rate * channels * 2, 4) +
       le(channels * 2, 2) + le(16, 2);
  f += "LIST" + le(4, 4) + "INFO";  // unrelated chunk to skip
  f += "data" + le(data.size(), 4) + data;
  return f;
}

AudioBlock ramp_block(std::size_t channels, std::size_t frames) {
  AudioBlock a;
  a.sample_rate = 96000;
  a.samples.assign(channels, std::vector<float>(frames));
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t n = 0; n < frames; ++n) {
      a.samples[c][n] = static_cast<float>(std::sin(0.01 * n + c) * 0.9);
    }
  }
  return a;
}

}  // namespace

TEST_CASE("PCM16 normalization and chunk walking") {
  TempDir dir;
  const auto path = dir.file("a.wav");
  write_bytes(path, pcm16_file(2, 96000, {32767, -32768, 0, 16384}));
  const auto a = read_wav(path);
  CHECK(a.channels() == 2);
  CHECK(a.frames() == 2);
  CHECK(a.sample_rate == 96000.0);
  CHECK(a.samples[0][0] == static_cast<float>(32767.0 / 32768.0));
  CHECK(a.samples[1][0] == -1.0f);
  CHECK(a.samples[1][1] == 0.5f);
}

TEST_CASE("WAV round trips") {
  TempDir dir;
  const auto a = ramp_block(6, 1000);
  for (auto [fmt, tol] : {std::pair{WavFormat::pcm16, 1.0 / 32768}, std::pair{WavFormat::pcm24, 1.0 / 8388608},
                          std::pair{WavFormat::float32, 0.0}}) {
    const auto path = dir.file("rt.wav");
    write_wav(path, a, fmt);
    const auto b = read_wav(path);
    REQUIRE(b.channels() == 6);
    REQUIRE(b.frames() == 1000);
    CHECK(b.sample_rate == 96000.0);
    double worst = 0.0;
    for (std::size_t c = 0; c < 6; ++c) {
      for (std::size_t n = 0; n < 1000; ++n) worst = std::max(worst, double(std::abs(a.samples[c][n] - b.samples[c][n])));
    }
    CHECK(worst <= tol * 0.5 + 1e-7);
  }
}

TEST_CASE("ingestion checks against the configuration") {
  TempDir dir;
  const auto five = dir.file("five.wav");
  write_wav(five, ramp_block(5, 100));
  try {
    ingest({five}, IngestExpectation{6, 96000.0});
    FAIL("expected an ingestion error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("channels") != std::string::npos);
  }
  auto slow = ramp_block(6, 100);
  slow.sample_rate = 48000;
  const auto s = dir.file("slow.wav");
  write_wav(s, slow);
  try {
    ingest({s}, IngestExpectation{6, 96000.0});
    FAIL("expected an ingestion error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("sample_rate") != std::string::npos);
  }
}

TEST_CASE("per-channel mono files") {
  TempDir dir;
  const auto a = ramp_block(3, 200);
  std::vector<std::string> paths;
  for (std::size_t c = 0; c < 3; ++c) {
    AudioBlock mono;
    mono.sample_rate = a.sample_rate;
    mono.samples = {a.samples[c]};
    paths.push_back(dir.file("ch" + std::to_string(c) + ".wav"));
    write_wav(paths.back(), mono, WavFormat::float32);
  }
  const auto b = ingest(paths, IngestExpectation{3, 96000.0});
  CHECK(b.samples == a.samples);

  AudioBlock shorter;
  shorter.sample_rate = a.sample_rate;
  shorter.samples = {std::vector<float>(150, 0.0f)};
  write_wav(paths[1], shorter);
  try {
    ingest(paths);
    FAIL("expected a length error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("length") != std::string::npos);
  }
  CHECK_THROWS_AS(read_wav(dir.file("missing.wav")), DataError);
  write_bytes(dir.file("junk.wav"), "not audio at all");
  CHECK_THROWS_AS(read_wav(dir.file("junk.wav")), DataError);
}

TEST_CASE("configuration defaults") {
  const auto cfg = parse_config("{}");
  CHECK(cfg.array.size() == 6);
  CHECK(cfg.matcher.max_spread == MatcherParams::physical_bound(cfg.geometry, cfg.array));
  CHECK(cfg.matcher.max_spread == static_cast<std::int64_t>(std::ceil(cfg.geometry.diagonal() / 343.0 * 96000.0)));
  CHECK(std::abs(cfg.matcher.max_spread - 3600) < 100);
  CHECK(cfg.matcher.min_channels == 4);
  CHECK(cfg.method == DetectionMethod::surprise);
  CHECK(cfg.detector.threshold == doctest::Approx(1280.0));
  CHECK_FALSE(cfg.classifier.bundle.has_value());
}

TEST_CASE("configuration parsing") {
  const auto cfg = parse_config(R"({
    "geometry": {"width": 6.0, "depth": 9.0, "height": 5.0},
    "array": {"speed_of_sound": 340, "sample_rate": 48000, "sigma_samples": 5,
              "mics": [{"position": [0,0,0]}, {"position": [6,0,0], "kind": "cardioid"},
                       {"position": [0,9,0]}, {"position": [6,9,5], "sigma_samples": 2}]},
    "detector": {"method": "gaussian_threshold", "threshold": 6, "refractory": 1000},
    "matcher": {"min_channels": 3},
    "localizer": {"max_iters": 50, "starts": [[1,1,1]]},
    "classifier": {"bundle": "models/b.sqlb"},
    "io": {"inputs": ["a.wav"], "output": "out.jsonl", "block_size": 4096}
  })", "/data");
  CHECK(cfg.geometry.depth == 9.0);
  CHECK(cfg.array.size() == 4);
  CHECK(cfg.array.mics[1].kind == MicKind::cardioid);
  CHECK(cfg.array.mics[0].sigma == doctest::Approx(5.0 / 48000));
  CHECK(cfg.array.mics[3].sigma == doctest::Approx(2.0 / 48000));
  CHECK(cfg.method == DetectionMethod::gaussian_threshold);
  CHECK(cfg.detector.threshold == 6.0);
  CHECK(cfg.detector.refractory == 1000);
  CHECK(cfg.matcher.min_channels == 3);
  CHECK(cfg.localizer.starts.size() == 1);
  CHECK(*cfg.classifier.bundle == "/data/models/b.sqlb");
  CHECK(cfg.io.inputs.at(0) == "/data/a.wav");
  CHECK(cfg.io.block_size == 4096);

  const auto again = parse_config(dump_config(cfg));
  CHECK(dump_config(again) == dump_config(cfg));
}

TEST_CASE("configuration rejects unknown keys at every level") {
  for (const char* text : {R"({"extra": 1})", R"({"geometry": {"width": 6, "colour": "red"}})",
                           R"({"array": {"mics": [{"position": [0,0,0], "gain": 2}]}})",
                           R"({"detector": {"thresh": 3}})", R"({"matcher": {"spread": 3}})",
                           R"({"localizer": {"iters": 3}})", R"({"classifier": {"model": "x"}})",
                           R"({"io": {"input": "x"}})"}) {
    CHECK_THROWS_AS(parse_config(text), ConfigError);
  }
}

TEST_CASE("configuration rejects invalid values") {
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"matcher": {"max_spread": 100}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"detector": {"window_w": 300}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"detector": {"method": "psychic"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"geometry": {"width": "wide"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"array": {"mics": [{"position": [0,0,-1]}]}})"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("event records") {
  ClassifiedLocatedEvent e;
  e.event_id = "2:123456";
  e.label = ClassLabel::floor;
  e.position = Vec3(1.23456789012, 2.0, 0.0);
  e.event_time = 1.2860000000004;
  e.residual = 0.000123456789123;
  e.confidences = {{ClassLabel::floor, 0.91}, {ClassLabel::racquet, 0.1}};
  e.detections = {Detection{2, 123456, 2000.5, DetectionMethod::surprise}};
  ClassifiedLocatedEvent f;
  f.event_id = "0:10";
  f.label = ClassLabel::false_event;
  f.event_time = 0.5;

  std::ostringstream os;
  write_events(os, {e, f});
  const std::string text = os.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
  const std::string first = text.substr(0, text.find('\n'));
  CHECK(first.find("\"x_m\":1.23456789") != std::string::npos);
  CHECK(first.find("1.23456789012") == std::string::npos);
  CHECK(first.find("\"t_s\":1.286") != std::string::npos);
  for (const char* key : {"event_id", "class", "x_m", "y_m", "z_m", "t_s", "residual", "confidences", "detections"}) {
    CHECK(first.find(std::string("\"") + key + "\"") != std::string::npos);
  }
  CHECK(text.find("\"x_m\":null") != std::string::npos);

  std::istringstream is(text);
  const auto back = read_events(is);
  REQUIRE(back.size() == 2);
  CHECK(back[0].event_id == e.event_id);
  CHECK(back[0].label == e.label);
  CHECK(back[0].position->x() == doctest::Approx(1.23456789));
  CHECK(back[0].detections == e.detections);
  CHECK(back[0].confidences.at(ClassLabel::floor) == doctest::Approx(0.91));
  CHECK_FALSE(back[1].position.has_value());
  CHECK_FALSE(back[1].residual.has_value());

  std::istringstream bad("{\"event_id\": 1}\n");
  CHECK_THROWS_AS(read_events(bad), DataError);
}

TEST_CASE("round_sig9") {
  CHECK(round_sig9(1.23456789012) == 1.23456789);
  CHECK(round_sig9(0.0) == 0.0);
  CHECK(round_sig9(-98765.43210987) == -98765.4321);
}

TEST_CASE("CSV records") {
  std::stringstream d;
  const std::vector<Detection> dets{{0, 100, 9.5, DetectionMethod::gaussian_threshold}, {3, 2000, 1500.25, DetectionMethod::surprise}};
  write_detections(d, dets);
  CHECK(read_detections(d) == dets);

  std::stringstream l;
  write_labels(l, {{1, 5000, ClassLabel::glass}, {2, 6000, ClassLabel::false_event}});
  CHECK(l.str() == "channel,sample_index,class\n1,5000,glass\n2,6000,false_event\n");
  const auto labels = read_labels(l);
  REQUIRE(labels.size() == 2);
  CHECK(labels[1].label == ClassLabel::false_event);

  std::stringstream t;
  write_truth(t, {SyntheticEvent{Vec3(1, 2, 3), 0.5, ClassLabel::racquet, 0.75}});
  const auto truth = read_truth(t);
  REQUIRE(truth.size() == 1);
  CHECK(truth[0].position == Vec3(1, 2, 3));
  CHECK(truth[0].amplitude == 0.75);

  std::stringstream g;
  EventGroup grp;
  grp.arrivals = {{0, 10.5, 1.0}, {4, 12.0, 2.0}};
  write_groups(g, {grp});
  const auto groups = read_groups(g);
  REQUIRE(groups.size() == 1);
  CHECK(groups[0].arrivals[0].sample_index == 10.5);

  std::istringstream wrong("chan,sample,class\n1,2,floor\n");
  CHECK_THROWS_AS(read_labels(wrong), DataError);
  std::istringstream malformed("channel,sample_index,class\n1,abc,floor\n");
  CHECK_THROWS_AS(read_labels(malformed), DataError);
  std::istringstream unknown("channel,sample_index,class\n1,2,ceiling\n");
  CHECK_THROWS_AS(read_labels(unknown), DataError);
}
