#include "squashloc/config.hpp"

#include "squashloc/error.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace squashloc {

using nlohmann::json;

std::int64_t MatcherParams::physical_bound(const CourtGeometry& court, const MicArray& array) {
  return static_cast<std::int64_t>(std::ceil(court.diagonal() / array.speed_of_sound * array.sample_rate));
}

void PipelineConfig::finalize() {
  geometry.validate();
  array.validate(geometry, 3);
  detector.validate();
  const std::int64_t bound = MatcherParams::physical_bound(geometry, array);
  if (matcher.max_spread == 0) matcher.max_spread = bound;
  if (matcher.max_spread < bound) {
    throw ConfigError("matcher.max_spread " + std::to_string(matcher.max_spread) +
                      " is below the physical bound " + std::to_string(bound) + " samples");
  }
  if (matcher.min_channels < 3) throw ConfigError("matcher.min_channels must be at least 3");
  if (localizer.max_iters <= 0) throw ConfigError("localizer.max_iters must be positive");
  if (!(localizer.grad_tol > 0) || !(localizer.step_tol > 0) || !(localizer.box_margin >= 0)) {
    throw ConfigError("localizer tolerances must be positive");
  }
  if (!io.channel_map.empty()) {
    if (io.channel_map.size() != array.size()) {
      throw ConfigError("io.channel_map must list one source channel per microphone");
    }
    for (int c : io.channel_map) {
      if (c < 0) throw ConfigError("io.channel_map entries must be non-negative");
    }
  }
}

namespace {

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.contains(k)) throw ConfigError("unknown key '" + where + "." + k + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, const std::string& where, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("invalid value for '" + where + "." + key + "'");
  }
}

Vec3 read_vec3(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) throw ConfigError(where + " must be a 3-element array");
  Vec3 p;
  for (int i = 0; i < 3; ++i) {
    if (!v[i].is_number()) throw ConfigError(where + " must contain numbers");
    p[i] = v[i].get<double>();
  }
  return p;
}

std::string resolve(const std::string& path, const std::string& base) {
  if (base.empty() || path.empty() || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(base) / path).lexically_normal().string();
}

}  // namespace

PipelineConfig parse_config(const std::string& json_text, const std::string& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  }
  reject_unknown(root, "config", {"geometry", "array", "detector", "matcher", "localizer", "classifier", "io"});
  PipelineConfig cfg;

  if (root.contains("geometry")) {
    const auto& g = root["geometry"];
    reject_unknown(g, "geometry", {"width", "depth", "height"});
    double w = cfg.geometry.width, d = cfg.geometry.depth, h = cfg.geometry.height;
    read(g, "width", "geometry", w);
    read(g, "depth", "geometry", d);
    read(g, "height", "geometry", h);
    cfg.geometry = CourtGeometry::standard(w, d, h);
  }

  {
    const json a = root.value("array", json::object());
    reject_unknown(a, "array", {"speed_of_sound", "sample_rate", "sigma_samples", "mics"});
    double c = 343.0, fs = 96000.0, sigma = 10.0;
    read(a, "speed_of_sound", "array", c);
    read(a, "sample_rate", "array", fs);
    read(a, "sigma_samples", "array", sigma);
    if (!(fs > 0)) throw ConfigError("array.sample_rate must be positive");
    cfg.array = MicArray::default_layout(cfg.geometry, c, fs, sigma);
    if (a.contains("mics")) {
      const auto& ms = a["mics"];
      if (!ms.is_array()) throw ConfigError("array.mics must be an array");
      cfg.array.mics.clear();
      for (std::size_t i = 0; i < ms.size(); ++i) {
        const std::string where = "array.mics[" + std::to_string(i) + "]";
        reject_unknown(ms[i], where, {"id", "position", "kind", "sigma_samples"});
        Microphone m;
        m.id = static_cast<int>(i);
        read(ms[i], "id", where, m.id);
        if (!ms[i].contains("position")) throw ConfigError(where + ".position is required");
        m.position = read_vec3(ms[i]["position"], where + ".position");
        std::string kind = "omnidirectional";
        read(ms[i], "kind", where, kind);
        m.kind = mic_kind_from_string(kind);
        double s = sigma;
        read(ms[i], "sigma_samples", where, s);
        m.sigma = s / fs;
        cfg.array.mics.push_back(m);
      }
    }
  }

  if (root.contains("detector")) {
    const auto& d = root["detector"];
    reject_unknown(d, "detector", {"method", "threshold", "window_w", "history_n", "refractory",
                                   "welford_capacity", "refine_threshold"});
    std::string method(to_string(cfg.method));
    read(d, "method", "detector", method);
    cfg.method = detection_method_from_string(method);
    cfg.detector = cfg.method == DetectionMethod::surprise ? DetectorParams::surprise_defaults()
                                                           : DetectorParams::gaussian_defaults();
    read(d, "threshold", "detector", cfg.detector.threshold);
    read(d, "window_w", "detector", cfg.detector.window_w);
    read(d, "history_n", "detector", cfg.detector.history_n);
    read(d, "refractory", "detector", cfg.detector.refractory);
    read(d, "welford_capacity", "detector", cfg.detector.welford_capacity);
    read(d, "refine_threshold", "detector", cfg.detector.refine_threshold);
  }

  if (root.contains("matcher")) {
    const auto& m = root["matcher"];
    reject_unknown(m, "matcher", {"max_spread", "min_channels"});
    read(m, "max_spread", "matcher", cfg.matcher.max_spread);
    read(m, "min_channels", "matcher", cfg.matcher.min_channels);
  }

  if (root.contains("localizer")) {
    const auto& l = root["localizer"];
    reject_unknown(l, "localizer", {"max_iters", "grad_tol", "step_tol", "box_margin", "starts"});
    read(l, "max_iters", "localizer", cfg.localizer.max_iters);
    read(l, "grad_tol", "localizer", cfg.localizer.grad_tol);
    read(l, "step_tol", "localizer", cfg.localizer.step_tol);
    read(l, "box_margin", "localizer", cfg.localizer.box_margin);
    if (l.contains("starts")) {
      if (!l["starts"].is_array()) throw ConfigError("localizer.starts must be an array");
      for (std::size_t i = 0; i < l["starts"].size(); ++i) {
        cfg.localizer.starts.push_back(read_vec3(l["starts"][i], "localizer.starts[" + std::to_string(i) + "]"));
      }
    }
  }

  if (root.contains("classifier")) {
    const auto& c = root["classifier"];
    reject_unknown(c, "classifier", {"bundle"});
    if (c.contains("bundle") && !c["bundle"].is_null()) {
      std::string b;
      read(c, "bundle", "classifier", b);
      cfg.classifier.bundle = resolve(b, base_dir);
    }
  }

  if (root.contains("io")) {
    const auto& io = root["io"];
    reject_unknown(io, "io", {"inputs", "channel_map", "output", "block_size"});
    read(io, "inputs", "io", cfg.io.inputs);
    read(io, "channel_map", "io", cfg.io.channel_map);
    read(io, "output", "io", cfg.io.output);
    read(io, "block_size", "io", cfg.io.block_size);
    for (auto& p : cfg.io.inputs) p = resolve(p, base_dir);
    cfg.io.output = resolve(cfg.io.output, base_dir);
  }

  cfg.finalize();
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open configuration '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), std::filesystem::path(path).parent_path().string());
}

std::string dump_config(const PipelineConfig& cfg) {
  json mics = json::array();
  for (const auto& m : cfg.array.mics) {
    mics.push_back({{"id", m.id},
                    {"position", {m.position.x(), m.position.y(), m.position.z()}},
                    {"kind", std::string(to_string(m.kind))},
                    {"sigma_samples", m.sigma * cfg.array.sample_rate}});
  }
  json starts = json::array();
  for (const auto& s : cfg.localizer.starts) starts.push_back({s.x(), s.y(), s.z()});
  json root = {
      {"geometry", {{"width", cfg.geometry.width}, {"depth", cfg.geometry.depth}, {"height", cfg.geometry.height}}},
      {"array", {{"speed_of_sound", cfg.array.speed_of_sound}, {"sample_rate", cfg.array.sample_rate}, {"mics", mics}}},
      {"detector",
       {{"method", std::string(to_string(cfg.method))},
        {"threshold", cfg.detector.threshold},
        {"window_w", cfg.detector.window_w},
        {"history_n", cfg.detector.history_n},
        {"refractory", cfg.detector.refractory},
        {"welford_capacity", cfg.detector.welford_capacity},
        {"refine_threshold", cfg.detector.refine_threshold}}},
      {"matcher", {{"max_spread", cfg.matcher.max_spread}, {"min_channels", cfg.matcher.min_channels}}},
      {"localizer",
       {{"max_iters", cfg.localizer.max_iters},
        {"grad_tol", cfg.localizer.grad_tol},
        {"step_tol", cfg.localizer.step_tol},
        {"box_margin", cfg.localizer.box_margin},
        {"starts", starts}}},
      {"classifier", {{"bundle", cfg.classifier.bundle ? json(*cfg.classifier.bundle) : json(nullptr)}}},
      {"io",
       {{"inputs", cfg.io.inputs},
        {"channel_map", cfg.io.channel_map},
        {"output", cfg.io.output},
        {"block_size", cfg.io.block_size}}},
  };
  return root.dump(2);
}

}  // namespace squashloc
