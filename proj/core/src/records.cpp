#include "squashloc/records.hpp"

#include "squashloc/error.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>

namespace squashloc {

using nlohmann::json;

double round_sig9(double x) {
  if (!std::isfinite(x) || x == 0.0) return x;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return std::strtod(buf, nullptr);
}

namespace {

json number_or_null(const std::optional<double>& v) {
  return v ? json(round_sig9(*v)) : json(nullptr);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    while (!field.empty() && field.front() == ' ') field.erase(field.begin());
    out.push_back(field);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename T>
T parse_number(const std::string& s, const char* what, std::size_t line_no) {
  T v{};
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) {
    throw DataError("line " + std::to_string(line_no) + ": invalid " + what + " '" + s + "'");
  }
  return v;
}

/// Yields the non-empty data lines after the header, checking the header
/// matches `header`.
template <typename Fn>
void for_each_csv_row(std::istream& is, const std::string& header, std::size_t columns, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  bool seen_header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!seen_header) {
      if (line != header) throw DataError("expected CSV header '" + header + "', got '" + line + "'");
      seen_header = true;
      continue;
    }
    auto fields = split_csv(line);
    if (fields.size() != columns) {
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(columns) + " fields");
    }
    fn(fields, line_no);
  }
}

template <typename Fn>
void for_each_json_line(std::istream& is, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
      fn(j);
    } catch (const json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

}  // namespace

void write_event(std::ostream& os, const ClassifiedLocatedEvent& e) {
  json conf = json::object();
  for (const auto& [k, v] : e.confidences) conf[std::string(to_string(k))] = round_sig9(v);
  json dets = json::array();
  for (const auto& d : e.detections) {
    dets.push_back({{"channel", d.channel},
                    {"sample_index", d.sample_index},
                    {"score", round_sig9(d.score)},
                    {"method", std::string(to_string(d.method))}});
  }
  json j;
  j["event_id"] = e.event_id;
  j["class"] = e.label ? json(std::string(to_string(*e.label))) : json(nullptr);
  j["x_m"] = number_or_null(e.position ? std::optional(e.position->x()) : std::nullopt);
  j["y_m"] = number_or_null(e.position ? std::optional(e.position->y()) : std::nullopt);
  j["z_m"] = number_or_null(e.position ? std::optional(e.position->z()) : std::nullopt);
  j["t_s"] = round_sig9(e.event_time);
  j["residual"] = number_or_null(e.residual);
  j["confidences"] = conf;
  j["detections"] = dets;
  os << j.dump() << '\n';
}

void write_events(std::ostream& os, const std::vector<ClassifiedLocatedEvent>& events) {
  for (const auto& e : events) write_event(os, e);
}

std::vector<ClassifiedLocatedEvent> read_events(std::istream& is) {
  std::vector<ClassifiedLocatedEvent> out;
  for_each_json_line(is, [&](const json& j) {
    ClassifiedLocatedEvent e;
    e.event_id = j.at("event_id").get<std::string>();
    if (!j.at("class").is_null()) e.label = class_label_from_string(j["class"].get<std::string>());
    if (!j.at("x_m").is_null()) {
      e.position = Vec3(j["x_m"].get<double>(), j.at("y_m").get<double>(), j.at("z_m").get<double>());
    }
    e.event_time = j.at("t_s").get<double>();
    if (!j.at("residual").is_null()) e.residual = j["residual"].get<double>();
    for (const auto& [k, v] : j.at("confidences").items()) e.confidences[class_label_from_string(k)] = v.get<double>();
    for (const auto& d : j.at("detections")) {
      e.detections.push_back(Detection{d.at("channel").get<int>(), d.at("sample_index").get<std::int64_t>(),
                                       d.at("score").get<double>(),
                                       detection_method_from_string(d.at("method").get<std::string>())});
    }
    out.push_back(std::move(e));
  });
  return out;
}

void write_detections(std::ostream& os, const std::vector<Detection>& detections) {
  os << "channel,sample_index,score,method\n";
  char buf[32];
  for (const auto& d : detections) {
    std::snprintf(buf, sizeof buf, "%.9g", d.score);
    os << d.channel << ',' << d.sample_index << ',' << buf << ',' << to_string(d.method) << '\n';
  }
}

std::vector<Detection> read_detections(std::istream& is) {
  std::vector<Detection> out;
  for_each_csv_row(is, "channel,sample_index,score,method", 4, [&](const auto& f, std::size_t n) {
    out.push_back(Detection{parse_number<int>(f[0], "channel", n), parse_number<std::int64_t>(f[1], "sample_index", n),
                            parse_number<double>(f[2], "score", n), detection_method_from_string(f[3])});
  });
  return out;
}

void write_groups(std::ostream& os, const std::vector<EventGroup>& groups) {
  for (const auto& g : groups) {
    json arr = json::array();
    for (const auto& a : g.arrivals) {
      arr.push_back({{"channel", a.channel}, {"sample_index", a.sample_index}, {"score", round_sig9(a.score)}});
    }
    os << json{{"arrivals", arr}}.dump() << '\n';
  }
}

std::vector<EventGroup> read_groups(std::istream& is) {
  std::vector<EventGroup> out;
  for_each_json_line(is, [&](const json& j) {
    EventGroup g;
    for (const auto& a : j.at("arrivals")) {
      g.arrivals.push_back(Arrival{a.at("channel").get<int>(), a.at("sample_index").get<double>(),
                                   a.value("score", 0.0)});
    }
    out.push_back(std::move(g));
  });
  return out;
}

void write_labels(std::ostream& os, const std::vector<LabelRecord>& labels) {
  os << "channel,sample_index,class\n";
  for (const auto& l : labels) os << l.channel << ',' << l.sample_index << ',' << to_string(l.label) << '\n';
}

std::vector<LabelRecord> read_labels(std::istream& is) {
  std::vector<LabelRecord> out;
  for_each_csv_row(is, "channel,sample_index,class", 3, [&](const auto& f, std::size_t n) {
    out.push_back(LabelRecord{parse_number<int>(f[0], "channel", n),
                              parse_number<std::int64_t>(f[1], "sample_index", n), class_label_from_string(f[2])});
  });
  return out;
}

void write_truth(std::ostream& os, const std::vector<SyntheticEvent>& events) {
  os << "event,x_m,y_m,z_m,t_s,class,amplitude\n";
  char buf[160];
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g,", i, e.position.x(), e.position.y(),
                  e.position.z(), e.time);
    os << buf << to_string(e.surface);
    std::snprintf(buf, sizeof buf, ",%.9g\n", e.amplitude);
    os << buf;
  }
}

std::vector<SyntheticEvent> read_truth(std::istream& is) {
  std::vector<SyntheticEvent> out;
  for_each_csv_row(is, "event,x_m,y_m,z_m,t_s,class,amplitude", 7, [&](const auto& f, std::size_t n) {
    SyntheticEvent e;
    e.position = Vec3(parse_number<double>(f[1], "x_m", n), parse_number<double>(f[2], "y_m", n),
                      parse_number<double>(f[3], "z_m", n));
    e.time = parse_number<double>(f[4], "t_s", n);
    e.surface = class_label_from_string(f[5]);
    e.amplitude = parse_number<double>(f[6], "amplitude", n);
    out.push_back(e);
  });
  return out;
}

}  // namespace squashloc
