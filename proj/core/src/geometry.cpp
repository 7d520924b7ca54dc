#include "squashloc/geometry.hpp"

#include "squashloc/error.hpp"

#include <algorithm>
#include <cmath>

namespace squashloc {

NamedPlane NamedPlane::make(std::string name, const Vec3& point, const Vec3& normal) {
  const double n = normal.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw ConfigError("plane '" + name + "' has a degenerate normal");
  }
  return NamedPlane{std::move(name), point, normal / n};
}

CourtGeometry CourtGeometry::standard(double width, double depth, double height) {
  CourtGeometry g;
  g.width = width;
  g.depth = depth;
  g.height = height;
  g.surfaces = {
      NamedPlane::make(std::string(kFrontWall), {width / 2, 0.0, height / 2}, Vec3::UnitY()),
      NamedPlane::make(std::string(kFloor), {width / 2, depth / 2, 0.0}, Vec3::UnitZ()),
      NamedPlane::make(std::string(kLeftWall), {0.0, depth / 2, height / 2}, Vec3::UnitX()),
      NamedPlane::make(std::string(kRightWall), {width, depth / 2, height / 2}, -Vec3::UnitX()),
      NamedPlane::make(std::string(kBackGlass), {width / 2, depth, height / 2}, -Vec3::UnitY()),
  };
  return g;
}

const NamedPlane& CourtGeometry::surface(std::string_view name) const {
  auto it = std::find_if(surfaces.begin(), surfaces.end(),
                         [&](const NamedPlane& p) { return p.name == name; });
  if (it == surfaces.end()) {
    throw ConfigError("unknown court surface '" + std::string(name) + "'");
  }
  return *it;
}

bool CourtGeometry::contains(const Vec3& p, double margin) const {
  return p.x() >= -margin && p.x() <= width + margin && p.y() >= -margin &&
         p.y() <= depth + margin && p.z() >= -margin && p.z() <= height + margin;
}

double CourtGeometry::diagonal() const { return upper().norm(); }

void CourtGeometry::validate() const {
  if (!(width > 0) || !(depth > 0) || !(height > 0)) {
    throw ConfigError("court dimensions must be positive");
  }
  for (std::string_view required : {kFrontWall, kFloor, kLeftWall, kRightWall, kBackGlass}) {
    const auto n = std::count_if(surfaces.begin(), surfaces.end(),
                                 [&](const NamedPlane& p) { return p.name == required; });
    if (n != 1) {
      throw ConfigError("court must define exactly one surface named '" + std::string(required) +
                        "'");
    }
  }
  for (const auto& p : surfaces) {
    if (std::abs(p.unit_normal.norm() - 1.0) > 1e-12) {
      throw ConfigError("surface '" + p.name + "' normal is not unit length");
    }
  }
}

std::string_view to_string(MicKind kind) {
  return kind == MicKind::omnidirectional ? "omnidirectional" : "cardioid";
}

MicKind mic_kind_from_string(std::string_view s) {
  if (s == "omnidirectional") return MicKind::omnidirectional;
  if (s == "cardioid") return MicKind::cardioid;
  throw ConfigError("unknown microphone kind '" + std::string(s) + "'");
}

MicArray MicArray::default_layout(const CourtGeometry& court, double speed_of_sound,
                                  double sample_rate, double sigma_samples) {
  const double w = court.width;
  const double d = court.depth;
  const double h = court.height;
  const double sigma = sigma_samples / sample_rate;
  MicArray a;
  a.speed_of_sound = speed_of_sound;
  a.sample_rate = sample_rate;
  const Vec3 positions[] = {
      {0.0, d / 2, 0.0}, {w / 2, d, 0.0}, {w, 0.0, 0.0},  // floor
      {0.0, 0.0, h},     {0.0, d, h},     {w, d / 2, h},  // ceiling
  };
  for (int i = 0; i < 6; ++i) {
    a.mics.push_back(Microphone{i, positions[i], i < 3 ? MicKind::omnidirectional : MicKind::cardioid,
                                sigma});
  }
  return a;
}

const Microphone& MicArray::mic(int channel) const {
  if (channel < 0 || static_cast<std::size_t>(channel) >= mics.size()) {
    throw DataError("no microphone for channel " + std::to_string(channel));
  }
  return mics[static_cast<std::size_t>(channel)];
}

void MicArray::validate(const CourtGeometry& court, std::size_t min_mics) const {
  if (!(speed_of_sound > 0)) throw ConfigError("speed_of_sound must be positive");
  if (!(sample_rate > 0)) throw ConfigError("sample_rate must be positive");
  if (mics.size() < min_mics) {
    throw ConfigError("microphone array needs at least " + std::to_string(min_mics) +
                      " sensors, got " + std::to_string(mics.size()));
  }
  for (std::size_t i = 0; i < mics.size(); ++i) {
    const auto& m = mics[i];
    if (m.id != static_cast<int>(i)) {
      throw ConfigError("microphone ids must be contiguous from 0 in order");
    }
    if (!(m.sigma > 0)) throw ConfigError("microphone sigma must be positive");
    if (!court.contains(m.position, 1e-9)) {
      throw ConfigError("microphone " + std::to_string(m.id) + " lies outside the court box");
    }
  }
}

double distance(const Vec3& pos, const Microphone& mic) { return (pos - mic.position).norm(); }

double plane_offset(const Vec3& pos, const NamedPlane& plane) {
  return (pos - plane.point).dot(plane.unit_normal);
}

}  // namespace squashloc
