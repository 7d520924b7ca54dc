#pragma once

#include <Eigen/Core>

#include <string>
#include <string_view>
#include <vector>

namespace squashloc {

using Vec3 = Eigen::Vector3d;

/// An oriented plane. `point` is also used as the surface's representative
/// centre (e.g. as a localizer start point), so it should sit in the middle
/// of the physical surface.
struct NamedPlane {
  std::string name;
  Vec3 point = Vec3::Zero();
  Vec3 unit_normal = Vec3::UnitZ();

  /// Normalizes `normal`; throws ConfigError for a zero normal.
  static NamedPlane make(std::string name, const Vec3& point, const Vec3& normal);
};

/// Court box in the ground frame: origin at the front-wall / floor / left-wall
/// corner, x along the front wall, y toward the back glass, z up.
/// Surface normals point into the court.
struct CourtGeometry {
  double width = 6.4;   // x extent [m]
  double depth = 9.75;  // y extent [m]
  double height = 4.57; // z extent [m]
  std::vector<NamedPlane> surfaces;

  /// Box of the given size with the five standard surfaces.
  static CourtGeometry standard(double width = 6.4, double depth = 9.75, double height = 4.57);

  const NamedPlane& surface(std::string_view name) const;
  bool contains(const Vec3& p, double margin = 0.0) const;
  Vec3 centroid() const { return {width / 2, depth / 2, height / 2}; }
  double diagonal() const;
  Vec3 lower() const { return Vec3::Zero(); }
  Vec3 upper() const { return {width, depth, height}; }

  void validate() const;
};

inline constexpr std::string_view kFrontWall = "front_wall";
inline constexpr std::string_view kFloor = "floor";
inline constexpr std::string_view kLeftWall = "left_wall";
inline constexpr std::string_view kRightWall = "right_wall";
inline constexpr std::string_view kBackGlass = "back_glass";

enum class MicKind { omnidirectional, cardioid };

std::string_view to_string(MicKind kind);
MicKind mic_kind_from_string(std::string_view s);

struct Microphone {
  int id = 0;
  Vec3 position = Vec3::Zero();
  MicKind kind = MicKind::omnidirectional;  // metadata only
  double sigma = 10.0 / 96000.0;            // detection-time uncertainty [s]
};

struct MicArray {
  std::vector<Microphone> mics;
  double speed_of_sound = 343.0;  // [m/s]
  double sample_rate = 96000.0;   // [Hz]

  /// Six-microphone layout: three omnidirectional sensors in the floor and
  /// three cardioids at ceiling height, spread over the corners and edge
  /// midpoints of the box to maximize aperture. Every sigma is
  /// `sigma_samples / sample_rate`.
  static MicArray default_layout(const CourtGeometry& court, double speed_of_sound = 343.0,
                                 double sample_rate = 96000.0, double sigma_samples = 10.0);

  std::size_t size() const { return mics.size(); }
  /// Microphone with channel id `channel`; throws DataError when absent.
  const Microphone& mic(int channel) const;

  /// Checks ids are 0..N-1 in order, sigmas and rates are positive, and every
  /// sensor lies inside (or on) the court box. Requires at least
  /// `min_mics` sensors.
  void validate(const CourtGeometry& court, std::size_t min_mics = 3) const;
};

double distance(const Vec3& pos, const Microphone& mic);

/// Signed distance of `pos` from the plane, positive on the normal side.
double plane_offset(const Vec3& pos, const NamedPlane& plane);

}  // namespace squashloc
