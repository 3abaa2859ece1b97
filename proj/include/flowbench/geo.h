#ifndef FLOWBENCH_GEO_H_
#define FLOWBENCH_GEO_H_

#include <array>

namespace flowbench {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kEarthRadiusM = 6371000.0;
// Largest |delta lat| / |delta lon| (degrees) accepted by the tangent plane.
inline constexpr double kTangentPlaneLimitDeg = 0.1;

inline constexpr double DegToRad(double deg) { return deg * kPi / 180.0; }
inline constexpr double RadToDeg(double rad) { return rad * 180.0 / kPi; }

// Global pose: WGS-84 position (degrees, meters above takeoff datum) and
// attitude in radians.
struct GeoPose {
  double lat = 0.0;
  double lon = 0.0;
  double alt = 0.0;
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;

  bool operator==(const GeoPose&) const = default;
};

// East-North-Up position relative to an episode origin, attitude relative to
// the origin attitude.
struct LocalPose {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;

  bool operator==(const LocalPose&) const = default;
};

// (x, y, z, cos roll, cos yaw, cos pitch)
using Vec6 = std::array<double, 6>;

// Equirectangular tangent-plane projection around `origin`.
LocalPose GpsToLocal(const GeoPose& origin, const GeoPose& p);
// Exact algebraic inverse of GpsToLocal.
GeoPose LocalToGps(const GeoPose& origin, const LocalPose& p);

// Wraps into (-pi, pi]. Throws kNonFinite on NaN/inf.
double WrapAngle(double a);
// Shortest-arc interpolation; an exact half-turn goes counter-clockwise.
double InterpAngle(double a, double b, double t);
// Signed shortest-arc difference b - a, in (-pi, pi].
double AngleDiff(double a, double b);

Vec6 PoseToVec6(const LocalPose& p);

void ValidateGeoPose(const GeoPose& p);

}  // namespace flowbench

#endif  // FLOWBENCH_GEO_H_
