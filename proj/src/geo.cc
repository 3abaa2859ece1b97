#include "flowbench/geo.h"

#include <cmath>

#include <fmt/format.h>

#include "flowbench/error.h"

namespace flowbench {
namespace {

constexpr double kMetersPerDeg = kEarthRadiusM * kPi / 180.0;

double WrapLongitude(double lon) {
  double r = std::remainder(lon, 360.0);
  if (r <= -180.0) r += 360.0;
  return r;
}

void RequireFinite(double v, const char* what) {
  if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, what);
}

}  // namespace

void ValidateGeoPose(const GeoPose& p) {
  if (!std::isfinite(p.lat) || p.lat < -90.0 || p.lat > 90.0) {
    throw Error(ErrorCode::kInvalidLatitude, fmt::format("latitude {} outside [-90, 90]", p.lat));
  }
  if (!std::isfinite(p.lon) || p.lon <= -180.0 || p.lon > 180.0) {
    throw Error(ErrorCode::kInvalidLongitude, fmt::format("longitude {} outside (-180, 180]", p.lon));
  }
  RequireFinite(p.alt, "altitude");
  RequireFinite(p.roll, "roll");
  RequireFinite(p.pitch, "pitch");
  RequireFinite(p.yaw, "yaw");
}

double WrapAngle(double a) {
  if (!std::isfinite(a)) throw Error(ErrorCode::kNonFinite, "angle is not finite");
  double r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) r = kPi;
  return r;
}

double AngleDiff(double a, double b) { return WrapAngle(b - a); }

double InterpAngle(double a, double b, double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw Error(ErrorCode::kOutOfRange, fmt::format("interpolation fraction {} outside [0, 1]", t));
  }
  if (t == 0.0) return WrapAngle(a);
  if (t == 1.0) return WrapAngle(b);
  return WrapAngle(a + t * AngleDiff(a, b));
}

LocalPose GpsToLocal(const GeoPose& origin, const GeoPose& p) {
  ValidateGeoPose(origin);
  ValidateGeoPose(p);
  const double dlat = p.lat - origin.lat;
  const double dlon = WrapLongitude(p.lon - origin.lon);
  if (std::abs(dlat) >= kTangentPlaneLimitDeg || std::abs(dlon) >= kTangentPlaneLimitDeg) {
    throw Error(ErrorCode::kTangentPlaneViolation,
                fmt::format("offset ({} deg lat, {} deg lon) too large for tangent plane", dlat, dlon));
  }
  LocalPose out;
  out.x = dlon * std::cos(DegToRad(origin.lat)) * kMetersPerDeg;
  out.y = dlat * kMetersPerDeg;
  out.z = p.alt - origin.alt;
  out.roll = AngleDiff(origin.roll, p.roll);
  out.pitch = AngleDiff(origin.pitch, p.pitch);
  out.yaw = AngleDiff(origin.yaw, p.yaw);
  return out;
}

GeoPose LocalToGps(const GeoPose& origin, const LocalPose& p) {
  ValidateGeoPose(origin);
  RequireFinite(p.x, "x");
  RequireFinite(p.y, "y");
  RequireFinite(p.z, "z");
  GeoPose out;
  out.lat = origin.lat + p.y / kMetersPerDeg;
  out.lon = WrapLongitude(origin.lon + p.x / (std::cos(DegToRad(origin.lat)) * kMetersPerDeg));
  out.alt = origin.alt + p.z;
  out.roll = WrapAngle(origin.roll + p.roll);
  out.pitch = WrapAngle(origin.pitch + p.pitch);
  out.yaw = WrapAngle(origin.yaw + p.yaw);
  if (out.lat < -90.0 || out.lat > 90.0) {
    throw Error(ErrorCode::kInvalidLatitude, fmt::format("latitude {} outside [-90, 90]", out.lat));
  }
  return out;
}

Vec6 PoseToVec6(const LocalPose& p) {
  return {p.x, p.y, p.z, std::cos(p.roll), std::cos(p.yaw), std::cos(p.pitch)};
}

}  // namespace flowbench
