#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "crowdps/error.hpp"

namespace crowdps {

/// Coordinate reference tag. planar_unit points are dimensionless x/y
/// (the simulation lives in [-0.5, 0.5]^2); wgs84 points are lon/lat degrees.
enum class Crs { planar_unit, wgs84 };

inline const char* to_string(Crs crs) {
    return crs == Crs::planar_unit ? "planar-unit" : "wgs84";
}

/// Mean Earth radius in meters, used by the great-circle provider.
inline constexpr double kEarthRadiusM = 6'371'000.0;
inline constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

struct GeoPoint {
    double x = 0.0; // planar x, or longitude in degrees
    double y = 0.0; // planar y, or latitude in degrees
    Crs crs = Crs::planar_unit;

    bool valid() const {
        if (!std::isfinite(x) || !std::isfinite(y)) return false;
        if (crs == Crs::wgs84) return y >= -90.0 && y <= 90.0 && x >= -180.0 && x <= 180.0;
        return true;
    }
};

inline GeoPoint make_wgs84(double lon, double lat) {
    GeoPoint p{lon, lat, Crs::wgs84};
    if (!p.valid())
        throw DataError("invalid wgs84 coordinate (" + std::to_string(lon) + ", " +
                        std::to_string(lat) + ")");
    return p;
}

inline double euclidean(const GeoPoint& a, const GeoPoint& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

inline double squared_euclidean(const GeoPoint& a, const GeoPoint& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

/// Great-circle distance in meters (haversine on a sphere of mean radius).
inline double great_circle_m(const GeoPoint& a, const GeoPoint& b) {
    const double lat1 = a.y * kDegToRad;
    const double lat2 = b.y * kDegToRad;
    const double dlat = (b.y - a.y) * kDegToRad;
    const double dlon = (b.x - a.x) * kDegToRad;
    const double sdlat = std::sin(0.5 * dlat);
    const double sdlon = std::sin(0.5 * dlon);
    const double h = sdlat * sdlat + std::cos(lat1) * std::cos(lat2) * sdlon * sdlon;
    return 2.0 * kEarthRadiusM * std::asin(std::sqrt(std::min(1.0, h)));
}

/// Projects wgs84 points to a local planar frame (meters) by equirectangular
/// approximation around the centroid. Planar input is passed through.
/// Adequate for sub-national study areas; used for nearest-neighbor work.
inline std::vector<GeoPoint> project_local(const std::vector<GeoPoint>& points) {
    if (points.empty()) return {};
    if (points.front().crs == Crs::planar_unit) return points;
    double lon0 = 0.0, lat0 = 0.0;
    for (const auto& p : points) {
        lon0 += p.x;
        lat0 += p.y;
    }
    lon0 /= static_cast<double>(points.size());
    lat0 /= static_cast<double>(points.size());
    const double coslat0 = std::cos(lat0 * kDegToRad);
    std::vector<GeoPoint> out;
    out.reserve(points.size());
    for (const auto& p : points) {
        out.push_back(GeoPoint{kEarthRadiusM * (p.x - lon0) * kDegToRad * coslat0,
                               kEarthRadiusM * (p.y - lat0) * kDegToRad, Crs::planar_unit});
    }
    return out;
}

} // namespace crowdps
