#pragma once

#include <array>
#include <cmath>

namespace arbiter {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    bool operator==(const Vec3& o) const = default;

    double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

/// Room dimensions as (length, width, height) in meters.
using RoomDims = std::array<double, 3>;

inline double room_volume(const RoomDims& d) { return d[0] * d[1] * d[2]; }

inline double room_surface_area(const RoomDims& d) {
    return 2.0 * (d[0] * d[1] + d[0] * d[2] + d[1] * d[2]);
}

inline bool inside_room(const RoomDims& d, const Vec3& p, double margin = 0.0) {
    return p.x > margin && p.x < d[0] - margin &&
           p.y > margin && p.y < d[1] - margin &&
           p.z > margin && p.z < d[2] - margin;
}

} // namespace arbiter
