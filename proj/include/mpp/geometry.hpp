#pragma once

#include <Eigen/Core>

#include <array>
#include <functional>
#include <vector>

namespace mpp {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Points = std::vector<Vec2>;

constexpr double kPi = 3.14159265358979323846;

inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Value, Jacobian (columns d/du, d/dv) and second derivatives (uu, uv, vv) of a 2D map.
struct MapEval {
    Vec2 x = Vec2::Zero();
    Mat2 J = Mat2::Zero();
    std::array<Vec2, 3> H{Vec2::Zero(), Vec2::Zero(), Vec2::Zero()};
};

// Angle of rotating `from` counterclockwise onto `to`, in [0, 2pi).
double ccw_angle(const Vec2& from, const Vec2& to);

double polyline_length(const Points& pts);
// cumulative[i] = length of pts[0..i]
std::vector<double> cumulative_lengths(const Points& pts);

// Shoelace area; positive for CCW loops. The loop is implicitly closed.
double signed_area(const Points& loop);

// Winding number of `p` with respect to the closed loop.
int winding_number(const Vec2& p, const Points& loop);

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);
double point_loop_distance(const Vec2& p, const Points& loop);

// Strictly inside: nonzero winding and farther than `tol` from the boundary.
bool strictly_inside(const Vec2& p, const Points& loop, double tol = 0.0);

// Closed segments [a,b] and [c,d] share at least one point.
bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d);

struct Segment {
    Vec2 a, b;
    int tag = 0;   // caller-defined owner id
    int index = 0; // position inside the owner
};

// Sweep over x-sorted bounding boxes; calls `report(i, j)` for every intersecting pair
// (i < j indices into `segs`). Stops early if `report` returns false.
void for_each_intersection(const std::vector<Segment>& segs,
                           const std::function<bool(size_t, size_t)>& report);

// Remove the duplicated closing point if present.
Points open_loop(const Points& loop);

} // namespace mpp
