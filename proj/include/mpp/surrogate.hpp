#pragma once

#include "mpp/geometry.hpp"
#include "mpp/plane_graph.hpp"

#include <Eigen/SparseCore>

#include <array>
#include <memory>
#include <optional>
#include <vector>

namespace mpp {

struct Triangulation {
    Points points;                           // boundary vertices first, in polygon order
    std::vector<std::array<int, 3>> triangles; // CCW
    std::vector<int> boundary_loop;          // 0 .. boundary_count-1
    int boundary_count = 0;

    int n_points() const { return static_cast<int>(points.size()); }
};

// Ear clipping, constrained Delaunay flips, then midpoint refinement of interior edges
// until no interior edge exceeds 2 * target_edge_length. Polygon edges are never split.
Triangulation triangulate(const Points& polygon, double target_edge_length);

// Minimum doubled signed area over all triangles of `pts` indexed by `tris`.
double min_orientation(const Points& pts, const std::vector<std::array<int, 3>>& tris);

struct Barycentric {
    int triangle = -1;
    std::array<double, 3> w{0, 0, 0};
};

// Uniform-grid point location over a fixed set of triangles.
class TriangleLocator {
public:
    TriangleLocator() = default;
    TriangleLocator(const Points& pts, const std::vector<std::array<int, 3>>& tris);
    // Containing triangle; points up to `tol` (relative to the bounding box) outside
    // snap to the nearest triangle. Empty when farther away.
    std::optional<Barycentric> locate(const Vec2& p, double tol = 1e-9) const;

private:
    Points pts_;
    std::vector<std::array<int, 3>> tris_;
    Vec2 lo_, hi_;
    int nx_ = 1, ny_ = 1;
    std::vector<std::vector<int>> cells_;
    Barycentric bary(int t, const Vec2& p) const;
};

class PiecewiseLinearMap {
public:
    PiecewiseLinearMap() = default;
    PiecewiseLinearMap(Triangulation source, Points images);

    const Triangulation& source() const { return source_; }
    const Points& images() const { return images_; }

    Vec2 evaluate(const Vec2& p) const;
    // Jacobian of the containing triangle.
    Mat2 jacobian(const Vec2& p) const;
    Mat2 triangle_jacobian(int t) const;
    std::optional<Barycentric> locate(const Vec2& p) const { return forward_.locate(p); }
    // Requires positively oriented image triangles.
    Vec2 inverse(const Vec2& q) const;
    bool is_bijective() const;

private:
    Triangulation source_;
    Points images_;
    TriangleLocator forward_;
    std::optional<TriangleLocator> backward_; // built when every image triangle is positive
};

Vec2 evaluate_pl(const PiecewiseLinearMap& map, const Vec2& p);

// Convex-combination system with mean value weights, split into the interior block A
// and the interior-boundary coupling B so that A u_I = B u_B. The factorisation is kept
// so that any number of boundary data sets can be solved.
class FloaterOperator {
public:
    explicit FloaterOperator(const Triangulation& tri);

    const Eigen::SparseMatrix<double>& A() const { return a_; }
    const Eigen::SparseMatrix<double>& B() const { return b_; }
    // Interior vertex ids in system order.
    const std::vector<int>& interior() const { return interior_; }
    Points solve(const Points& boundary_targets) const;

private:
    struct Factor;
    int n_points_ = 0;
    int n_boundary_ = 0;
    Eigen::SparseMatrix<double> a_, b_;
    std::vector<int> interior_;
    std::shared_ptr<Factor> factor_;
};

PiecewiseLinearMap floater_map(const Triangulation& tri, const Points& boundary_targets);

// Control domains.

enum class DomainKind { Disc, Teardrop, HalfDisc, Lens, ConvexPolygon };
const char* domain_kind_name(DomainKind k);

// A smooth piece of the control-domain boundary.
struct BoundaryPiece {
    enum class Type { Line, Arc, Bezier } type = Type::Line;
    std::array<Vec2, 4> p;     // Line: p0, p1. Bezier: p0..p3. Arc: p0 = centre.
    double radius = 0, theta0 = 0, theta1 = 0;

    // Position (order 0) or derivative with respect to the piece parameter s in [0, 1].
    Vec2 eval(double s, int order = 0) const;
    double length() const;
    // Parameter at which the arc length from s = 0 equals `fraction` of the total.
    double param_at_length(double fraction) const;
};

struct EdgeArc {
    int piece = 0;
    double s0 = 0, s1 = 1;
};

struct ControlDomain {
    DomainKind kind = DomainKind::Disc;
    std::vector<BoundaryPiece> pieces;
    std::vector<EdgeArc> edges;       // one per face edge, CCW
    std::vector<int> corners;         // face-local indices of modelled corners
    std::vector<double> corner_angles;

    int n_edges() const { return static_cast<int>(edges.size()); }
    // Point on the arc of face edge i at t in [0, 1], or its t-derivative of `order`.
    Vec2 edge_point(int i, double t, int order = 0) const;
    // Start point of face edge i.
    Vec2 break_point(int i) const { return edge_point(i, 0.0); }
    // Closed polygon with n samples per edge (shared ends counted once).
    Points sample_boundary(int n_per_edge) const;
    double boundary_length() const;
};

// Layout from per-vertex interior angles and per-edge lengths (edge i leaves vertex i).
ControlDomain control_domain(const std::vector<double>& angles, const std::vector<double>& lengths,
                             double mu_angle);
ControlDomain control_domain(const PlaneGraph& g, int face, double mu_angle);

// Polyline resampled at n points uniformly in arc length (ends kept exactly).
Points resample_polyline(const Points& pts, int n);

// Closed face polygon with every edge resampled to n points.
Points sample_face(const PlaneGraph& g, int face, int n_per_edge);

} // namespace mpp
