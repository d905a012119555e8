#pragma once

// Small analytic fixtures shared by the unit tests and the acceptance binary.

#include "mpp/mp_space.hpp"
#include "mpp/solver.hpp"
#include "mpp/templates.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <string>

namespace fixtures {

using namespace mpp;

inline std::string data_path(const std::string& name) { return std::string(MPP_DATA_DIR) + "/" + name; }

inline Template make_template(int n, Points verts, std::vector<std::array<int, 4>> quads) {
    Template t;
    t.n_boundary = n;
    t.vertices = std::move(verts);
    t.quads = std::move(quads);
    rebuild_edges(t);
    return t;
}

// One quad on the unit square.
inline Template unit_square() { return make_template(4, {{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{{0, 1, 2, 3}}}); }

// 2 x 2 quads on the square [0,2]^2 described as an 8-gon.
inline Template square_2x2() {
    return make_template(8, {{0, 0}, {1, 0}, {2, 0}, {2, 1}, {2, 2}, {1, 2}, {0, 2}, {0, 1}, {1, 1}},
                         {{{0, 1, 8, 7}}, {{1, 2, 3, 8}}, {{8, 3, 4, 5}}, {{7, 8, 5, 6}}});
}

// Three unit squares forming an L; vertex 4 is the concave corner.
inline Template l_shape() {
    return make_template(8, {{0, 0}, {1, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}, {0, 1}},
                         {{{0, 1, 4, 7}}, {{1, 2, 3, 4}}, {{7, 4, 5, 6}}});
}

inline std::vector<std::array<KnotVector, 2>> uniform_knots(const Template& t, int p, int levels) {
    const KnotVector k = uniform_knotvector(p, 1, levels);
    return std::vector<std::array<KnotVector, 2>>(t.quads.size(), {k, k});
}

inline std::shared_ptr<const MultipatchSpace> space_of(const Template& t, int p, int levels) {
    return std::make_shared<const MultipatchSpace>(build_space(t, uniform_knots(t, p, levels)));
}

// Boundary data following `f` applied to the straight layout edges.
inline BoundaryData mapped_boundary(const MultipatchSpace& s, const std::function<Vec2(const Vec2&)>& f) {
    BoundaryData id = identity_boundary(s);
    BoundaryData out;
    for (size_t i = 0; i < id.size(); ++i) {
        const Vec2 a = id[i].ctrl.front(), b = id[i].ctrl.back();
        BSplineCurve c = project_curve([&](double t) { return f(a + t * (b - a)); }, id[i].knots);
        out.push_back(std::move(c));
    }
    for (size_t i = 0; i < out.size(); ++i) out[(i + 1) % out.size()].ctrl.front() = out[i].ctrl.back();
    return out;
}

// Square [0,1]^2 pushed onto a disc-like smooth 4-edge face.
inline Vec2 squircle(const Vec2& p) {
    const Vec2 c = 2 * p - Vec2(1, 1);
    const double r = std::max(std::abs(c.x()), std::abs(c.y()));
    if (r < 1e-14) return Vec2::Zero();
    const double blend = 0.6;
    const Vec2 disc = c.normalized() * r;
    return (1 - blend) * c + blend * disc;
}

} // namespace fixtures
