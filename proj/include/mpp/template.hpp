#pragma once

#include "mpp/geometry.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace mpp {

// Quadrangulation of the regular N-gon of radius 1. The first N vertices are the
// polygon corners in CCW order; boundary edge i runs from vertex i to vertex i+1.
struct Template {
    int n_boundary = 0;
    Points vertices;
    std::vector<std::array<int, 2>> edges; // sorted pairs, derived from quads
    std::vector<std::array<int, 4>> quads; // CCW
    std::string id;                        // provenance label

    int n_quads() const { return static_cast<int>(quads.size()); }
    int n_vertices() const { return static_cast<int>(vertices.size()); }
};

// Regular N-gon corner q.
Vec2 ngon_corner(int n, int q);

// Rebuild `edges` from `quads`.
void rebuild_edges(Template& t);

std::vector<int> vertex_valences(const Template& t);

// Corner cross product nu(v, q) of the quad edges leaving corner k.
double corner_cross(const Points& verts, const std::array<int, 4>& quad, int k);

struct TemplateCheck {
    bool ok = true;
    std::string reason;
};

// Even N, boundary at N-gon corners, tiling area, all nu > 0, edge incidence 1 or 2.
TemplateCheck validate_template(const Template& t, double tol = 1e-9);

// A template assigned to a face: template boundary edge i pairs with face edge i.
struct FaceTemplate {
    Template layout;
    double cost = 0.0;            // C_T at selection time (0 when not scored)
    std::optional<Points> control; // optimised control-template vertices, if any
};

} // namespace mpp
