#pragma once

#include "mpp/geometry.hpp"
#include "mpp/template.hpp"

#include <json.hpp>

#include <array>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

namespace mpp {

struct EdgeRef {
    int id = 0;
    bool reversed = false;

    EdgeRef flipped() const { return {id, !reversed}; }
    bool operator==(const EdgeRef& o) const { return id == o.id && reversed == o.reversed; }
    // 1-based signed id as used by the JSON format
    int signed_id() const { return reversed ? -(id + 1) : id + 1; }
    static EdgeRef from_signed(int s) { return {std::abs(s) - 1, s < 0}; }
};

struct Edge {
    std::array<int, 2> v{0, 0}; // start / end vertex
    Points points;              // canonical orientation, points.front() at v[0]
};

struct Face {
    std::vector<EdgeRef> edges; // CCW, head to tail
    std::optional<FaceTemplate> tmpl;

    int size() const { return static_cast<int>(edges.size()); }
};

struct VertexGeometry {
    Vec2 t_minus, t_plus, t_avg, n_out;
    double angle = 0.0;
};

struct PlaneGraph {
    Points vertices;
    std::vector<Edge> edges;
    std::vector<Face> faces;

    int n_faces() const { return static_cast<int>(faces.size()); }
    int n_edges() const { return static_cast<int>(edges.size()); }

    Points edge_points(EdgeRef r) const;
    int tail(EdgeRef r) const { return r.reversed ? edges[r.id].v[1] : edges[r.id].v[0]; }
    int head(EdgeRef r) const { return r.reversed ? edges[r.id].v[0] : edges[r.id].v[1]; }
    double edge_length(int e) const { return polyline_length(edges[e].points); }

    // Vertex i of a face is the tail of its edge i.
    std::vector<int> face_vertices(int f) const;
    // Dense closed polygon (no repeated closing point); `corner_index` receives the
    // polygon index of every face vertex.
    Points face_polygon(int f, std::vector<int>* corner_index = nullptr) const;
    double face_area(int f) const { return signed_area(face_polygon(f)); }

    // Faces referencing edge e (one or two).
    std::vector<int> edge_faces(int e) const;
    bool is_boundary_edge(int e) const { return edge_faces(e).size() == 1; }
    bool is_templated_edge(int e) const;
    // Ordered boundary edges, oriented as in their faces (one chain per loop).
    std::vector<EdgeRef> boundary() const;
};

struct RawEdge {
    std::array<int, 2> v{0, 0};
    Points points;
};

struct RawGraph {
    Points vertices;
    std::vector<RawEdge> edges;
    std::vector<std::vector<int>> faces; // signed 1-based edge ids
};

// Validates and builds. Throws OpenLoop, OrientationError, SelfIntersection,
// DisjointnessViolation or InvalidInput.
PlaneGraph build_graph(const RawGraph& raw, bool validate = true);
RawGraph to_raw(const PlaneGraph& g);

// Geometry of face vertex `local` (position inside face_vertices).
VertexGeometry face_vertex_geometry(const PlaneGraph& g, int face, int local);
// Geometry of global vertex `vertex` as seen from `face`; throws VertexNotOnFace.
VertexGeometry vertex_geometry(const PlaneGraph& g, int face, int vertex);
std::vector<double> face_angles(const PlaneGraph& g, int face);

// Split polyline of `edge` at interior point `split_index` (default: the point that
// minimises the length discrepancy). Edge `edge` keeps the first half, the second half is
// appended as a new edge. Returns the new vertex id. Face templates are left untouched.
int split_edge(PlaneGraph& g, int edge, std::optional<int> split_index = std::nullopt);
int balanced_split_index(const Points& pts);
// Index of the interior point whose arc-length fraction is closest to `fraction`.
int split_index_at_fraction(const Points& pts, double fraction);

// Insert equally spaced points so the polyline has at least `min_points` points.
void densify_edge(PlaneGraph& g, int edge, int min_points);

// Largest turning angle between consecutive polyline segments (smoothness diagnostic).
double max_turning_angle(const PlaneGraph& g);

RawGraph raw_from_json(const nlohmann::json& j);
nlohmann::json raw_to_json(const RawGraph& raw);
PlaneGraph load_graph(const std::string& path, bool validate = true);
void save_graph(const PlaneGraph& g, const std::string& path);

} // namespace mpp
