#include "mpp/plane_graph.hpp"
#include "mpp/errors.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

namespace mpp {

Points PlaneGraph::edge_points(EdgeRef r) const {
    Points p = edges[r.id].points;
    if (r.reversed) std::reverse(p.begin(), p.end());
    return p;
}

std::vector<int> PlaneGraph::face_vertices(int f) const {
    std::vector<int> v;
    v.reserve(faces[f].edges.size());
    for (const EdgeRef& r : faces[f].edges) v.push_back(tail(r));
    return v;
}

Points PlaneGraph::face_polygon(int f, std::vector<int>* corner_index) const {
    Points loop;
    if (corner_index) corner_index->clear();
    for (const EdgeRef& r : faces[f].edges) {
        if (corner_index) corner_index->push_back(static_cast<int>(loop.size()));
        const Points p = edge_points(r);
        loop.insert(loop.end(), p.begin(), p.end() - 1);
    }
    return loop;
}

std::vector<int> PlaneGraph::edge_faces(int e) const {
    std::vector<int> out;
    for (int f = 0; f < n_faces(); ++f)
        for (const EdgeRef& r : faces[f].edges)
            if (r.id == e) {
                out.push_back(f);
                break;
            }
    return out;
}

bool PlaneGraph::is_templated_edge(int e) const {
    for (int f : edge_faces(e))
        if (faces[f].tmpl) return true;
    return false;
}

std::vector<EdgeRef> PlaneGraph::boundary() const {
    std::vector<int> uses(edges.size(), 0);
    for (const Face& f : faces)
        for (const EdgeRef& r : f.edges) ++uses[r.id];
    std::map<int, std::vector<EdgeRef>> by_tail;
    std::vector<EdgeRef> all;
    for (const Face& f : faces)
        for (const EdgeRef& r : f.edges)
            if (uses[r.id] == 1) {
                by_tail[tail(r)].push_back(r);
                all.push_back(r);
            }
    std::sort(all.begin(), all.end(), [](EdgeRef a, EdgeRef b) { return a.id < b.id; });
    std::set<int> done;
    std::vector<EdgeRef> out;
    for (const EdgeRef& start : all) {
        if (done.count(start.id)) continue;
        EdgeRef cur = start;
        while (!done.count(cur.id)) {
            done.insert(cur.id);
            out.push_back(cur);
            const auto it = by_tail.find(head(cur));
            if (it == by_tail.end()) break;
            bool moved = false;
            for (const EdgeRef& n : it->second)
                if (!done.count(n.id)) {
                    cur = n;
                    moved = true;
                    break;
                }
            if (!moved) break;
        }
    }
    return out;
}

namespace {

double graph_scale(const RawGraph& raw) {
    double s = 0;
    for (const Vec2& v : raw.vertices) s = std::max(s, v.cwiseAbs().maxCoeff());
    for (const RawEdge& e : raw.edges)
        for (const Vec2& p : e.points) s = std::max(s, p.cwiseAbs().maxCoeff());
    return std::max(s, 1.0);
}

// A point strictly inside a simple CCW polygon: the centroid of a convex ear.
Vec2 interior_point(const Points& loop) {
    const size_t n = loop.size();
    for (size_t i = 0; i < n; ++i) {
        const Vec2& a = loop[(i + n - 1) % n];
        const Vec2& b = loop[i];
        const Vec2& c = loop[(i + 1) % n];
        if (cross(b - a, c - b) <= 0) continue;
        bool empty = true;
        for (size_t j = 0; j < n && empty; ++j) {
            if (j == i || j == (i + 1) % n || j == (i + n - 1) % n) continue;
            const Vec2& p = loop[j];
            if (cross(b - a, p - a) >= 0 && cross(c - b, p - b) >= 0 && cross(a - c, p - c) >= 0)
                empty = false;
        }
        if (empty) return (a + b + c) / 3.0;
    }
    return loop[0];
}

bool collinear_overlap(const Vec2& shared, const Vec2& p, const Vec2& q) {
    // segments shared->p and shared->q leave the same point; overlap iff same direction
    const Vec2 a = p - shared, b = q - shared;
    return std::abs(cross(a, b)) <= 1e-14 * a.norm() * b.norm() && a.dot(b) > 0;
}

void validate(const PlaneGraph& g) {
    // polylines
    for (int e = 0; e < g.n_edges(); ++e) {
        const Points& p = g.edges[e].points;
        for (size_t i = 1; i < p.size(); ++i)
            if (p[i] == p[i - 1])
                throw Error(ErrorCode::InvalidInput,
                            "edge " + std::to_string(e + 1) + " has repeated consecutive points");
    }
    // face chaining, orientation, directed-edge uniqueness
    std::set<std::pair<int, bool>> used;
    for (int f = 0; f < g.n_faces(); ++f) {
        const Face& face = g.faces[f];
        if (face.edges.empty()) throw Error(ErrorCode::OpenLoop, "face " + std::to_string(f) + " is empty");
        for (size_t i = 0; i < face.edges.size(); ++i) {
            const EdgeRef& r = face.edges[i];
            if (r.id < 0 || r.id >= g.n_edges())
                throw Error(ErrorCode::InvalidInput, "face " + std::to_string(f) + " references a missing edge");
            const EdgeRef& n = face.edges[(i + 1) % face.edges.size()];
            if (n.id < 0 || n.id >= g.n_edges())
                throw Error(ErrorCode::InvalidInput, "face " + std::to_string(f) + " references a missing edge");
            if (g.head(r) != g.tail(n))
                throw Error(ErrorCode::OpenLoop, "face " + std::to_string(f) + " does not close at edge " +
                                                     std::to_string(r.signed_id()));
            if (!used.insert({r.id, r.reversed}).second)
                throw Error(ErrorCode::DisjointnessViolation,
                            "directed edge " + std::to_string(r.signed_id()) + " used twice");
        }
        const std::vector<int> verts = g.face_vertices(f);
        if (std::set<int>(verts.begin(), verts.end()).size() != verts.size())
            throw Error(ErrorCode::SelfIntersection, "face " + std::to_string(f) + " visits a vertex twice");
        if (g.face_area(f) <= 0)
            throw Error(ErrorCode::OrientationError, "face " + std::to_string(f) + " is not CCW");
    }
    // polyline crossings
    std::vector<Segment> segs;
    for (int e = 0; e < g.n_edges(); ++e) {
        const Points& p = g.edges[e].points;
        for (size_t i = 0; i + 1 < p.size(); ++i) segs.push_back({p[i], p[i + 1], e, static_cast<int>(i)});
    }
    for_each_intersection(segs, [&](size_t i, size_t j) {
        const Segment& s = segs[i];
        const Segment& t = segs[j];
        const int ns = static_cast<int>(g.edges[s.tag].points.size()) - 1;
        const int nt = static_cast<int>(g.edges[t.tag].points.size()) - 1;
        auto shared_point = [&](Vec2& shared, Vec2& ps, Vec2& pt) {
            if (s.a == t.a) { shared = s.a; ps = s.b; pt = t.b; return true; }
            if (s.a == t.b) { shared = s.a; ps = s.b; pt = t.a; return true; }
            if (s.b == t.a) { shared = s.b; ps = s.a; pt = t.b; return true; }
            if (s.b == t.b) { shared = s.b; ps = s.a; pt = t.a; return true; }
            return false;
        };
        Vec2 shared, ps, pt;
        bool allowed = false;
        if (shared_point(shared, ps, pt) && !collinear_overlap(shared, ps, pt)) {
            if (s.tag == t.tag) {
                allowed = std::abs(s.index - t.index) == 1 ||
                          (g.edges[s.tag].v[0] == g.edges[s.tag].v[1] &&
                           std::min(s.index, t.index) == 0 && std::max(s.index, t.index) == ns - 1);
            } else {
                // only at a common graph vertex
                const bool s_end = (shared == g.edges[s.tag].points.front() && (s.index == 0)) ||
                                   (shared == g.edges[s.tag].points.back() && s.index == ns - 1);
                const bool t_end = (shared == g.edges[t.tag].points.front() && (t.index == 0)) ||
                                   (shared == g.edges[t.tag].points.back() && t.index == nt - 1);
                allowed = s_end && t_end;
            }
        }
        if (!allowed)
            throw Error(ErrorCode::SelfIntersection, "polylines of edges " + std::to_string(s.tag + 1) + " and " +
                                                         std::to_string(t.tag + 1) + " intersect");
        return true;
    });
    // interior disjointness
    std::vector<Points> polys;
    std::vector<Vec2> inner;
    std::vector<Eigen::AlignedBox2d> boxes;
    for (int f = 0; f < g.n_faces(); ++f) {
        polys.push_back(g.face_polygon(f));
        inner.push_back(interior_point(polys.back()));
        Eigen::AlignedBox2d box;
        for (const Vec2& p : polys.back()) box.extend(p);
        boxes.push_back(box);
    }
    for (int a = 0; a < g.n_faces(); ++a)
        for (int b = 0; b < g.n_faces(); ++b) {
            if (a == b || !boxes[a].intersects(boxes[b])) continue;
            if (strictly_inside(inner[b], polys[a]))
                throw Error(ErrorCode::DisjointnessViolation,
                            "faces " + std::to_string(a) + " and " + std::to_string(b) + " overlap");
        }
}

} // namespace

PlaneGraph build_graph(const RawGraph& raw, bool do_validate) {
    PlaneGraph g;
    g.vertices = raw.vertices;
    const double tol = 1e-9 * graph_scale(raw);
    const int nv = static_cast<int>(raw.vertices.size());
    for (size_t e = 0; e < raw.edges.size(); ++e) {
        const RawEdge& re = raw.edges[e];
        if (re.v[0] < 0 || re.v[0] >= nv || re.v[1] < 0 || re.v[1] >= nv)
            throw Error(ErrorCode::InvalidInput, "edge " + std::to_string(e + 1) + " has an invalid vertex index");
        if (re.points.size() < 2)
            throw Error(ErrorCode::InvalidInput, "edge " + std::to_string(e + 1) + " has fewer than 2 points");
        Edge edge{re.v, re.points};
        if ((edge.points.front() - g.vertices[re.v[0]]).norm() > tol ||
            (edge.points.back() - g.vertices[re.v[1]]).norm() > tol)
            throw Error(ErrorCode::InvalidInput,
                        "edge " + std::to_string(e + 1) + " does not start/end at its declared vertices");
        edge.points.front() = g.vertices[re.v[0]];
        edge.points.back() = g.vertices[re.v[1]];
        g.edges.push_back(std::move(edge));
    }
    for (const auto& fl : raw.faces) {
        Face f;
        for (int s : fl) {
            if (s == 0) throw Error(ErrorCode::InvalidInput, "edge id 0 in face list");
            f.edges.push_back(EdgeRef::from_signed(s));
        }
        g.faces.push_back(std::move(f));
    }
    if (do_validate) validate(g);
    return g;
}

RawGraph to_raw(const PlaneGraph& g) {
    RawGraph raw;
    raw.vertices = g.vertices;
    for (const Edge& e : g.edges) raw.edges.push_back({e.v, e.points});
    for (const Face& f : g.faces) {
        std::vector<int> ids;
        for (const EdgeRef& r : f.edges) ids.push_back(r.signed_id());
        raw.faces.push_back(ids);
    }
    return raw;
}

VertexGeometry face_vertex_geometry(const PlaneGraph& g, int face, int local) {
    const Face& f = g.faces[face];
    const int n = f.size();
    const EdgeRef in = f.edges[(local + n - 1) % n];
    const EdgeRef out = f.edges[local];
    const Points pin = g.edge_points(in);
    const Points pout = g.edge_points(out);
    VertexGeometry vg;
    vg.t_minus = (pin[pin.size() - 1] - pin[pin.size() - 2]).normalized();
    vg.t_plus = (pout[1] - pout[0]).normalized();
    vg.t_avg = 0.5 * (vg.t_minus + vg.t_plus);
    Vec2 n_out(vg.t_avg.y(), -vg.t_avg.x());
    if (n_out.norm() < 1e-300) n_out = Vec2(vg.t_plus.y(), -vg.t_plus.x()); // cusp
    vg.n_out = n_out.normalized();
    vg.angle = ccw_angle(vg.t_plus, -vg.t_minus);
    if (vg.angle == 0.0) vg.angle = 2 * kPi; // cusp pointing outward
    return vg;
}

VertexGeometry vertex_geometry(const PlaneGraph& g, int face, int vertex) {
    const std::vector<int> verts = g.face_vertices(face);
    const auto it = std::find(verts.begin(), verts.end(), vertex);
    if (it == verts.end())
        throw Error(ErrorCode::VertexNotOnFace,
                    "vertex " + std::to_string(vertex) + " not on face " + std::to_string(face));
    return face_vertex_geometry(g, face, static_cast<int>(it - verts.begin()));
}

std::vector<double> face_angles(const PlaneGraph& g, int face) {
    std::vector<double> a;
    for (int i = 0; i < g.faces[face].size(); ++i) a.push_back(face_vertex_geometry(g, face, i).angle);
    return a;
}

int balanced_split_index(const Points& pts) {
    if (pts.size() < 3) throw Error(ErrorCode::EndpointSplit, "polyline has no interior point");
    const std::vector<double> c = cumulative_lengths(pts);
    const double total = c.back();
    int best = 1;
    double best_gap = std::numeric_limits<double>::infinity();
    for (size_t i = 1; i + 1 < pts.size(); ++i) {
        const double gap = std::abs(c[i] - (total - c[i]));
        if (gap < best_gap) {
            best_gap = gap;
            best = static_cast<int>(i);
        }
    }
    return best;
}

int split_index_at_fraction(const Points& pts, double fraction) {
    if (pts.size() < 3) throw Error(ErrorCode::EndpointSplit, "polyline has no interior point");
    const std::vector<double> c = cumulative_lengths(pts);
    const double target = fraction * c.back();
    int best = 1;
    double best_gap = std::numeric_limits<double>::infinity();
    for (size_t i = 1; i + 1 < pts.size(); ++i) {
        const double gap = std::abs(c[i] - target);
        if (gap < best_gap) {
            best_gap = gap;
            best = static_cast<int>(i);
        }
    }
    return best;
}

int split_edge(PlaneGraph& g, int edge, std::optional<int> split_index) {
    if (edge < 0 || edge >= g.n_edges()) throw Error(ErrorCode::InvalidInput, "split of a missing edge");
    const Points pts = g.edges[edge].points;
    const int idx = split_index ? *split_index : balanced_split_index(pts);
    if (idx <= 0 || idx >= static_cast<int>(pts.size()) - 1)
        throw Error(ErrorCode::EndpointSplit, "split index " + std::to_string(idx) + " is not interior");
    const int vnew = static_cast<int>(g.vertices.size());
    g.vertices.push_back(pts[idx]);
    const int vend = g.edges[edge].v[1];
    Edge second{{vnew, vend}, Points(pts.begin() + idx, pts.end())};
    g.edges[edge].points = Points(pts.begin(), pts.begin() + idx + 1);
    g.edges[edge].v[1] = vnew;
    const int enew = g.n_edges();
    g.edges.push_back(std::move(second));
    for (Face& f : g.faces) {
        std::vector<EdgeRef> out;
        for (const EdgeRef& r : f.edges) {
            if (r.id != edge) {
                out.push_back(r);
            } else if (!r.reversed) {
                out.push_back({edge, false});
                out.push_back({enew, false});
            } else {
                out.push_back({enew, true});
                out.push_back({edge, true});
            }
        }
        f.edges = std::move(out);
    }
    return vnew;
}

void densify_edge(PlaneGraph& g, int edge, int min_points) {
    Points& pts = g.edges[edge].points;
    if (static_cast<int>(pts.size()) >= min_points) return;
    const int nseg = static_cast<int>(pts.size()) - 1;
    const int per = (min_points - 1 + nseg - 1) / nseg;
    Points out;
    for (int s = 0; s < nseg; ++s)
        for (int k = 0; k < per; ++k) {
            const double t = static_cast<double>(k) / per;
            out.push_back((1 - t) * pts[s] + t * pts[s + 1]);
        }
    out.push_back(pts.back());
    out.front() = pts.front();
    pts = std::move(out);
}

double max_turning_angle(const PlaneGraph& g) {
    double worst = 0;
    for (const Edge& e : g.edges)
        for (size_t i = 1; i + 1 < e.points.size(); ++i) {
            const Vec2 a = e.points[i] - e.points[i - 1];
            const Vec2 b = e.points[i + 1] - e.points[i];
            worst = std::max(worst, std::abs(std::atan2(cross(a, b), a.dot(b))));
        }
    return worst;
}

RawGraph raw_from_json(const nlohmann::json& j) {
    RawGraph raw;
    auto point = [](const nlohmann::json& p) {
        if (!p.is_array() || p.size() != 2) throw Error(ErrorCode::InvalidInput, "point must be [x, y]");
        return Vec2(p[0].get<double>(), p[1].get<double>());
    };
    try {
        for (const auto& v : j.at("vertices")) raw.vertices.push_back(point(v));
        for (const auto& e : j.at("edges")) {
            RawEdge re;
            re.v = {e.at("v")[0].get<int>(), e.at("v")[1].get<int>()};
            for (const auto& p : e.at("points")) re.points.push_back(point(p));
            raw.edges.push_back(std::move(re));
        }
        for (const auto& f : j.at("faces")) raw.faces.push_back(f.get<std::vector<int>>());
    } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorCode::InvalidInput, std::string("malformed graph JSON: ") + ex.what());
    }
    return raw;
}

nlohmann::json raw_to_json(const RawGraph& raw) {
    nlohmann::json j;
    j["vertices"] = nlohmann::json::array();
    for (const Vec2& v : raw.vertices) j["vertices"].push_back({v.x(), v.y()});
    j["edges"] = nlohmann::json::array();
    for (const RawEdge& e : raw.edges) {
        nlohmann::json pts = nlohmann::json::array();
        for (const Vec2& p : e.points) pts.push_back({p.x(), p.y()});
        j["edges"].push_back({{"v", {e.v[0], e.v[1]}}, {"points", pts}});
    }
    j["faces"] = raw.faces;
    return j;
}

PlaneGraph load_graph(const std::string& path, bool do_validate) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidInput, "cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorCode::InvalidInput, path + ": " + ex.what());
    }
    return build_graph(raw_from_json(j), do_validate);
}

void save_graph(const PlaneGraph& g, const std::string& path) {
    std::ofstream out(path);
    out << raw_to_json(to_raw(g)).dump(1) << '\n';
}

} // namespace mpp
