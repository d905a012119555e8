#include "mpp/preprocess.hpp"
#include "mpp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mpp {

Points hermite_curve(const Vec2& va, const Vec2& da, const Vec2& vb, const Vec2& db, int n_samples) {
    Points out;
    out.reserve(n_samples);
    for (int j = 0; j < n_samples; ++j) {
        const double t = n_samples == 1 ? 0.0 : static_cast<double>(j) / (n_samples - 1);
        const double t2 = t * t, t3 = t2 * t;
        out.push_back((2 * t3 - 3 * t2 + 1) * va + (t3 - 2 * t2 + t) * da + (-2 * t3 + 3 * t2) * vb + (t3 - t2) * db);
    }
    out.front() = va;
    out.back() = vb;
    return out;
}

double curve_quality(const SplittingCurve& c, bool target_is_concave, double mu) {
    if (c.samples.size() < 3) throw Error(ErrorCode::DegenerateCurve, "curve needs at least 3 samples");
    const double len = polyline_length(c.samples);
    if (!(len > 0)) throw Error(ErrorCode::DegenerateCurve, "zero-length splitting curve");
    const Vec2 &va = c.samples.front(), &vb = c.samples.back();
    // C''(t) = a + b t
    const Vec2 a = -6 * va - 4 * c.d0 + 6 * vb - 2 * c.d1;
    const Vec2 b = 12 * va + 6 * c.d0 - 12 * vb + 6 * c.d1;
    const double integral = a.squaredNorm() + a.dot(b) + b.squaredNorm() / 3.0;
    const double q = std::sqrt(std::max(integral, 0.0)) / len;
    return target_is_concave ? q / mu : q;
}

double sampled_quality(const Points& s) {
    const int n = static_cast<int>(s.size());
    if (n < 3) throw Error(ErrorCode::DegenerateCurve, "curve needs at least 3 samples");
    const double len = polyline_length(s);
    if (!(len > 0)) throw Error(ErrorCode::DegenerateCurve, "zero-length curve");
    const double h = 1.0 / (n - 1);
    std::vector<double> f(n);
    for (int j = 1; j + 1 < n; ++j) f[j] = ((s[j + 1] - 2 * s[j] + s[j - 1]) / (h * h)).squaredNorm();
    // one-sided second differences at the ends
    f[0] = ((2 * s[0] - 5 * s[1] + 4 * s[2] - s[3 < n ? 3 : 2]) / (h * h)).squaredNorm();
    f[n - 1] = ((2 * s[n - 1] - 5 * s[n - 2] + 4 * s[n - 3] - s[n >= 4 ? n - 4 : n - 3]) / (h * h)).squaredNorm();
    double integral = 0;
    for (int j = 0; j + 1 < n; ++j) integral += 0.5 * h * (f[j] + f[j + 1]);
    return std::sqrt(integral) / len;
}

bool in_convex_cone(const Vec2& d, const Vec2& a, const Vec2& b) {
    const double det = cross(a, b);
    if (std::abs(det) < 1e-12 * a.norm() * b.norm()) return false;
    const double alpha = cross(d, b) / det, beta = cross(a, d) / det;
    return alpha > 0 && beta > 0;
}

std::vector<int> concave_vertices(const PlaneGraph& g, int face, double eps_angle) {
    std::vector<int> out;
    const auto angles = face_angles(g, face);
    for (int i = 0; i < static_cast<int>(angles.size()); ++i)
        if (angles[i] >= kPi + eps_angle) out.push_back(i);
    return out;
}

namespace {

// Interior samples strictly inside and no crossing of the face boundary away from the ends.
bool curve_inside(const Points& curve, const Points& poly, const std::vector<int>& corner_index, int la, int lb) {
    double diag = 0;
    for (const Vec2& p : poly) diag = std::max(diag, (p - poly.front()).norm());
    const double tol = 1e-9 * diag;
    for (size_t j = 1; j + 1 < curve.size(); ++j)
        if (!strictly_inside(curve[j], poly, tol)) return false;
    const int np = static_cast<int>(poly.size());
    const int ia = corner_index[la], ib = corner_index[lb];
    std::vector<Segment> segs;
    for (int k = 0; k < np; ++k) segs.push_back({poly[k], poly[(k + 1) % np], 0, k});
    const int nc = static_cast<int>(curve.size());
    for (int j = 0; j + 1 < nc; ++j) segs.push_back({curve[j], curve[j + 1], 1, j});
    bool clean = true;
    for_each_intersection(segs, [&](size_t i, size_t j) {
        const Segment &s = segs[i], &t = segs[j];
        if (s.tag == t.tag) return true;
        const Segment& b = s.tag == 0 ? s : t;
        const Segment& c = s.tag == 0 ? t : s;
        auto touches = [&](int vertex) { return b.index == vertex || (b.index + 1) % np == vertex; };
        if (c.index == 0 && touches(ia)) return true;
        if (c.index == nc - 2 && touches(ib)) return true;
        clean = false;
        return false;
    });
    return clean;
}

} // namespace

std::vector<Candidate> candidate_curves(const PlaneGraph& g, int face, const ConcavityConfig& cfg) {
    std::vector<Candidate> out;
    const auto conc = concave_vertices(g, face, cfg.eps_angle);
    if (conc.empty()) return out;
    const int n = g.faces[face].size();
    std::vector<bool> is_conc(n, false);
    for (int c : conc) is_conc[c] = true;
    const auto verts = g.face_vertices(face);
    std::vector<int> corner_index;
    const Points poly = g.face_polygon(face, &corner_index);
    std::vector<VertexGeometry> geo;
    for (int i = 0; i < n; ++i) geo.push_back(face_vertex_geometry(g, face, i));

    for (int a = 0; a < n; ++a) {
        if (!is_conc[a]) continue;
        for (int b = 0; b < n; ++b) {
            if (b == a || (b == (a + 1) % n) || (a == (b + 1) % n)) continue;
            if (is_conc[b] && b < a) continue; // concave pairs are handled once
            if (verts[a] == verts[b]) continue;
            const Vec2 &va = g.vertices[verts[a]], &vb = g.vertices[verts[b]];
            const double dist = (vb - va).norm();
            auto cones_ok = [&](const Vec2& d0, const Vec2& d1) {
                if (!in_convex_cone(d0, geo[a].t_minus, -geo[a].t_plus)) return false;
                if (is_conc[b] && !in_convex_cone(-d1, geo[b].t_minus, -geo[b].t_plus)) return false;
                return true;
            };
            SplittingCurve c;
            c.source = verts[a];
            c.target = verts[b];
            c.source_local = a;
            c.target_local = b;
            c.d0 = -dist * geo[a].n_out;
            c.d1 = dist * geo[b].n_out;
            bool ok = false;
            if (cones_ok(c.d0, c.d1)) {
                c.samples = hermite_curve(va, c.d0, vb, c.d1, cfg.samples_per_curve);
                ok = curve_inside(c.samples, poly, corner_index, a, b);
            }
            if (!ok) {
                // straight segment with matching end tangents
                c.d0 = c.d1 = vb - va;
                c.linear = true;
                if (cones_ok(c.d0, c.d1)) {
                    c.samples = hermite_curve(va, c.d0, vb, c.d1, cfg.samples_per_curve);
                    ok = curve_inside(c.samples, poly, corner_index, a, b);
                }
            }
            if (!ok) continue;
            const double q = curve_quality(c, is_conc[b], cfg.mu_concave_bonus);
            out.push_back({{a, b}, std::move(c), q});
        }
    }
    return out;
}

int split_face(PlaneGraph& g, int face, const SplittingCurve& curve) {
    const Face f = g.faces[face];
    const int n = f.size();
    const int a = curve.source_local, b = curve.target_local;
    const int e = g.n_edges();
    g.edges.push_back(Edge{{curve.source, curve.target}, curve.samples});
    Face plus, minus;
    for (int k = b; k != a; k = (k + 1) % n) plus.edges.push_back(f.edges[k]);
    plus.edges.push_back({e, false});
    for (int k = a; k != b; k = (k + 1) % n) minus.edges.push_back(f.edges[k]);
    minus.edges.push_back({e, true});
    g.faces[face] = std::move(plus);
    g.faces.push_back(std::move(minus));
    return e;
}

ConcavityResult remove_concave_corners(const PlaneGraph& input, const ConcavityConfig& cfg) {
    ConcavityResult res{input, {}, 0};
    PlaneGraph& g = res.graph;
    for (;;) {
        int face = -1;
        for (int f = 0; f < g.n_faces() && face < 0; ++f)
            if (!std::count(res.manual_faces.begin(), res.manual_faces.end(), f) &&
                !concave_vertices(g, f, cfg.eps_angle).empty())
                face = f;
        if (face < 0) break;
        const auto cands = candidate_curves(g, face, cfg);
        if (cands.empty()) {
            res.manual_faces.push_back(face);
            continue;
        }
        const Candidate* best = &cands.front();
        for (const Candidate& c : cands) {
            const auto key = std::make_pair(c.curve.source, c.curve.target);
            const auto bkey = std::make_pair(best->curve.source, best->curve.target);
            if (c.quality < best->quality || (c.quality == best->quality && key < bkey)) best = &c;
        }
        split_face(g, face, best->curve);
        ++res.splits;
    }
    std::sort(res.manual_faces.begin(), res.manual_faces.end());
    return res;
}

} // namespace mpp
