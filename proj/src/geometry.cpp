#include "mpp/geometry.hpp"
#include "mpp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mpp {

const char* error_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::OpenLoop: return "OpenLoop";
    case ErrorCode::OrientationError: return "OrientationError";
    case ErrorCode::SelfIntersection: return "SelfIntersection";
    case ErrorCode::DisjointnessViolation: return "DisjointnessViolation";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::VertexNotOnFace: return "VertexNotOnFace";
    case ErrorCode::EndpointSplit: return "EndpointSplit";
    case ErrorCode::DegenerateCurve: return "DegenerateCurve";
    case ErrorCode::InfeasibleConfig: return "InfeasibleConfig";
    case ErrorCode::SingularGlueSystem: return "SingularGlueSystem";
    case ErrorCode::RefinementCycle: return "RefinementCycle";
    case ErrorCode::DegeneratePolygon: return "DegeneratePolygon";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::PointOutsideDomain: return "PointOutsideDomain";
    case ErrorCode::AllTemplated: return "AllTemplated";
    case ErrorCode::NotApplicable: return "NotApplicable";
    case ErrorCode::FoldedSurrogate: return "FoldedSurrogate";
    case ErrorCode::InfeasibleStart: return "InfeasibleStart";
    case ErrorCode::UntangleFailed: return "UntangleFailed";
    case ErrorCode::NonconvexQuad: return "NonconvexQuad";
    case ErrorCode::IncompatibleBases: return "IncompatibleBases";
    case ErrorCode::MaxRecursionsExceeded: return "MaxRecursionsExceeded";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NotASuperset: return "NotASuperset";
    case ErrorCode::NonconformingKnots: return "NonconformingKnots";
    case ErrorCode::KnotMismatch: return "KnotMismatch";
    case ErrorCode::NewtonDiverged: return "NewtonDiverged";
    case ErrorCode::FoldedMap: return "FoldedMap";
    }
    return "Unknown";
}

double ccw_angle(const Vec2& from, const Vec2& to) {
    double a = std::atan2(cross(from, to), from.dot(to));
    if (a < 0) a += 2 * kPi;
    if (a >= 2 * kPi) a -= 2 * kPi;
    return a;
}

double polyline_length(const Points& pts) {
    double l = 0;
    for (size_t i = 1; i < pts.size(); ++i) l += (pts[i] - pts[i - 1]).norm();
    return l;
}

std::vector<double> cumulative_lengths(const Points& pts) {
    std::vector<double> c(pts.size(), 0.0);
    for (size_t i = 1; i < pts.size(); ++i) c[i] = c[i - 1] + (pts[i] - pts[i - 1]).norm();
    return c;
}

double signed_area(const Points& loop) {
    const size_t n = loop.size();
    double a = 0;
    for (size_t i = 0; i < n; ++i) a += cross(loop[i], loop[(i + 1) % n]);
    return 0.5 * a;
}

int winding_number(const Vec2& p, const Points& loop) {
    // Sunday's crossing rule
    int wn = 0;
    const size_t n = loop.size();
    for (size_t i = 0; i < n; ++i) {
        const Vec2& a = loop[i];
        const Vec2& b = loop[(i + 1) % n];
        const double side = cross(b - a, p - a);
        if (a.y() <= p.y()) {
            if (b.y() > p.y() && side > 0) ++wn;
        } else if (b.y() <= p.y() && side < 0) {
            --wn;
        }
    }
    return wn;
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 d = b - a;
    const double l2 = d.squaredNorm();
    double t = l2 > 0 ? (p - a).dot(d) / l2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (a + t * d - p).norm();
}

double point_loop_distance(const Vec2& p, const Points& loop) {
    double best = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < loop.size(); ++i)
        best = std::min(best, point_segment_distance(p, loop[i], loop[(i + 1) % loop.size()]));
    return best;
}

bool strictly_inside(const Vec2& p, const Points& loop, double tol) {
    if (winding_number(p, loop) == 0) return false;
    return point_loop_distance(p, loop) > tol;
}

namespace {

int orient(const Vec2& a, const Vec2& b, const Vec2& c) {
    const double v = cross(b - a, c - a);
    return (v > 0) - (v < 0);
}

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
    return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) &&
           std::min(a.y(), b.y()) <= p.y() && p.y() <= std::max(a.y(), b.y());
}

} // namespace

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    const int o1 = orient(a, b, c), o2 = orient(a, b, d);
    const int o3 = orient(c, d, a), o4 = orient(c, d, b);
    if (o1 != o2 && o3 != o4) return true;
    if (o1 == 0 && on_segment(a, b, c)) return true;
    if (o2 == 0 && on_segment(a, b, d)) return true;
    if (o3 == 0 && on_segment(c, d, a)) return true;
    if (o4 == 0 && on_segment(c, d, b)) return true;
    return false;
}

void for_each_intersection(const std::vector<Segment>& segs,
                           const std::function<bool(size_t, size_t)>& report) {
    std::vector<size_t> order(segs.size());
    std::iota(order.begin(), order.end(), 0);
    auto xmin = [&](size_t i) { return std::min(segs[i].a.x(), segs[i].b.x()); };
    auto xmax = [&](size_t i) { return std::max(segs[i].a.x(), segs[i].b.x()); };
    std::sort(order.begin(), order.end(), [&](size_t i, size_t j) {
        const double a = xmin(i), b = xmin(j);
        return a < b || (a == b && i < j);
    });
    for (size_t oi = 0; oi < order.size(); ++oi) {
        const size_t i = order[oi];
        const double right = xmax(i);
        const double ylo = std::min(segs[i].a.y(), segs[i].b.y());
        const double yhi = std::max(segs[i].a.y(), segs[i].b.y());
        for (size_t oj = oi + 1; oj < order.size(); ++oj) {
            const size_t j = order[oj];
            if (xmin(j) > right) break;
            if (std::max(segs[j].a.y(), segs[j].b.y()) < ylo) continue;
            if (std::min(segs[j].a.y(), segs[j].b.y()) > yhi) continue;
            if (!segments_intersect(segs[i].a, segs[i].b, segs[j].a, segs[j].b)) continue;
            if (!report(std::min(i, j), std::max(i, j))) return;
        }
    }
}

Points open_loop(const Points& loop) {
    Points out = loop;
    if (out.size() > 1 && out.front() == out.back()) out.pop_back();
    return out;
}

} // namespace mpp
