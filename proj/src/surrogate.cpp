#include "mpp/surrogate.hpp"
#include "mpp/errors.hpp"
#include "mpp/quadrature.hpp"

#include <Eigen/Geometry>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <unordered_map>

namespace mpp {

namespace {

double orient(const Vec2& a, const Vec2& b, const Vec2& c) { return cross(b - a, c - a); }

// Positive when d lies inside the circumcircle of the CCW triangle (a, b, c).
double incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    const Vec2 ad = a - d, bd = b - d, cd = c - d;
    const double a2 = ad.squaredNorm(), b2 = bd.squaredNorm(), c2 = cd.squaredNorm();
    return ad.x() * (bd.y() * c2 - b2 * cd.y()) - ad.y() * (bd.x() * c2 - b2 * cd.x()) +
           a2 * (bd.x() * cd.y() - bd.y() * cd.x());
}

std::uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

// Triangle soup with edge adjacency, supporting flips and edge splits.
class Mesh {
public:
    Points pts;
    std::vector<std::array<int, 3>> tris;
    int nb = 0;

    void build_adjacency() {
        adj_.clear();
        for (int t = 0; t < static_cast<int>(tris.size()); ++t)
            for (int k = 0; k < 3; ++k) attach(tris[t][k], tris[t][(k + 1) % 3], t);
    }

    bool constrained(int a, int b) const {
        if (a >= nb || b >= nb) return false;
        return (a + 1) % nb == b || (b + 1) % nb == a;
    }

    // Lawson flips starting from the given edges.
    void legalise(std::vector<std::array<int, 2>> stack) {
        size_t guard = 0;
        const size_t max_flips = 50 * tris.size() + 1000;
        while (!stack.empty() && guard < max_flips) {
            const auto [a, b] = stack.back();
            stack.pop_back();
            if (constrained(a, b)) continue;
            const auto it = adj_.find(edge_key(a, b));
            if (it == adj_.end() || it->second[0] < 0 || it->second[1] < 0) continue;
            int t1 = it->second[0], t2 = it->second[1];
            // orient so that t1 contains the directed edge a -> b
            int u = a, v = b;
            if (!has_directed(t1, u, v)) std::swap(u, v);
            if (!has_directed(t1, u, v)) continue;
            if (!has_directed(t2, v, u)) std::swap(t1, t2);
            if (!has_directed(t1, u, v) || !has_directed(t2, v, u)) continue;
            const int c = opposite(t1, u, v), d = opposite(t2, v, u);
            if (incircle(pts[u], pts[v], pts[c], pts[d]) <= 1e-14 * scale2()) continue;
            if (orient(pts[u], pts[d], pts[c]) <= 0 || orient(pts[d], pts[v], pts[c]) <= 0) continue;
            flip(t1, t2, u, v, c, d);
            ++guard;
            stack.push_back({u, d});
            stack.push_back({d, v});
            stack.push_back({v, c});
            stack.push_back({c, u});
        }
    }

    void legalise_all() {
        std::vector<std::array<int, 2>> stack;
        for (const auto& [key, t] : adj_) stack.push_back({static_cast<int>(key >> 32), static_cast<int>(key & 0xffffffffu)});
        std::sort(stack.begin(), stack.end());
        legalise(stack);
    }

    // Split interior edges longer than `max_len`, longest first.
    void refine(double max_len, size_t max_points) {
        for (int pass = 0; pass < 64; ++pass) {
            std::vector<std::pair<double, std::array<int, 2>>> long_edges;
            for (const auto& [key, t] : adj_) {
                const int a = static_cast<int>(key >> 32), b = static_cast<int>(key & 0xffffffffu);
                if (t[0] < 0 || t[1] < 0) continue;
                const double len = (pts[a] - pts[b]).norm();
                if (len > max_len) long_edges.push_back({len, {a, b}});
            }
            if (long_edges.empty()) return;
            std::sort(long_edges.begin(), long_edges.end(), [](const auto& x, const auto& y) {
                return x.first != y.first ? x.first > y.first : x.second < y.second;
            });
            for (const auto& [len, e] : long_edges) {
                if (pts.size() >= max_points) return;
                const auto it = adj_.find(edge_key(e[0], e[1]));
                if (it == adj_.end() || it->second[0] < 0 || it->second[1] < 0) continue;
                if ((pts[e[0]] - pts[e[1]]).norm() > max_len) split(e[0], e[1]);
            }
        }
    }

private:
    std::unordered_map<std::uint64_t, std::array<int, 2>> adj_;
    mutable double scale2_ = -1;

    double scale2() const {
        if (scale2_ < 0) {
            Eigen::AlignedBox2d box;
            for (const Vec2& p : pts) box.extend(p);
            const double d = box.diagonal().squaredNorm();
            scale2_ = d * d;
        }
        return scale2_;
    }

    void attach(int a, int b, int t) {
        auto& slot = adj_.try_emplace(edge_key(a, b), std::array<int, 2>{-1, -1}).first->second;
        if (slot[0] < 0) slot[0] = t;
        else slot[1] = t;
    }

    void replace(int a, int b, int from, int to) {
        auto& slot = adj_.at(edge_key(a, b));
        if (slot[0] == from) slot[0] = to;
        else if (slot[1] == from) slot[1] = to;
    }

    bool has_directed(int t, int a, int b) const {
        for (int k = 0; k < 3; ++k)
            if (tris[t][k] == a && tris[t][(k + 1) % 3] == b) return true;
        return false;
    }

    int opposite(int t, int a, int b) const {
        for (int k = 0; k < 3; ++k)
            if (tris[t][k] != a && tris[t][k] != b) return tris[t][k];
        return -1;
    }

    // t1 = (u, v, c), t2 = (v, u, d) become (u, d, c) and (d, v, c).
    void flip(int t1, int t2, int u, int v, int c, int d) {
        adj_.erase(edge_key(u, v));
        tris[t1] = {u, d, c};
        tris[t2] = {d, v, c};
        replace(u, d, t2, t1);
        replace(v, c, t1, t2);
        adj_[edge_key(c, d)] = {t1, t2};
    }

    void split(int a, int b) {
        const auto slot = adj_.at(edge_key(a, b));
        int t1 = slot[0], t2 = slot[1];
        int u = a, v = b;
        if (!has_directed(t1, u, v)) std::swap(u, v);
        if (!has_directed(t2, v, u)) std::swap(t1, t2);
        const int c = opposite(t1, u, v), d = opposite(t2, v, u);
        const int m = static_cast<int>(pts.size());
        pts.push_back(0.5 * (pts[u] + pts[v]));
        const int t3 = static_cast<int>(tris.size()), t4 = t3 + 1;
        adj_.erase(edge_key(u, v));
        tris[t1] = {u, m, c};
        tris[t2] = {v, m, d};
        tris.push_back({m, v, c});
        tris.push_back({m, u, d});
        replace(v, c, t1, t3);
        replace(u, d, t2, t4);
        adj_[edge_key(u, m)] = {t1, t4};
        adj_[edge_key(m, v)] = {t2, t3};
        adj_[edge_key(m, c)] = {t1, t3};
        adj_[edge_key(m, d)] = {t2, t4};
        legalise({{u, c}, {c, v}, {v, d}, {d, u}});
    }
};

std::vector<std::array<int, 3>> ear_clip(const Points& poly) {
    const int n = static_cast<int>(poly.size());
    std::vector<int> prev(n), next(n);
    for (int i = 0; i < n; ++i) {
        prev[i] = (i + n - 1) % n;
        next[i] = (i + 1) % n;
    }
    auto is_ear = [&](int i) {
        const int p = prev[i], q = next[i];
        const Vec2 &a = poly[p], &b = poly[i], &c = poly[q];
        if (orient(a, b, c) <= 0) return false;
        for (int j = next[q]; j != p; j = next[j]) {
            const Vec2& x = poly[j];
            // only non-convex vertices can intrude into an ear
            if (orient(poly[prev[j]], x, poly[next[j]]) > 0) continue;
            if (orient(a, b, x) >= 0 && orient(b, c, x) >= 0 && orient(c, a, x) >= 0) return false;
        }
        return true;
    };
    std::vector<std::array<int, 3>> tris;
    int remaining = n, i = 0, misses = 0;
    while (remaining > 3) {
        if (is_ear(i)) {
            tris.push_back({prev[i], i, next[i]});
            next[prev[i]] = next[i];
            prev[next[i]] = prev[i];
            i = prev[i];
            --remaining;
            misses = 0;
        } else {
            i = next[i];
            if (++misses > remaining) throw Error(ErrorCode::DegeneratePolygon, "no ear found");
        }
    }
    if (orient(poly[prev[i]], poly[i], poly[next[i]]) <= 0)
        throw Error(ErrorCode::DegeneratePolygon, "degenerate final triangle");
    tris.push_back({prev[i], i, next[i]});
    return tris;
}

} // namespace

Triangulation triangulate(const Points& polygon, double target_edge_length) {
    const Points poly = open_loop(polygon);
    if (poly.size() < 3) throw Error(ErrorCode::DegeneratePolygon, "polygon needs at least 3 vertices");
    if (signed_area(poly) <= 0) throw Error(ErrorCode::DegeneratePolygon, "polygon must be CCW with positive area");
    Mesh m;
    m.pts = poly;
    m.nb = static_cast<int>(poly.size());
    m.tris = ear_clip(poly);
    m.build_adjacency();
    m.legalise_all();
    if (target_edge_length > 0) m.refine(2 * target_edge_length, 200000);
    Triangulation t;
    t.points = std::move(m.pts);
    t.triangles = std::move(m.tris);
    t.boundary_count = m.nb;
    t.boundary_loop.resize(m.nb);
    std::iota(t.boundary_loop.begin(), t.boundary_loop.end(), 0);
    return t;
}

double min_orientation(const Points& pts, const std::vector<std::array<int, 3>>& tris) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& t : tris) m = std::min(m, orient(pts[t[0]], pts[t[1]], pts[t[2]]));
    return m;
}

TriangleLocator::TriangleLocator(const Points& pts, const std::vector<std::array<int, 3>>& tris)
    : pts_(pts), tris_(tris) {
    Eigen::AlignedBox2d box;
    for (const Vec2& p : pts_) box.extend(p);
    lo_ = box.min();
    hi_ = box.max();
    const int side = std::clamp(static_cast<int>(std::sqrt(tris_.size() / 2.0)), 1, 512);
    nx_ = ny_ = side;
    cells_.assign(static_cast<size_t>(nx_) * ny_, {});
    const Vec2 ext = (hi_ - lo_).cwiseMax(1e-300);
    auto cell = [&](double v, double lo, double e, int n) {
        return std::clamp(static_cast<int>((v - lo) / e * n), 0, n - 1);
    };
    for (int t = 0; t < static_cast<int>(tris_.size()); ++t) {
        Eigen::AlignedBox2d tb;
        for (int k = 0; k < 3; ++k) tb.extend(pts_[tris_[t][k]]);
        const int x0 = cell(tb.min().x(), lo_.x(), ext.x(), nx_), x1 = cell(tb.max().x(), lo_.x(), ext.x(), nx_);
        const int y0 = cell(tb.min().y(), lo_.y(), ext.y(), ny_), y1 = cell(tb.max().y(), lo_.y(), ext.y(), ny_);
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) cells_[static_cast<size_t>(y) * nx_ + x].push_back(t);
    }
}

Barycentric TriangleLocator::bary(int t, const Vec2& p) const {
    const Vec2 &a = pts_[tris_[t][0]], &b = pts_[tris_[t][1]], &c = pts_[tris_[t][2]];
    const double d = orient(a, b, c);
    Barycentric r;
    r.triangle = t;
    r.w[0] = orient(p, b, c) / d;
    r.w[1] = orient(a, p, c) / d;
    r.w[2] = 1.0 - r.w[0] - r.w[1];
    return r;
}

std::optional<Barycentric> TriangleLocator::locate(const Vec2& p, double tol) const {
    if (tris_.empty()) return std::nullopt;
    const Vec2 ext = (hi_ - lo_).cwiseMax(1e-300);
    const double diag = ext.norm();
    const int x = static_cast<int>((p.x() - lo_.x()) / ext.x() * nx_);
    const int y = static_cast<int>((p.y() - lo_.y()) / ext.y() * ny_);
    Barycentric best;
    double best_min = -std::numeric_limits<double>::infinity();
    if (x >= 0 && x < nx_ && y >= 0 && y < ny_) {
        for (int t : cells_[static_cast<size_t>(y) * nx_ + x]) {
            const Barycentric b = bary(t, p);
            const double mn = std::min({b.w[0], b.w[1], b.w[2]});
            if (mn > best_min) {
                best_min = mn;
                best = b;
            }
        }
        if (best_min >= -1e-12) return best;
    }
    // slow path: nearest triangle by Euclidean distance
    double best_dist = std::numeric_limits<double>::infinity();
    int best_t = -1;
    for (int t = 0; t < static_cast<int>(tris_.size()); ++t) {
        const Vec2 &a = pts_[tris_[t][0]], &b = pts_[tris_[t][1]], &c = pts_[tris_[t][2]];
        const Barycentric bc = bary(t, p);
        double dist = 0.0;
        if (std::min({bc.w[0], bc.w[1], bc.w[2]}) < 0)
            dist = std::min({point_segment_distance(p, a, b), point_segment_distance(p, b, c), point_segment_distance(p, c, a)});
        if (dist < best_dist) {
            best_dist = dist;
            best_t = t;
        }
    }
    if (best_t < 0 || best_dist > tol * diag) return std::nullopt;
    Barycentric b = bary(best_t, p);
    double sum = 0;
    for (double& w : b.w) sum += (w = std::max(w, 0.0));
    for (double& w : b.w) w /= sum;
    return b;
}

PiecewiseLinearMap::PiecewiseLinearMap(Triangulation source, Points images)
    : source_(std::move(source)), images_(std::move(images)) {
    if (images_.size() != source_.points.size())
        throw Error(ErrorCode::InvalidInput, "one image per triangulation vertex required");
    forward_ = TriangleLocator(source_.points, source_.triangles);
    if (min_orientation(images_, source_.triangles) > 0) backward_.emplace(images_, source_.triangles);
}

Vec2 PiecewiseLinearMap::evaluate(const Vec2& p) const {
    const auto b = forward_.locate(p);
    if (!b) throw Error(ErrorCode::PointOutsideDomain, "point outside the source triangulation");
    const auto& t = source_.triangles[b->triangle];
    return b->w[0] * images_[t[0]] + b->w[1] * images_[t[1]] + b->w[2] * images_[t[2]];
}

Mat2 PiecewiseLinearMap::triangle_jacobian(int t) const {
    const auto& tri = source_.triangles[t];
    Mat2 s, i;
    s.col(0) = source_.points[tri[1]] - source_.points[tri[0]];
    s.col(1) = source_.points[tri[2]] - source_.points[tri[0]];
    i.col(0) = images_[tri[1]] - images_[tri[0]];
    i.col(1) = images_[tri[2]] - images_[tri[0]];
    return i * s.inverse();
}

Mat2 PiecewiseLinearMap::jacobian(const Vec2& p) const {
    const auto b = forward_.locate(p);
    if (!b) throw Error(ErrorCode::PointOutsideDomain, "point outside the source triangulation");
    return triangle_jacobian(b->triangle);
}

bool PiecewiseLinearMap::is_bijective() const { return backward_.has_value(); }

Vec2 PiecewiseLinearMap::inverse(const Vec2& q) const {
    if (!backward_) throw Error(ErrorCode::FoldedSurrogate, "inverse of a folded piecewise linear map");
    const auto b = backward_->locate(q);
    if (!b) throw Error(ErrorCode::PointOutsideDomain, "point outside the image triangulation");
    const auto& t = source_.triangles[b->triangle];
    return b->w[0] * source_.points[t[0]] + b->w[1] * source_.points[t[1]] + b->w[2] * source_.points[t[2]];
}

Vec2 evaluate_pl(const PiecewiseLinearMap& map, const Vec2& p) { return map.evaluate(p); }

struct FloaterOperator::Factor {
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
};

FloaterOperator::FloaterOperator(const Triangulation& tri)
    : n_points_(tri.n_points()), n_boundary_(tri.boundary_count) {
    const int n = n_points_, nb = n_boundary_;
    std::vector<int> slot(n, -1);
    for (int i = nb; i < n; ++i) {
        slot[i] = static_cast<int>(interior_.size());
        interior_.push_back(i);
    }
    const int ni = static_cast<int>(interior_.size());
    // mean value weights: each triangle adds tan(alpha_i / 2) / |v_j - v_i| to both edges at i
    std::vector<std::unordered_map<int, double>> w(n);
    for (const auto& t : tri.triangles) {
        for (int k = 0; k < 3; ++k) {
            const int i = t[k], j = t[(k + 1) % 3], l = t[(k + 2) % 3];
            if (i < nb) continue;
            const Vec2 dj = tri.points[j] - tri.points[i], dl = tri.points[l] - tri.points[i];
            const double alpha = std::atan2(std::abs(cross(dj, dl)), dj.dot(dl));
            const double h = std::tan(0.5 * alpha);
            w[i][j] += h / dj.norm();
            w[i][l] += h / dl.norm();
        }
    }
    std::vector<Eigen::Triplet<double>> ta, tb;
    for (int i : interior_) {
        // ordered traversal keeps the assembly deterministic
        std::vector<std::pair<int, double>> row(w[i].begin(), w[i].end());
        std::sort(row.begin(), row.end());
        double diag = 0;
        for (const auto& [j, wij] : row) {
            diag += wij;
            if (j < nb) tb.emplace_back(slot[i], j, wij);
            else ta.emplace_back(slot[i], slot[j], -wij);
        }
        ta.emplace_back(slot[i], slot[i], diag);
    }
    a_.resize(ni, ni);
    a_.setFromTriplets(ta.begin(), ta.end());
    b_.resize(ni, nb);
    b_.setFromTriplets(tb.begin(), tb.end());
    factor_ = std::make_shared<Factor>();
    if (ni > 0) {
        factor_->lu.compute(a_);
        if (factor_->lu.info() != Eigen::Success)
            throw Error(ErrorCode::SingularSystem, "Floater system is singular (disconnected mesh?)");
    }
}

Points FloaterOperator::solve(const Points& boundary_targets) const {
    if (static_cast<int>(boundary_targets.size()) != n_boundary_)
        throw Error(ErrorCode::InvalidInput, "one target per boundary vertex required");
    Points out(n_points_);
    for (int i = 0; i < n_boundary_; ++i) out[i] = boundary_targets[i];
    if (interior_.empty()) return out;
    Eigen::MatrixXd ub(n_boundary_, 2);
    for (int i = 0; i < n_boundary_; ++i) ub.row(i) = boundary_targets[i].transpose();
    const Eigen::MatrixXd rhs = b_ * ub;
    const Eigen::MatrixXd ui = factor_->lu.solve(rhs);
    if (factor_->lu.info() != Eigen::Success || !ui.allFinite())
        throw Error(ErrorCode::SingularSystem, "Floater solve failed");
    for (size_t k = 0; k < interior_.size(); ++k) out[interior_[k]] = ui.row(static_cast<Eigen::Index>(k)).transpose();
    return out;
}

PiecewiseLinearMap floater_map(const Triangulation& tri, const Points& boundary_targets) {
    const FloaterOperator op(tri);
    return PiecewiseLinearMap(tri, op.solve(boundary_targets));
}

// Control domains.

const char* domain_kind_name(DomainKind k) {
    switch (k) {
    case DomainKind::Disc: return "disc";
    case DomainKind::Teardrop: return "teardrop";
    case DomainKind::HalfDisc: return "half_disc";
    case DomainKind::Lens: return "lens";
    case DomainKind::ConvexPolygon: return "convex_polygon";
    }
    return "unknown";
}

Vec2 BoundaryPiece::eval(double s, int order) const {
    switch (type) {
    case Type::Line:
        if (order == 0) return s == 1.0 ? p[1] : Vec2(p[0] + s * (p[1] - p[0]));
        if (order == 1) return p[1] - p[0];
        return Vec2::Zero();
    case Type::Arc: {
        const double d = theta1 - theta0, th = theta0 + s * d;
        const Vec2 c(std::cos(th), std::sin(th)), t(-std::sin(th), std::cos(th));
        if (order == 0) return p[0] + radius * c;
        if (order == 1) return radius * d * t;
        return -radius * d * d * c;
    }
    case Type::Bezier: {
        const double u = 1.0 - s;
        if (order == 0) return u * u * u * p[0] + 3 * u * u * s * p[1] + 3 * u * s * s * p[2] + s * s * s * p[3];
        if (order == 1) return 3 * (u * u * (p[1] - p[0]) + 2 * u * s * (p[2] - p[1]) + s * s * (p[3] - p[2]));
        return 6 * (u * (p[2] - 2 * p[1] + p[0]) + s * (p[3] - 2 * p[2] + p[1]));
    }
    }
    return Vec2::Zero();
}

namespace {

double bezier_length(const BoundaryPiece& b, double s1) {
    const GaussRule& g = gauss_rule(10);
    constexpr int kSub = 64;
    double len = 0;
    for (int k = 0; k < kSub; ++k) {
        const double a = s1 * k / kSub, h = s1 / kSub;
        for (size_t q = 0; q < g.x.size(); ++q) len += h * g.w[q] * b.eval(a + h * g.x[q], 1).norm();
    }
    return len;
}

} // namespace

double BoundaryPiece::length() const {
    switch (type) {
    case Type::Line: return (p[1] - p[0]).norm();
    case Type::Arc: return radius * std::abs(theta1 - theta0);
    case Type::Bezier: return bezier_length(*this, 1.0);
    }
    return 0;
}

double BoundaryPiece::param_at_length(double fraction) const {
    if (fraction <= 0) return 0;
    if (fraction >= 1) return 1;
    if (type != Type::Bezier) return fraction;
    const double target = fraction * length();
    double lo = 0, hi = 1;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (bezier_length(*this, mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

Vec2 ControlDomain::edge_point(int i, double t, int order) const {
    const int n = n_edges();
    // the end of an arc is the start of the next one, bit for bit
    if (order == 0 && t == 1.0) return edge_point((i + 1) % n, 0.0, 0);
    const EdgeArc& e = edges[i];
    const double ds = e.s1 - e.s0;
    return std::pow(ds, order) * pieces[e.piece].eval(e.s0 + t * ds, order);
}

Points ControlDomain::sample_boundary(int n_per_edge) const {
    Points out;
    for (int i = 0; i < n_edges(); ++i)
        for (int j = 0; j + 1 < n_per_edge; ++j) out.push_back(edge_point(i, static_cast<double>(j) / (n_per_edge - 1)));
    return out;
}

double ControlDomain::boundary_length() const {
    double l = 0;
    for (const BoundaryPiece& p : pieces) l += p.length();
    return l;
}

namespace {

// Assign the edges first, first+1, ..., first+count-1 (mod n) to one piece, by length.
void assign_edges(ControlDomain& d, int piece, int first, int count, const std::vector<double>& lengths) {
    const int n = static_cast<int>(lengths.size());
    double total = 0;
    for (int k = 0; k < count; ++k) total += lengths[(first + k) % n];
    double acc = 0;
    double s_prev = 0;
    for (int k = 0; k < count; ++k) {
        const int e = (first + k) % n;
        acc += lengths[e];
        const double s = k + 1 == count ? 1.0 : d.pieces[piece].param_at_length(acc / total);
        d.edges[e] = {piece, s_prev, s};
        s_prev = s;
    }
}

BoundaryPiece line(const Vec2& a, const Vec2& b) {
    BoundaryPiece p;
    p.type = BoundaryPiece::Type::Line;
    p.p = {a, b, Vec2::Zero(), Vec2::Zero()};
    return p;
}

BoundaryPiece arc(double th0, double th1) {
    BoundaryPiece p;
    p.type = BoundaryPiece::Type::Arc;
    p.p = {Vec2::Zero(), Vec2::Zero(), Vec2::Zero(), Vec2::Zero()};
    p.radius = 1;
    p.theta0 = th0;
    p.theta1 = th1;
    return p;
}

BoundaryPiece bezier(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    BoundaryPiece p;
    p.type = BoundaryPiece::Type::Bezier;
    p.p = {a, b, c, d};
    return p;
}

// Central angles of a polygon inscribed in the unit circle with side lengths in the
// given ratios.
std::vector<double> inscribed_angles(std::vector<double> r) {
    const size_t imax = static_cast<size_t>(std::max_element(r.begin(), r.end()) - r.begin());
    double others = 0;
    for (size_t i = 0; i < r.size(); ++i)
        if (i != imax) others += r[i];
    if (r[imax] >= 0.95 * others) r[imax] = 0.95 * others; // keep the polygon inequality strict
    const double rmax = r[imax];
    auto chord_angle = [](double c) { return 2 * std::asin(std::min(1.0, 0.5 * c)); };
    auto f = [&](double c) {
        double s = 0;
        for (double ri : r) s += chord_angle(c * ri);
        return s - 2 * kPi;
    };
    double hi = 2.0 / rmax, lo = 0;
    std::vector<double> th(r.size());
    if (f(hi) >= 0) {
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (f(mid) < 0 ? lo : hi) = mid;
        }
        for (size_t i = 0; i < r.size(); ++i) th[i] = chord_angle(lo * r[i]);
    } else {
        // centre outside the polygon: the longest side subtends the reflex angle
        auto g = [&](double c) {
            double s = 0;
            for (size_t i = 0; i < r.size(); ++i)
                if (i != imax) s += chord_angle(c * r[i]);
            return s - chord_angle(c * rmax);
        };
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (g(mid) > 0 ? lo : hi) = mid;
        }
        for (size_t i = 0; i < r.size(); ++i) th[i] = chord_angle(lo * r[i]);
        th[imax] = 2 * kPi - th[imax];
    }
    // close the loop exactly
    double sum = 0;
    for (double t : th) sum += t;
    for (double& t : th) t *= 2 * kPi / sum;
    return th;
}

} // namespace

ControlDomain control_domain(const std::vector<double>& angles, const std::vector<double>& lengths, double mu_angle) {
    const int n = static_cast<int>(lengths.size());
    if (n < 2 || static_cast<int>(angles.size()) != n)
        throw Error(ErrorCode::InvalidInput, "control domain needs matching angles and lengths");
    ControlDomain d;
    d.edges.resize(n);
    for (int i = 0; i < n; ++i)
        if (angles[i] < kPi - mu_angle) d.corners.push_back(i);
    const int nc = static_cast<int>(d.corners.size());

    if (nc == 0) {
        d.kind = DomainKind::Disc;
        d.pieces = {arc(0, 2 * kPi)};
        assign_edges(d, 0, 0, n, lengths);
    } else if (nc == 1) {
        d.kind = DomainKind::Teardrop;
        const int k = d.corners[0];
        const double alpha = angles[k];
        // x = m c t(1-t), y = m s t(1-t)(2t-1) with m = 4/c reaches x = 1 at t = 1/2
        const double h = (4.0 / 3.0) * std::tan(0.5 * alpha);
        d.pieces = {bezier(Vec2::Zero(), Vec2(4.0 / 3.0, -h), Vec2(4.0 / 3.0, h), Vec2::Zero())};
        d.corner_angles = {alpha};
        assign_edges(d, 0, k, n, lengths);
    } else if (nc == 2) {
        const int k1 = d.corners[0], k2 = d.corners[1];
        const bool adjacent = k2 == k1 + 1 || (k1 == 0 && k2 == n - 1);
        if (adjacent) {
            d.kind = DomainKind::HalfDisc;
            const int a = (k2 == k1 + 1) ? k1 : k2; // tail of the connecting edge
            d.pieces = {line(Vec2(-1, 0), Vec2(1, 0)), arc(0, kPi)};
            d.edges[a] = {0, 0.0, 1.0};
            assign_edges(d, 1, (a + 1) % n, n - 1, lengths);
            d.corners = {a, (a + 1) % n};
            d.corner_angles = {kPi / 2, kPi / 2};
        } else {
            d.kind = DomainKind::Lens;
            const double a = 0.5 * angles[k1], b = 0.5 * angles[k2];
            const double mean = 0.5 * (a + b);
            const double k = std::min((2.0 / 3.0) / std::pow(std::cos(0.5 * mean), 2), 0.9 * 2.0 / (std::cos(a) + std::cos(b)));
            const Vec2 A(-1, 0), B(1, 0);
            d.pieces = {bezier(A, A + k * Vec2(std::cos(a), -std::sin(a)), B - k * Vec2(std::cos(b), std::sin(b)), B),
                        bezier(B, B + k * Vec2(-std::cos(b), std::sin(b)), A + k * Vec2(std::cos(a), std::sin(a)), A)};
            assign_edges(d, 0, k1, k2 - k1, lengths);
            assign_edges(d, 1, k2, n - (k2 - k1), lengths);
            d.corner_angles = {angles[k1], angles[k2]};
        }
    } else {
        d.kind = DomainKind::ConvexPolygon;
        std::vector<double> batch(nc, 0.0);
        std::vector<int> count(nc, 0);
        for (int j = 0; j < nc; ++j) {
            const int from = d.corners[j], to = d.corners[(j + 1) % nc];
            count[j] = ((to - from) % n + n) % n;
            if (count[j] == 0) count[j] = n;
            for (int k = 0; k < count[j]; ++k) batch[j] += lengths[(from + k) % n];
        }
        const std::vector<double> th = inscribed_angles(batch);
        double phi = -0.5 * kPi - 0.5 * th[0];
        Points verts;
        for (int j = 0; j < nc; ++j) {
            verts.emplace_back(std::cos(phi), std::sin(phi));
            phi += th[j];
        }
        for (int j = 0; j < nc; ++j) {
            d.pieces.push_back(line(verts[j], verts[(j + 1) % nc]));
            assign_edges(d, j, d.corners[j], count[j], lengths);
        }
        for (int j = 0; j < nc; ++j) {
            const Vec2 in = verts[(j + nc - 1) % nc] - verts[j], out = verts[(j + 1) % nc] - verts[j];
            d.corner_angles.push_back(ccw_angle(out, in));
        }
    }
    return d;
}

ControlDomain control_domain(const PlaneGraph& g, int face, double mu_angle) {
    std::vector<double> lengths;
    for (const EdgeRef& r : g.faces[face].edges) lengths.push_back(g.edge_length(r.id));
    return control_domain(face_angles(g, face), lengths, mu_angle);
}

Points resample_polyline(const Points& pts, int n) {
    if (n < 2 || pts.size() < 2) throw Error(ErrorCode::InvalidInput, "resampling needs n >= 2 and a polyline");
    const std::vector<double> c = cumulative_lengths(pts);
    const double total = c.back();
    Points out{pts.front()};
    size_t seg = 0;
    for (int i = 1; i + 1 < n; ++i) {
        const double s = total * i / (n - 1);
        while (seg + 2 < pts.size() && c[seg + 1] < s) ++seg;
        const double len = c[seg + 1] - c[seg];
        const double t = len > 0 ? (s - c[seg]) / len : 0.0;
        out.push_back(pts[seg] + t * (pts[seg + 1] - pts[seg]));
    }
    out.push_back(pts.back());
    return out;
}

Points sample_face(const PlaneGraph& g, int face, int n_per_edge) {
    Points out;
    for (const EdgeRef& r : g.faces[face].edges) {
        const Points p = resample_polyline(g.edge_points(r), n_per_edge);
        out.insert(out.end(), p.begin(), p.end() - 1);
    }
    return out;
}

} // namespace mpp
