#include "mpp/controlmap.hpp"
#include "mpp/errors.hpp"
#include "mpp/splines.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>

namespace mpp {

double min_corner_cross(const Points& verts, const std::vector<std::array<int, 4>>& quads) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& q : quads)
        for (int k = 0; k < 4; ++k) m = std::min(m, corner_cross(verts, q, k));
    return m;
}

double relu_cost(const Points& verts, const std::vector<std::array<int, 4>>& quads, double tau, std::vector<Vec2>* grad) {
    if (grad) grad->assign(verts.size(), Vec2::Zero());
    double cost = 0;
    for (const auto& q : quads)
        for (int k = 0; k < 4; ++k) {
            const int i = q[k], ip = q[(k + 1) % 4], im = q[(k + 3) % 4];
            const Vec2 a = verts[ip] - verts[i], b = verts[im] - verts[i];
            const double nu = cross(a, b);
            if (tau - nu <= 0) continue;
            cost += tau - nu;
            if (grad) {
                const Vec2 dp(b.y(), -b.x()), dm(-a.y(), a.x());
                (*grad)[ip] -= dp;
                (*grad)[im] -= dm;
                (*grad)[i] += dp + dm;
            }
        }
    return cost;
}

Points untangle_layout(const Points& verts, const std::vector<std::array<int, 4>>& quads, int n_fixed, double tau_step,
                       UntangleReport* report) {
    constexpr int kMaxIter = 150, kMaxIncrements = 20;
    const int nv = static_cast<int>(verts.size());
    if (tau_step <= 0) {
        std::vector<double> pos;
        for (const auto& q : quads)
            for (int k = 0; k < 4; ++k)
                if (double c = corner_cross(verts, q, k); c > 0) pos.push_back(c);
        if (!pos.empty()) {
            std::nth_element(pos.begin(), pos.begin() + pos.size() / 4, pos.end());
            tau_step = 0.25 * pos[pos.size() / 4];
        } else {
            Eigen::AlignedBox2d box;
            for (const Vec2& p : verts) box.extend(p);
            tau_step = 1e-3 * box.diagonal().squaredNorm() / std::max<size_t>(quads.size(), 1);
        }
    }
    UntangleReport rep;
    Points x = verts;
    double step = 1.0;

    // Descend on the cost at a slightly raised threshold; success means every nu exceeds `floor`.
    auto descend = [&](double floor, double target) {
        std::vector<Vec2> g;
        for (int it = 0; it < kMaxIter; ++it) {
            if (min_corner_cross(x, quads) > floor) return true;
            const double c = relu_cost(x, quads, target, &g);
            double gg = 0;
            for (int i = n_fixed; i < nv; ++i) gg += g[i].squaredNorm();
            if (gg == 0) return false;
            ++rep.iterations;
            bool moved = false;
            for (int bt = 0; bt < 60; ++bt) {
                Points y = x;
                for (int i = n_fixed; i < nv; ++i) y[i] -= step * g[i];
                if (relu_cost(y, quads, target) <= c - 1e-4 * step * gg) {
                    x = std::move(y);
                    step *= 2;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if (!moved) return false;
        }
        return min_corner_cross(x, quads) > floor;
    };

    if (!descend(0.0, 0.25 * tau_step)) throw Error(ErrorCode::UntangleFailed, "ReLU cost does not vanish at tau = 0");
    Points best = x;
    for (int k = 1; k <= kMaxIncrements; ++k) {
        const double tau = k * tau_step;
        if (!descend(tau, tau + 0.25 * tau_step)) break;
        best = x;
        rep.tau = tau;
        rep.increments = k;
    }
    if (report) *report = rep;
    return best;
}

const NgonSurrogate& ngon_surrogate(int n, int samples_per_edge) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::unique_ptr<NgonSurrogate>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[{n, samples_per_edge}];
    if (!slot) {
        Points poly;
        for (int i = 0; i < n; ++i) {
            const Vec2 a = ngon_corner(n, i), b = ngon_corner(n, i + 1);
            for (int j = 0; j + 1 < samples_per_edge; ++j)
                poly.push_back(a + (b - a) * (static_cast<double>(j) / (samples_per_edge - 1)));
        }
        const double h = (ngon_corner(n, 1) - ngon_corner(n, 0)).norm() / (samples_per_edge - 1);
        Triangulation tri = triangulate(poly, h);
        FloaterOperator op(tri);
        slot = std::make_unique<NgonSurrogate>(NgonSurrogate{n, samples_per_edge, std::move(tri), std::move(op)});
    }
    return *slot;
}

PiecewiseLinearMap ngon_to_domain(const ControlDomain& dom, int samples_per_edge) {
    const NgonSurrogate& s = ngon_surrogate(dom.n_edges(), samples_per_edge);
    return PiecewiseLinearMap(s.tri, s.op.solve(dom.sample_boundary(samples_per_edge)));
}

ControlTemplate transfer_vertices(const Template& t, const ControlDomain& dom, int samples_per_edge) {
    if (t.n_boundary != dom.n_edges()) throw Error(ErrorCode::InvalidInput, "template and control domain sizes differ");
    const PiecewiseLinearMap map = ngon_to_domain(dom, samples_per_edge);
    ControlTemplate ct{t, Points(t.vertices.size())};
    for (int v = 0; v < t.n_vertices(); ++v)
        ct.vertices[v] = v < t.n_boundary ? dom.break_point(v) : map.evaluate(t.vertices[v]);
    return ct;
}

ControlTemplate untangle_quadrangulation(const ControlTemplate& ct, double tau_step, UntangleReport* report) {
    if (min_corner_cross(ct.vertices, ct.base.quads) > 0) {
        if (report) *report = {};
        return ct;
    }
    ControlTemplate out = ct;
    out.vertices = untangle_layout(ct.vertices, ct.base.quads, ct.base.n_boundary, tau_step, report);
    return out;
}

CoonsMap::CoonsMap(ControlTemplate ct, ControlDomain dom) : ct_(std::move(ct)), dom_(std::move(dom)) {
    const int n = ct_.base.n_boundary;
    if (dom_.n_edges() != n) throw Error(ErrorCode::InvalidInput, "template and control domain sizes differ");
    if (min_corner_cross(ct_.vertices, ct_.base.quads) <= 0)
        throw Error(ErrorCode::NonconvexQuad, "control template has a nonconvex quad");
    for (const auto& q : ct_.base.quads) {
        std::array<int, 4> arc{-1, -1, -1, -1};
        std::array<bool, 4> rev{false, false, false, false};
        for (int s = 0; s < 4; ++s) {
            const int a = q[quad_side_from(s)], b = q[quad_side_to(s)];
            if (a >= n || b >= n) continue;
            if (b == (a + 1) % n) arc[s] = a;
            else if (a == (b + 1) % n) {
                arc[s] = b;
                rev[s] = true;
            }
        }
        arc_.push_back(arc);
        rev_.push_back(rev);
    }
}

Vec2 CoonsMap::side_point(int q, int side, double t, int order) const {
    const int i = arc_[q][side];
    if (i >= 0) {
        if (!rev_[q][side]) return dom_.edge_point(i, t, order);
        const Vec2 p = dom_.edge_point(i, 1.0 - t, order);
        return order % 2 ? Vec2(-p) : p;
    }
    const Vec2& a = ct_.vertices[ct_.base.quads[q][quad_side_from(side)]];
    const Vec2& b = ct_.vertices[ct_.base.quads[q][quad_side_to(side)]];
    if (order == 0) return a + t * (b - a);
    if (order == 1) return b - a;
    return Vec2::Zero();
}

MapEval CoonsMap::eval(int q, double u, double v) const {
    const auto& quad = ct_.base.quads[q];
    const Vec2 &c0 = ct_.vertices[quad[0]], &c1 = ct_.vertices[quad[1]], &c2 = ct_.vertices[quad[2]],
               &c3 = ct_.vertices[quad[3]];
    std::array<std::array<Vec2, 3>, 4> s; // side, derivative order
    for (int k = 0; k < 4; ++k) {
        const double t = (k == 0 || k == 2) ? u : v;
        for (int o = 0; o < 3; ++o) s[k][o] = side_point(q, k, t, o);
    }
    const auto &B = s[0], &R = s[1], &T = s[2], &L = s[3];
    MapEval e;
    e.x = (1 - v) * B[0] + v * T[0] + (1 - u) * L[0] + u * R[0] -
          ((1 - u) * (1 - v) * c0 + u * (1 - v) * c1 + u * v * c2 + (1 - u) * v * c3);
    e.J.col(0) = (1 - v) * B[1] + v * T[1] - L[0] + R[0] - ((1 - v) * (c1 - c0) + v * (c2 - c3));
    e.J.col(1) = -B[0] + T[0] + (1 - u) * L[1] + u * R[1] - ((1 - u) * (c3 - c0) + u * (c2 - c1));
    e.H[0] = (1 - v) * B[2] + v * T[2];
    e.H[1] = -B[1] + T[1] - L[1] + R[1] - (c0 - c1 + c2 - c3);
    e.H[2] = (1 - u) * L[2] + u * R[2];
    return e;
}

CoonsMap coons_map(const ControlTemplate& ct, const ControlDomain& dom) { return CoonsMap(ct, dom); }

} // namespace mpp
