#include "mpp/mp_space.hpp"
#include "mpp/errors.hpp"
#include "mpp/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <map>
#include <numeric>

namespace mpp {

PatchGeometry bilinear_geometry(const Vec2& c0, const Vec2& c1, const Vec2& c2, const Vec2& c3) {
    return [=](double u, double v) {
        MapEval e;
        e.x = (1 - u) * (1 - v) * c0 + u * (1 - v) * c1 + u * v * c2 + (1 - u) * v * c3;
        e.J.col(0) = (1 - v) * (c1 - c0) + v * (c2 - c3);
        e.J.col(1) = (1 - u) * (c3 - c0) + u * (c2 - c1);
        e.H[1] = c0 - c1 + c2 - c3;
        return e;
    };
}

std::vector<int> MultipatchSpace::side_local(int patch, int side) const {
    const int nu = n_basis(patch, 0), nv = n_basis(patch, 1);
    std::vector<int> out;
    switch (side) {
    case 0:
        for (int i = 0; i < nu; ++i) out.push_back(i);
        break;
    case 1:
        for (int j = 0; j < nv; ++j) out.push_back(nu - 1 + nu * j);
        break;
    case 2:
        for (int i = 0; i < nu; ++i) out.push_back(i + nu * (nv - 1));
        break;
    default:
        for (int j = 0; j < nv; ++j) out.push_back(nu * j);
    }
    return out;
}

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

} // namespace

MultipatchSpace build_space(const Template& t, const std::vector<std::array<KnotVector, 2>>& knots,
                            std::vector<PatchGeometry> geometry) {
    const int nq = t.n_quads();
    if (static_cast<int>(knots.size()) != nq || static_cast<int>(geometry.size()) != nq)
        throw Error(ErrorCode::InvalidInput, "one knot pair and geometry per patch required");
    MultipatchSpace s;
    s.degree = knots.front()[0].degree();
    s.layout = t;
    s.knots = knots;
    s.geometry = std::move(geometry);
    for (const auto& k : knots) {
        if (k[0].degree() != s.degree || k[1].degree() != s.degree)
            throw Error(ErrorCode::NonconformingKnots, "patches use different degrees");
        s.knot_values.push_back({k[0].values(), k[1].values()});
    }
    std::map<std::pair<int, int>, int> edge_index;
    for (size_t e = 0; e < t.edges.size(); ++e) edge_index[{t.edges[e][0], t.edges[e][1]}] = static_cast<int>(e);

    std::vector<int> offset(nq + 1, 0);
    for (int q = 0; q < nq; ++q) offset[q + 1] = offset[q] + s.n_basis(q, 0) * s.n_basis(q, 1);
    UnionFind uf(offset[nq]);

    const int ne = static_cast<int>(t.edges.size());
    s.edge_knots.resize(ne);
    std::vector<std::vector<std::pair<int, int>>> owners(ne); // (patch, side)
    s.quad_edges.resize(nq);
    for (int q = 0; q < nq; ++q)
        for (int side = 0; side < 4; ++side) {
            const int a = t.quads[q][quad_side_from(side)], b = t.quads[q][quad_side_to(side)];
            const int e = edge_index.at({std::min(a, b), std::max(a, b)});
            s.quad_edges[q][side] = e;
            const KnotVector& k = knots[q][side % 2 == 0 ? 0 : 1];
            const KnotVector low_high = a < b ? k : reverse(k);
            if (owners[e].empty())
                s.edge_knots[e] = low_high;
            else if (s.edge_knots[e] != low_high)
                throw Error(ErrorCode::NonconformingKnots, "patches disagree on the knots of a shared edge");
            owners[e].push_back({q, side});
        }
    auto low_high_locals = [&](int q, int side) {
        auto loc = s.side_local(q, side);
        if (t.quads[q][quad_side_from(side)] > t.quads[q][quad_side_to(side)]) std::reverse(loc.begin(), loc.end());
        return loc;
    };
    for (int e = 0; e < ne; ++e) {
        if (owners[e].size() > 2) throw Error(ErrorCode::InvalidInput, "template edge shared by more than two quads");
        if (owners[e].size() == 2) {
            const auto [qa, sa] = owners[e][0];
            const auto [qb, sb] = owners[e][1];
            const auto la = low_high_locals(qa, sa), lb = low_high_locals(qb, sb);
            for (size_t k = 0; k < la.size(); ++k) uf.unite(offset[qa] + la[k], offset[qb] + lb[k]);
            const bool dir_a = t.quads[qa][quad_side_from(sa)] < t.quads[qa][quad_side_to(sa)];
            const bool dir_b = t.quads[qb][quad_side_from(sb)] < t.quads[qb][quad_side_to(sb)];
            s.interfaces.push_back({e, qa, sa, qb, sb, dir_a != dir_b});
        }
    }
    std::map<int, int> number;
    s.dof_map.resize(nq);
    for (int q = 0; q < nq; ++q)
        for (int l = 0; l < offset[q + 1] - offset[q]; ++l) {
            const int r = uf.find(offset[q] + l);
            auto it = number.find(r);
            if (it == number.end()) it = number.emplace(r, static_cast<int>(number.size())).first;
            s.dof_map[q].push_back(it->second);
        }
    s.n_dofs = static_cast<int>(number.size());
    s.edge_dofs.resize(ne);
    std::vector<char> on_boundary(s.n_dofs, 0);
    for (int e = 0; e < ne; ++e) {
        const auto [q, side] = owners[e][0];
        for (int l : low_high_locals(q, side)) s.edge_dofs[e].push_back(s.dof_map[q][l]);
        if (owners[e].size() == 1)
            for (int d : s.edge_dofs[e]) on_boundary[d] = 1;
    }
    for (int d = 0; d < s.n_dofs; ++d)
        if (on_boundary[d]) s.boundary_dofs.push_back(d);
    return s;
}

MultipatchSpace build_space(const Template& t, const std::vector<std::array<KnotVector, 2>>& knots) {
    std::vector<PatchGeometry> geo;
    for (const auto& q : t.quads)
        geo.push_back(bilinear_geometry(t.vertices[q[0]], t.vertices[q[1]], t.vertices[q[2]], t.vertices[q[3]]));
    return build_space(t, knots, std::move(geo));
}

MultipatchSpace build_space(const CoonsMap& r, const std::vector<std::array<KnotVector, 2>>& knots) {
    auto shared = std::make_shared<const CoonsMap>(r);
    std::vector<PatchGeometry> geo;
    for (int q = 0; q < r.n_patches(); ++q) geo.push_back([shared, q](double u, double v) { return shared->eval(q, u, v); });
    return build_space(r.control().base, knots, std::move(geo));
}

MultipatchSpace with_geometry(const MultipatchSpace& s, std::vector<PatchGeometry> geometry) {
    if (geometry.size() != s.geometry.size()) throw Error(ErrorCode::InvalidInput, "one geometry per patch required");
    MultipatchSpace out = s;
    out.geometry = std::move(geometry);
    return out;
}

nlohmann::json space_to_json(const MultipatchSpace& s) {
    nlohmann::json j;
    j["degree"] = s.degree;
    j["n_dofs"] = s.n_dofs;
    j["boundary_dofs"] = s.boundary_dofs;
    for (int q = 0; q < s.n_patches(); ++q)
        j["patches"].push_back({{"knots_mu", knots_to_json(s.knots[q][0])},
                                {"knots_nu", knots_to_json(s.knots[q][1])},
                                {"dofs", s.dof_map[q]}});
    return j;
}

BasisValues eval_basis(const MultipatchSpace& s, int patch, double u, double v) {
    const int p = s.degree;
    Eigen::MatrixXd du, dv;
    const int su = basis_derivatives(s.knot_values[patch][0], p, u, 2, du);
    const int sv = basis_derivatives(s.knot_values[patch][1], p, v, 2, dv);
    const int nu = s.n_basis(patch, 0);
    BasisValues b;
    b.d.resize(6, (p + 1) * (p + 1));
    int c = 0;
    for (int j = 0; j <= p; ++j)
        for (int i = 0; i <= p; ++i, ++c) {
            const int l = (su - p + i) + nu * (sv - p + j);
            b.local.push_back(l);
            b.global.push_back(s.dof_map[patch][l]);
            b.d(0, c) = du(0, i) * dv(0, j);
            b.d(1, c) = du(1, i) * dv(0, j);
            b.d(2, c) = du(0, i) * dv(1, j);
            b.d(3, c) = du(2, i) * dv(0, j);
            b.d(4, c) = du(1, i) * dv(1, j);
            b.d(5, c) = du(0, i) * dv(2, j);
        }
    return b;
}

Eigen::MatrixXd chain_rule(const Eigen::MatrixXd& d, const MapEval& geo) {
    const Mat2 jinv = geo.J.inverse();
    const Mat2 jit = jinv.transpose();
    const int n = static_cast<int>(d.cols());
    Eigen::MatrixXd out(5, n);
    for (int c = 0; c < n; ++c) {
        const Vec2 g = jit * Vec2(d(1, c), d(2, c));
        Mat2 h;
        h << d(3, c), d(4, c), d(4, c), d(5, c);
        for (int l = 0; l < 2; ++l) {
            Mat2 hm;
            hm << geo.H[0][l], geo.H[1][l], geo.H[1][l], geo.H[2][l];
            h -= g[l] * hm;
        }
        const Mat2 hx = jit * h * jinv;
        out(0, c) = g[0];
        out(1, c) = g[1];
        out(2, c) = hx(0, 0);
        out(3, c) = hx(0, 1);
        out(4, c) = hx(1, 1);
    }
    return out;
}

BoundaryConstraint constrain_boundary(const MultipatchSpace& s, const BoundaryData& data) {
    const int n = s.layout.n_boundary;
    if (static_cast<int>(data.size()) != n) throw Error(ErrorCode::InvalidInput, "one curve per boundary edge required");
    std::map<std::pair<int, int>, int> edge_index;
    for (size_t e = 0; e < s.layout.edges.size(); ++e)
        edge_index[{s.layout.edges[e][0], s.layout.edges[e][1]}] = static_cast<int>(e);
    BoundaryConstraint c;
    c.values = Eigen::MatrixX2d::Zero(s.n_dofs, 2);
    std::vector<char> set(s.n_dofs, 0);
    for (int i = 0; i < n; ++i) {
        const int a = i, b = (i + 1) % n;
        const int e = edge_index.at({std::min(a, b), std::max(a, b)});
        std::vector<int> dofs = s.edge_dofs[e];
        KnotVector k = s.edge_knots[e];
        if (a > b) {
            std::reverse(dofs.begin(), dofs.end());
            k = reverse(k);
        }
        if (data[i].knots != k) throw Error(ErrorCode::KnotMismatch, "boundary curve knots differ from the space");
        for (size_t m = 0; m < dofs.size(); ++m) {
            const Vec2& p = data[i].ctrl[m];
            if (set[dofs[m]]) {
                const Vec2 q = c.values.row(dofs[m]).transpose();
                if ((q - p).norm() > 1e-9 * std::max(1.0, p.norm()))
                    throw Error(ErrorCode::InvalidInput, "boundary curves do not share end points");
                continue;
            }
            c.values.row(dofs[m]) = p.transpose();
            set[dofs[m]] = 1;
        }
    }
    c.free_index.assign(s.n_dofs, -1);
    for (int d = 0; d < s.n_dofs; ++d) {
        if (set[d]) {
            c.fixed_dofs.push_back(d);
        } else {
            c.free_index[d] = static_cast<int>(c.free_dofs.size());
            c.free_dofs.push_back(d);
        }
    }
    return c;
}

std::vector<double> greville(const KnotVector& k) {
    const auto U = k.values();
    const int p = k.degree();
    std::vector<double> g;
    for (int i = 0; i < k.n_basis(); ++i) {
        double acc = 0;
        for (int m = 1; m <= p; ++m) acc += U[i + m];
        g.push_back(acc / p);
    }
    return g;
}

BoundaryData identity_boundary(const MultipatchSpace& s) {
    const int n = s.layout.n_boundary;
    std::map<std::pair<int, int>, int> edge_index;
    for (size_t e = 0; e < s.layout.edges.size(); ++e)
        edge_index[{s.layout.edges[e][0], s.layout.edges[e][1]}] = static_cast<int>(e);
    BoundaryData out;
    for (int i = 0; i < n; ++i) {
        const int a = i, b = (i + 1) % n;
        const int e = edge_index.at({std::min(a, b), std::max(a, b)});
        BSplineCurve c;
        c.knots = a < b ? s.edge_knots[e] : reverse(s.edge_knots[e]);
        const Vec2 &pa = s.layout.vertices[a], &pb = s.layout.vertices[b];
        for (double g : greville(c.knots)) c.ctrl.push_back(pa + g * (pb - pa));
        c.ctrl.front() = pa;
        c.ctrl.back() = pb;
        out.push_back(std::move(c));
    }
    return out;
}

MapEval MultipatchMap::eval(int patch, double u, double v) const {
    const BasisValues b = eval_basis(*space, patch, u, v);
    MapEval e;
    for (size_t c = 0; c < b.global.size(); ++c) {
        const Vec2 x = coeffs.row(b.global[c]).transpose();
        e.x += b.d(0, c) * x;
        e.J.col(0) += b.d(1, c) * x;
        e.J.col(1) += b.d(2, c) * x;
        e.H[0] += b.d(3, c) * x;
        e.H[1] += b.d(4, c) * x;
        e.H[2] += b.d(5, c) * x;
    }
    return e;
}

MapEval MultipatchMap::eval_domain(int patch, double u, double v) const {
    const BasisValues b = eval_basis(*space, patch, u, v);
    const Eigen::MatrixXd d = chain_rule(b.d, space->geometry[patch](u, v));
    MapEval e;
    for (size_t c = 0; c < b.global.size(); ++c) {
        const Vec2 x = coeffs.row(b.global[c]).transpose();
        e.x += b.d(0, c) * x;
        e.J.col(0) += d(0, c) * x;
        e.J.col(1) += d(1, c) * x;
        e.H[0] += d(2, c) * x;
        e.H[1] += d(3, c) * x;
        e.H[2] += d(4, c) * x;
    }
    return e;
}

MultipatchMap interpolate_geometry(std::shared_ptr<const MultipatchSpace> s) {
    MultipatchMap m{s, Eigen::MatrixX2d::Zero(s->n_dofs, 2)};
    for (int q = 0; q < s->n_patches(); ++q) {
        const auto gu = greville(s->knots[q][0]), gv = greville(s->knots[q][1]);
        const int nu = static_cast<int>(gu.size());
        for (size_t j = 0; j < gv.size(); ++j)
            for (int i = 0; i < nu; ++i) m.coeffs.row(s->dof_map[q][i + nu * j]) = s->geometry[q](gu[i], gv[j]).x.transpose();
    }
    return m;
}

std::vector<QuadPoint> quadrature_points(const MultipatchSpace& s) {
    const GaussRule& g = gauss_rule(s.degree + 1);
    std::vector<QuadPoint> out;
    for (int q = 0; q < s.n_patches(); ++q) {
        const auto ku = s.knots[q][0].unique_values(), kv = s.knots[q][1].unique_values();
        for (size_t b = 0; b + 1 < kv.size(); ++b)
            for (size_t a = 0; a + 1 < ku.size(); ++a) {
                const double hu = ku[a + 1] - ku[a], hv = kv[b + 1] - kv[b];
                for (size_t j = 0; j < g.x.size(); ++j)
                    for (size_t i = 0; i < g.x.size(); ++i)
                        out.push_back({q, ku[a] + hu * g.x[i], kv[b] + hv * g.x[j], hu * hv * g.w[i] * g.w[j]});
            }
    }
    return out;
}

BSplineCurve project_curve(const std::function<Vec2(double)>& f, const KnotVector& k) {
    const int n = k.n_basis(), p = k.degree();
    const auto U = k.values();
    BSplineCurve c{k, Points(n)};
    c.ctrl.front() = f(0.0);
    c.ctrl.back() = f(1.0);
    if (n <= 2) return c;
    // least squares for the inner coefficients at 8 samples per basis function
    const int m = 8 * n;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, n - 2);
    Eigen::MatrixX2d rhs(m, 2);
    Eigen::MatrixXd d;
    for (int r = 0; r < m; ++r) {
        const double t = (r + 0.5) / m;
        const int span = basis_derivatives(U, p, t, 0, d);
        Vec2 y = f(t);
        for (int j = 0; j <= p; ++j) {
            const int i = span - p + j;
            if (i == 0) y -= d(0, j) * c.ctrl.front();
            else if (i == n - 1) y -= d(0, j) * c.ctrl.back();
            else A(r, i - 1) += d(0, j);
        }
        rhs.row(r) = y.transpose();
    }
    const Eigen::MatrixX2d sol = A.colPivHouseholderQr().solve(rhs);
    for (int i = 1; i + 1 < n; ++i) c.ctrl[i] = sol.row(i - 1).transpose();
    return c;
}

} // namespace mpp
