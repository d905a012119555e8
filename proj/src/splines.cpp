#include "mpp/splines.hpp"
#include "mpp/errors.hpp"
#include "mpp/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace mpp {

KnotVector::KnotVector(int degree, int n0, std::vector<std::int64_t> ticks)
    : p_(degree), n0_(n0), ticks_(std::move(ticks)) {
    if (p_ < 1 || n0_ < 1 || n0_ > (1 << 12))
        throw Error(ErrorCode::InvalidInput, "knot vector degree/base out of range");
    if (!std::is_sorted(ticks_.begin(), ticks_.end()))
        throw Error(ErrorCode::InvalidInput, "knots must be non-decreasing");
    const std::int64_t one = denominator();
    const int m = static_cast<int>(ticks_.size());
    if (m < 2 * (p_ + 1)) throw Error(ErrorCode::InvalidInput, "knot vector too short");
    for (int i = 0; i <= p_; ++i)
        if (ticks_[i] != 0 || ticks_[m - 1 - i] != one)
            throw Error(ErrorCode::InvalidInput, "knot vector is not open on [0, 1]");
}

double KnotVector::value(size_t i) const {
    return static_cast<double>(ticks_[i]) / static_cast<double>(denominator());
}

std::vector<double> KnotVector::values() const {
    std::vector<double> v(ticks_.size());
    for (size_t i = 0; i < ticks_.size(); ++i) v[i] = value(i);
    return v;
}

std::vector<std::int64_t> KnotVector::unique_ticks() const {
    std::vector<std::int64_t> u = ticks_;
    u.erase(std::unique(u.begin(), u.end()), u.end());
    return u;
}

std::vector<double> KnotVector::unique_values() const {
    std::vector<double> v;
    for (std::int64_t t : unique_ticks()) v.push_back(static_cast<double>(t) / static_cast<double>(denominator()));
    return v;
}

int KnotVector::dyadic_level() const {
    int level = 0;
    for (std::int64_t t : ticks_) {
        if (t == 0) continue;
        const int tz = __builtin_ctzll(static_cast<unsigned long long>(t));
        level = std::max(level, kTickBits - std::min(tz, kTickBits));
    }
    return level;
}

KnotVector base_knotvector(int p, int n0) {
    if (p < 1 || n0 < 1) throw Error(ErrorCode::InvalidInput, "base knot vector needs p >= 1, N0 >= 1");
    std::vector<std::int64_t> t(p + 1, 0);
    for (int i = 1; i < n0; ++i) t.push_back(static_cast<std::int64_t>(i) << kTickBits);
    const std::int64_t one = static_cast<std::int64_t>(n0) << kTickBits;
    t.insert(t.end(), p + 1, one);
    return KnotVector(p, n0, std::move(t));
}

KnotVector uniform_knotvector(int p, int n0, int levels) {
    KnotVector k = base_knotvector(p, n0);
    for (int l = 0; l < levels; ++l) {
        const int spans = k.n_spans();
        for (int s = spans - 1; s >= 0; --s) k = dyadic_refine(k, s);
    }
    return k;
}

KnotVector reverse(const KnotVector& k) {
    const std::int64_t one = k.denominator();
    std::vector<std::int64_t> t(k.ticks().rbegin(), k.ticks().rend());
    for (auto& x : t) x = one - x;
    return KnotVector(k.degree(), k.n0(), std::move(t));
}

KnotVector dyadic_refine(const KnotVector& k, int span) {
    const std::vector<std::int64_t> u = k.unique_ticks();
    if (span < 0 || span + 1 >= static_cast<int>(u.size()))
        throw Error(ErrorCode::InvalidInput, "span index out of range");
    const std::int64_t sum = u[span] + u[span + 1];
    if (sum % 2 != 0) throw Error(ErrorCode::InvalidInput, "dyadic refinement depth exhausted");
    std::vector<std::int64_t> t = k.ticks();
    t.insert(std::upper_bound(t.begin(), t.end(), sum / 2), sum / 2);
    return KnotVector(k.degree(), k.n0(), std::move(t));
}

namespace {

std::map<std::int64_t, int> multiplicities(const KnotVector& k) {
    std::map<std::int64_t, int> m;
    for (std::int64_t t : k.ticks()) ++m[t];
    return m;
}

} // namespace

KnotVector knot_union(const KnotVector& a, const KnotVector& b) {
    if (a.degree() != b.degree() || a.n0() != b.n0())
        throw Error(ErrorCode::IncompatibleBases, "union of knot vectors with different degree or base");
    auto ma = multiplicities(a);
    for (const auto& [t, m] : multiplicities(b)) ma[t] = std::max(ma[t], m);
    std::vector<std::int64_t> t;
    for (const auto& [v, m] : ma) t.insert(t.end(), m, v);
    return KnotVector(a.degree(), a.n0(), std::move(t));
}

bool is_superset(const KnotVector& fine, const KnotVector& coarse) {
    if (fine.degree() != coarse.degree() || fine.n0() != coarse.n0()) return false;
    auto mf = multiplicities(fine);
    for (const auto& [t, m] : multiplicities(coarse)) {
        auto it = mf.find(t);
        if (it == mf.end() || it->second < m) return false;
    }
    return true;
}

std::vector<double> knot_difference(const KnotVector& fine, const KnotVector& coarse) {
    auto mc = multiplicities(coarse);
    std::vector<double> out;
    for (const auto& [t, m] : multiplicities(fine)) {
        const int extra = m - (mc.count(t) ? mc[t] : 0);
        for (int i = 0; i < extra; ++i) out.push_back(static_cast<double>(t) / static_cast<double>(fine.denominator()));
    }
    return out;
}

nlohmann::json knots_to_json(const KnotVector& k) {
    return {{"degree", k.degree()}, {"n0", k.n0()}, {"knots", k.values()}};
}

KnotVector knots_from_json(const nlohmann::json& j) {
    const int p = j.at("degree").get<int>();
    const int n0 = j.value("n0", 1);
    const double den = std::ldexp(static_cast<double>(n0), kTickBits);
    std::vector<std::int64_t> t;
    for (double v : j.at("knots").get<std::vector<double>>()) {
        const double s = v * den;
        if (s != std::floor(s)) throw Error(ErrorCode::InvalidInput, "knot is not dyadic on the base grid");
        t.push_back(static_cast<std::int64_t>(s));
    }
    return KnotVector(p, n0, std::move(t));
}

int find_span(const std::vector<double>& U, int p, double x) {
    const int n = static_cast<int>(U.size()) - p - 1;
    if (x >= U[n]) {
        int s = n - 1;
        while (s > p && U[s] == U[s + 1]) --s;
        return s;
    }
    if (x <= U[p]) {
        int s = p;
        while (s < n - 1 && U[s] == U[s + 1]) ++s;
        return s;
    }
    const auto it = std::upper_bound(U.begin() + p, U.begin() + n + 1, x);
    return static_cast<int>(it - U.begin()) - 1;
}

int basis_derivatives(const std::vector<double>& U, int p, double x, int nder, Eigen::MatrixXd& ders) {
    const int s = find_span(U, p, x);
    // Piegl & Tiller, algorithm A2.3
    Eigen::MatrixXd ndu(p + 1, p + 1);
    std::vector<double> left(p + 1), right(p + 1);
    ndu(0, 0) = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = x - U[s + 1 - j];
        right[j] = U[s + j] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu(j, r) = right[r + 1] + left[j - r];
            const double temp = ndu(r, j - 1) / ndu(j, r);
            ndu(r, j) = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu(j, j) = saved;
    }
    ders.setZero(nder + 1, p + 1);
    for (int j = 0; j <= p; ++j) ders(0, j) = ndu(j, p);
    Eigen::MatrixXd a(2, p + 1);
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        a.setZero();
        a(0, 0) = 1.0;
        for (int k = 1; k <= std::min(nder, p); ++k) {
            double d = 0.0;
            const int rk = r - k, pk = p - k;
            if (r >= k) {
                a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
                d = a(s2, 0) * ndu(rk, pk);
            }
            const int j1 = rk >= -1 ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
                d += a(s2, j) * ndu(rk + j, pk);
            }
            if (r <= pk) {
                a(s2, k) = -a(s1, k - 1) / ndu(pk + 1, r);
                d += a(s2, k) * ndu(r, pk);
            }
            ders(k, r) = d;
            std::swap(s1, s2);
        }
    }
    double f = p;
    for (int k = 1; k <= nder; ++k) {
        for (int j = 0; j <= p; ++j) ders(k, j) *= (k <= p ? f : 0.0);
        f *= (p - k);
    }
    return s;
}

Vec2 BSplineCurve::eval(double t) const { return derivative(t, 0); }

Vec2 BSplineCurve::derivative(double t, int order) const {
    const std::vector<double> U = knots.values();
    const int p = knots.degree();
    Eigen::MatrixXd d;
    const int s = basis_derivatives(U, p, t, order, d);
    Vec2 v = Vec2::Zero();
    for (int j = 0; j <= p; ++j) v += d(order, j) * ctrl[s - p + j];
    return v;
}

Points BSplineCurve::sample(int n) const {
    Points out;
    for (int i = 0; i < n; ++i) out.push_back(eval(static_cast<double>(i) / (n - 1)));
    return out;
}

BSplineCurve reverse(const BSplineCurve& c) {
    BSplineCurve r;
    r.knots = reverse(c.knots);
    r.ctrl.assign(c.ctrl.rbegin(), c.ctrl.rend());
    return r;
}

BSplineCurve prolong(const BSplineCurve& c, const KnotVector& finer) {
    if (!is_superset(finer, c.knots)) throw Error(ErrorCode::NotASuperset, "target knots do not contain the source");
    BSplineCurve out = c;
    const int p = c.knots.degree();
    std::vector<double> U = c.knots.values();
    for (double u : knot_difference(finer, c.knots)) {
        // Boehm insertion of a single knot
        const int k = find_span(U, p, u);
        const Points& P = out.ctrl;
        Points Q(P.size() + 1);
        for (int i = 0; i <= k - p; ++i) Q[i] = P[i];
        for (int i = k - p + 1; i <= k; ++i) {
            const double alpha = (u - U[i]) / (U[i + p] - U[i]);
            Q[i] = alpha * P[i] + (1.0 - alpha) * P[i - 1];
        }
        for (size_t i = k + 1; i < Q.size(); ++i) Q[i] = P[i - 1];
        U.insert(U.begin() + k + 1, u);
        out.ctrl = std::move(Q);
    }
    out.knots = finer;
    return out;
}

nlohmann::json curve_to_json(const BSplineCurve& c) {
    nlohmann::json j = knots_to_json(c.knots);
    nlohmann::json cp = nlohmann::json::array();
    for (const Vec2& p : c.ctrl) cp.push_back({p.x(), p.y()});
    j["control_points"] = cp;
    return j;
}

BSplineCurve curve_from_json(const nlohmann::json& j) {
    BSplineCurve c;
    c.knots = knots_from_json(j);
    for (const auto& p : j.at("control_points")) c.ctrl.emplace_back(p[0].get<double>(), p[1].get<double>());
    if (static_cast<int>(c.ctrl.size()) != c.knots.n_basis())
        throw Error(ErrorCode::InvalidInput, "control point count does not match the knot vector");
    return c;
}

namespace {

// Bending-energy Gramian: integral of B_i'' B_j'' over [0, 1].
Eigen::MatrixXd bending_gramian(const KnotVector& k) {
    const int p = k.degree();
    const int n = k.n_basis();
    const std::vector<double> U = k.values();
    const std::vector<double> breaks = k.unique_values();
    const GaussRule& g = gauss_rule(p + 1);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd d;
    for (size_t s = 0; s + 1 < breaks.size(); ++s) {
        const double a = breaks[s], h = breaks[s + 1] - breaks[s];
        for (size_t q = 0; q < g.x.size(); ++q) {
            const double x = a + h * g.x[q];
            const int span = basis_derivatives(U, p, x, 2, d);
            for (int i = 0; i <= p; ++i)
                for (int j = 0; j <= p; ++j) G(span - p + i, span - p + j) += g.w[q] * h * d(2, i) * d(2, j);
        }
    }
    return G;
}

} // namespace

FitResult fit_curve(const Points& points, const FitConfig& cfg) {
    const int p = cfg.degree;
    const int N = static_cast<int>(points.size());
    if (p < 2) throw Error(ErrorCode::InvalidInput, "fit degree must be >= 2");
    if (N < p + 3) throw Error(ErrorCode::InvalidInput, "fit needs at least p + 3 points");
    const double L = polyline_length(points);
    if (!(L > 0)) throw Error(ErrorCode::DegenerateCurve, "zero-length point set");

    // gauge to unit length, chord-length abscissae
    Points q(N);
    for (int j = 0; j < N; ++j) q[j] = (points[j] - points[0]) / L;
    std::vector<double> xi = cumulative_lengths(points);
    for (double& x : xi) x /= L;
    xi.front() = 0.0;
    xi.back() = 1.0;
    const Vec2 d0 = (q[1] - q[0]) / (xi[1] - xi[0]);
    const Vec2 d1 = (q[N - 1] - q[N - 2]) / (xi[N - 1] - xi[N - 2]);

    KnotVector knots = base_knotvector(p, cfg.n0);
    int pre = 0;
    while (knots.n_basis() < 4) knots = uniform_knotvector(p, cfg.n0, ++pre);

    FitResult res;
    Eigen::MatrixXd d;
    for (int rec = 0;; ++rec) {
        const std::vector<double> U = knots.values();
        const int n = knots.n_basis();
        Eigen::MatrixXd C(n, 2);
        C.row(0) = q[0].transpose();
        C.row(n - 1) = q[N - 1].transpose();
        C.row(1) = (q[0] + d0 * (U[p + 1] - U[1]) / p).transpose();
        C.row(n - 2) = (q[N - 1] - d1 * (U[n + p - 1] - U[n - 1]) / p).transpose();
        const int nf = n - 4;
        if (nf > 0) {
            Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
            Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 2);
            for (int j = 0; j < N; ++j) {
                const int span = basis_derivatives(U, p, xi[j], 0, d);
                for (int a = 0; a <= p; ++a) {
                    rhs.row(span - p + a) += d(0, a) * q[j].transpose() / N;
                    for (int b = 0; b <= p; ++b) M(span - p + a, span - p + b) += d(0, a) * d(0, b) / N;
                }
            }
            if (cfg.lambda > 0) M += cfg.lambda * bending_gramian(knots);
            const std::vector<int> fixed = {0, 1, n - 2, n - 1};
            Eigen::MatrixXd A = M.block(2, 2, nf, nf);
            Eigen::MatrixXd b = rhs.middleRows(2, nf);
            for (int c : fixed) b -= M.block(2, c, nf, 1) * C.row(c);
            Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
            const Eigen::VectorXd diag = ldlt.vectorD().cwiseAbs();
            if (ldlt.info() != Eigen::Success || diag.minCoeff() <= 1e-14 * std::max(1.0, diag.maxCoeff()))
                throw Error(ErrorCode::RankDeficient, "least-squares system is singular; data too sparse");
            C.middleRows(2, nf) = ldlt.solve(b);
        }
        BSplineCurve gauged{knots, {}};
        for (int i = 0; i < n; ++i) gauged.ctrl.emplace_back(C(i, 0), C(i, 1));

        res.residuals.assign(N, 0.0);
        std::vector<char> mark(knots.n_spans(), 0);
        const std::vector<double> breaks = knots.unique_values();
        bool all_ok = true;
        for (int j = 0; j < N; ++j) {
            res.residuals[j] = (gauged.eval(xi[j]) - q[j]).norm();
            if (res.residuals[j] >= cfg.mu_ls) {
                all_ok = false;
                auto it = std::upper_bound(breaks.begin(), breaks.end(), xi[j]);
                int s = static_cast<int>(it - breaks.begin()) - 1;
                s = std::clamp(s, 0, knots.n_spans() - 1);
                mark[s] = 1;
            }
        }
        res.recursions = rec;
        res.lambda = cfg.lambda;
        if (all_ok) {
            res.curve.knots = knots;
            for (int i = 0; i < n; ++i) res.curve.ctrl.push_back(points[0] + L * gauged.ctrl[i]);
            res.curve.ctrl.front() = points.front();
            res.curve.ctrl.back() = points.back();
            return res;
        }
        if (rec >= cfg.max_recursions) {
            const double worst = *std::max_element(res.residuals.begin(), res.residuals.end());
            throw Error(ErrorCode::MaxRecursionsExceeded,
                        "fit did not reach the residual threshold; worst residual " + std::to_string(worst));
        }
        for (int s = knots.n_spans() - 1; s >= 0; --s)
            if (mark[s]) knots = dyadic_refine(knots, s);
    }
}

FitResult fit_curve_relaxed(const Points& points, const FitConfig& cfg, int max_relaxations) {
    FitConfig c = cfg;
    for (int attempt = 0;; ++attempt) {
        try {
            return fit_curve(points, c);
        } catch (const Error& ex) {
            if (ex.code() != ErrorCode::MaxRecursionsExceeded || attempt >= max_relaxations || c.lambda == 0) throw;
            c.lambda = attempt + 1 == max_relaxations ? 0.0 : c.lambda * 0.1;
        }
    }
}

int quad_side_from(int side) {
    static const int f[4] = {0, 1, 3, 0};
    return f[side];
}

int quad_side_to(int side) {
    static const int t[4] = {1, 2, 2, 3};
    return t[side];
}

namespace {

struct ParityUnionFind {
    std::vector<int> parent, parity;
    explicit ParityUnionFind(int n) : parent(n), parity(n, 0) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        if (parent[x] == x) return x;
        const int r = find(parent[x]);
        parity[x] ^= parity[parent[x]];
        parent[x] = r;
        return r;
    }
    // Returns false on a parity clash.
    bool unite(int a, int b, int rel) {
        const int ra = find(a), rb = find(b);
        const int pa = parity[a], pb = parity[b];
        if (ra == rb) return (pa ^ pb) == rel;
        const int lo = std::min(ra, rb), hi = std::max(ra, rb);
        parent[hi] = lo;
        parity[hi] = pa ^ pb ^ rel;
        return true;
    }
};

} // namespace

KnotPropagation propagate_knots(const Template& t, const std::vector<KnotVector>& boundary_knots) {
    const int N = t.n_boundary;
    if (static_cast<int>(boundary_knots.size()) != N)
        throw Error(ErrorCode::InvalidInput, "one knot vector per template boundary edge required");
    std::map<std::pair<int, int>, int> edge_index;
    for (size_t e = 0; e < t.edges.size(); ++e) edge_index[{t.edges[e][0], t.edges[e][1]}] = static_cast<int>(e);
    auto directed = [&](int a, int b) {
        // template edge id and orientation bit (1 if a -> b runs against low -> high)
        return std::make_pair(edge_index.at({std::min(a, b), std::max(a, b)}), a < b ? 0 : 1);
    };
    const int ne = static_cast<int>(t.edges.size());
    ParityUnionFind uf(ne);
    std::vector<char> clash_root(ne, 0);
    for (const auto& quad : t.quads) {
        for (int dir = 0; dir < 2; ++dir) {
            const int s0 = dir == 0 ? 0 : 3, s1 = dir == 0 ? 2 : 1;
            const auto [e0, o0] = directed(quad[quad_side_from(s0)], quad[quad_side_to(s0)]);
            const auto [e1, o1] = directed(quad[quad_side_from(s1)], quad[quad_side_to(s1)]);
            if (!uf.unite(e0, e1, o0 ^ o1)) clash_root[uf.find(e0)] = 1;
        }
    }
    // class knot vectors expressed in the root edge's low -> high direction
    std::map<int, KnotVector> cls;
    for (int i = 0; i < N; ++i) {
        const auto [e, o] = directed(i, (i + 1) % N);
        const int r = uf.find(e);
        const KnotVector k = ((uf.parity[e] ^ o) != 0) ? reverse(boundary_knots[i]) : boundary_knots[i];
        auto it = cls.find(r);
        if (it == cls.end())
            cls.emplace(r, k);
        else
            it->second = knot_union(it->second, k);
    }
    KnotPropagation out;
    for (int e = 0; e < ne; ++e)
        if (clash_root[e]) clash_root[uf.find(e)] = 1;
    for (auto& [r, k] : cls)
        if (clash_root[r]) {
            k = knot_union(k, reverse(k));
            ++out.n_conflicts;
        }
    // isolated classes: uniform palindromic vector with at least the mean interior count
    double mean = 0;
    for (const auto& [r, k] : cls) mean += k.n_interior();
    mean /= std::max<size_t>(1, cls.size());
    const int target = static_cast<int>(std::floor(mean + 0.5));
    const int p = boundary_knots[0].degree(), n0 = boundary_knots[0].n0();
    int level = 0;
    while (n0 * (1 << level) - 1 < target) ++level;
    const KnotVector isolated = uniform_knotvector(p, n0, level);

    out.edge_class.resize(ne);
    out.edge_knots.resize(ne);
    for (int e = 0; e < ne; ++e) {
        const int r = uf.find(e);
        out.edge_class[e] = r;
        const auto it = cls.find(r);
        const KnotVector& k = it == cls.end() ? isolated : it->second;
        out.edge_knots[e] = uf.parity[e] ? reverse(k) : k;
    }
    for (const auto& quad : t.quads) {
        std::array<KnotVector, 2> kk;
        for (int dir = 0; dir < 2; ++dir) {
            const int s = dir == 0 ? 0 : 3;
            const auto [e, o] = directed(quad[quad_side_from(s)], quad[quad_side_to(s)]);
            kk[dir] = o ? reverse(out.edge_knots[e]) : out.edge_knots[e];
        }
        out.quad_knots.push_back(kk);
    }
    return out;
}

} // namespace mpp
