#include <doctest.h>

#include "mpp/errors.hpp"
#include "mpp/splines.hpp"

#include <cmath>
#include <random>
#include <set>

using namespace mpp;

namespace {

// Cox-de Boor recursion straight from the definition.
double cox_de_boor(const std::vector<double>& U, int i, int p, double x) {
    if (p == 0) {
        const double last = U.back();
        if (x == last) return (U[i] < last && U[i + 1] == last) ? 1.0 : 0.0;
        return (U[i] <= x && x < U[i + 1]) ? 1.0 : 0.0;
    }
    double v = 0;
    if (U[i + p] > U[i]) v += (x - U[i]) / (U[i + p] - U[i]) * cox_de_boor(U, i, p - 1, x);
    if (U[i + p + 1] > U[i + 1]) v += (U[i + p + 1] - x) / (U[i + p + 1] - U[i + 1]) * cox_de_boor(U, i + 1, p - 1, x);
    return v;
}

Vec2 oracle_eval(const BSplineCurve& c, double x) {
    const std::vector<double> U = c.knots.values();
    Vec2 v = Vec2::Zero();
    for (size_t i = 0; i < c.ctrl.size(); ++i) v += cox_de_boor(U, static_cast<int>(i), c.knots.degree(), x) * c.ctrl[i];
    return v;
}

// Every value k / (N0 2^m) for some m <= 52.
bool dyadic_oracle(const std::vector<double>& values, int n0) {
    for (double v : values) {
        bool ok = false;
        for (int m = 0; m <= 52 && !ok; ++m) {
            const double s = std::ldexp(v * n0, m);
            ok = s == std::floor(s);
        }
        if (!ok) return false;
    }
    return true;
}

KnotVector random_refinement(std::mt19937_64& rng, int p, int n0, int steps) {
    KnotVector k = base_knotvector(p, n0);
    for (int i = 0; i < steps; ++i) {
        std::uniform_int_distribution<int> s(0, k.n_spans() - 1);
        k = dyadic_refine(k, s(rng));
    }
    return k;
}

Template stacked_quads() {
    Template t;
    t.n_boundary = 6;
    t.vertices = {{0, 0}, {1, 0}, {1, 1}, {1, 2}, {0, 2}, {0, 1}};
    t.quads = {{0, 1, 2, 5}, {5, 2, 3, 4}};
    rebuild_edges(t);
    return t;
}

} // namespace

TEST_CASE("base knot vectors") {
    const KnotVector a = base_knotvector(2, 4);
    CHECK(a.values() == std::vector<double>{0, 0, 0, 0.25, 0.5, 0.75, 1, 1, 1});
    const KnotVector b = base_knotvector(3, 1);
    CHECK(b.values() == std::vector<double>{0, 0, 0, 0, 1, 1, 1, 1});
    CHECK(dyadic_oracle(a.values(), 4));
    CHECK(a.dyadic_level() == 0);
}

TEST_CASE("knot algebra examples") {
    KnotVector k = dyadic_refine(dyadic_refine(base_knotvector(2, 1), 0), 0); // 1/4, 1/2
    KnotVector only_quarter = knots_from_json({{"degree", 2}, {"knots", {0, 0, 0, 0.25, 1, 1, 1}}});
    CHECK(reverse(only_quarter).unique_values() == std::vector<double>{0, 0.75, 1});
    const KnotVector r = dyadic_refine(k, 1); // span [1/4, 1/2]
    CHECK(r.unique_values() == std::vector<double>{0, 0.25, 0.375, 0.5, 1});
    CHECK_THROWS_AS(knot_union(base_knotvector(2, 1), base_knotvector(3, 1)), Error);
}

TEST_CASE("union is the coarsest common superset (set oracle)") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const int n0 = 1 + trial % 3;
        const KnotVector a = random_refinement(rng, 3, n0, trial % 7);
        const KnotVector b = random_refinement(rng, 3, n0, (trial * 3) % 5);
        const KnotVector u = knot_union(a, b);
        const auto av = a.values();
        std::set<double> sa(av.begin(), av.end());
        const auto bv = b.values();
        sa.insert(bv.begin(), bv.end());
        CHECK(std::vector<double>(sa.begin(), sa.end()) == u.unique_values());
        CHECK(is_superset(u, a));
        CHECK(is_superset(u, b));
        CHECK(dyadic_oracle(u.values(), n0));
        CHECK(dyadic_oracle(reverse(u).values(), n0));
        CHECK(reverse(reverse(u)) == u);
    }
}

TEST_CASE("basis functions match the Cox-de Boor oracle") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> x01(0.0, 1.0);
    for (int p = 2; p <= 4; ++p) {
        const KnotVector k = random_refinement(rng, p, 2, 6);
        const std::vector<double> U = k.values();
        Eigen::MatrixXd d;
        for (int trial = 0; trial < 50; ++trial) {
            const double x = trial == 0 ? 1.0 : x01(rng);
            const int s = basis_derivatives(U, p, x, 2, d);
            double sum = 0;
            for (int j = 0; j <= p; ++j) {
                CHECK(std::abs(d(0, j) - cox_de_boor(U, s - p + j, p, x)) < 1e-13);
                sum += d(0, j);
                // derivative via central differences of the oracle
                const double h = 1e-6;
                if (x > h && x < 1 - h) {
                    const double fd = (cox_de_boor(U, s - p + j, p, x + h) - cox_de_boor(U, s - p + j, p, x - h)) / (2 * h);
                    const bool near_knot = std::any_of(U.begin(), U.end(), [&](double u) { return std::abs(u - x) < 2 * h; });
                    if (!near_knot) CHECK(std::abs(fd - d(1, j)) < 1e-5 * (1 + std::abs(d(1, j))));
                }
            }
            CHECK(std::abs(sum - 1.0) < 1e-14);
        }
    }
}

TEST_CASE("prolongation preserves the curve") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 20; ++trial) {
        BSplineCurve c;
        c.knots = random_refinement(rng, 3, 1, 3);
        for (int i = 0; i < c.knots.n_basis(); ++i) c.ctrl.emplace_back(u(rng), u(rng));
        const KnotVector finer = dyadic_refine(c.knots, trial % c.knots.n_spans());
        const BSplineCurve f = prolong(c, finer);
        CHECK(prolong(c, c.knots).ctrl == c.ctrl);
        for (int i = 0; i < 50; ++i) {
            const double x = i / 49.0;
            CHECK((f.eval(x) - c.eval(x)).norm() < 1e-13);
            CHECK((f.eval(x) - oracle_eval(f, x)).norm() < 1e-13);
        }
        CHECK_THROWS_AS(prolong(f, c.knots), Error);
    }
}

TEST_CASE("fit of a straight segment is exact with the base knots") {
    Points pts;
    for (int i = 0; i < 20; ++i) pts.push_back(Vec2(1, 2) + Vec2(3, -1) * (i / 19.0));
    const FitResult r = fit_curve(pts, FitConfig{});
    CHECK(r.curve.knots == base_knotvector(3, 1));
    for (double res : r.residuals) CHECK(res < 1e-10);
    CHECK(r.curve.eval(0) == pts.front());
    CHECK(r.curve.eval(1) == pts.back());
}

TEST_CASE("fit endpoint tangents are exact") {
    Points pts;
    for (int i = 0; i < 40; ++i) {
        const double t = i / 39.0;
        pts.emplace_back(t * 2, std::sin(3 * t) + 0.1 * t * t);
    }
    FitConfig cfg;
    cfg.lambda = 1e-6; // strongly curved sparse data; the bending term would otherwise dominate
    const FitResult r = fit_curve(pts, cfg);
    const double L = polyline_length(pts);
    const std::vector<double> c = cumulative_lengths(pts);
    const Vec2 d0 = (pts[1] - pts[0]) / (c[1] / L);
    const Vec2 d1 = (pts[39] - pts[38]) / ((c[39] - c[38]) / L);
    CHECK((r.curve.derivative(0) - d0).norm() < 1e-9 * d0.norm());
    CHECK((r.curve.derivative(1) - d1).norm() < 1e-9 * d1.norm());
}

TEST_CASE("noisy semicircle converges with dyadic knots") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> noise(0.0, 1e-5);
    Points pts;
    for (int i = 0; i < 201; ++i) {
        const double t = kPi * i / 200.0;
        pts.emplace_back(std::cos(t) + noise(rng), std::sin(t) + noise(rng));
    }
    pts.front() = {1, 0};
    pts.back() = {-1, 0};
    const FitResult r = fit_curve(pts, FitConfig{});
    for (double res : r.residuals) CHECK(res < 1e-3);
    CHECK(dyadic_oracle(r.curve.knots.values(), 1));
    // rigid-motion invariance
    Points moved;
    const double a = 0.7;
    for (const Vec2& p : pts) moved.push_back(Vec2(std::cos(a) * p.x() - std::sin(a) * p.y() + 5, std::sin(a) * p.x() + std::cos(a) * p.y() - 2));
    const FitResult m = fit_curve(moved, FitConfig{});
    REQUIRE(m.residuals.size() == r.residuals.size());
    for (size_t j = 0; j < r.residuals.size(); ++j) CHECK(std::abs(m.residuals[j] - r.residuals[j]) < 1e-12);
}

TEST_CASE("relaxed fit weakens the bending term only when needed") {
    Points pts;
    for (int i = 0; i < 400; ++i) {
        const double t = i / 399.0;
        pts.emplace_back(3 * t, 0.6 * std::sin(11 * t));
    }
    CHECK_THROWS_AS(fit_curve(pts, FitConfig{}), Error);
    const FitResult r = fit_curve_relaxed(pts, FitConfig{});
    CHECK(r.lambda < FitConfig{}.lambda);
    for (double res : r.residuals) CHECK(res < 1e-3);
    FitConfig strict;
    strict.max_recursions = 2;
    try {
        fit_curve_relaxed(pts, strict, 1);
        FAIL("expected the fit to give up");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MaxRecursionsExceeded);
    }
    Points line;
    for (int i = 0; i < 20; ++i) line.emplace_back(i, 0.5 * i);
    CHECK(fit_curve_relaxed(line, FitConfig{}).lambda == FitConfig{}.lambda);
}

TEST_CASE("too few points are rejected") {
    CHECK_THROWS_AS(fit_curve({{0, 0}, {1, 0}, {2, 0}}, FitConfig{}), Error);
}

TEST_CASE("knot propagation: single quad keeps its knots") {
    Template t;
    t.n_boundary = 4;
    t.vertices = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    t.quads = {{0, 1, 2, 3}};
    rebuild_edges(t);
    const KnotVector k = base_knotvector(3, 2);
    const KnotPropagation kp = propagate_knots(t, {k, k, k, k});
    CHECK(kp.quad_knots[0][0] == k);
    CHECK(kp.quad_knots[0][1] == k);
    CHECK(kp.n_conflicts == 0);
}

TEST_CASE("knot propagation: stacked quads inherit the refined bottom") {
    const Template t = stacked_quads();
    const KnotVector base = base_knotvector(3, 1);
    const KnotVector fine = dyadic_refine(dyadic_refine(base, 0), 0); // 1/4, 1/2: not palindromic
    std::vector<KnotVector> bk(6, base);
    bk[0] = fine;
    const KnotPropagation kp = propagate_knots(t, bk);
    // both quads carry the refined knots along mu (bottom 0->1, shared 5->2, top 4->3)
    CHECK(kp.quad_knots[0][0] == fine);
    CHECK(kp.quad_knots[1][0] == fine);
    CHECK(kp.quad_knots[0][1] == base);
    // top boundary edge runs 3 -> 4, i.e. against the parametric direction
    int top = -1;
    for (size_t e = 0; e < t.edges.size(); ++e)
        if (t.edges[e] == std::array<int, 2>{3, 4}) top = static_cast<int>(e);
    REQUIRE(top >= 0);
    CHECK(kp.edge_knots[top] == reverse(fine));
}

TEST_CASE("knot propagation: isolated ring class is palindromic") {
    // 4-gon with a central quad (5 quads): the inner ring edges touch no boundary edge
    Template t;
    t.n_boundary = 4;
    t.vertices = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}, {0.5, 0}, {0, 0.5}, {-0.5, 0}, {0, -0.5}};
    t.quads = {{0, 1, 5, 4}, {1, 2, 6, 5}, {2, 3, 7, 6}, {3, 0, 4, 7}, {4, 5, 6, 7}};
    rebuild_edges(t);
    const KnotVector base = base_knotvector(3, 1);
    const KnotVector fine = dyadic_refine(dyadic_refine(base, 0), 0);
    const KnotPropagation kp = propagate_knots(t, {fine, base, fine, base});
    int ring_edge = -1;
    for (size_t e = 0; e < t.edges.size(); ++e)
        if (t.edges[e] == std::array<int, 2>{0, 4}) ring_edge = static_cast<int>(e);
    REQUIRE(ring_edge >= 0);
    const KnotVector& xi = kp.edge_knots[ring_edge];
    CHECK(reverse(xi) == xi);
    CHECK(dyadic_oracle(xi.values(), 1));
    // rounded mean of interior counts (2 and 0 -> 1) gives one interior knot
    CHECK(xi.n_interior() >= 1);
}

TEST_CASE("curve json round trip") {
    BSplineCurve c;
    c.knots = dyadic_refine(base_knotvector(3, 1), 0);
    for (int i = 0; i < c.knots.n_basis(); ++i) c.ctrl.emplace_back(i * 0.1, std::sqrt(i + 0.5));
    const BSplineCurve d = curve_from_json(nlohmann::json::parse(curve_to_json(c).dump()));
    CHECK(d.knots == c.knots);
    CHECK(d.ctrl == c.ctrl);
}
