#include "fixtures.hpp"
#include "mpp/errors.hpp"
#include "mpp/surrogate.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

using namespace mpp;

namespace {

Points circle(int n, double r = 1.0) {
    Points p;
    for (int i = 0; i < n; ++i) p.emplace_back(r * std::cos(2 * kPi * i / n), r * std::sin(2 * kPi * i / n));
    return p;
}

// L-shaped hexagon refined to 8 points per side.
Points l_polygon() {
    const Points corners{{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}};
    Points p;
    for (size_t i = 0; i < corners.size(); ++i)
        for (int k = 0; k < 8; ++k) p.push_back(corners[i] + (k / 8.0) * (corners[(i + 1) % corners.size()] - corners[i]));
    return p;
}

double tri_area(const Points& p, const std::array<int, 3>& t) { return 0.5 * cross(p[t[1]] - p[t[0]], p[t[2]] - p[t[0]]); }

} // namespace

TEST_CASE("triangulation covers the polygon") {
    for (const Points& poly : {circle(48), l_polygon()}) {
        const Triangulation tri = triangulate(poly, 0.15);
        CHECK(tri.boundary_count == static_cast<int>(poly.size()));
        for (size_t i = 0; i < poly.size(); ++i) CHECK(tri.points[i] == poly[i]);
        double area = 0;
        for (const auto& t : tri.triangles) {
            CHECK(tri_area(tri.points, t) > 0);
            area += tri_area(tri.points, t);
        }
        CHECK(area == doctest::Approx(signed_area(poly)).epsilon(1e-12));
        CHECK(min_orientation(tri.points, tri.triangles) > 0);
        // every polygon side is a triangle edge exactly once; interior edges twice
        std::map<std::pair<int, int>, int> use;
        for (const auto& t : tri.triangles)
            for (int k = 0; k < 3; ++k) ++use[{t[k], t[(k + 1) % 3]}];
        const int m = tri.boundary_count;
        for (int i = 0; i < m; ++i) CHECK(use[{i, (i + 1) % m}] == 1);
        double longest = 0;
        for (const auto& [e, c] : use) {
            const bool side = e.first < m && e.second == (e.first + 1) % m;
            if (!side) {
                CHECK(use.count({e.second, e.first}) == 1);
                longest = std::max(longest, (tri.points[e.first] - tri.points[e.second]).norm());
            }
        }
        CHECK(longest <= 2 * 0.15 + 1e-12);
        // interior points lie inside
        for (int i = m; i < tri.n_points(); ++i) CHECK(winding_number(tri.points[i], poly) != 0);
    }
}

TEST_CASE("point location and barycentric coordinates") {
    const Triangulation tri = triangulate(l_polygon(), 0.3);
    const TriangleLocator loc(tri.points, tri.triangles);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0, 2);
    int inside = 0;
    for (int k = 0; k < 400; ++k) {
        const Vec2 p(u(rng), u(rng));
        const auto b = loc.locate(p);
        const bool in = p.x() <= 1 || p.y() <= 1;
        CHECK(b.has_value() == in);
        if (!b) continue;
        ++inside;
        const auto& t = tri.triangles[b->triangle];
        const Vec2 back = b->w[0] * tri.points[t[0]] + b->w[1] * tri.points[t[1]] + b->w[2] * tri.points[t[2]];
        CHECK((back - p).norm() < 1e-13);
        CHECK(b->w[0] + b->w[1] + b->w[2] == doctest::Approx(1.0));
        for (double w : b->w) CHECK(w >= -1e-12);
    }
    CHECK(inside > 200);
    CHECK_FALSE(loc.locate(Vec2(5, 5)).has_value());
}

TEST_CASE("Floater operator") {
    const Triangulation tri = triangulate(l_polygon(), 0.12);
    const FloaterOperator op(tri);
    REQUIRE_FALSE(op.interior().empty());
    // weights form convex combinations: interior row sums vanish after moving B across
    const Eigen::VectorXd one_i = Eigen::VectorXd::Ones(op.A().cols()), one_b = Eigen::VectorXd::Ones(op.B().cols());
    CHECK((op.A() * one_i - op.B() * one_b).norm() < 1e-12);

    Mat2 a;
    a << 1.3, -0.4, 0.2, 0.9;
    const Vec2 shift(0.5, -2);
    auto affine = [&](const Vec2& p) -> Vec2 { return a * p + shift; };
    Points targets;
    for (int i = 0; i < tri.boundary_count; ++i) targets.push_back(affine(tri.points[i]));
    const Points img = op.solve(targets);
    double err = 0;
    for (int i = 0; i < tri.n_points(); ++i) err = std::max(err, (img[i] - affine(tri.points[i])).norm());
    CHECK(err <= 1e-8); // mean value weights reproduce linear functions
    for (int i = 0; i < tri.boundary_count; ++i) CHECK(img[i] == targets[i]);
    CHECK_THROWS_AS(op.solve(Points(3)), Error);

    // onto a convex target the map is one-to-one
    const Points ring = circle(tri.boundary_count);
    const PiecewiseLinearMap onto = floater_map(tri, ring);
    CHECK(onto.is_bijective());
    CHECK(min_orientation(onto.images(), tri.triangles) > 0);
}

TEST_CASE("piecewise linear map evaluation and inverse") {
    const Triangulation tri = triangulate(circle(40), 0.2);
    Mat2 a;
    a << 2, 0.5, -0.3, 1;
    Points img;
    for (const Vec2& p : tri.points) img.push_back(a * p);
    const PiecewiseLinearMap m(tri, img);
    CHECK(m.is_bijective());
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.6, 0.6);
    for (int k = 0; k < 100; ++k) {
        const Vec2 p(u(rng), u(rng));
        CHECK((m.evaluate(p) - a * p).norm() < 1e-12);
        CHECK(evaluate_pl(m, p) == m.evaluate(p));
        CHECK((m.jacobian(p) - a).norm() < 1e-12);
        CHECK((m.inverse(m.evaluate(p)) - p).norm() < 1e-12);
    }
    for (int i = 0; i < tri.n_points(); ++i) CHECK((m.evaluate(tri.points[i]) - img[i]).norm() < 1e-13);
    CHECK_THROWS_AS(m.evaluate(Vec2(3, 3)), Error);

    // a reflected image is not a bijection and refuses inversion
    Points flipped = img;
    for (Vec2& p : flipped) p.x() = -p.x();
    const PiecewiseLinearMap f(tri, flipped);
    CHECK_FALSE(f.is_bijective());
    CHECK_THROWS_AS(f.inverse(Vec2::Zero()), Error);
}

TEST_CASE("control domain kinds") {
    const double mu = 0.2;
    SUBCASE("disc with quarter arcs") {
        const ControlDomain d = control_domain(std::vector<double>(4, kPi), std::vector<double>(4, 1.0), mu);
        CHECK(d.kind == DomainKind::Disc);
        CHECK(d.boundary_length() == doctest::Approx(2 * kPi).epsilon(1e-12));
        for (int i = 0; i < 4; ++i) {
            const Vec2 a = d.break_point(i), b = d.break_point((i + 1) % 4);
            CHECK(a.norm() == doctest::Approx(1.0));
            CHECK(std::abs(std::atan2(cross(a, b), a.dot(b)) - kPi / 2) < 1e-9);
            CHECK((d.edge_point(i, 1.0) - b).norm() < 1e-12);
        }
    }
    SUBCASE("disc arcs follow the edge lengths") {
        const std::vector<double> len{1, 2, 3, 2};
        const ControlDomain d = control_domain(std::vector<double>(4, kPi), len, mu);
        for (int i = 0; i < 4; ++i) {
            const Vec2 a = d.break_point(i), b = d.break_point((i + 1) % 4);
            double arc = std::atan2(cross(a, b), a.dot(b));
            if (arc < 0) arc += 2 * kPi;
            CHECK(arc == doctest::Approx(2 * kPi * len[i] / 8.0).epsilon(1e-9));
        }
    }
    SUBCASE("half disc") {
        const std::vector<double> ang{kPi / 2, kPi / 2, kPi, kPi};
        const ControlDomain d = control_domain(ang, std::vector<double>(4, 1.0), mu);
        CHECK(d.kind == DomainKind::HalfDisc);
        CHECK(d.boundary_length() == doctest::Approx(2 + kPi).epsilon(1e-12));
        // edge 0 joins the two corners along the diameter
        CHECK((d.break_point(0) - Vec2(-1, 0)).norm() < 1e-14);
        CHECK((d.break_point(1) - Vec2(1, 0)).norm() < 1e-14);
        for (double t : {0.25, 0.5, 0.75}) CHECK(d.edge_point(0, t).y() == 0.0);
        for (int i = 1; i < 4; ++i) CHECK(d.edge_point(i, 0.3).norm() == doctest::Approx(1.0));
    }
    SUBCASE("teardrop and lens") {
        const ControlDomain t = control_domain({1.0, kPi, kPi, kPi}, std::vector<double>(4, 1.0), mu);
        CHECK(t.kind == DomainKind::Teardrop);
        CHECK(t.break_point(0).norm() < 1e-14);
        // tangent directions at the tip enclose the corner angle
        const Vec2 out = t.edge_point(0, 0.0, 1), in = -t.edge_point(3, 1.0, 1);
        CHECK(std::abs(std::atan2(cross(out, in), out.dot(in)) - 1.0) < 1e-12);
        const ControlDomain l = control_domain({1.2, kPi, 1.2, kPi}, std::vector<double>(4, 1.0), mu);
        CHECK(l.kind == DomainKind::Lens);
        CHECK((l.break_point(0) - Vec2(-1, 0)).norm() < 1e-14);
        CHECK((l.break_point(2) - Vec2(1, 0)).norm() < 1e-14);
    }
    SUBCASE("pentagon side ratios") {
        const std::vector<double> ratios{0.1, 0.2, 0.3, 0.2, 0.2};
        const ControlDomain d = control_domain(std::vector<double>(5, 3 * kPi / 5), ratios, mu);
        CHECK(d.kind == DomainKind::ConvexPolygon);
        double per = 0;
        for (int i = 0; i < 5; ++i) per += (d.break_point((i + 1) % 5) - d.break_point(i)).norm();
        for (int i = 0; i < 5; ++i) {
            CHECK(d.break_point(i).norm() == doctest::Approx(1.0).epsilon(1e-12));
            CHECK((d.break_point((i + 1) % 5) - d.break_point(i)).norm() / per == doctest::Approx(ratios[i]).epsilon(1e-9));
        }
        CHECK(signed_area(d.sample_boundary(3)) > 0);
    }
    CHECK_THROWS_AS(control_domain({1.0}, {1.0, 2.0}, mu), Error);
}

TEST_CASE("polyline resampling") {
    const Points line{{0, 0}, {1, 0}, {1, 3}};
    const Points r = resample_polyline(line, 9);
    REQUIRE(r.size() == 9);
    CHECK(r.front() == line.front());
    CHECK(r.back() == line.back());
    for (size_t i = 0; i + 1 < r.size(); ++i) CHECK((r[i + 1] - r[i]).norm() == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(resample_polyline(line, 1), Error);

    const PlaneGraph g = load_graph(fixtures::data_path("unit_square.json"));
    const Points s = sample_face(g, 0, 5);
    CHECK(s.size() == 16);
    CHECK(signed_area(s) == doctest::Approx(1.0));
}
