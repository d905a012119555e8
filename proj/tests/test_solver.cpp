#include "fixtures.hpp"
#include "mpp/errors.hpp"

#include <doctest.h>

#include <random>

using namespace mpp;
using namespace fixtures;

namespace {

double coeff_error(const MultipatchMap& a, const MultipatchMap& b) { return (a.coeffs - b.coeffs).cwiseAbs().maxCoeff(); }

// Directional finite-difference check of an assembled Jacobian.
template <class F>
double jacobian_fd_error(const MultipatchMap& x, const BoundaryConstraint& c, F&& system, int seed) {
    const NonlinearSystem s0 = system(x, true);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    const int nf = static_cast<int>(c.free_dofs.size());
    double worst = 0;
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::VectorXd dir(2 * nf);
        for (int i = 0; i < 2 * nf; ++i) dir[i] = nd(rng);
        const double h = 1e-6;
        auto shifted = [&](double sgn) {
            MultipatchMap y = x;
            for (int k = 0; k < 2; ++k)
                for (int i = 0; i < nf; ++i) y.coeffs(c.free_dofs[i], k) += sgn * h * dir[k * nf + i];
            return system(y, false).residual;
        };
        const Eigen::VectorXd fd = (shifted(1) - shifted(-1)) / (2 * h);
        const Eigen::VectorXd an = s0.jacobian * dir;
        worst = std::max(worst, (fd - an).norm() / std::max(an.norm(), 1e-12));
    }
    return worst;
}

struct Problem {
    std::shared_ptr<const MultipatchSpace> space;
    BoundaryConstraint c;
    MultipatchMap x0;
};

Problem squircle_problem(int levels) {
    Problem p;
    p.space = space_of(unit_square(), 3, levels);
    p.c = constrain_boundary(*p.space, mapped_boundary(*p.space, squircle));
    p.x0 = initial_map(p.space, p.c);
    return p;
}

} // namespace

TEST_CASE("regulariser") {
    const double eps = 1e-4;
    CHECK(regulariser(0.0, eps) == eps);
    double prev = 0;
    for (int i = -200; i <= 200; ++i) {
        const double x = i * 0.05;
        const double r = regulariser(x, eps);
        CHECK(r > 0);
        if (i > -200) CHECK(r > prev);
        prev = r;
    }
    CHECK(std::abs(regulariser(1e3, eps) - 1e3) < 1e-9);
}

TEST_CASE("Winslow energy of the identity on the unit square") {
    const auto s = space_of(unit_square(), 3, 1);
    CHECK(std::abs(winslow_energy(interpolate_geometry(s), 1e-4) - 2.0) < 1e-7);
}

TEST_CASE("identity fixtures: all solvers return the identity") {
    for (const Template& t : {unit_square(), square_2x2()}) {
        const auto s = space_of(t, 3, 2);
        const BoundaryConstraint c = constrain_boundary(*s, identity_boundary(*s));
        const MultipatchMap id = interpolate_geometry(s);
        const MultipatchMap x0 = initial_map(s, c);
        CHECK(coeff_error(x0, id) < 1e-12);
        CHECK(c0dg_system(x0, c, {}, false).residual.norm() < 1e-10);
        const SolveResult a = solve_c0dg(x0, c);
        CHECK(a.report.iterations == 0);
        CHECK(coeff_error(a.map, id) < 1e-10);
        const SolveResult b = solve_weakform(x0, c, {});
        CHECK(b.report.iterations == 0);
        CHECK(coeff_error(b.map, id) < 1e-10);
        WinslowReport wr;
        const MultipatchMap w = winslow_untangle(x0, c, {}, &wr);
        CHECK(wr.iterations <= 1);
        CHECK(coeff_error(w, id) < 1e-10);
        const BijectivityReport br = bijectivity_report(id);
        CHECK(std::abs(br.min_det - 1.0) < 1e-12);
    }
}

TEST_CASE("initial map reproduces affine boundary data") {
    const auto s = space_of(square_2x2(), 3, 1);
    Mat2 A;
    A << 1.3, 0.4, -0.2, 0.9;
    const Vec2 b(0.5, -2);
    const BoundaryConstraint c = constrain_boundary(*s, mapped_boundary(*s, [&](const Vec2& p) { return Vec2(A * p + b); }));
    const MultipatchMap x = initial_map(s, c);
    for (int q = 0; q < 4; ++q)
        for (double u : {0.1, 0.5, 0.83}) {
            const MapEval g = s->geometry[q](u, 0.37);
            CHECK((x.eval(q, u, 0.37).x - (A * g.x + b)).norm() < 1e-12);
        }
}

TEST_CASE("C0-DG solve on a disc-like face") {
    const Problem p = squircle_problem(3);
    const SolveResult r = solve_c0dg(p.x0, p.c);
    CHECK(r.report.converged);
    CHECK(r.report.residuals.back() < 1e-10);
    CHECK(r.report.iterations <= 30);
    CHECK(r.report.min_det > 0);
    for (size_t i = 1; i < r.report.residuals.size(); ++i) CHECK(r.report.residuals[i] < r.report.residuals[i - 1]);
}

TEST_CASE("assembled Jacobians match directional finite differences") {
    const auto s = space_of(square_2x2(), 3, 1);
    const BoundaryConstraint c = constrain_boundary(*s, mapped_boundary(*s, [](const Vec2& p) {
        return Vec2(p.x() + 0.15 * std::sin(2 * p.y()), p.y() + 0.1 * p.x() * p.x());
    }));
    MultipatchMap x = initial_map(s, c);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd(0.0, 0.03);
    for (int d : c.free_dofs) x.coeffs.row(d) += Eigen::RowVector2d(nd(rng), nd(rng));
    const SolverConfig cfg;
    CHECK(jacobian_fd_error(x, c, [&](const MultipatchMap& y, bool j) { return c0dg_system(y, c, cfg, j); }, 1) < 1e-5);
    CHECK(jacobian_fd_error(x, c, [&](const MultipatchMap& y, bool j) { return weakform_system(y, c, {}, cfg, j); }, 2) < 1e-5);
    DiffusivitySpec h;
    h.kind = DiffusivitySpec::Kind::Homogenise;
    h.k = 1.5;
    h.kappa = 0.7;
    CHECK(jacobian_fd_error(x, c, [&](const MultipatchMap& y, bool j) { return weakform_system(y, c, h, cfg, j); }, 3) < 1e-5);
}

TEST_CASE("weak form and C0-DG agree better under refinement") {
    std::vector<double> diff;
    for (int levels = 1; levels <= 3; ++levels) {
        const Problem p = squircle_problem(levels);
        const SolveResult a = solve_c0dg(p.x0, p.c);
        const SolveResult b = solve_weakform(a.map, p.c, {});
        REQUIRE(a.report.converged);
        REQUIRE(b.report.converged);
        double worst = 0;
        for (int i = 0; i <= 20; ++i)
            for (int j = 0; j <= 20; ++j)
                worst = std::max(worst, (a.map.eval(0, i / 20.0, j / 20.0).x - b.map.eval(0, i / 20.0, j / 20.0).x).norm());
        diff.push_back(worst);
    }
    CHECK(diff[1] < diff[0]);
    CHECK(diff[2] < diff[1]);
}

TEST_CASE("homogenise with k = 0 equals the identity-diffusivity solve bit for bit") {
    const Problem p = squircle_problem(2);
    const SolveResult a = solve_weakform(p.x0, p.c, {});
    const SolveResult b = homogenise(p.x0, p.c, 0.0);
    CHECK(a.map.coeffs == b.map.coeffs);
}

TEST_CASE("folded L-shape is untangled by the regularised Winslow descent") {
    const auto s = space_of(l_shape(), 3, 1);
    const BoundaryConstraint c = constrain_boundary(*s, identity_boundary(*s));
    MultipatchMap x = initial_map(s, c);
    // cross two interior coefficients of the first patch
    const auto& dm = s->dof_map[0];
    const int nu = s->n_basis(0, 0);
    const int a = dm[1 + nu * 1], b = dm[(nu - 2) + nu * (nu - 2)];
    x.coeffs.row(a).swap(x.coeffs.row(b));
    REQUIRE(bijectivity_report(x).min_det < 0);
    WinslowReport rep;
    const MultipatchMap u = winslow_untangle(x, c, {}, &rep);
    CHECK(rep.min_det_before < 0);
    CHECK(rep.min_det_after > 0);
    CHECK(rep.iterations <= 200);
    CHECK(rep.final_energy <= rep.initial_energy);
    CHECK(bijectivity_report(u).min_det > 0);
}

TEST_CASE("scaling gauge: a 10x scaled face gives the scaled map") {
    const Problem p = squircle_problem(2);
    const SolveResult a = solve_c0dg(p.x0, p.c);
    BoundaryConstraint c10 = p.c;
    c10.values *= 10.0;
    const MultipatchMap x10 = initial_map(p.space, c10);
    const SolveResult b = solve_c0dg(x10, c10);
    const double scale = a.map.coeffs.cwiseAbs().maxCoeff();
    CHECK((b.map.coeffs - 10.0 * a.map.coeffs).cwiseAbs().maxCoeff() < 1e-9 * 10.0 * scale);
}

TEST_CASE("interface removal on an orthonormal square layout is the identity") {
    const auto s = space_of(square_2x2(), 3, 1);
    const MultipatchMap r = interpolate_geometry(s);
    const MultipatchMap sm = interface_removal(s);
    CHECK(coeff_error(sm, r) < 1e-10);
    // boundary rows come from a least-squares projection, so agreement is to roundoff
    for (int d : s->boundary_dofs) CHECK((sm.coeffs.row(d) - r.coeffs.row(d)).norm() < 1e-13);
}

TEST_CASE("bijectivity report detects folds and is deterministic") {
    const auto s = space_of(unit_square(), 3, 1);
    MultipatchMap x = interpolate_geometry(s);
    const BijectivityReport a = bijectivity_report(x), b = bijectivity_report(x);
    CHECK(a.min_det == b.min_det);
    CHECK(a.mean_det == b.mean_det);
    x.coeffs.row(s->dof_map[0][5]) = Eigen::RowVector2d(2.0, 2.0);
    CHECK(bijectivity_report(x).min_det < 0);
}
