// Acceptance checks: one PASS/FAIL line per headline requirement. Exit code 1 when any fails.

#include "fixtures.hpp"
#include "oracles.hpp"
#include "stages.hpp"
#include "mpp/errors.hpp"
#include "mpp/pipeline.hpp"
#include "mpp/preprocess.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

using namespace mpp;
using fixtures::data_path;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;
    void require(bool ok, const std::string& why) {
        if (!ok && pass) detail << "FAILED: " << why << "; ";
        pass = pass && ok;
    }
};

std::uint64_t bits(double x) {
    std::uint64_t b;
    std::memcpy(&b, &x, sizeof b);
    return b;
}

PlaneGraph dense(const std::string& name) {
    PlaneGraph g = load_graph(data_path(name));
    for (int e = 0; e < g.n_edges(); ++e) densify_edge(g, e, 65);
    return g;
}

const TemplateCatalogue& catalogue() {
    static const TemplateCatalogue cat;
    return cat;
}

void bijectivity_suite(Outcome& o) {
    const auto start = std::chrono::steady_clock::now();
    std::set<std::string> kinds;
    double worst = std::numeric_limits<double>::infinity();
    int faces = 0;
    for (const char* name : {"unit_square.json", "disc.json", "teardrop.json", "halfdisc.json", "lens.json", "five_face.json"}) {
        const fs::path out = stages::scratch(std::string("acc_") + name);
        const RunOutcome r = run_pipeline(PipelineConfig{}, data_path(name), out.string());
        o.require(r.exit_code == 0, std::string(name) + " did not finish");
        for (const auto& f : r.report["faces"]) {
            kinds.insert(f["domain"].get<std::string>());
            worst = std::min(worst, f["min_det"].get<double>());
            ++faces;
        }
        fs::remove_all(out);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    o.require(worst > 0, "a folded face");
    for (const char* k : {"disc", "teardrop", "half_disc", "lens", "convex_polygon"})
        o.require(kinds.count(k) == 1, std::string("no ") + k + " face in the suite");
    o.require(secs < 60, "slower than 60 s");
    o.detail << faces << " faces, min det J " << worst << ", " << kinds.size() << " domain classes, " << secs << " s";
}

void identity_fixtures(Outcome& o) {
    double worst = 0;
    int iters = 0;
    for (const Template& t : {fixtures::unit_square(), fixtures::square_2x2()}) {
        const auto s = fixtures::space_of(t, 3, 2);
        const BoundaryConstraint c = constrain_boundary(*s, identity_boundary(*s));
        const MultipatchMap id = interpolate_geometry(s);
        const MultipatchMap x0 = initial_map(s, c);
        const SolveResult a = solve_c0dg(x0, c);
        const SolveResult b = solve_weakform(x0, c, DiffusivitySpec{});
        WinslowReport wr;
        const MultipatchMap w = winslow_untangle(x0, c, {}, &wr);
        for (const MultipatchMap* m : {&a.map, &b.map, &w})
            worst = std::max(worst, (m->coeffs - id.coeffs).cwiseAbs().maxCoeff());
        iters = std::max({iters, a.report.iterations, b.report.iterations, wr.iterations});
    }
    o.require(worst <= 1e-10, "coefficient error above 1e-10");
    o.require(iters <= 1, "more than one iteration");
    o.detail << "max coefficient error " << worst << ", max iterations " << iters;
}

void floater_reproduction(Outcome& o) {
    double moved = 0, min_orient = std::numeric_limits<double>::infinity();
    int instances = 0;
    for (int n = 4; n <= 12; n += 2) {
        const NgonSurrogate& s = ngon_surrogate(n);
        Points bnd(s.tri.points.begin(), s.tri.points.begin() + s.tri.boundary_count);
        const Points img = s.op.solve(bnd);
        for (int i = 0; i < s.tri.n_points(); ++i) moved = std::max(moved, (img[i] - s.tri.points[i]).norm());
    }
    for (const char* name : {"unit_square.json", "disc.json", "teardrop.json", "halfdisc.json", "lens.json", "lens_ir.json",
                             "five_face.json", "horseshoe.json"}) {
        const PlaneGraph g = dense(name);
        for (int f = 0; f < g.n_faces(); ++f) {
            if (g.faces[f].size() % 2) continue;
            const PiecewiseLinearMap m = ngon_to_domain(control_domain(g, f, 0.2));
            min_orient = std::min(min_orient, min_orientation(m.images(), m.source().triangles));
            ++instances;
        }
    }
    o.require(moved <= 1e-8, "interior vertex moved");
    o.require(min_orient > 0, "negatively oriented image triangle");
    o.detail << "max interior displacement " << moved << ", min doubled area " << min_orient << " over " << instances
             << " convex targets";
}

void concave_removal(Outcome& o) {
    for (const char* name : {"lshape.json", "star.json"}) {
        const PlaneGraph g = load_graph(data_path(name));
        const ConcavityConfig cfg;
        const ConcavityResult r = remove_concave_corners(g, cfg);
        int concave = 0;
        double a0 = 0, a1 = 0;
        for (int f = 0; f < r.graph.n_faces(); ++f) {
            for (double a : oracle::interior_angles(r.graph, f)) concave += a >= kPi + cfg.eps_angle;
            a1 += r.graph.face_area(f);
        }
        for (int f = 0; f < g.n_faces(); ++f) a0 += g.face_area(f);
        o.require(concave == 0, std::string(name) + " keeps a concave corner");
        o.require(std::abs(a1 - a0) <= 1e-9 * a0, std::string(name) + " area drift");
        o.detail << name << ": " << r.splits << " splits, area drift " << std::abs(a1 - a0) / a0 << "; ";
    }
    Points semi;
    for (int i = 0; i < 20001; ++i) semi.emplace_back(std::cos(kPi * i / 20000.0), std::sin(kPi * i / 20000.0));
    const double q = sampled_quality(semi);
    o.require(std::abs(q - kPi) < 1e-3, "semicircle quality off");
    o.detail << "semicircle Q - pi = " << q - kPi;
}

void selection_oracle(Outcome& o) {
    struct Face {
        PlaneGraph g;
        int f;
    };
    std::vector<Face> pool;
    for (const char* name : {"disc.json", "five_face.json", "lens.json", "lens_ir.json", "teardrop.json", "halfdisc.json"}) {
        const PlaneGraph g = dense(name);
        for (int f = 0; f < g.n_faces(); ++f)
            if (g.faces[f].size() % 2 == 0) pool.push_back({g, f});
    }
    std::mt19937_64 rng(20240611);
    double worst = 0;
    for (int k = 0; k < 20; ++k) {
        const Face& fc = pool[rng() % pool.size()];
        const SurrogateMap s = surrogate_map(fc.g, fc.f, 0.2);
        std::vector<Template> list = catalogue().for_n(fc.g.faces[fc.f].size());
        list.push_back(rc_n_leaf(fc.g.faces[fc.f].size()));
        const ControlTemplate ct = control_template(list[rng() % list.size()], s);
        const double lib = template_cost(ct, s, 0.5), ref = oracle::template_cost(ct, s, 0.5);
        worst = std::max(worst, std::abs(lib - ref) / ref);
    }
    o.require(worst <= 1e-12, "cost differs from the oracle");
    int argmin_ok = 0, argmin_total = 0;
    for (const char* name : {"disc.json", "lens.json", "teardrop.json", "halfdisc.json", "five_face.json"}) {
        const PlaneGraph g = dense(name);
        StrategyConfig cfg;
        cfg.strategy = 2;
        TemplatiseReport rep;
        templatise(g, catalogue(), cfg, &rep);
        // the first selected face sees the untouched graph
        const int f = rep.faces[0].face;
        const SurrogateMap s = surrogate_map(g, f, cfg.mu_angle, cfg.samples_per_edge);
        double best = std::numeric_limits<double>::infinity();
        for (const Template& t : prefilter(g, f, catalogue(), cfg.mu_angle))
            best = std::min(best, oracle::template_cost(control_template(t, s), s, cfg.lambda_patch));
        ++argmin_total;
        argmin_ok += std::abs(rep.faces[0].cost - best) <= 1e-12 * best;
    }
    o.require(argmin_ok == argmin_total, "strategy 2 missed the exhaustive argmin");
    o.detail << "20 pairs, max relative C_T difference " << worst << "; argmin matched " << argmin_ok << "/" << argmin_total;
}

void softmax_optimisation(Outcome& o) {
    const PlaneGraph g = dense("teardrop.json");
    const SurrogateMap s = surrogate_map(g, 0, 0.2);
    const ControlTemplate base = control_template(rc_n_leaf(4), s);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> jitter(-0.05, 0.05);
    double worst_grad = 0, worst_guard = std::numeric_limits<double>::infinity();
    bool monotone = true;
    int starts = 0;
    while (starts < 10) {
        ControlTemplate ct = base;
        for (size_t v = ct.base.n_boundary; v < ct.vertices.size(); ++v) ct.vertices[v] += Vec2(jitter(rng), jitter(rng));
        if (min_corner_cross(ct.vertices, ct.base.quads) <= 0) continue;
        ++starts;
        std::vector<Vec2> grad;
        softmax_cost(ct, s, 6.0, &grad);
        double err = 0, scale = 0;
        const double h = 1e-5;
        for (size_t v = ct.base.n_boundary; v < ct.vertices.size(); ++v)
            for (int d = 0; d < 2; ++d) {
                ControlTemplate a = ct, b = ct;
                a.vertices[v][d] += h;
                b.vertices[v][d] -= h;
                const double fd = (softmax_cost(a, s, 6.0) - softmax_cost(b, s, 6.0)) / (2 * h);
                err = std::max(err, std::abs(fd - grad[v][d]));
                scale = std::max(scale, std::abs(fd));
            }
        worst_grad = std::max(worst_grad, err / scale);
        OptimiseReport rep;
        const ControlTemplate out = optimise_inner_vertices(ct, s, {}, &rep);
        for (size_t i = 1; i < rep.history.size(); ++i) monotone = monotone && rep.history[i] <= rep.history[i - 1];
        for (const auto& q : ct.base.quads)
            for (int k = 0; k < 4; ++k)
                worst_guard = std::min(worst_guard, corner_cross(out.vertices, q, k) / corner_cross(ct.vertices, q, k));
    }
    o.require(worst_grad < 1e-5, "gradient mismatch");
    o.require(worst_guard >= 0.2, "fold guard violated");
    o.require(monotone, "cost increased");
    o.detail << "max relative gradient error " << worst_grad << ", min g/g0 " << worst_guard << " over 10 starts";
}

void untangling(Outcome& o) {
    const auto s = fixtures::space_of(fixtures::l_shape(), 3, 1);
    const BoundaryConstraint c = constrain_boundary(*s, identity_boundary(*s));
    MultipatchMap x = initial_map(s, c);
    const auto& dm = s->dof_map[0];
    const int nu = s->n_basis(0, 0);
    x.coeffs.row(dm[1 + nu]).swap(x.coeffs.row(dm[(nu - 2) + nu * (nu - 2)]));
    WinslowReport rep;
    const MultipatchMap u = winslow_untangle(x, c, {}, &rep);
    const double det = bijectivity_report(u).min_det;
    o.require(rep.min_det_before < 0, "fixture not folded");
    o.require(det > 0 && rep.iterations <= 200, "not untangled within 200 iterations");
    const double eps = 1e-4;
    o.require(regulariser(0.0, eps) == eps, "R_eps(0) != eps");
    const auto sq = fixtures::space_of(fixtures::unit_square(), 3, 1);
    const double w = winslow_energy(interpolate_geometry(sq), eps);
    o.require(std::abs(w - 2) <= 1e-7, "Winslow energy of the identity");
    o.detail << "min det " << rep.min_det_before << " -> " << det << " in " << rep.iterations << " iterations; W(id) - 2 = "
             << w - 2;
}

void homogenisation(Outcome& o) {
    std::vector<double> cov;
    for (double k : {0.0, 1.0, 3.0}) {
        PipelineConfig cfg;
        cfg.diffusivity.kind = DiffusivitySpec::Kind::Homogenise;
        cfg.diffusivity.k = k;
        const stages::Run r = stages::replay(data_path("horseshoe.json"), cfg);
        std::vector<double> areas;
        for (const MultipatchMap& m : r.maps) {
            o.require(bijectivity_report(m).min_det > 0, "folded map at k = " + std::to_string(k));
            const auto a = cell_areas(m);
            areas.insert(areas.end(), a.begin(), a.end());
        }
        cov.push_back(coefficient_of_variation(areas));
    }
    o.require(cov[1] < cov[0] && cov[2] < cov[1], "cell-area variation not strictly decreasing");
    o.detail << "CoV over k = 0, 1, 3: " << cov[0] << ", " << cov[1] << ", " << cov[2];
}

void interface_removal_check(Outcome& o) {
    PipelineConfig plain, ir;
    ir.interface_removal = true;
    const stages::Run a = stages::replay(data_path("lens_ir.json"), plain);
    const stages::Run b = stages::replay(data_path("lens_ir.json"), ir);
    double before = 0, after = 0;
    bool same_boundary = true;
    double drift = 0;
    for (size_t f = 0; f < a.solutions.size(); ++f) {
        const FaceSolution& sb = b.solutions[f];
        o.require(sb.kink_before.has_value() && sb.kink_after.has_value(), "kinks not reported");
        o.require(sb.warnings.empty(), "near-singular control map");
        before = std::max(before, *sb.kink_before);
        after = std::max(after, *sb.kink_after);
        o.require(std::abs(max_interface_kink(a.maps[f]) - *sb.kink_before) < 1e-12, "x^r kink differs from the plain run");
        // the physical boundary coefficients are untouched
        for (int d : b.problems[f].constraint.fixed_dofs)
            for (int k = 0; k < 2; ++k) same_boundary = same_boundary && bits(a.maps[f].coeffs(d, k)) == bits(sb.map.coeffs(d, k));
        // the new control map reproduces r along the boundary
        const auto space = b.problems[f].space;
        const MultipatchMap s = interface_removal(space);
        const Template& t = space->layout;
        for (int q = 0; q < t.n_quads(); ++q)
            for (int side = 0; side < 4; ++side) {
                const int from = t.quads[q][quad_side_from(side)], to = t.quads[q][quad_side_to(side)];
                const int n = t.n_boundary;
                if (!(from < n && to < n && (to == (from + 1) % n || from == (to + 1) % n))) continue;
                for (int i = 0; i <= 40; ++i) {
                    const double tt = i / 40.0;
                    const double u = side == 0 || side == 2 ? tt : (side == 1 ? 1.0 : 0.0);
                    const double v = side == 1 || side == 3 ? tt : (side == 2 ? 1.0 : 0.0);
                    drift = std::max(drift, (s.eval(q, u, v).x - space->geometry[q](u, v).x).norm());
                }
            }
    }
    o.require(after < before, "kink not reduced");
    o.require(same_boundary, "boundary coefficients changed");
    o.require(drift <= 1e-12, "control map moved on the boundary");
    o.detail << "max kink " << before << " -> " << after << " rad; boundary drift of s " << drift;
}

void spline_layer(Outcome& o) {
    double worst_res = 0;
    int level = 0, relaxed = 0;
    for (int i = 0; i < 10; ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "curves/noisy_%02d.json", i);
        const nlohmann::json j = nlohmann::json::parse(stages::slurp(data_path(name)));
        Points pts;
        for (const auto& p : j.at("points")) pts.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
        const FitResult r = fit_curve_relaxed(pts, FitConfig{});
        relaxed += r.lambda < FitConfig{}.lambda;
        for (double v : r.residuals) worst_res = std::max(worst_res, v);
        const KnotVector& k = r.curve.knots;
        level = std::max(level, k.dyadic_level());
        for (size_t m = 0; m < k.size(); ++m)
            o.require(k.value(m) * static_cast<double>(k.denominator()) == static_cast<double>(k.ticks()[m]), "knot not dyadic");
    }
    o.require(worst_res < 1e-3, "residual above mu_LS");

    std::mt19937_64 rng(99);
    auto random_knots = [&](int p) {
        KnotVector k = uniform_knotvector(p, 1 + static_cast<int>(rng() % 3), static_cast<int>(rng() % 2));
        const int extra = static_cast<int>(rng() % 6);
        for (int e = 0; e < extra; ++e) k = dyadic_refine(k, static_cast<int>(rng() % k.n_spans()));
        return k;
    };
    bool closed = true;
    double prolong_err = 0;
    std::uniform_real_distribution<double> coord(-1, 1);
    for (int c = 0; c < 1000; ++c) {
        const int p = 1 + static_cast<int>(rng() % 4);
        KnotVector a = random_knots(p), b = random_knots(p);
        // a union is only defined within one base subdivision
        b = dyadic_refine(uniform_knotvector(p, a.n0(), 0), 0);
        for (int e = static_cast<int>(rng() % 5); e > 0; --e) b = dyadic_refine(b, static_cast<int>(rng() % b.n_spans()));
        const KnotVector u = knot_union(a, b), r = reverse(a), f = dyadic_refine(a, static_cast<int>(rng() % a.n_spans()));
        for (const KnotVector* k : {&u, &r, &f}) closed = closed && k->dyadic_level() <= kTickBits;
        closed = closed && reverse(r) == a && is_superset(u, a) && is_superset(u, b) && is_superset(f, a);
        if (c % 10 == 0) {
            BSplineCurve curve{a, {}};
            for (int i = 0; i < a.n_basis(); ++i) curve.ctrl.emplace_back(coord(rng), coord(rng));
            const BSplineCurve fine = prolong(curve, u);
            for (int i = 0; i <= 200; ++i) prolong_err = std::max(prolong_err, (fine.eval(i / 200.0) - curve.eval(i / 200.0)).norm());
        }
    }
    o.require(closed, "knot algebra left the dyadic lattice");
    o.require(prolong_err <= 1e-13, "prolongation changed the curve");
    o.detail << "max residual " << worst_res << " (" << relaxed << " of 10 with a relaxed bending weight), max dyadic level " << level << "; 1000 knot cases closed; prolongation error "
             << prolong_err;
}

void catalogue_check(Outcome& o) {
    std::ostringstream counts;
    for (const auto& [n, qmax] : std::vector<std::pair<int, int>>{{4, 3}, {6, 4}})
        for (int q = 1; q <= qmax; ++q) {
            std::set<std::vector<int>> lib;
            try {
                for (const PAG& p : enumerate_pags(n, q)) lib.insert(oracle::canonical_key(oracle::abstract_of(p)));
            } catch (const Error&) {
            }
            const auto ref = oracle::brute_force_pags(n, q);
            o.require(lib == ref, "count mismatch at N=" + std::to_string(n) + " q=" + std::to_string(q));
            counts << "(" << n << "," << q << ")=" << lib.size() << " ";
        }
    int templates = 0;
    for (int n : {4, 6, 8}) {
        for (const Template& t : catalogue().for_n(n)) {
            ++templates;
            o.require(validate_template(t).ok, t.id + ": " + validate_template(t).reason);
            const auto val = vertex_valences(t);
            for (int i = 0; i < n; ++i) o.require(val[i] >= 2, t.id + ": boundary valence below 2");
        }
    }
    o.detail << "counts " << counts.str() << "match the brute force; " << templates << " templates valid";
}

void conformity(Outcome& o) {
    int shared = 0, nodes = 0;
    for (const char* name : {"five_face.json", "lshape.json", "star.json"}) {
        const stages::Run r = stages::replay(data_path(name), PipelineConfig{});
        for (int e = 0; e < r.graph.n_edges(); ++e) {
            const auto faces = r.graph.edge_faces(e);
            if (faces.size() != 2) continue;
            ++shared;
            std::set<std::pair<std::uint64_t, std::uint64_t>> in[2];
            for (int k = 0; k < 2; ++k) {
                const auto& cf = r.maps[faces[k]].coeffs;
                for (Eigen::Index i = 0; i < cf.rows(); ++i) in[k].insert({bits(cf(i, 0)), bits(cf(i, 1))});
            }
            for (const Vec2& c : r.curves[e].ctrl)
                o.require(in[0].count({bits(c.x()), bits(c.y())}) && in[1].count({bits(c.x()), bits(c.y())}),
                          std::string(name) + ": shared control point differs");
        }
        const QuadMesh m = extract_mesh(r.graph, r.curves, r.maps, 6);
        std::set<std::pair<std::uint64_t, std::uint64_t>> hashes;
        for (const Vec2& p : m.nodes) o.require(hashes.insert({bits(p.x()), bits(p.y())}).second, "duplicate node");
        std::map<std::pair<int, int>, int> use;
        for (const auto& q : m.quads)
            for (int k = 0; k < 4; ++k) ++use[std::minmax(q[k], q[(k + 1) % 4])];
        for (const auto& [e, c] : use) o.require(c <= 2, "edge shared by more than two cells");
        const long chi = static_cast<long>(m.nodes.size()) - static_cast<long>(use.size()) + static_cast<long>(m.quads.size());
        o.require(chi == 1, std::string(name) + ": mesh is not a watertight disc");
        nodes += static_cast<int>(m.nodes.size());
    }
    o.detail << shared << " shared edges bit-identical; " << nodes << " mesh nodes, watertight";
}

void determinism(Outcome& o) {
    PipelineConfig cfg;
    cfg.extract_mesh = 5;
    cfg.strategy.strategy = 3;
    cfg.seed = 123;
    const fs::path a = stages::scratch("acc_det_a"), b = stages::scratch("acc_det_b");
    run_pipeline(cfg, data_path("five_face.json"), a.string());
    run_pipeline(cfg, data_path("five_face.json"), b.string());
    size_t bytes = 0;
    for (const char* f : {"report.json", "mesh.txt"}) {
        const std::string x = stages::slurp(a / f), y = stages::slurp(b / f);
        o.require(!x.empty() && x == y, std::string(f) + " differs");
        bytes += x.size();
    }
    fs::remove_all(a);
    fs::remove_all(b);
    o.detail << "report and mesh identical (" << bytes << " bytes)";
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> checks{
        {"bijectivity suite", bijectivity_suite},
        {"identity fixtures", identity_fixtures},
        {"Floater linear reproduction", floater_reproduction},
        {"concave-corner removal", concave_removal},
        {"selection oracle equivalence", selection_oracle},
        {"softmax optimisation", softmax_optimisation},
        {"untangling", untangling},
        {"homogenisation trend", homogenisation},
        {"interface removal", interface_removal_check},
        {"spline layer", spline_layer},
        {"catalogue", catalogue_check},
        {"conformity", conformity},
        {"determinism", determinism},
    };
    int failed = 0;
    for (const auto& [name, fn] : checks) {
        Outcome o;
        try {
            fn(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "threw: " << e.what();
        }
        failed += !o.pass;
        std::printf("[%s] %s :: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.str().c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(checks.size()) - failed, checks.size());
    return failed ? 1 : 0;
}
