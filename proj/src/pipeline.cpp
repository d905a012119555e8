#include "mpp/pipeline.hpp"

#include "mpp/controlmap.hpp"
#include "mpp/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

namespace mpp {

using nlohmann::json;

// Configuration.

namespace {

void check(bool ok, const std::string& field) {
    if (!ok) throw Error(ErrorCode::InvalidInput, "invalid config value for " + field);
}

// Reads the keys of `j` into fields; unknown keys are an error so typos do not pass silently.
class Reader {
public:
    Reader(const json& j, std::string section) : j_(j), section_(std::move(section)) {
        if (!j_.is_object()) throw Error(ErrorCode::InvalidInput, "config section " + section_ + " must be an object");
    }
    template <class T>
    Reader& get(const char* key, T& field) {
        seen_.insert(key);
        if (j_.contains(key)) {
            try {
                field = j_.at(key).get<T>();
            } catch (const json::exception&) {
                throw Error(ErrorCode::InvalidInput, "config field " + section_ + "." + key + " has the wrong type");
            }
        }
        return *this;
    }
    const json* sub(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw Error(ErrorCode::InvalidInput, "unknown config key " + section_ + "." + it.key());
    }

private:
    const json& j_;
    std::string section_;
    std::set<std::string> seen_;
};

} // namespace

void validate_config(const PipelineConfig& c) {
    check(c.concavity.eps_angle >= 0 && c.concavity.eps_angle < kPi, "concavity.eps_angle");
    check(c.concavity.mu_concave_bonus > 0, "concavity.mu_concave_bonus");
    check(c.concavity.samples_per_curve >= 3, "concavity.samples_per_curve");
    const StrategyConfig& s = c.strategy;
    check(s.strategy >= 1 && s.strategy <= 3, "strategy.strategy");
    check(s.lambda_patch >= 0, "strategy.lambda_patch");
    check(s.beta > 0, "strategy.beta");
    check(s.mu_relax > 0 && s.mu_relax < 1, "strategy.mu_relax");
    check(s.mu_angle > 0 && s.mu_angle < kPi / 2, "strategy.mu_angle");
    check(s.samples_per_edge >= 3, "strategy.samples_per_edge");
    check(s.split.mu_templated > 0 && s.split.mu_boundary > 0, "strategy.split");
    check(s.split.eps_length >= 0 && s.split.eps_length < 1, "strategy.split.eps_length");
    check(c.fit.degree >= 1 && c.fit.degree <= 5, "fit.degree");
    check(c.fit.n0 >= 1, "fit.n0");
    check(c.fit.lambda >= 0 && c.fit.mu_ls > 0 && c.fit.max_recursions >= 0, "fit");
    const SolverConfig& v = c.solver;
    check(v.eta > 0 && v.mu_stab >= 0 && v.eps_reg > 0, "solver");
    check(v.newton_tol > 0 && v.newton_max_iters > 0 && v.max_backtracks >= 0, "solver.newton");
    check(v.armijo_c > 0 && v.armijo_c < 1, "solver.armijo_c");
    check(v.winslow_max_iters > 0, "solver.winslow_max_iters");
    check(c.diffusivity.k >= 0, "diffusivity.k");
    check(c.extract_mesh == 0 || c.extract_mesh >= 2, "extract_mesh");
    check(c.min_edge_points >= 3, "min_edge_points");
    check(c.svg_samples >= 2, "svg_samples");
}

json config_to_json(const PipelineConfig& c) {
    const StrategyConfig& s = c.strategy;
    return {
        {"concavity",
         {{"eps_angle", c.concavity.eps_angle},
          {"mu_concave_bonus", c.concavity.mu_concave_bonus},
          {"samples_per_curve", c.concavity.samples_per_curve}}},
        {"strategy",
         {{"strategy", s.strategy},
          {"lambda_patch", s.lambda_patch},
          {"beta", s.beta},
          {"mu_relax", s.mu_relax},
          {"mu_angle", s.mu_angle},
          {"samples_per_edge", s.samples_per_edge},
          {"split",
           {{"mu_templated", s.split.mu_templated},
            {"mu_boundary", s.split.mu_boundary},
            {"eps_length", s.split.eps_length}}}}},
        {"fit",
         {{"degree", c.fit.degree},
          {"n0", c.fit.n0},
          {"lambda", c.fit.lambda},
          {"mu_ls", c.fit.mu_ls},
          {"max_recursions", c.fit.max_recursions}}},
        {"solver",
         {{"eta", c.solver.eta},
          {"mu_stab", c.solver.mu_stab},
          {"eps_reg", c.solver.eps_reg},
          {"newton_tol", c.solver.newton_tol},
          {"newton_max_iters", c.solver.newton_max_iters},
          {"armijo_c", c.solver.armijo_c},
          {"max_backtracks", c.solver.max_backtracks},
          {"winslow_max_iters", c.solver.winslow_max_iters}}},
        {"diffusivity",
         {{"kind", c.diffusivity.kind == DiffusivitySpec::Kind::Homogenise ? "homogenise" : "identity"},
          {"k", c.diffusivity.k}}},
        {"interface_removal", c.interface_removal},
        {"conformity", c.conformity},
        {"extract_mesh", c.extract_mesh},
        {"min_edge_points", c.min_edge_points},
        {"svg_samples", c.svg_samples},
        {"catalogue", c.catalogue},
        {"seed", c.seed},
    };
}

PipelineConfig config_from_json(const json& j) {
    PipelineConfig c;
    Reader top(j, "config");
    if (const json* q = top.sub("concavity"))
        Reader(*q, "concavity")
            .get("eps_angle", c.concavity.eps_angle)
            .get("mu_concave_bonus", c.concavity.mu_concave_bonus)
            .get("samples_per_curve", c.concavity.samples_per_curve)
            .finish();
    if (const json* q = top.sub("strategy")) {
        StrategyConfig& s = c.strategy;
        Reader r(*q, "strategy");
        r.get("strategy", s.strategy)
            .get("lambda_patch", s.lambda_patch)
            .get("beta", s.beta)
            .get("mu_relax", s.mu_relax)
            .get("mu_angle", s.mu_angle)
            .get("samples_per_edge", s.samples_per_edge);
        if (const json* sp = r.sub("split"))
            Reader(*sp, "strategy.split")
                .get("mu_templated", s.split.mu_templated)
                .get("mu_boundary", s.split.mu_boundary)
                .get("eps_length", s.split.eps_length)
                .finish();
        r.finish();
    }
    if (const json* q = top.sub("fit"))
        Reader(*q, "fit")
            .get("degree", c.fit.degree)
            .get("n0", c.fit.n0)
            .get("lambda", c.fit.lambda)
            .get("mu_ls", c.fit.mu_ls)
            .get("max_recursions", c.fit.max_recursions)
            .finish();
    if (const json* q = top.sub("solver"))
        Reader(*q, "solver")
            .get("eta", c.solver.eta)
            .get("mu_stab", c.solver.mu_stab)
            .get("eps_reg", c.solver.eps_reg)
            .get("newton_tol", c.solver.newton_tol)
            .get("newton_max_iters", c.solver.newton_max_iters)
            .get("armijo_c", c.solver.armijo_c)
            .get("max_backtracks", c.solver.max_backtracks)
            .get("winslow_max_iters", c.solver.winslow_max_iters)
            .finish();
    if (const json* q = top.sub("diffusivity")) {
        std::string kind = "identity";
        Reader(*q, "diffusivity").get("kind", kind).get("k", c.diffusivity.k).finish();
        if (kind == "identity")
            c.diffusivity.kind = DiffusivitySpec::Kind::Identity;
        else if (kind == "homogenise")
            c.diffusivity.kind = DiffusivitySpec::Kind::Homogenise;
        else
            throw Error(ErrorCode::InvalidInput, "diffusivity.kind must be identity or homogenise");
    }
    top.get("interface_removal", c.interface_removal)
        .get("conformity", c.conformity)
        .get("extract_mesh", c.extract_mesh)
        .get("min_edge_points", c.min_edge_points)
        .get("svg_samples", c.svg_samples)
        .get("catalogue", c.catalogue)
        .get("seed", c.seed)
        .finish();
    c.strategy.seed = c.seed;
    validate_config(c);
    return c;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidInput, "cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidInput, std::string("malformed config JSON: ") + e.what());
    }
    return config_from_json(j);
}

// Curve fitting and conformity.

FittedEdges fit_edges(const PlaneGraph& g, const FitConfig& cfg) {
    FittedEdges out;
    for (int e = 0; e < g.n_edges(); ++e) {
        const FitResult r = fit_curve_relaxed(g.edges[e].points, cfg);
        out.curves.push_back(r.curve);
        out.recursions.push_back(r.recursions);
        out.max_residual.push_back(r.residuals.empty() ? 0.0 : *std::max_element(r.residuals.begin(), r.residuals.end()));
    }
    return out;
}

BSplineCurve face_curve(const PlaneGraph& g, const std::vector<BSplineCurve>& curves, int face, int i) {
    const EdgeRef r = g.faces[face].edges[i];
    return r.reversed ? reverse(curves[r.id]) : curves[r.id];
}

namespace {

const FaceTemplate& face_template(const PlaneGraph& g, int face) {
    const auto& t = g.faces[face].tmpl;
    if (!t) throw Error(ErrorCode::InvalidInput, "face " + std::to_string(face) + " has no template");
    return *t;
}

// Template boundary edge i runs i -> i+1; propagated edge knots are stored low -> high.
KnotPropagation face_propagation(const PlaneGraph& g, const std::vector<BSplineCurve>& curves, int face,
                                 std::vector<KnotVector>* boundary) {
    const Template& t = face_template(g, face).layout;
    const int n = g.faces[face].size();
    std::vector<KnotVector> in;
    for (int i = 0; i < n; ++i) in.push_back(face_curve(g, curves, face, i).knots);
    KnotPropagation kp = propagate_knots(t, in);
    if (boundary) {
        std::map<std::pair<int, int>, int> idx;
        for (size_t e = 0; e < t.edges.size(); ++e) idx[{t.edges[e][0], t.edges[e][1]}] = static_cast<int>(e);
        boundary->clear();
        for (int i = 0; i < n; ++i) {
            const int a = i, b = (i + 1) % n;
            const KnotVector& k = kp.edge_knots[idx.at({std::min(a, b), std::max(a, b)})];
            boundary->push_back(a < b ? k : reverse(k));
        }
    }
    return kp;
}

BSplineCurve prolong_to(const BSplineCurve& c, const KnotVector& k) { return c.knots == k ? c : prolong(c, k); }

} // namespace

std::vector<KnotVector> face_boundary_knots(const PlaneGraph& g, const std::vector<BSplineCurve>& curves, int face) {
    std::vector<KnotVector> out;
    face_propagation(g, curves, face, &out);
    return out;
}

int make_conforming(const PlaneGraph& g, std::vector<BSplineCurve>& curves) {
    std::vector<KnotVector> target;
    for (const BSplineCurve& c : curves) target.push_back(c.knots);
    // knot vectors only grow and stay dyadic, so the sweep terminates
    int sweeps = 0;
    for (bool changed = true; changed; ++sweeps) {
        changed = false;
        std::vector<BSplineCurve> shells;
        for (const KnotVector& k : target) shells.push_back({k, {}});
        for (int f = 0; f < g.n_faces(); ++f) {
            const std::vector<KnotVector> need = face_boundary_knots(g, shells, f);
            for (int i = 0; i < g.faces[f].size(); ++i) {
                const EdgeRef r = g.faces[f].edges[i];
                const KnotVector k = r.reversed ? reverse(need[i]) : need[i];
                const KnotVector u = knot_union(target[r.id], k);
                if (u != target[r.id]) {
                    target[r.id] = u;
                    changed = true;
                }
            }
        }
    }
    for (size_t e = 0; e < curves.size(); ++e) curves[e] = prolong_to(curves[e], target[e]);
    return sweeps;
}

// Face problems.

FaceProblem face_problem(const PlaneGraph& g, const std::vector<BSplineCurve>& curves, int face,
                         const PipelineConfig& cfg) {
    const FaceTemplate& ft = face_template(g, face);
    const ControlDomain dom = control_domain(g, face, cfg.strategy.mu_angle);
    ControlTemplate ct;
    if (ft.control && ft.control->size() == ft.layout.vertices.size())
        ct = ControlTemplate{ft.layout, *ft.control};
    else
        ct = untangle_quadrangulation(transfer_vertices(ft.layout, dom, cfg.strategy.samples_per_edge));
    const CoonsMap r(ct, dom);

    std::vector<KnotVector> bk;
    const KnotPropagation kp = face_propagation(g, curves, face, &bk);
    FaceProblem p;
    p.face = face;
    p.domain = dom.kind;
    p.space = std::make_shared<const MultipatchSpace>(build_space(r, kp.quad_knots));
    BoundaryData data;
    for (int i = 0; i < g.faces[face].size(); ++i) data.push_back(prolong_to(face_curve(g, curves, face, i), bk[i]));
    p.constraint = constrain_boundary(*p.space, data);
    return p;
}

namespace {

struct Harmonic {
    MultipatchMap map;
    NewtonReport newton;
    bool untangled = false;
    WinslowReport winslow;
};

Harmonic harmonic_solve(const std::shared_ptr<const MultipatchSpace>& space, const BoundaryConstraint& c,
                        const SolverConfig& cfg) {
    Harmonic h;
    SolveResult r = solve_c0dg(initial_map(space, c), c, cfg);
    h.map = r.map;
    h.newton = r.report;
    if (bijectivity_report(h.map).min_det <= 0) {
        h.untangled = true;
        const MultipatchMap w = winslow_untangle(h.map, c, cfg, &h.winslow);
        const SolveResult polish = solve_weakform(w, c, {}, cfg);
        // the barrier keeps the weak-form iterate unfolded in practice; fall back otherwise
        if (bijectivity_report(polish.map).min_det > 0) {
            h.map = polish.map;
            h.newton = polish.report;
        } else {
            h.map = w;
        }
    }
    return h;
}

} // namespace

constexpr double kControlDetRatio = 1e-6;

FaceSolution solve_face(const FaceProblem& p, const PipelineConfig& cfg) {
    FaceSolution out;
    Harmonic h = harmonic_solve(p.space, p.constraint, cfg.solver);
    if (cfg.interface_removal) {
        const MultipatchMap s = interface_removal(p.space);
        // no stabilisation is applied; a near-singular control map is flagged instead
        const BijectivityReport sb = bijectivity_report(s);
        if (!(sb.min_det > kControlDetRatio * sb.mean_det))
            out.warnings.push_back("interface-removal control map is near-singular (min/mean det " +
                                   std::to_string(sb.min_det / sb.mean_det) + ")");
        auto space_s = std::make_shared<const MultipatchSpace>(with_geometry(*p.space, spline_geometry(s)));
        Harmonic hs = harmonic_solve(space_s, p.constraint, cfg.solver);
        out.kink_before = max_interface_kink(h.map);
        out.kink_after = max_interface_kink(hs.map);
        h = std::move(hs);
    }
    out.map = h.map;
    out.newton = h.newton;
    out.untangled = h.untangled;
    out.winslow = h.winslow;
    if (cfg.diffusivity.kind == DiffusivitySpec::Kind::Homogenise) {
        SolveResult r = homogenise(out.map, p.constraint, cfg.diffusivity.k, cfg.solver);
        out.map = r.map;
        out.homogenise = r.report;
    }
    out.min_det = bijectivity_report(out.map).min_det;
    return out;
}

// Mesh extraction.

namespace {

enum NodeKind { GraphVertex, GraphEdge, FaceVertex, FaceEdge, PatchInterior };
using NodeKey = std::tuple<int, int, int, int, int>;

int corner_of(int a, int b, int n) {
    if (a == 0 && b == 0) return 0;
    if (a == n - 1 && b == 0) return 1;
    if (a == n - 1 && b == n - 1) return 2;
    if (a == 0 && b == n - 1) return 3;
    return -1;
}

} // namespace

QuadMesh extract_mesh(const PlaneGraph& g, const std::vector<BSplineCurve>& curves,
                      const std::vector<MultipatchMap>& maps, int n) {
    if (n < 2) throw Error(ErrorCode::InvalidInput, "mesh needs at least 2 nodes per direction");
    if (static_cast<int>(maps.size()) != g.n_faces()) throw Error(ErrorCode::InvalidInput, "one map per face required");
    QuadMesh mesh;
    std::map<NodeKey, int> ids;
    auto node = [&](const NodeKey& key, const auto& position) {
        auto [it, fresh] = ids.emplace(key, static_cast<int>(mesh.nodes.size()));
        if (fresh) mesh.nodes.push_back(position());
        return it->second;
    };
    const double step = 1.0 / (n - 1);
    for (int f = 0; f < g.n_faces(); ++f) {
        const MultipatchMap& x = maps[f];
        const MultipatchSpace& s = *x.space;
        if (bijectivity_report(x).min_det <= 0) throw Error(ErrorCode::FoldedMap, "face " + std::to_string(f) + " is folded");
        const int N = s.layout.n_boundary;
        const std::vector<int> fv = g.face_vertices(f);
        for (int q = 0; q < s.n_patches(); ++q) {
            const auto& quad = s.layout.quads[q];
            std::vector<int> local(n * n);
            for (int b = 0; b < n; ++b)
                for (int a = 0; a < n; ++a) {
                    const double u = a * step, v = b * step;
                    auto at_map = [&] { return x.eval(q, u, v).x; };
                    int id;
                    if (const int k = corner_of(a, b, n); k >= 0) {
                        const int tv = quad[k];
                        if (tv < N) {
                            const int gv = fv[tv];
                            id = node({GraphVertex, gv, 0, 0, 0}, [&] { return g.vertices[gv]; });
                        } else {
                            id = node({FaceVertex, f, tv, 0, 0}, at_map);
                        }
                    } else if (a == 0 || a == n - 1 || b == 0 || b == n - 1) {
                        const int side = b == 0 ? 0 : a == n - 1 ? 1 : b == n - 1 ? 2 : 3;
                        const int from = quad[quad_side_from(side)], to = quad[quad_side_to(side)];
                        const int k = (side == 0 || side == 2) ? a : b;
                        const bool boundary = from < N && to < N && ((from + 1) % N == to || (to + 1) % N == from);
                        if (boundary) {
                            const int i = (from + 1) % N == to ? from : to; // face edge i runs i -> i+1
                            const int kf = from == i ? k : n - 1 - k;
                            const EdgeRef r = g.faces[f].edges[i];
                            const int kc = r.reversed ? n - 1 - kf : kf;
                            id = node({GraphEdge, r.id, kc, 0, 0}, [&] { return curves[r.id].eval(kc * step); });
                        } else {
                            const int te = s.quad_edges[q][side];
                            const int kl = from < to ? k : n - 1 - k;
                            id = node({FaceEdge, f, te, kl, 0}, at_map);
                        }
                    } else {
                        id = node({PatchInterior, f, q, a, b}, at_map);
                    }
                    local[a + n * b] = id;
                }
            for (int b = 0; b + 1 < n; ++b)
                for (int a = 0; a + 1 < n; ++a) {
                    const std::array<int, 4> c{local[a + n * b], local[a + 1 + n * b], local[a + 1 + n * (b + 1)],
                                               local[a + n * (b + 1)]};
                    Points poly;
                    for (int id : c) poly.push_back(mesh.nodes[id]);
                    if (signed_area(poly) <= 0)
                        throw Error(ErrorCode::FoldedMap, "inverted mesh cell in face " + std::to_string(f));
                    mesh.quads.push_back(c);
                }
        }
    }
    return mesh;
}

std::string mesh_to_string(const QuadMesh& m) {
    std::ostringstream os;
    char buf[96];
    os << "MPPQUAD 1\nnodes " << m.nodes.size() << '\n';
    for (const Vec2& p : m.nodes) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g\n", p.x(), p.y());
        os << buf;
    }
    os << "quads " << m.quads.size() << '\n';
    for (const auto& q : m.quads) os << q[0] << ' ' << q[1] << ' ' << q[2] << ' ' << q[3] << '\n';
    return os.str();
}

// SVG.

namespace {

Points sample_curve(const BSplineCurve& c, int per_span) {
    const std::vector<double> u = c.knots.unique_values();
    Points out{c.eval(u.front())};
    for (size_t s = 0; s + 1 < u.size(); ++s)
        for (int k = 1; k <= per_span; ++k) out.push_back(c.eval(u[s] + (u[s + 1] - u[s]) * k / per_span));
    return out;
}

} // namespace

std::string svg_overview(const std::vector<BSplineCurve>& curves, const std::vector<MultipatchMap>& maps, int per_span) {
    std::vector<Points> boundary, iso;
    for (const BSplineCurve& c : curves) boundary.push_back(sample_curve(c, per_span));
    for (const MultipatchMap& x : maps) {
        const MultipatchSpace& s = *x.space;
        for (int q = 0; q < s.n_patches(); ++q)
            for (int dir = 0; dir < 2; ++dir) {
                const std::vector<double> lines = s.knots[q][dir].unique_values();
                const std::vector<double> along = s.knots[q][1 - dir].unique_values();
                for (size_t l = 1; l + 1 < lines.size(); ++l) {
                    Points pts;
                    for (size_t sp = 0; sp + 1 < along.size(); ++sp)
                        for (int k = sp == 0 ? 0 : 1; k <= per_span; ++k) {
                            const double t = along[sp] + (along[sp + 1] - along[sp]) * k / per_span;
                            pts.push_back(dir == 0 ? x.eval(q, lines[l], t).x : x.eval(q, t, lines[l]).x);
                        }
                    iso.push_back(std::move(pts));
                }
            }
    }
    Vec2 lo = Vec2::Constant(1e300), hi = Vec2::Constant(-1e300);
    for (const Points& ps : boundary)
        for (const Vec2& p : ps) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
    if (boundary.empty()) lo = hi = Vec2::Zero();
    const double width = 800, margin = 10;
    const double scale = (width - 2 * margin) / std::max({hi.x() - lo.x(), hi.y() - lo.y(), 1e-12});
    const double height = (hi.y() - lo.y()) * scale + 2 * margin;
    char buf[128];
    std::ostringstream os;
    std::snprintf(buf, sizeof buf, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\">\n", width, height);
    os << buf;
    auto path = [&](const Points& pts, const char* style) {
        os << "<polyline fill=\"none\" " << style << " points=\"";
        for (const Vec2& p : pts) {
            std::snprintf(buf, sizeof buf, "%.4f,%.4f ", margin + (p.x() - lo.x()) * scale, margin + (hi.y() - p.y()) * scale);
            os << buf;
        }
        os << "\"/>\n";
    };
    for (const Points& ps : iso) path(ps, "stroke=\"#999\" stroke-width=\"0.5\"");
    for (const Points& ps : boundary) path(ps, "stroke=\"#000\" stroke-width=\"1.5\"");
    os << "</svg>\n";
    return os.str();
}

json face_spline_json(const MultipatchMap& x) {
    json coeffs = json::array();
    for (int i = 0; i < x.coeffs.rows(); ++i) coeffs.push_back({x.coeffs(i, 0), x.coeffs(i, 1)});
    return {{"space", space_to_json(*x.space)}, {"coefficients", coeffs}};
}

// Driver.

namespace {

using Clock = std::chrono::steady_clock;

template <class F>
auto run_stage(const char* name, int face, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        std::string where = std::string("stage ") + name;
        if (face >= 0) where += " face " + std::to_string(face);
        throw Error(e.code(), where + ": " + e.what());
    }
}

json newton_json(const NewtonReport& r) {
    return {{"iterations", r.iterations}, {"converged", r.converged}, {"residuals", r.residuals}, {"min_det", r.min_det}};
}

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(ErrorCode::InvalidInput, "cannot write " + p.string());
    out << text;
}

} // namespace

RunOutcome run_pipeline(const PipelineConfig& cfg_in, const std::string& graph_path, const std::string& out_dir) {
    PipelineConfig cfg = cfg_in;
    cfg.strategy.seed = cfg.seed;
    validate_config(cfg);
    namespace fs = std::filesystem;
    const fs::path out(out_dir);
    fs::create_directories(out);

    RunOutcome res;
    json& rep = res.report;
    rep["config"] = config_to_json(cfg);
    rep["input"] = fs::path(graph_path).filename().string();
    auto t0 = Clock::now();
    auto lap = [&](const char* stage) {
        const auto t1 = Clock::now();
        res.timings[stage] = std::chrono::duration<double>(t1 - t0).count();
        t0 = t1;
    };
    auto finish = [&](const std::string& status) {
        rep["status"] = status;
        write_file(out / "report.json", rep.dump(1) + "\n");
        write_file(out / "timings.json", res.timings.dump(1) + "\n");
    };

    PlaneGraph g = run_stage("load", -1, [&] {
        PlaneGraph h = load_graph(graph_path);
        for (int e = 0; e < h.n_edges(); ++e) densify_edge(h, e, cfg.min_edge_points);
        return h;
    });
    lap("load");

    ConcavityResult cr = run_stage("preprocess", -1, [&] { return remove_concave_corners(g, cfg.concavity); });
    g = std::move(cr.graph);
    rep["preprocess"] = {{"splits", cr.splits}, {"faces", g.n_faces()}};
    rep["manual_faces"] = cr.manual_faces;
    lap("preprocess");
    if (!cr.manual_faces.empty()) {
        rep["faces"] = json::array();
        finish("manual");
        res.exit_code = 2;
        return res;
    }

    const TemplateCatalogue cat = run_stage("catalogue", -1, [&] {
        return cfg.catalogue.empty() ? TemplateCatalogue{} : TemplateCatalogue::load(cfg.catalogue);
    });
    TemplatiseReport trep;
    g = run_stage("templatise", -1, [&] { return templatise(g, cat, cfg.strategy, &trep); });
    rep["templatise"] = {{"split_edges", trep.split_edges}, {"faces", g.n_faces()}, {"edges", g.n_edges()}};
    lap("templatise");

    FittedEdges fe = run_stage("fit", -1, [&] { return fit_edges(g, cfg.fit); });
    rep["fit"] = {{"recursions", fe.recursions}, {"max_residual", fe.max_residual}};
    lap("fit");
    std::vector<BSplineCurve> curves = std::move(fe.curves);
    if (cfg.conformity) {
        const int sweeps = run_stage("conformity", -1, [&] { return make_conforming(g, curves); });
        rep["conformity"] = {{"sweeps", sweeps}};
    }
    lap("conformity");

    std::vector<FaceProblem> problems;
    for (int f = 0; f < g.n_faces(); ++f)
        problems.push_back(run_stage("controlmap", f, [&] { return face_problem(g, curves, f, cfg); }));
    lap("controlmap");

    std::vector<std::future<FaceSolution>> jobs;
    for (int f = 0; f < g.n_faces(); ++f)
        jobs.push_back(std::async(std::launch::async, [&, f] {
            return run_stage("solve", f, [&] { return solve_face(problems[f], cfg); });
        }));
    std::vector<FaceSolution> sols;
    for (auto& j : jobs) sols.push_back(j.get());
    lap("solve");

    json faces = json::array();
    std::vector<MultipatchMap> maps;
    for (int f = 0; f < g.n_faces(); ++f) {
        const FaceSolution& s = sols[f];
        const FaceTemplate& ft = *g.faces[f].tmpl;
        json jf = {{"face", f},
                   {"edges", g.faces[f].size()},
                   {"template", ft.layout.id},
                   {"patches", ft.layout.n_quads()},
                   {"cost", ft.cost},
                   {"domain", domain_kind_name(problems[f].domain)},
                   {"dofs", problems[f].space->n_dofs},
                   {"newton", newton_json(s.newton)},
                   {"untangled", s.untangled},
                   {"min_det", s.min_det}};
        if (s.untangled) jf["winslow_iterations"] = s.winslow.iterations;
        if (s.homogenise) jf["homogenise"] = newton_json(*s.homogenise);
        if (s.kink_before) jf["kink_before"] = *s.kink_before;
        if (s.kink_after) jf["kink_after"] = *s.kink_after;
        if (!s.warnings.empty()) jf["warnings"] = s.warnings;
        faces.push_back(jf);
        maps.push_back(s.map);
        write_file(out / ("face_" + std::to_string(f) + ".json"), face_spline_json(s.map).dump() + "\n");
    }
    rep["faces"] = faces;
    for (int f = 0; f < g.n_faces(); ++f)
        if (!(sols[f].min_det > 0)) {
            finish("failed");
            throw Error(ErrorCode::FoldedMap, "stage solve face " + std::to_string(f) + ": final map is folded");
        }

    write_file(out / "overview.svg", svg_overview(curves, maps, cfg.svg_samples));
    if (cfg.extract_mesh > 0) {
        const QuadMesh m = run_stage("mesh", -1, [&] { return extract_mesh(g, curves, maps, cfg.extract_mesh); });
        write_file(out / "mesh.txt", mesh_to_string(m));
        rep["mesh"] = {{"nodes", m.nodes.size()}, {"quads", m.quads.size()}};
    }
    lap("export");
    finish("ok");
    return res;
}

} // namespace mpp
