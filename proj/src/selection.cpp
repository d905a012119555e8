#include "mpp/selection.hpp"
#include "mpp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace mpp {

// Face and edge choice.

int select_face(const PlaneGraph& g) {
    std::vector<int> cand;
    for (int f = 0; f < g.n_faces(); ++f)
        if (!g.faces[f].tmpl) cand.push_back(f);
    if (cand.empty()) throw Error(ErrorCode::AllTemplated, "every face already carries a template");
    std::vector<int> even;
    for (int f : cand)
        if (g.faces[f].size() >= 4 && g.faces[f].size() % 2 == 0) even.push_back(f);
    if (!even.empty()) cand = even;
    auto templated_edges = [&](int f) {
        int m = 0;
        for (const EdgeRef& r : g.faces[f].edges) m += g.is_templated_edge(r.id);
        return m;
    };
    int best = -1, best_m = 0;
    for (int f : cand) {
        const int m = templated_edges(f);
        if (best < 0 || m < best_m || (m == best_m && g.faces[f].size() < g.faces[best].size())) {
            best = f;
            best_m = m;
        }
    }
    return best;
}

double scaled_length(const PlaneGraph& g, int edge, const SplitPolicy& p) {
    double s = g.edge_length(edge);
    if (!g.is_templated_edge(edge)) s *= p.mu_templated;
    if (g.is_boundary_edge(edge)) s *= p.mu_boundary;
    return s;
}

std::vector<SplitSpec> select_split_edges(const PlaneGraph& g, int face, const SplitPolicy& p) {
    const Face& f = g.faces[face];
    const int n = f.size();
    if (n >= 4 && n % 2 == 0) throw Error(ErrorCode::NotApplicable, "face is already even-sided");
    std::vector<int> edges;
    for (const EdgeRef& r : f.edges)
        if (std::find(edges.begin(), edges.end(), r.id) == edges.end()) edges.push_back(r.id);
    double lmax = 0;
    for (int e : edges) lmax = std::max(lmax, g.edge_length(e));
    const double eps = n == 2 ? 0.5 * p.eps_length : p.eps_length;
    std::vector<int> keep;
    for (int e : edges)
        if (g.edge_length(e) >= eps * lmax) keep.push_back(e);
    // descending scaled length, lowest id on ties
    std::stable_sort(keep.begin(), keep.end(),
                     [&](int a, int b) { return scaled_length(g, a, p) > scaled_length(g, b, p); });
    if (n != 2) return {{keep.front(), {}}};
    if (keep.size() == 1 || scaled_length(g, keep[0], p) >= 2 * scaled_length(g, keep[1], p))
        return {{keep[0], {1.0 / 3.0, 2.0 / 3.0}}};
    return {{keep[0], {}}, {keep[1], {}}};
}

// Surrogate map.

SurrogateMap surrogate_map(const PlaneGraph& g, int face, double mu_angle, int spe) {
    SurrogateMap s;
    s.face = face;
    s.samples_per_edge = spe;
    s.domain = control_domain(g, face, mu_angle);
    s.face_samples = sample_face(g, face, spe);
    const int n = g.faces[face].size();
    const int m = static_cast<int>(s.face_samples.size());
    for (int i = 0; i < n; ++i) {
        const int k = i * (spe - 1);
        const Vec2& p = s.face_samples[k];
        s.boundary_angles.push_back(ccw_angle(s.face_samples[(k + 1) % m] - p, s.face_samples[(k + m - 1) % m] - p));
    }
    const double h = polyline_length(s.face_samples) / m;
    Triangulation tri = triangulate(s.face_samples, h);
    const PiecewiseLinearMap forward = floater_map(tri, s.domain.sample_boundary(spe));
    if (!forward.is_bijective())
        throw Error(ErrorCode::FoldedSurrogate, "surrogate map of face " + std::to_string(face) + " folds");
    Triangulation img = tri;
    img.points = forward.images();
    s.to_face = PiecewiseLinearMap(std::move(img), tri.points);
    s.ngon = ngon_to_domain(s.domain, spe);
    return s;
}

ControlTemplate control_template(const Template& t, const SurrogateMap& s) {
    if (t.n_boundary != s.n_edges()) throw Error(ErrorCode::InvalidInput, "template does not match the face size");
    ControlTemplate ct{t, Points(t.vertices.size())};
    for (int v = 0; v < t.n_vertices(); ++v)
        ct.vertices[v] = v < t.n_boundary ? s.domain.break_point(v) : s.ngon.evaluate(t.vertices[v]);
    return untangle_quadrangulation(ct);
}

namespace {

// Point at parameter t from v toward w. Boundary arcs are read as the sampled polyline the
// surrogate was built on, so nearby points never leave its triangulation.
Vec2 edge_point_from(const ControlTemplate& ct, const SurrogateMap& s, int v, int w, double t) {
    const int n = ct.base.n_boundary;
    const bool fwd = v < n && w < n && w == (v + 1) % n;
    const bool bwd = v < n && w < n && v == (w + 1) % n;
    if (!fwd && !bwd) return ct.vertices[v] + t * (ct.vertices[w] - ct.vertices[v]);
    const int m = s.samples_per_edge - 1;
    const double u = t * m;
    const int j = std::clamp(static_cast<int>(std::floor(u)), 0, m - 1);
    const double f = u - j;
    auto sample = [&](int k) {
        return fwd ? s.domain.edge_point(v, static_cast<double>(k) / m) : s.domain.edge_point(w, static_cast<double>(m - k) / m);
    };
    return f == 0.0 ? sample(j) : Vec2((1 - f) * sample(j) + f * sample(j + 1));
}

bool is_arc(const ControlTemplate& ct, int v, int w) {
    const int n = ct.base.n_boundary;
    return v < n && w < n && (w == (v + 1) % n || v == (w + 1) % n);
}

} // namespace

double preferred_angle(const Template& t, const std::vector<int>& valence, int v, const std::vector<double>& boundary_angles) {
    if (v < t.n_boundary) return std::min(boundary_angles[v], 0.5 * kPi);
    return 2 * kPi / valence[v];
}

double template_cost(const ControlTemplate& ct, const SurrogateMap& s, double lambda_patch, AngleLedger* ledger) {
    const auto val = vertex_valences(ct.base);
    const double t1 = 1.0 / (s.samples_per_edge - 1);
    double hi = -std::numeric_limits<double>::infinity(), lo = std::numeric_limits<double>::infinity();
    if (ledger) ledger->entries.clear();
    for (int q = 0; q < ct.base.n_quads(); ++q) {
        const auto& quad = ct.base.quads[q];
        for (int k = 0; k < 4; ++k) {
            const int v = quad[k], w1 = quad[(k + 1) % 4], w2 = quad[(k + 3) % 4];
            const Vec2 p0 = s(ct.vertices[v]);
            const Vec2 u1 = s(edge_point_from(ct, s, v, w1, t1)) - p0;
            const Vec2 u2 = s(edge_point_from(ct, s, v, w2, t1)) - p0;
            const double angle = ccw_angle(u1, u2);
            const double pref = preferred_angle(ct.base, val, v, s.boundary_angles);
            const double ratio = angle / pref;
            hi = std::max(hi, ratio);
            lo = std::min(lo, ratio);
            if (ledger) ledger->entries.push_back({q, k, v, angle, pref, ratio});
        }
    }
    if (ledger) {
        ledger->max_ratio = hi;
        ledger->min_ratio = lo;
    }
    return hi / lo + lambda_patch * ct.base.n_quads();
}

// Softmax cost.

double softmax(const std::vector<double>& x, double beta) {
    const double m = *std::max_element(x.begin(), x.end());
    double num = 0, den = 0;
    for (double v : x) {
        const double e = std::exp(beta * (v - m));
        num += e * v;
        den += e;
    }
    return num / den;
}

double softmin(const std::vector<double>& x, double beta) {
    std::vector<double> neg(x.size());
    std::transform(x.begin(), x.end(), neg.begin(), [](double v) { return -v; });
    return -softmax(neg, beta);
}

namespace {

constexpr double kFdStep = 1e-3;

struct CornerTerm {
    int v, w1, w2;
    double theta;
};

std::vector<CornerTerm> corner_terms(const ControlTemplate& ct, const SurrogateMap& s) {
    const auto val = vertex_valences(ct.base);
    std::vector<CornerTerm> out;
    for (const auto& quad : ct.base.quads)
        for (int k = 0; k < 4; ++k) {
            const int v = quad[k];
            const double theta = v < ct.base.n_boundary ? s.boundary_angles[v] / (val[v] - 1) : 2 * kPi / val[v];
            out.push_back({v, quad[(k + 1) % 4], quad[(k + 3) % 4], theta});
        }
    return out;
}

// Angle ratio of one corner; optional gradient contributions scaled by `weight`.
double corner_ratio(const ControlTemplate& ct, const SurrogateMap& s, const CornerTerm& c, double weight,
                    std::vector<Vec2>* grad) {
    const Vec2& pv = ct.vertices[c.v];
    const Vec2 p1 = edge_point_from(ct, s, c.v, c.w1, kFdStep);
    const Vec2 p2 = edge_point_from(ct, s, c.v, c.w2, kFdStep);
    const Vec2 x0 = s(pv);
    const Vec2 u1 = s(p1) - x0, u2 = s(p2) - x0;
    const double cr = cross(u1, u2), dt = u1.dot(u2);
    double angle = std::atan2(cr, dt);
    if (angle < 0) angle += 2 * kPi;
    if (grad) {
        const double r2 = cr * cr + dt * dt;
        const Vec2 da_du1 = (dt * Vec2(u2.y(), -u2.x()) - cr * u2) / r2;
        const Vec2 da_du2 = (dt * Vec2(-u1.y(), u1.x()) - cr * u1) / r2;
        const Mat2 j0 = s.to_face.jacobian(pv);
        const double f = weight / c.theta;
        auto push = [&](int w, const Vec2& p, const Vec2& da) {
            // u = x(p) - x(v), p = v + step (w - v) on straight edges
            const Vec2 gv = (-j0).transpose() * da;
            (*grad)[c.v] += f * gv;
            if (!is_arc(ct, c.v, w)) {
                const Mat2 jp = s.to_face.jacobian(p);
                (*grad)[c.v] += f * ((1 - kFdStep) * jp).transpose() * da;
                (*grad)[w] += f * (kFdStep * jp).transpose() * da;
            }
        };
        push(c.w1, p1, da_du1);
        push(c.w2, p2, da_du2);
    }
    return angle / c.theta;
}

} // namespace

std::vector<double> angle_ratios(const ControlTemplate& ct, const SurrogateMap& s) {
    std::vector<double> h;
    for (const CornerTerm& c : corner_terms(ct, s)) h.push_back(corner_ratio(ct, s, c, 0, nullptr));
    return h;
}

double softmax_cost(const ControlTemplate& ct, const SurrogateMap& s, double beta, std::vector<Vec2>* grad) {
    const auto terms = corner_terms(ct, s);
    std::vector<double> h;
    for (const CornerTerm& c : terms) h.push_back(corner_ratio(ct, s, c, 0, nullptr));
    const double smax = softmax(h, beta), smin = softmin(h, beta);
    if (grad) {
        grad->assign(ct.vertices.size(), Vec2::Zero());
        const double mx = *std::max_element(h.begin(), h.end()), mn = *std::min_element(h.begin(), h.end());
        double zmax = 0, zmin = 0;
        for (double v : h) {
            zmax += std::exp(beta * (v - mx));
            zmin += std::exp(-beta * (v - mn));
        }
        for (size_t i = 0; i < h.size(); ++i) {
            const double wmax = std::exp(beta * (h[i] - mx)) / zmax, wmin = std::exp(-beta * (h[i] - mn)) / zmin;
            const double dmax = wmax * (1 + beta * (h[i] - smax)), dmin = wmin * (1 - beta * (h[i] - smin));
            const double dc = dmax / smax - dmin / smin;
            corner_ratio(ct, s, terms[i], dc, grad);
        }
        // boundary vertices are pinned to the break points
        std::fill(grad->begin(), grad->begin() + ct.base.n_boundary, Vec2::Zero());
    }
    return std::log(smax) - std::log(smin);
}

namespace {

std::vector<double> all_cross(const ControlTemplate& ct) {
    std::vector<double> g;
    for (const auto& q : ct.base.quads)
        for (int k = 0; k < 4; ++k) g.push_back(corner_cross(ct.vertices, q, k));
    return g;
}

} // namespace

ControlTemplate optimise_inner_vertices(const ControlTemplate& ct, const SurrogateMap& s, const OptimiseOptions& opt,
                                        OptimiseReport* report) {
    const std::vector<double> g0 = all_cross(ct);
    for (double v : g0)
        if (v <= 0) throw Error(ErrorCode::InfeasibleStart, "control template has a nonpositive cross product");
    const int nb = ct.base.n_boundary, nv = static_cast<int>(ct.vertices.size());
    OptimiseReport rep;
    ControlTemplate x = ct;
    std::vector<Vec2> grad;
    double cost = softmax_cost(x, s, opt.beta, &grad);
    rep.initial_cost = rep.final_cost = cost;
    rep.history.push_back(cost);
    double min_edge = std::numeric_limits<double>::infinity();
    for (const auto& e : ct.base.edges) min_edge = std::min(min_edge, (ct.vertices[e[0]] - ct.vertices[e[1]]).norm());
    double step = -1;

    auto feasible = [&](const ControlTemplate& y, double& ratio) {
        const auto gy = all_cross(y);
        ratio = std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < gy.size(); ++i) {
            if (gy[i] < opt.mu_relax * g0[i]) return false;
            ratio = std::min(ratio, gy[i] / g0[i]);
        }
        return true;
    };

    for (int it = 0; it < opt.max_iterations && nv > nb; ++it) {
        double gmax = 0;
        for (int i = nb; i < nv; ++i) gmax = std::max(gmax, grad[i].norm());
        if (gmax < 1e-14) break;
        if (step < 0) step = 0.1 * min_edge / gmax;
        bool accepted = false;
        double new_cost = cost;
        ControlTemplate y = x;
        double ratio = 1;
        for (int bt = 0; bt < 40; ++bt) {
            y = x;
            for (int i = nb; i < nv; ++i) y.vertices[i] -= step * grad[i];
            if (feasible(y, ratio)) {
                try {
                    new_cost = softmax_cost(y, s, opt.beta);
                    if (new_cost < cost) {
                        accepted = true;
                        break;
                    }
                } catch (const Error&) {
                    // left the surrogate triangulation
                }
            }
            step *= 0.5;
        }
        if (!accepted) break;
        const double change = cost - new_cost;
        x = std::move(y);
        cost = softmax_cost(x, s, opt.beta, &grad);
        rep.history.push_back(cost);
        rep.min_constraint_ratio = std::min(rep.min_constraint_ratio, ratio);
        ++rep.iterations;
        step *= 2;
        if (change < opt.tolerance) break;
    }
    rep.final_cost = cost;
    if (report) *report = rep;
    return x;
}

// Symmetries.

std::vector<std::pair<int, bool>> face_symmetries(const PlaneGraph& g, int face, double tol) {
    const Face& f = g.faces[face];
    const int n = f.size();
    std::vector<double> len, ang = face_angles(g, face);
    for (const EdgeRef& r : f.edges) len.push_back(g.edge_length(r.id));
    auto close = [tol](double a, double b) { return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b)); };
    auto md = [n](int i) { return ((i % n) + n) % n; };
    std::vector<std::pair<int, bool>> out;
    for (int s = 1; s < n; ++s) {
        bool ok = true;
        for (int i = 0; i < n && ok; ++i) ok = close(len[md(i + s)], len[i]) && close(ang[md(i + s)], ang[i]);
        if (ok) out.push_back({s, false});
    }
    for (int rot = 0; rot < n; ++rot) {
        const int c = rot + 1;
        bool ok = true;
        for (int i = 0; i < n && ok; ++i) ok = close(ang[md(c - i)], ang[i]) && close(len[md(c - i - 1)], len[i]);
        if (ok) out.push_back({rot, true});
    }
    return out;
}

bool admits_symmetry(const Template& t, int rotation, bool reflect) {
    return template_key(relabel_template(t, rotation, reflect)) == template_key(t);
}

// Driver.

namespace {

void apply_split(PlaneGraph& g, const SplitSpec& spec, int& count) {
    if (spec.fractions.size() == 2) {
        const int fresh = g.n_edges();
        count += static_cast<int>(refine_template(g, spec.edge, spec.fractions[0]).size());
        const double rest = (spec.fractions[1] - spec.fractions[0]) / (1.0 - spec.fractions[0]);
        count += static_cast<int>(refine_template(g, fresh, rest).size());
    } else {
        count += static_cast<int>(refine_template(g, spec.edge).size());
    }
}

struct Scored {
    Template t;
    ControlTemplate ct;
    double cost;
};

} // namespace

PlaneGraph templatise(const PlaneGraph& input, const TemplateCatalogue& cat, const StrategyConfig& cfg,
                      TemplatiseReport* report) {
    PlaneGraph g = input;
    TemplatiseReport rep;
    std::mt19937_64 rng(cfg.seed);
    for (;;) {
        bool any = false;
        for (const Face& f : g.faces) any |= !f.tmpl;
        if (!any) break;
        const int f = select_face(g);
        const int n = g.faces[f].size();
        if (n % 2 == 1 || n == 2) {
            for (const SplitSpec& spec : select_split_edges(g, f, cfg.split)) apply_split(g, spec, rep.split_edges);
            continue;
        }
        const SurrogateMap s = surrogate_map(g, f, cfg.mu_angle, cfg.samples_per_edge);
        std::vector<Template> cands = prefilter(g, f, cat, cfg.mu_angle);
        auto score = [&](const Template& t) -> std::optional<Scored> {
            try {
                ControlTemplate ct = control_template(t, s);
                const double c = template_cost(ct, s, cfg.lambda_patch);
                return Scored{t, std::move(ct), c};
            } catch (const Error&) {
                return std::nullopt;
            }
        };
        std::optional<Scored> chosen;
        FaceSelection sel;
        sel.face = f;
        sel.candidates = static_cast<int>(cands.size());
        if (cfg.strategy == 1) {
            const auto sym = face_symmetries(g, f);
            std::vector<Template> pool;
            if (!sym.empty())
                for (const Template& t : cands) {
                    bool ok = true;
                    for (const auto& [rot, refl] : sym) ok = ok && admits_symmetry(t, rot, refl);
                    if (ok) pool.push_back(t);
                }
            if (pool.empty()) pool = cands;
            while (!pool.empty() && !chosen) {
                int qmin = INT32_MAX;
                for (const Template& t : pool) qmin = std::min(qmin, t.n_quads());
                std::vector<int> idx;
                for (int i = 0; i < static_cast<int>(pool.size()); ++i)
                    if (pool[i].n_quads() == qmin) idx.push_back(i);
                const int pick = idx[rng() % idx.size()];
                chosen = score(pool[pick]);
                pool.erase(pool.begin() + pick);
            }
        } else {
            for (const Template& t : cands) {
                auto sc = score(t);
                if (sc && (!chosen || sc->cost < chosen->cost)) chosen = std::move(sc);
            }
            if (chosen && cfg.strategy == 3) {
                OptimiseReport orep;
                try {
                    ControlTemplate opt = optimise_inner_vertices(chosen->ct, s, {cfg.beta, cfg.mu_relax}, &orep);
                    const double c = template_cost(opt, s, cfg.lambda_patch);
                    sel.optimise_iterations = orep.iterations;
                    // keep the optimised layout unless it worsens the selection measure
                    if (c <= chosen->cost) {
                        chosen->ct = std::move(opt);
                        chosen->cost = c;
                    }
                } catch (const Error&) {
                }
            }
        }
        if (!chosen) chosen = score(rc_n_leaf(n));
        if (!chosen) throw Error(ErrorCode::UntangleFailed, "no usable template for face " + std::to_string(f));
        sel.template_id = chosen->t.id;
        sel.n_patches = chosen->t.n_quads();
        sel.cost = chosen->cost;
        g.faces[f].tmpl = FaceTemplate{chosen->t, chosen->cost, chosen->ct.vertices};
        rep.faces.push_back(sel);
    }
    if (report) *report = rep;
    return g;
}

} // namespace mpp
