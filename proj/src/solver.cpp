#include "mpp/solver.hpp"
#include "mpp/errors.hpp"
#include "mpp/quadrature.hpp"

#include <ceres/ceres.h>
#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace mpp {

double regulariser(double x, double eps) { return 0.5 * (x + std::sqrt(4 * eps * eps + x * x)); }
double regulariser_derivative(double x, double eps) { return 0.5 * (1 + x / std::sqrt(4 * eps * eps + x * x)); }

namespace {

inline Mat2 cof(const Mat2& m) {
    Mat2 c;
    c << m(1, 1), -m(1, 0), -m(0, 1), m(0, 0);
    return c;
}

// Basis data at one volume quadrature point, derivatives with respect to layout coordinates.
struct VolumePoint {
    int patch = 0;
    double w = 0;      // layout-measure weight
    double w_mu = 0;   // parameter-measure weight
    double det_m = 0;  // det of the geometry derivative
    Mat2 Jm;
    std::vector<int> dofs;
    Eigen::VectorXd N;
    Eigen::MatrixXd d; // grad x, grad y, hxx, hxy, hyy
};

// Interface quadrature point: gradients of both sides concatenated, side b negated.
struct JumpPoint {
    double w = 0; // eta / h times the arc-length weight
    std::vector<int> dofs;
    Eigen::MatrixXd g; // 2 x n
};

struct Assembly {
    std::vector<VolumePoint> vol;
    std::vector<JumpPoint> jump;
    int per_cell = 1;
};

Vec2 local_on_side(int side, double t) {
    switch (side) {
    case 0: return {t, 0.0};
    case 1: return {1.0, t};
    case 2: return {t, 1.0};
    default: return {0.0, t};
    }
}

bool side_low_high(const MultipatchSpace& s, int q, int side) {
    return s.layout.quads[q][quad_side_from(side)] < s.layout.quads[q][quad_side_to(side)];
}

// Mean diameter of the cells touching an interface, over both sides.
double interface_diameter(const MultipatchSpace& s, const Interface& f) {
    double sum = 0;
    int count = 0;
    for (int pass = 0; pass < 2; ++pass) {
        const int q = pass ? f.patch_b : f.patch_a, side = pass ? f.side_b : f.side_a;
        const auto along = s.knots[q][side % 2 == 0 ? 0 : 1].unique_values();
        const auto across = s.knots[q][side % 2 == 0 ? 1 : 0].unique_values();
        const bool first = side == 0 || side == 3;
        const double c0 = first ? across[0] : across[across.size() - 2];
        const double c1 = first ? across[1] : across.back();
        for (size_t k = 0; k + 1 < along.size(); ++k) {
            std::array<Vec2, 4> pts;
            const double a[2] = {along[k], along[k + 1]}, b[2] = {c0, c1};
            for (int m = 0; m < 4; ++m) {
                const double ta = a[m == 1 || m == 2], tb = b[m >= 2];
                pts[m] = side % 2 == 0 ? s.geometry[q](ta, tb).x : s.geometry[q](tb, ta).x;
            }
            sum += std::max((pts[2] - pts[0]).norm(), (pts[3] - pts[1]).norm());
            ++count;
        }
    }
    return sum / count;
}

Assembly build_assembly(const MultipatchSpace& s, double eta) {
    Assembly a;
    a.per_cell = (s.degree + 1) * (s.degree + 1);
    for (const QuadPoint& qp : quadrature_points(s)) {
        const BasisValues b = eval_basis(s, qp.patch, qp.u, qp.v);
        const MapEval geo = s.geometry[qp.patch](qp.u, qp.v);
        VolumePoint p;
        p.patch = qp.patch;
        p.Jm = geo.J;
        p.det_m = geo.J.determinant();
        p.w_mu = qp.w;
        p.w = qp.w * std::abs(p.det_m);
        p.dofs = b.global;
        p.N = b.d.row(0).transpose();
        p.d = chain_rule(b.d, geo);
        a.vol.push_back(std::move(p));
    }
    const GaussRule& g = gauss_rule(s.degree + 1);
    for (const Interface& f : s.interfaces) {
        const double h = interface_diameter(s, f);
        const auto spans = s.edge_knots[f.edge].unique_values();
        for (size_t k = 0; k + 1 < spans.size(); ++k)
            for (size_t i = 0; i < g.x.size(); ++i) {
                const double t = spans[k] + (spans[k + 1] - spans[k]) * g.x[i];
                JumpPoint jp;
                double ds = 0;
                std::vector<Eigen::MatrixXd> grads;
                for (int pass = 0; pass < 2; ++pass) {
                    const int q = pass ? f.patch_b : f.patch_a, side = pass ? f.side_b : f.side_a;
                    const double tau = side_low_high(s, q, side) ? t : 1.0 - t;
                    const Vec2 uv = local_on_side(side, tau);
                    const BasisValues b = eval_basis(s, q, uv.x(), uv.y());
                    const MapEval geo = s.geometry[q](uv.x(), uv.y());
                    if (pass == 0) ds = geo.J.col(side % 2 == 0 ? 0 : 1).norm();
                    Eigen::MatrixXd d = chain_rule(b.d, geo).topRows(2);
                    if (pass) d = -d;
                    jp.dofs.insert(jp.dofs.end(), b.global.begin(), b.global.end());
                    grads.push_back(std::move(d));
                }
                jp.g.resize(2, grads[0].cols() + grads[1].cols());
                jp.g << grads[0], grads[1];
                jp.w = eta / h * ds * (spans[k + 1] - spans[k]) * g.w[i];
                a.jump.push_back(std::move(jp));
            }
    }
    return a;
}

// Jacobian of x with respect to the layout coordinates at a volume point.
Mat2 jacobian_at(const VolumePoint& p, const Eigen::MatrixX2d& x) {
    Mat2 J = Mat2::Zero();
    for (size_t c = 0; c < p.dofs.size(); ++c) {
        const Vec2 xc = x.row(p.dofs[c]).transpose();
        J.col(0) += p.d(0, c) * xc;
        J.col(1) += p.d(1, c) * xc;
    }
    return J;
}

struct Indexer {
    const BoundaryConstraint& c;
    int nf;
    explicit Indexer(const BoundaryConstraint& bc) : c(bc), nf(static_cast<int>(bc.free_dofs.size())) {}
    int operator()(int k, int dof) const {
        const int i = c.free_index[dof];
        return i < 0 ? -1 : k * nf + i;
    }
};

NonlinearSystem c0dg_assemble(const Assembly& a, const Eigen::MatrixX2d& x, const BoundaryConstraint& c,
                              const SolverConfig& cfg, bool with_jacobian) {
    const Indexer idx(c);
    NonlinearSystem sys;
    sys.residual = Eigen::VectorXd::Zero(2 * idx.nf);
    std::vector<Eigen::Triplet<double>> trip;
    const double mu = cfg.mu_stab;
    for (const VolumePoint& p : a.vol) {
        const int n = static_cast<int>(p.dofs.size());
        const Mat2 J = jacobian_at(p, x);
        std::array<Mat2, 2> H;
        for (int k = 0; k < 2; ++k) {
            double hxx = 0, hxy = 0, hyy = 0;
            for (int m = 0; m < n; ++m) {
                const double xc = x(p.dofs[m], k);
                hxx += p.d(2, m) * xc;
                hxy += p.d(3, m) * xc;
                hyy += p.d(4, m) * xc;
            }
            H[k] << hxx, hxy, hxy, hyy;
        }
        const Mat2 G = J.transpose() * J;
        const Mat2 A = cof(G) + mu * Mat2::Identity();
        const double trA = A.trace(), AA = A.squaredNorm();
        const double gamma = trA / AA;
        const double sk[2] = {(A.cwiseProduct(H[0])).sum(), (A.cwiseProduct(H[1])).sum()};
        Eigen::VectorXd lap(n);
        for (int m = 0; m < n; ++m) lap[m] = p.d(2, m) + p.d(4, m);
        for (int k = 0; k < 2; ++k)
            for (int b = 0; b < n; ++b) {
                const int r = idx(k, p.dofs[b]);
                if (r >= 0) sys.residual[r] += p.w * gamma * lap[b] * sk[k];
            }
        if (!with_jacobian) continue;
        for (int m = 0; m < 2; ++m)
            for (int dcol = 0; dcol < n; ++dcol) {
                const int col = idx(m, p.dofs[dcol]);
                if (col < 0) continue;
                Mat2 dJ = Mat2::Zero();
                dJ(m, 0) = p.d(0, dcol);
                dJ(m, 1) = p.d(1, dcol);
                const Mat2 dG = dJ.transpose() * J + J.transpose() * dJ;
                const Mat2 dA = cof(dG);
                const double dgamma = (dA.trace() * AA - trA * 2 * A.cwiseProduct(dA).sum()) / (AA * AA);
                Mat2 Hd;
                Hd << p.d(2, dcol), p.d(3, dcol), p.d(3, dcol), p.d(4, dcol);
                const double AHd = A.cwiseProduct(Hd).sum();
                for (int k = 0; k < 2; ++k) {
                    const double dsk = dA.cwiseProduct(H[k]).sum() + (k == m ? AHd : 0.0);
                    const double f = p.w * (dgamma * sk[k] + gamma * dsk);
                    for (int b = 0; b < n; ++b) {
                        const int r = idx(k, p.dofs[b]);
                        if (r >= 0) trip.emplace_back(r, col, f * lap[b]);
                    }
                }
            }
    }
    for (const JumpPoint& jp : a.jump) {
        const int n = static_cast<int>(jp.dofs.size());
        for (int k = 0; k < 2; ++k) {
            Vec2 jump = Vec2::Zero();
            for (int m = 0; m < n; ++m) jump += x(jp.dofs[m], k) * jp.g.col(m);
            for (int b = 0; b < n; ++b) {
                const int r = idx(k, jp.dofs[b]);
                if (r < 0) continue;
                sys.residual[r] += jp.w * jump.dot(jp.g.col(b));
                if (!with_jacobian) continue;
                for (int m = 0; m < n; ++m) {
                    const int col = idx(k, jp.dofs[m]);
                    if (col >= 0) trip.emplace_back(r, col, jp.w * jp.g.col(b).dot(jp.g.col(m)));
                }
            }
        }
    }
    if (with_jacobian) {
        sys.jacobian.resize(2 * idx.nf, 2 * idx.nf);
        sys.jacobian.setFromTriplets(trip.begin(), trip.end());
    }
    return sys;
}

NonlinearSystem weakform_assemble(const Assembly& a, const Eigen::MatrixX2d& x, const BoundaryConstraint& c,
                                  const DiffusivitySpec& dif, const SolverConfig& cfg, bool with_jacobian) {
    const Indexer idx(c);
    NonlinearSystem sys;
    sys.residual = Eigen::VectorXd::Zero(2 * idx.nf);
    std::vector<Eigen::Triplet<double>> trip;
    const double eps = cfg.eps_reg;
    const bool homog = dif.kind == DiffusivitySpec::Kind::Homogenise && dif.k != 0.0;
    for (const VolumePoint& p : a.vol) {
        const int n = static_cast<int>(p.dofs.size());
        const Mat2 J = jacobian_at(p, x);
        const Mat2 K = cof(J);
        const Mat2 M = K.transpose() * K;
        const double det = J.determinant();
        const double R = regulariser(det, eps), Rp = regulariser_derivative(det, eps);
        double dscal = 1.0, ddscal = 0.0; // D = dscal I and d dscal / d det
        if (homog) {
            const double dm = det * p.det_m;
            const double Rm = regulariser(dm, eps);
            dscal = dif.kappa * std::pow(Rm, -dif.k);
            ddscal = -dif.k * dif.kappa * std::pow(Rm, -dif.k - 1) * regulariser_derivative(dm, eps) * p.det_m;
        }
        const Mat2 F = dscal * M / R;
        for (int i = 0; i < 2; ++i)
            for (int b = 0; b < n; ++b) {
                const int r = idx(i, p.dofs[b]);
                if (r >= 0) sys.residual[r] += p.w * (p.d(0, b) * F(0, i) + p.d(1, b) * F(1, i));
            }
        if (!with_jacobian) continue;
        for (int m = 0; m < 2; ++m)
            for (int dcol = 0; dcol < n; ++dcol) {
                const int col = idx(m, p.dofs[dcol]);
                if (col < 0) continue;
                Mat2 dJ = Mat2::Zero();
                dJ(m, 0) = p.d(0, dcol);
                dJ(m, 1) = p.d(1, dcol);
                const Mat2 dK = cof(dJ);
                const double ddet = K.cwiseProduct(dJ).sum();
                const Mat2 dM = dK.transpose() * K + K.transpose() * dK;
                const Mat2 dF = (ddscal * ddet) * M / R + dscal * dM / R - dscal * M * (Rp * ddet / (R * R));
                for (int i = 0; i < 2; ++i)
                    for (int b = 0; b < n; ++b) {
                        const int r = idx(i, p.dofs[b]);
                        if (r >= 0) trip.emplace_back(r, col, p.w * (p.d(0, b) * dF(0, i) + p.d(1, b) * dF(1, i)));
                    }
            }
    }
    if (with_jacobian) {
        sys.jacobian.resize(2 * idx.nf, 2 * idx.nf);
        sys.jacobian.setFromTriplets(trip.begin(), trip.end());
    }
    return sys;
}

// Unit-area gauge of both the layout domain and the boundary data.
struct Gauged {
    std::shared_ptr<const MultipatchSpace> space;
    BoundaryConstraint constraint;
    Eigen::MatrixX2d coeffs;
    Gauge gauge;
};

Gauged gauge_problem(const MultipatchMap& start, const BoundaryConstraint& c) {
    const MultipatchSpace& s = *start.space;
    Gauged out;
    out.gauge = boundary_gauge(s, c);
    double area = 0;
    for (const QuadPoint& qp : quadrature_points(s)) area += qp.w * std::abs(s.geometry[qp.patch](qp.u, qp.v).J.determinant());
    const double sg = 1.0 / std::sqrt(area);
    std::vector<PatchGeometry> geo;
    for (const PatchGeometry& g : s.geometry)
        geo.push_back([g, sg](double u, double v) {
            MapEval e = g(u, v);
            e.x *= sg;
            e.J *= sg;
            for (Vec2& h : e.H) h *= sg;
            return e;
        });
    out.space = std::make_shared<const MultipatchSpace>(with_geometry(s, std::move(geo)));
    out.constraint = c;
    auto to_gauge = [&](Eigen::MatrixX2d m) {
        m.rowwise() -= out.gauge.shift.transpose();
        return Eigen::MatrixX2d(m / out.gauge.scale);
    };
    out.coeffs = to_gauge(start.coeffs);
    out.constraint.values = to_gauge(c.values);
    for (int d : c.free_dofs) out.constraint.values.row(d).setZero();
    return out;
}

MultipatchMap ungauge(const Gauged& g, const Eigen::MatrixX2d& coeffs, const MultipatchMap& start,
                      const BoundaryConstraint& c) {
    MultipatchMap out{start.space, coeffs * g.gauge.scale};
    out.coeffs.rowwise() += g.gauge.shift.transpose();
    for (int d : c.fixed_dofs) out.coeffs.row(d) = c.values.row(d);
    return out;
}

Eigen::VectorXd pack(const Eigen::MatrixX2d& x, const BoundaryConstraint& c) {
    const int nf = static_cast<int>(c.free_dofs.size());
    Eigen::VectorXd v(2 * nf);
    for (int k = 0; k < 2; ++k)
        for (int i = 0; i < nf; ++i) v[k * nf + i] = x(c.free_dofs[i], k);
    return v;
}

void unpack(const Eigen::VectorXd& v, const BoundaryConstraint& c, Eigen::MatrixX2d& x) {
    const int nf = static_cast<int>(c.free_dofs.size());
    for (int k = 0; k < 2; ++k)
        for (int i = 0; i < nf; ++i) x(c.free_dofs[i], k) = v[k * nf + i];
}

template <class F>
Eigen::MatrixX2d newton(Eigen::MatrixX2d x, const BoundaryConstraint& c, const SolverConfig& cfg, F&& assemble,
                        NewtonReport& rep) {
    for (int d : c.fixed_dofs) x.row(d) = c.values.row(d);
    NonlinearSystem sys = assemble(x, true);
    double r = sys.residual.norm();
    rep.residuals.push_back(r);
    Eigen::MatrixX2d best = x;
    double best_r = r;
    while (rep.iterations < cfg.newton_max_iters) {
        if (r < cfg.newton_tol) {
            rep.converged = true;
            break;
        }
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(sys.jacobian);
        if (lu.info() != Eigen::Success) break;
        const Eigen::VectorXd delta = lu.solve(-sys.residual);
        if (lu.info() != Eigen::Success || !delta.allFinite()) break;
        const Eigen::VectorXd x0 = pack(x, c);
        double alpha = 1.0;
        bool accepted = false;
        Eigen::MatrixX2d y = x;
        for (int bt = 0; bt <= cfg.max_backtracks; ++bt, alpha *= 0.5) {
            unpack(x0 + alpha * delta, c, y);
            const double ry = assemble(y, false).residual.norm();
            if (std::isfinite(ry) && ry <= (1 - cfg.armijo_c * alpha) * r) {
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        x = y;
        sys = assemble(x, true);
        r = sys.residual.norm();
        ++rep.iterations;
        rep.residuals.push_back(r);
        rep.steps.push_back(alpha);
        if (r < best_r) {
            best_r = r;
            best = x;
        }
    }
    if (r < cfg.newton_tol) rep.converged = true;
    return r <= best_r ? x : best;
}

} // namespace

Gauge boundary_gauge(const MultipatchSpace& s, const BoundaryConstraint& c) {
    Gauge g;
    Vec2 sum = Vec2::Zero();
    for (int d : c.fixed_dofs) sum += c.values.row(d).transpose();
    g.shift = sum / std::max<size_t>(1, c.fixed_dofs.size());
    // Green's theorem along the boundary curves
    const int n = s.layout.n_boundary;
    std::map<std::pair<int, int>, int> edge_index;
    for (size_t e = 0; e < s.layout.edges.size(); ++e)
        edge_index[{s.layout.edges[e][0], s.layout.edges[e][1]}] = static_cast<int>(e);
    const GaussRule& rule = gauss_rule(s.degree + 1);
    double area = 0;
    for (int i = 0; i < n; ++i) {
        const int a = i, b = (i + 1) % n;
        const int e = edge_index.at({std::min(a, b), std::max(a, b)});
        BSplineCurve cur;
        cur.knots = s.edge_knots[e];
        for (int d : s.edge_dofs[e]) cur.ctrl.push_back(Vec2(c.values.row(d).transpose()) - g.shift);
        if (a > b) cur = reverse(cur);
        const auto spans = cur.knots.unique_values();
        for (size_t k = 0; k + 1 < spans.size(); ++k)
            for (size_t j = 0; j < rule.x.size(); ++j) {
                const double t = spans[k] + (spans[k + 1] - spans[k]) * rule.x[j];
                area += 0.5 * cross(cur.eval(t), cur.derivative(t)) * (spans[k + 1] - spans[k]) * rule.w[j];
            }
    }
    g.scale = std::sqrt(std::abs(area));
    if (!(g.scale > 0)) throw Error(ErrorCode::InvalidInput, "boundary data encloses no area");
    return g;
}

MultipatchMap initial_map(std::shared_ptr<const MultipatchSpace> space, const BoundaryConstraint& c) {
    const Assembly a = build_assembly(*space, 0.0);
    const int nf = static_cast<int>(c.free_dofs.size());
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::MatrixX2d rhs = Eigen::MatrixX2d::Zero(nf, 2);
    for (const VolumePoint& p : a.vol) {
        const int n = static_cast<int>(p.dofs.size());
        for (int b = 0; b < n; ++b) {
            const int r = c.free_index[p.dofs[b]];
            if (r < 0) continue;
            for (int m = 0; m < n; ++m) {
                const double k = p.w * (p.d(0, b) * p.d(0, m) + p.d(1, b) * p.d(1, m));
                const int col = c.free_index[p.dofs[m]];
                if (col >= 0) trip.emplace_back(r, col, k);
                else rhs.row(r) -= k * c.values.row(p.dofs[m]);
            }
        }
    }
    MultipatchMap out{space, c.values};
    if (nf == 0) return out;
    Eigen::SparseMatrix<double> K(nf, nf);
    K.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(K);
    if (solver.info() != Eigen::Success) throw Error(ErrorCode::SingularSystem, "Laplace system is singular");
    const Eigen::MatrixX2d sol = solver.solve(rhs);
    if (solver.info() != Eigen::Success || !sol.allFinite())
        throw Error(ErrorCode::SingularSystem, "Laplace solve failed");
    for (int i = 0; i < nf; ++i) out.coeffs.row(c.free_dofs[i]) = sol.row(i);
    return out;
}

NonlinearSystem c0dg_system(const MultipatchMap& x, const BoundaryConstraint& c, const SolverConfig& cfg,
                            bool with_jacobian) {
    return c0dg_assemble(build_assembly(*x.space, cfg.eta), x.coeffs, c, cfg, with_jacobian);
}

NonlinearSystem weakform_system(const MultipatchMap& x, const BoundaryConstraint& c, const DiffusivitySpec& d,
                                const SolverConfig& cfg, bool with_jacobian) {
    return weakform_assemble(build_assembly(*x.space, 0.0), x.coeffs, c, d, cfg, with_jacobian);
}

SolveResult solve_c0dg(const MultipatchMap& start, const BoundaryConstraint& c, const SolverConfig& cfg) {
    const Gauged g = gauge_problem(start, c);
    const Assembly a = build_assembly(*g.space, cfg.eta);
    SolveResult res;
    const Eigen::MatrixX2d x = newton(g.coeffs, g.constraint, cfg,
        [&](const Eigen::MatrixX2d& y, bool jac) { return c0dg_assemble(a, y, g.constraint, cfg, jac); }, res.report);
    res.map = ungauge(g, x, start, c);
    res.report.min_det = bijectivity_report(res.map).min_det;
    return res;
}

SolveResult solve_weakform(const MultipatchMap& start, const BoundaryConstraint& c, DiffusivitySpec d,
                           const SolverConfig& cfg) {
    const Gauged g = gauge_problem(start, c);
    const Assembly a = build_assembly(*g.space, 0.0);
    if (d.kind == DiffusivitySpec::Kind::Homogenise && d.k != 0.0) {
        // freeze kappa from the start map
        Eigen::MatrixX2d x0 = g.coeffs;
        double mean = 0;
        for (const VolumePoint& p : a.vol)
            mean += std::pow(regulariser(jacobian_at(p, x0).determinant() * p.det_m, cfg.eps_reg), -d.k);
        mean /= static_cast<double>(a.vol.size());
        d.kappa = 1.0 / mean;
    }
    SolveResult res;
    const Eigen::MatrixX2d x = newton(g.coeffs, g.constraint, cfg,
        [&](const Eigen::MatrixX2d& y, bool jac) { return weakform_assemble(a, y, g.constraint, d, cfg, jac); },
        res.report);
    res.map = ungauge(g, x, start, c);
    res.report.min_det = bijectivity_report(res.map).min_det;
    return res;
}

SolveResult homogenise(const MultipatchMap& start, const BoundaryConstraint& c, double k, const SolverConfig& cfg) {
    DiffusivitySpec d;
    if (k != 0.0) {
        d.kind = DiffusivitySpec::Kind::Homogenise;
        d.k = k;
    }
    return solve_weakform(start, c, d, cfg);
}

namespace {

double winslow_value(const Assembly& a, const Eigen::MatrixX2d& x, double eps, Eigen::MatrixX2d* grad) {
    double e = 0;
    if (grad) grad->setZero(x.rows(), 2);
    for (const VolumePoint& p : a.vol) {
        const Mat2 J = jacobian_at(p, x);
        const double det = J.determinant(), trG = J.squaredNorm();
        const double R = regulariser(det, eps);
        e += p.w * trG / R;
        if (!grad) continue;
        const Mat2 EJ = 2 * J / R - trG * regulariser_derivative(det, eps) / (R * R) * cof(J);
        for (size_t c = 0; c < p.dofs.size(); ++c)
            grad->row(p.dofs[c]) += p.w * (EJ * Vec2(p.d(0, c), p.d(1, c))).transpose();
    }
    return e;
}

double min_det_at(const Assembly& a, const Eigen::MatrixX2d& x) {
    double m = std::numeric_limits<double>::infinity();
    for (const VolumePoint& p : a.vol) m = std::min(m, jacobian_at(p, x).determinant());
    return m;
}

class WinslowFunction final : public ceres::FirstOrderFunction {
public:
    WinslowFunction(const Assembly& a, const BoundaryConstraint& c, Eigen::MatrixX2d base, double eps)
        : a_(a), c_(c), base_(std::move(base)), eps_(eps) {}
    bool Evaluate(const double* params, double* cost, double* gradient) const override {
        Eigen::MatrixX2d x = base_;
        unpack(Eigen::Map<const Eigen::VectorXd>(params, NumParameters()), c_, x);
        Eigen::MatrixX2d g;
        *cost = winslow_value(a_, x, eps_, gradient ? &g : nullptr);
        if (!std::isfinite(*cost)) return false;
        if (gradient) Eigen::Map<Eigen::VectorXd>(gradient, NumParameters()) = pack(g, c_);
        return true;
    }
    int NumParameters() const override { return 2 * static_cast<int>(c_.free_dofs.size()); }

private:
    const Assembly& a_;
    const BoundaryConstraint& c_;
    Eigen::MatrixX2d base_;
    double eps_;
};

class WinslowStop final : public ceres::IterationCallback {
public:
    WinslowStop(const Assembly& a, const BoundaryConstraint& c, const Eigen::MatrixX2d& base, const double* params,
                int n)
        : a_(a), c_(c), base_(base), params_(params), n_(n) {}
    ceres::CallbackReturnType operator()(const ceres::IterationSummary& s) override {
        const double prev = last_;
        last_ = s.cost;
        if (s.iteration == 0) return ceres::SOLVER_CONTINUE;
        Eigen::MatrixX2d x = base_;
        unpack(Eigen::Map<const Eigen::VectorXd>(params_, n_), c_, x);
        const bool unfolded = min_det_at(a_, x) > 0;
        if (unfolded && std::abs(prev - s.cost) <= 1e-8 * std::abs(s.cost)) return ceres::SOLVER_TERMINATE_SUCCESSFULLY;
        return ceres::SOLVER_CONTINUE;
    }

private:
    const Assembly& a_;
    const BoundaryConstraint& c_;
    const Eigen::MatrixX2d& base_;
    const double* params_;
    int n_;
    double last_ = 0;
};

} // namespace

double winslow_energy(const MultipatchMap& x, double eps) {
    return winslow_value(build_assembly(*x.space, 0.0), x.coeffs, eps, nullptr);
}

MultipatchMap winslow_untangle(const MultipatchMap& start, const BoundaryConstraint& c, const SolverConfig& cfg,
                               WinslowReport* report) {
    const Gauged g = gauge_problem(start, c);
    const Assembly a = build_assembly(*g.space, 0.0);
    Eigen::MatrixX2d base = g.coeffs;
    for (int d : c.fixed_dofs) base.row(d) = g.constraint.values.row(d);
    WinslowReport rep;
    rep.min_det_before = min_det_at(a, base);
    rep.initial_energy = winslow_value(a, base, cfg.eps_reg, nullptr);
    Eigen::VectorXd params = pack(base, g.constraint);
    const int n = static_cast<int>(params.size());
    if (n > 0) {
        ceres::GradientProblem problem(new WinslowFunction(a, g.constraint, base, cfg.eps_reg));
        ceres::GradientProblemSolver::Options opt;
        opt.line_search_direction_type = ceres::LBFGS;
        opt.max_num_iterations = cfg.winslow_max_iters;
        opt.function_tolerance = 1e-12;
        opt.gradient_tolerance = 1e-14;
        opt.parameter_tolerance = 1e-14;
        opt.logging_type = ceres::SILENT;
        opt.update_state_every_iteration = true;
        WinslowStop stop(a, g.constraint, base, params.data(), n);
        opt.callbacks.push_back(&stop);
        ceres::GradientProblemSolver::Summary summary;
        ceres::Solve(opt, problem, params.data(), &summary);
        rep.iterations = static_cast<int>(summary.iterations.size()) - 1;
    }
    unpack(params, g.constraint, base);
    rep.min_det_after = min_det_at(a, base);
    rep.final_energy = winslow_value(a, base, cfg.eps_reg, nullptr);
    if (report) *report = rep;
    if (!(rep.min_det_after > 0)) throw Error(ErrorCode::UntangleFailed, "Winslow descent left a folded map");
    return ungauge(g, base, start, c);
}

BijectivityReport bijectivity_report(const MultipatchMap& x) {
    const MultipatchSpace& s = *x.space;
    BijectivityReport rep;
    rep.patch_min.assign(s.n_patches(), std::numeric_limits<double>::infinity());
    rep.patch_mean.assign(s.n_patches(), 0.0);
    std::vector<int> count(s.n_patches(), 0);
    rep.min_det = std::numeric_limits<double>::infinity();
    int total = 0;
    for (const QuadPoint& qp : quadrature_points(s)) {
        const double det = x.eval(qp.patch, qp.u, qp.v).J.determinant() / s.geometry[qp.patch](qp.u, qp.v).J.determinant();
        rep.patch_min[qp.patch] = std::min(rep.patch_min[qp.patch], det);
        rep.patch_mean[qp.patch] += det;
        ++count[qp.patch];
        rep.min_det = std::min(rep.min_det, det);
        rep.mean_det += det;
        ++total;
    }
    for (int q = 0; q < s.n_patches(); ++q) rep.patch_mean[q] /= std::max(1, count[q]);
    rep.mean_det /= std::max(1, total);
    return rep;
}

std::vector<PatchGeometry> spline_geometry(const MultipatchMap& s) {
    auto shared = std::make_shared<const MultipatchMap>(s);
    std::vector<PatchGeometry> out;
    for (int q = 0; q < s.space->n_patches(); ++q)
        out.push_back([shared, q](double u, double v) { return shared->eval(q, u, v); });
    return out;
}

MultipatchMap interface_removal(std::shared_ptr<const MultipatchSpace> space) {
    const MultipatchSpace& s = *space;
    // Dirichlet data: projection of the geometry onto each boundary edge's knot space
    const int n = s.layout.n_boundary;
    BoundaryData data;
    for (int i = 0; i < n; ++i) {
        const int a = i, b = (i + 1) % n;
        int q = -1, side = -1;
        for (int p = 0; p < s.n_patches() && q < 0; ++p)
            for (int sd = 0; sd < 4; ++sd) {
                const int from = s.layout.quads[p][quad_side_from(sd)], to = s.layout.quads[p][quad_side_to(sd)];
                if ((from == a && to == b) || (from == b && to == a)) {
                    q = p;
                    side = sd;
                    break;
                }
            }
        const bool forward = s.layout.quads[q][quad_side_from(side)] == a;
        const KnotVector& k = s.knots[q][side % 2 == 0 ? 0 : 1];
        const PatchGeometry& geo = s.geometry[q];
        BSplineCurve c = project_curve(
            [&](double t) {
                const Vec2 uv = local_on_side(side, forward ? t : 1.0 - t);
                return geo(uv.x(), uv.y()).x;
            },
            forward ? k : reverse(k));
        data.push_back(std::move(c));
    }
    // shared corners: take the exact geometry value so adjacent curves agree
    for (int i = 0; i < n; ++i) data[(i + 1) % n].ctrl.front() = data[i].ctrl.back();
    const BoundaryConstraint c = constrain_boundary(s, data);

    const Assembly asmb = build_assembly(s, 0.0);
    const int nf = static_cast<int>(c.free_dofs.size());
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::MatrixX2d rhs = Eigen::MatrixX2d::Zero(nf, 2);
    for (const VolumePoint& p : asmb.vol) {
        const Vec2 t0 = p.Jm.col(0).normalized(), t1 = p.Jm.col(1).normalized();
        const Mat2 D = t0 * t0.transpose() + t1 * t1.transpose();
        const int m = static_cast<int>(p.dofs.size());
        for (int b = 0; b < m; ++b) {
            const int r = c.free_index[p.dofs[b]];
            if (r < 0) continue;
            const Vec2 gb(p.d(0, b), p.d(1, b));
            for (int d = 0; d < m; ++d) {
                const double k = p.w * gb.dot(D * Vec2(p.d(0, d), p.d(1, d)));
                const int col = c.free_index[p.dofs[d]];
                if (col >= 0) trip.emplace_back(r, col, k);
                else rhs.row(r) -= k * c.values.row(p.dofs[d]);
            }
        }
    }
    MultipatchMap out{space, c.values};
    if (nf == 0) return out;
    Eigen::SparseMatrix<double> K(nf, nf);
    K.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(K);
    if (solver.info() != Eigen::Success) throw Error(ErrorCode::SingularSystem, "interface-removal system is singular");
    const Eigen::MatrixX2d sol = solver.solve(rhs);
    if (!sol.allFinite()) throw Error(ErrorCode::SingularSystem, "interface-removal solve failed");
    for (int i = 0; i < nf; ++i) out.coeffs.row(c.free_dofs[i]) = sol.row(i);
    return out;
}

double max_interface_kink(const MultipatchMap& x) {
    const MultipatchSpace& s = *x.space;
    double worst = 0;
    for (const Interface& f : s.interfaces) {
        std::array<Vec2, 2> inward;
        for (int pass = 0; pass < 2; ++pass) {
            const int q = pass ? f.patch_b : f.patch_a, side = pass ? f.side_b : f.side_a;
            const Vec2 uv = local_on_side(side, 0.5);
            const MapEval e = x.eval(q, uv.x(), uv.y());
            const Vec2 d = side % 2 == 0 ? e.J.col(1) : e.J.col(0);
            inward[pass] = (side == 0 || side == 3) ? d : Vec2(-d);
        }
        const double c = std::clamp(inward[0].normalized().dot(-inward[1].normalized()), -1.0, 1.0);
        worst = std::max(worst, std::acos(c));
    }
    return worst;
}

std::vector<double> cell_areas(const MultipatchMap& x) {
    const auto qps = quadrature_points(*x.space);
    const size_t per = static_cast<size_t>((x.space->degree + 1) * (x.space->degree + 1));
    std::vector<double> out;
    for (size_t i = 0; i < qps.size(); i += per) {
        double a = 0;
        for (size_t j = i; j < i + per; ++j) a += qps[j].w * x.eval(qps[j].patch, qps[j].u, qps[j].v).J.determinant();
        out.push_back(a);
    }
    return out;
}

double coefficient_of_variation(const std::vector<double>& v) {
    double mean = 0;
    for (double a : v) mean += a;
    mean /= static_cast<double>(v.size());
    double var = 0;
    for (double a : v) var += (a - mean) * (a - mean);
    var /= static_cast<double>(v.size());
    return std::sqrt(var) / std::abs(mean);
}

} // namespace mpp
