#pragma once

#include "mpp/surrogate.hpp"
#include "mpp/template.hpp"

#include <array>
#include <vector>

namespace mpp {

// Template whose vertices were moved into a control domain. Boundary vertex i sits at the
// break point of face edge i.
struct ControlTemplate {
    Template base;  // layout on the regular N-gon
    Points vertices; // positions in the control domain
};

double min_corner_cross(const Points& verts, const std::vector<std::array<int, 4>>& quads);

// sum_q sum_k max(0, tau - nu(k, q)) and its gradient with respect to all vertices.
double relu_cost(const Points& verts, const std::vector<std::array<int, 4>>& quads, double tau,
                 std::vector<Vec2>* grad = nullptr);

struct UntangleReport {
    double tau = 0;      // last tau that reached zero cost
    int iterations = 0;  // gradient steps in total
    int increments = 0;  // successful tau increments
};

// ReLU-cost untangling of the free vertices (indices >= n_fixed). tau_step <= 0 picks a
// quarter of the lower quartile of the positive initial cross products. Throws
// UntangleFailed when zero cost is not reached at tau = 0.
Points untangle_layout(const Points& verts, const std::vector<std::array<int, 4>>& quads, int n_fixed,
                       double tau_step = 0, UntangleReport* report = nullptr);

// Floater operator of the regular N-gon, cached per N.
struct NgonSurrogate {
    int n = 0;
    int samples_per_edge = 0;
    Triangulation tri;
    FloaterOperator op;
};
const NgonSurrogate& ngon_surrogate(int n, int samples_per_edge = 25);

// Piecewise linear approximately harmonic map from the N-gon onto the control domain.
PiecewiseLinearMap ngon_to_domain(const ControlDomain& dom, int samples_per_edge = 25);

ControlTemplate transfer_vertices(const Template& t, const ControlDomain& dom, int samples_per_edge = 25);

// Untangle when needed: returns `ct` unchanged if all cross products are already positive.
ControlTemplate untangle_quadrangulation(const ControlTemplate& ct, double tau_step = 0,
                                         UntangleReport* report = nullptr);

// Bilinearly blended Coons patches over a control template: interior edges straight,
// boundary edges following the control-domain arcs.
class CoonsMap {
public:
    CoonsMap(ControlTemplate ct, ControlDomain dom);

    int n_patches() const { return static_cast<int>(ct_.base.quads.size()); }
    const ControlTemplate& control() const { return ct_; }
    const ControlDomain& domain() const { return dom_; }
    // Patch q at local (u, v) in [0,1]^2; derivatives up to second order.
    MapEval eval(int q, double u, double v) const;
    Vec2 operator()(int q, double u, double v) const { return eval(q, u, v).x; }
    // Point and derivatives along parametric side s of patch q at parameter t.
    Vec2 side_point(int q, int side, double t, int order = 0) const;

private:
    ControlTemplate ct_;
    ControlDomain dom_;
    // per quad side: boundary arc index (or -1 for a straight edge) and reversal flag
    std::vector<std::array<int, 4>> arc_;
    std::vector<std::array<bool, 4>> rev_;
};

CoonsMap coons_map(const ControlTemplate& ct, const ControlDomain& dom);

} // namespace mpp
