#pragma once

#include "mpp/controlmap.hpp"
#include "mpp/splines.hpp"
#include "mpp/template.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <array>
#include <functional>
#include <memory>
#include <vector>

namespace mpp {

// Reference square [0,1]^2 -> layout domain, with derivatives up to second order.
using PatchGeometry = std::function<MapEval(double u, double v)>;

PatchGeometry bilinear_geometry(const Vec2& c0, const Vec2& c1, const Vec2& c2, const Vec2& c3);

// Interior interface: template edge shared by two patches. `reversed` is set when the two
// sides run in opposite directions.
struct Interface {
    int edge = 0;
    int patch_a = 0, side_a = 0;
    int patch_b = 0, side_b = 0;
    bool reversed = false;
};

struct MultipatchSpace {
    int degree = 0;
    Template layout;
    std::vector<std::array<KnotVector, 2>> knots;      // per patch (mu, nu)
    std::vector<std::array<std::vector<double>, 2>> knot_values;
    std::vector<PatchGeometry> geometry;
    std::vector<std::vector<int>> dof_map;             // per patch, local i + n_mu j -> global
    std::vector<int> boundary_dofs;                    // sorted
    std::vector<std::vector<int>> edge_dofs;           // per template edge, low -> high vertex
    std::vector<KnotVector> edge_knots;                // per template edge, low -> high vertex
    std::vector<std::array<int, 4>> quad_edges;        // template edge id of each patch side
    std::vector<Interface> interfaces;
    int n_dofs = 0;

    int n_patches() const { return static_cast<int>(knots.size()); }
    int n_basis(int patch, int dir) const { return knots[patch][dir].n_basis(); }
    // Local indices along side `side`, ordered as the side parameter increases.
    std::vector<int> side_local(int patch, int side) const;
};

// Bilinear patches over the template vertex positions. Throws NonconformingKnots.
MultipatchSpace build_space(const Template& t, const std::vector<std::array<KnotVector, 2>>& knots);
// Coons patches over the control template.
MultipatchSpace build_space(const CoonsMap& r, const std::vector<std::array<KnotVector, 2>>& knots);
MultipatchSpace build_space(const Template& t, const std::vector<std::array<KnotVector, 2>>& knots,
                            std::vector<PatchGeometry> geometry);
// Same numbering, different geometry.
MultipatchSpace with_geometry(const MultipatchSpace& s, std::vector<PatchGeometry> geometry);

nlohmann::json space_to_json(const MultipatchSpace& s);

// Nonzero basis functions of a patch at (u, v). Rows of `d`: N, N_u, N_v, N_uu, N_uv, N_vv.
struct BasisValues {
    std::vector<int> local;
    std::vector<int> global;
    Eigen::MatrixXd d;
};
BasisValues eval_basis(const MultipatchSpace& s, int patch, double u, double v);

// Derivatives with respect to the layout coordinates, given the patch geometry at the point.
// Rows: grad (2) then Hessian xx, xy, yy (3).
Eigen::MatrixXd chain_rule(const Eigen::MatrixXd& d_mu, const MapEval& geo);

// Per template boundary edge i, the curve in the direction i -> i+1.
using BoundaryData = std::vector<BSplineCurve>;

struct BoundaryConstraint {
    std::vector<int> free_dofs;
    std::vector<int> fixed_dofs;
    std::vector<int> free_index; // dof -> position in free_dofs, or -1
    Eigen::MatrixX2d values;     // fixed rows set, free rows zero (a member of U^f)
};
// Throws KnotMismatch, or InvalidInput when adjacent curves do not share end points.
BoundaryConstraint constrain_boundary(const MultipatchSpace& s, const BoundaryData& data);

// Straight boundary data following the layout polygon (the identity on the template).
BoundaryData identity_boundary(const MultipatchSpace& s);
// Greville abscissae of a knot vector.
std::vector<double> greville(const KnotVector& k);

struct MultipatchMap {
    std::shared_ptr<const MultipatchSpace> space;
    Eigen::MatrixX2d coeffs; // one row per global dof

    // Value and derivatives with respect to the patch parameters.
    MapEval eval(int patch, double u, double v) const;
    // Value and derivatives with respect to the layout coordinates.
    MapEval eval_domain(int patch, double u, double v) const;
};

// Coefficients reproducing each patch's bilinear corner map (exact for bilinear geometry).
MultipatchMap interpolate_geometry(std::shared_ptr<const MultipatchSpace> s);

struct QuadPoint {
    int patch = 0;
    double u = 0, v = 0;
    double w = 0; // weight in the patch parameter measure
};
// Gauss rule with p+1 points per knot span and direction; deterministic order.
std::vector<QuadPoint> quadrature_points(const MultipatchSpace& s);

// Greville-based interpolation of a curve-valued function into a knot space (for
// projecting analytic boundary arcs); endpoints exact.
BSplineCurve project_curve(const std::function<Vec2(double)>& f, const KnotVector& k);

} // namespace mpp
