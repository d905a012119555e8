#pragma once

#include "mpp/mp_space.hpp"

#include <Eigen/Sparse>

#include <memory>
#include <vector>

namespace mpp {

struct SolverConfig {
    double eta = 10.0;      // interface penalty
    double mu_stab = 1e-5;  // ellipticity shift
    double eps_reg = 1e-4;  // determinant regulariser
    double newton_tol = 1e-10;
    int newton_max_iters = 50;
    double armijo_c = 1e-4;
    int max_backtracks = 20;
    int winslow_max_iters = 200;
};

struct DiffusivitySpec {
    enum class Kind { Identity, Homogenise } kind = Kind::Identity;
    double k = 0.0;
    double kappa = 1.0; // normalisation, frozen before the solve
};

struct NewtonReport {
    int iterations = 0;
    std::vector<double> residuals; // residual norm per iterate, starting with the initial one
    std::vector<double> steps;     // accepted line-search step sizes
    double min_det = 0;            // min det J at quadrature points of the final iterate
    bool converged = false;
};

struct SolveResult {
    MultipatchMap map;
    NewtonReport report;
};

// R_eps(x) = (x + sqrt(4 eps^2 + x^2)) / 2 and its derivative.
double regulariser(double x, double eps);
double regulariser_derivative(double x, double eps);

// Discrete Laplace solve with the constrained boundary coefficients. Throws SingularSystem.
MultipatchMap initial_map(std::shared_ptr<const MultipatchSpace> space, const BoundaryConstraint& c);

// Residual over the free coefficients (component-major: component k, free dof i at
// k * n_free + i) and its Jacobian.
struct NonlinearSystem {
    Eigen::VectorXd residual;
    Eigen::SparseMatrix<double> jacobian;
};
NonlinearSystem c0dg_system(const MultipatchMap& x, const BoundaryConstraint& c, const SolverConfig& cfg,
                            bool with_jacobian = true);
NonlinearSystem weakform_system(const MultipatchMap& x, const BoundaryConstraint& c, const DiffusivitySpec& d,
                                const SolverConfig& cfg, bool with_jacobian = true);

// Newton with Armijo backtracking on the residual norm. Both spaces are gauged to unit area
// internally; the best iterate is returned when the tolerance is not reached.
SolveResult solve_c0dg(const MultipatchMap& start, const BoundaryConstraint& c, const SolverConfig& cfg = {});
SolveResult solve_weakform(const MultipatchMap& start, const BoundaryConstraint& c, DiffusivitySpec d,
                           const SolverConfig& cfg = {});
// Weak form with D^k = kappa R(det d_mu x)^-k I; kappa makes the mean over quadrature
// points of the start map equal to one. k = 0 is the identity diffusivity.
SolveResult homogenise(const MultipatchMap& start, const BoundaryConstraint& c, double k, const SolverConfig& cfg = {});

// Regularised Winslow energy integral of trace G / R_eps(det J) over the layout domain.
double winslow_energy(const MultipatchMap& x, double eps);

struct WinslowReport {
    int iterations = 0;
    double initial_energy = 0, final_energy = 0;
    double min_det_before = 0, min_det_after = 0;
};
// L-BFGS on the gauged energy; throws UntangleFailed when the result is still folded.
MultipatchMap winslow_untangle(const MultipatchMap& start, const BoundaryConstraint& c, const SolverConfig& cfg = {},
                               WinslowReport* report = nullptr);

struct BijectivityReport {
    double min_det = 0, mean_det = 0;
    std::vector<double> patch_min, patch_mean;
};
// det of the derivative with respect to the layout coordinates at the quadrature points.
BijectivityReport bijectivity_report(const MultipatchMap& x);

// Geometry maps taken from a multipatch map (patch parameters -> map values).
std::vector<PatchGeometry> spline_geometry(const MultipatchMap& s);

// New control map s over the control-domain space: Dirichlet data equal to the spline
// projection of the space geometry on the boundary, tangent-aligned diffusivity inside.
// Throws SingularSystem.
MultipatchMap interface_removal(std::shared_ptr<const MultipatchSpace> space_r);

// Largest angle between one-sided transversal derivatives at interface midpoints.
double max_interface_kink(const MultipatchMap& x);

// Mapped area of every knot-span cell.
std::vector<double> cell_areas(const MultipatchMap& x);
double coefficient_of_variation(const std::vector<double>& v);

// Translation and scale bringing the boundary data to unit area.
struct Gauge {
    Vec2 shift = Vec2::Zero();
    double scale = 1.0;
};
Gauge boundary_gauge(const MultipatchSpace& s, const BoundaryConstraint& c);

} // namespace mpp
