#pragma once

#include "mpp/geometry.hpp"
#include "mpp/template.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <cstdint>
#include <vector>

namespace mpp {

// Knots are stored exactly as integer ticks of 1 / (N0 * 2^kTickBits); every knot is
// therefore of the form k / (N0 * 2^m), which is the dyadic certificate.
constexpr int kTickBits = 40;

class KnotVector {
public:
    KnotVector() = default;
    KnotVector(int degree, int n0, std::vector<std::int64_t> ticks);

    int degree() const { return p_; }
    int n0() const { return n0_; }
    const std::vector<std::int64_t>& ticks() const { return ticks_; }
    std::int64_t denominator() const { return static_cast<std::int64_t>(n0_) << kTickBits; }

    double value(size_t i) const;
    std::vector<double> values() const;
    std::vector<double> unique_values() const;
    std::vector<std::int64_t> unique_ticks() const;
    size_t size() const { return ticks_.size(); }
    int n_basis() const { return static_cast<int>(ticks_.size()) - p_ - 1; }
    int n_spans() const { return static_cast<int>(unique_ticks().size()) - 1; }
    int n_interior() const { return n_spans() - 1; }
    // Smallest m with every knot of the form k / (N0 2^m).
    int dyadic_level() const;

    bool operator==(const KnotVector& o) const { return p_ == o.p_ && n0_ == o.n0_ && ticks_ == o.ticks_; }
    bool operator!=(const KnotVector& o) const { return !(*this == o); }

private:
    int p_ = 0;
    int n0_ = 1;
    std::vector<std::int64_t> ticks_;
};

KnotVector base_knotvector(int p, int n0);
// Base vector refined uniformly `levels` times.
KnotVector uniform_knotvector(int p, int n0, int levels);
KnotVector reverse(const KnotVector& k);
// Insert the midpoint of nonempty span `span` (0-based).
KnotVector dyadic_refine(const KnotVector& k, int span);
KnotVector knot_union(const KnotVector& a, const KnotVector& b);
bool is_superset(const KnotVector& fine, const KnotVector& coarse);
// Knots of `fine` missing from `coarse` (with multiplicity).
std::vector<double> knot_difference(const KnotVector& fine, const KnotVector& coarse);

nlohmann::json knots_to_json(const KnotVector& k);
KnotVector knots_from_json(const nlohmann::json& j);

// Nonzero basis functions and derivatives at x. Returns the span index s with
// U[s] <= x < U[s+1]; ders(k, j) is the k-th derivative of basis s-p+j.
int basis_derivatives(const std::vector<double>& U, int p, double x, int nder, Eigen::MatrixXd& ders);
int find_span(const std::vector<double>& U, int p, double x);

struct BSplineCurve {
    KnotVector knots;
    Points ctrl;

    Vec2 eval(double t) const;
    Vec2 derivative(double t, int order = 1) const;
    Points sample(int n) const;
};

BSplineCurve reverse(const BSplineCurve& c);
// Knot insertion onto a superset knot vector; throws NotASuperset.
BSplineCurve prolong(const BSplineCurve& c, const KnotVector& finer);

nlohmann::json curve_to_json(const BSplineCurve& c);
BSplineCurve curve_from_json(const nlohmann::json& j);

struct FitConfig {
    int degree = 3;
    int n0 = 1;
    double lambda = 1e-5;
    double mu_ls = 1e-3;
    int max_recursions = 12;
};

struct FitResult {
    BSplineCurve curve;
    std::vector<double> residuals; // per point, relative to the curve length
    int recursions = 0;
    double lambda = 0; // bending weight the fit was computed with
};

// Regularised least-squares fit with exact endpoint values and tangents; residuals are
// measured after gauging the point set to unit length.
FitResult fit_curve(const Points& points, const FitConfig& cfg);
// As fit_curve, but when the tolerance is out of reach the bending weight is divided by ten
// up to max_relaxations - 1 times and finally dropped. Strongly bent data otherwise stalls on
// the regularisation bias, which refinement cannot remove.
FitResult fit_curve_relaxed(const Points& points, const FitConfig& cfg, int max_relaxations = 3);

struct KnotPropagation {
    std::vector<KnotVector> edge_knots;                      // per template edge, low -> high vertex
    std::vector<std::array<KnotVector, 2>> quad_knots;       // per quad (mu, nu)
    std::vector<int> edge_class;                             // class id per template edge
    int n_conflicts = 0;                                     // classes with Xi vs reversed Xi clash
};

// Boundary knots are given per template boundary edge i in the direction i -> i+1.
KnotPropagation propagate_knots(const Template& t, const std::vector<KnotVector>& boundary_knots);

// Directed parametric sides of a quad: side s runs from quad_side_from(s) to quad_side_to(s)
// as the local parameter increases. Sides 0, 2 carry mu; sides 3, 1 carry nu.
int quad_side_from(int side);
int quad_side_to(int side);

} // namespace mpp
