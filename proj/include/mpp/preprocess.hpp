#pragma once

#include "mpp/plane_graph.hpp"

#include <utility>
#include <vector>

namespace mpp {

struct ConcavityConfig {
    double eps_angle = 0.02;       // concave when angle >= pi + eps_angle
    double mu_concave_bonus = 2.0; // quality divisor for concave targets
    int samples_per_curve = 101;
};

struct SplittingCurve {
    int source = 0, target = 0;     // global vertex ids
    int source_local = 0, target_local = 0;
    Points samples;                 // samples.front() = source, samples.back() = target
    Vec2 d0 = Vec2::Zero(), d1 = Vec2::Zero(); // C'(0), C'(1)
    bool linear = false;            // straight-segment fallback
};

// Cubic Hermite curve sampled at n uniform parameters.
Points hermite_curve(const Vec2& va, const Vec2& da, const Vec2& vb, const Vec2& db, int n_samples);

// Q of the analytic cubic (exact integral of |C''|^2) normalised by the sampled length;
// divided by mu when the target is concave. Throws DegenerateCurve.
double curve_quality(const SplittingCurve& curve, bool target_is_concave, double mu);

// Q from uniformly sampled points using second differences and the trapezoidal rule.
double sampled_quality(const Points& samples);

// True when d lies strictly inside the cone spanned by a and b.
bool in_convex_cone(const Vec2& d, const Vec2& a, const Vec2& b);

std::vector<int> concave_vertices(const PlaneGraph& g, int face, double eps_angle);

struct Candidate {
    std::pair<int, int> pair; // (source, target) face-local indices
    SplittingCurve curve;
    double quality = 0;       // adjusted quality
};
std::vector<Candidate> candidate_curves(const PlaneGraph& g, int face, const ConcavityConfig& cfg);

// Inserts the curve as a new edge: face `face` becomes F+, F- is appended. Returns the
// new edge id.
int split_face(PlaneGraph& g, int face, const SplittingCurve& curve);

struct ConcavityResult {
    PlaneGraph graph;
    std::vector<int> manual_faces;
    int splits = 0;
};
ConcavityResult remove_concave_corners(const PlaneGraph& g, const ConcavityConfig& cfg = {});

} // namespace mpp
