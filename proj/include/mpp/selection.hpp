#pragma once

#include "mpp/controlmap.hpp"
#include "mpp/plane_graph.hpp"
#include "mpp/surrogate.hpp"
#include "mpp/templates.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mpp {

// Selection order of untemplated faces: even faces with at least 4 edges first, then the
// fewest templated edges, then the fewest edges, then the lowest id. Throws AllTemplated.
int select_face(const PlaneGraph& g);

struct SplitPolicy {
    double mu_templated = 2.0; // bonus for untemplated edges
    double mu_boundary = 1.5;  // bonus for boundary edges
    double eps_length = 0.3;
};

double scaled_length(const PlaneGraph& g, int edge, const SplitPolicy& p);

struct SplitSpec {
    int edge = 0;
    std::vector<double> fractions; // empty: one balanced split; {1/3, 2/3}: double split
};

// Odd faces: one edge. Two-sided faces: one edge split twice or both edges once.
// Throws NotApplicable for even faces with at least 4 edges.
std::vector<SplitSpec> select_split_edges(const PlaneGraph& g, int face, const SplitPolicy& p);

// Floater surrogate x_h^r from the sampled control domain onto the sampled face, plus the
// N-gon map used to transfer template vertices.
struct SurrogateMap {
    int face = -1;
    int samples_per_edge = 25;
    ControlDomain domain;
    Points face_samples;                  // face polygon, samples_per_edge per edge
    std::vector<double> boundary_angles;  // interior angle of the sampled face at each corner
    PiecewiseLinearMap to_face;           // control domain -> face
    PiecewiseLinearMap ngon;              // regular N-gon -> control domain

    int n_edges() const { return domain.n_edges(); }
    Vec2 operator()(const Vec2& p) const { return to_face.evaluate(p); }
};
// Throws FoldedSurrogate when the face-to-control map folds.
SurrogateMap surrogate_map(const PlaneGraph& g, int face, double mu_angle, int samples_per_edge = 25);

ControlTemplate control_template(const Template& t, const SurrogateMap& s);

struct AngleEntry {
    int quad = 0, corner = 0, vertex = 0;
    double angle = 0, preferred = 0, ratio = 0;
};
struct AngleLedger {
    std::vector<AngleEntry> entries;
    double max_ratio = 0, min_ratio = 0;
};

// Preferred angle at a template vertex: boundary min(face angle, pi/2), interior 2 pi / val.
double preferred_angle(const Template& t, const std::vector<int>& valence, int vertex,
                       const std::vector<double>& boundary_angles);

// C_T = max ratio / min ratio + lambda_patch |Q|, angles taken from the first segment of the
// point sets w(e) sampled along each template edge and pushed through x_h^r.
double template_cost(const ControlTemplate& ct, const SurrogateMap& s, double lambda_patch,
                     AngleLedger* ledger = nullptr);

double softmax(const std::vector<double>& x, double beta);
double softmin(const std::vector<double>& x, double beta);

// Angle ratios h^r measured with finite-difference tangents through x_h^r.
std::vector<double> angle_ratios(const ControlTemplate& ct, const SurrogateMap& s);

// log softmax(h) - log softmin(h) and its gradient with respect to the inner control vertices
// (boundary entries are zero).
double softmax_cost(const ControlTemplate& ct, const SurrogateMap& s, double beta,
                    std::vector<Vec2>* grad = nullptr);

struct OptimiseOptions {
    double beta = 6.0;
    double mu_relax = 0.2;
    int max_iterations = 200;
    double tolerance = 1e-8;
};
struct OptimiseReport {
    int iterations = 0;
    double initial_cost = 0, final_cost = 0;
    std::vector<double> history;     // accepted costs
    double min_constraint_ratio = 1; // min over accepted iterates of g / g0
};
// Throws InfeasibleStart when some initial cross product is <= 0.
ControlTemplate optimise_inner_vertices(const ControlTemplate& ct, const SurrogateMap& s,
                                        const OptimiseOptions& opt = {}, OptimiseReport* report = nullptr);

struct StrategyConfig {
    int strategy = 2;
    double lambda_patch = 0.5;
    double beta = 6.0;
    double mu_relax = 0.2;
    double mu_angle = 0.2;
    std::uint64_t seed = 0;
    int samples_per_edge = 25;
    SplitPolicy split;
};

// Symmetries of the face's cyclic (edge length, corner angle) sequence, encoded as
// (rotation, reflect) pairs acting on boundary labels.
std::vector<std::pair<int, bool>> face_symmetries(const PlaneGraph& g, int face, double rel_tol = 0.01);
bool admits_symmetry(const Template& t, int rotation, bool reflect);

struct FaceSelection {
    int face = 0;
    std::string template_id;
    int n_patches = 0;
    double cost = 0;
    int candidates = 0;
    int optimise_iterations = 0;
};
struct TemplatiseReport {
    std::vector<FaceSelection> faces;
    int split_edges = 0;
};

PlaneGraph templatise(const PlaneGraph& g, const TemplateCatalogue& cat, const StrategyConfig& cfg,
                      TemplatiseReport* report = nullptr);

} // namespace mpp
