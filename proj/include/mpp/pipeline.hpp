#pragma once

#include "mpp/mp_space.hpp"
#include "mpp/plane_graph.hpp"
#include "mpp/preprocess.hpp"
#include "mpp/selection.hpp"
#include "mpp/solver.hpp"
#include "mpp/splines.hpp"

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mpp {

struct PipelineConfig {
    ConcavityConfig concavity;
    StrategyConfig strategy; // carries the split policy
    FitConfig fit;
    SolverConfig solver;
    DiffusivitySpec diffusivity; // Homogenise applies D^k after the harmonic solve
    bool interface_removal = false;
    bool conformity = true;
    int extract_mesh = 0;        // nodes per patch direction, 0 disables the mesh
    int min_edge_points = 65;    // edges are densified to this many points on load
    int svg_samples = 64;        // curve samples per knot span in the SVG overview
    std::string catalogue;       // template catalogue file; empty builds on demand
    std::uint64_t seed = 0;
};

// Throws InvalidInput naming the offending field.
void validate_config(const PipelineConfig& c);
nlohmann::json config_to_json(const PipelineConfig& c);
// Missing keys keep their defaults; unknown keys are rejected.
PipelineConfig config_from_json(const nlohmann::json& j);
PipelineConfig load_config(const std::string& path);

// One fitted curve per graph edge, in the edge's canonical direction.
struct FittedEdges {
    std::vector<BSplineCurve> curves;
    std::vector<int> recursions;
    std::vector<double> max_residual;
};
// Throws MaxRecursionsExceeded after the lambda retries are exhausted.
FittedEdges fit_edges(const PlaneGraph& g, const FitConfig& cfg);

// Face edge i as a curve in the face direction.
BSplineCurve face_curve(const PlaneGraph& g, const std::vector<BSplineCurve>& curves, int face, int i);

// Knot vectors of the template boundary of `face` after propagation through its layout.
std::vector<KnotVector> face_boundary_knots(const PlaneGraph& g, const std::vector<BSplineCurve>& curves, int face);

// Unions every edge's knots with what each templated face demands of it until nothing
// changes, then prolongs the curves. Returns the number of sweeps.
int make_conforming(const PlaneGraph& g, std::vector<BSplineCurve>& curves);

// Control map, spline space and boundary constraint of one templated face.
struct FaceProblem {
    int face = 0;
    DomainKind domain = DomainKind::Disc;
    std::shared_ptr<const MultipatchSpace> space;
    BoundaryConstraint constraint;
};
FaceProblem face_problem(const PlaneGraph& g, const std::vector<BSplineCurve>& curves, int face,
                         const PipelineConfig& cfg);

struct FaceSolution {
    MultipatchMap map;
    NewtonReport newton;
    bool untangled = false;
    WinslowReport winslow;
    std::optional<NewtonReport> homogenise;
    std::optional<double> kink_before, kink_after; // interface removal
    double min_det = 0;
    std::vector<std::string> warnings;
};
// Harmonic solve, untangling when folded, then the requested post-processing.
FaceSolution solve_face(const FaceProblem& p, const PipelineConfig& cfg);

struct QuadMesh {
    Points nodes;
    std::vector<std::array<int, 4>> quads;
};
// n x n collocation nodes per patch. Nodes on graph edges and vertices are shared across
// faces; nodes on interior interfaces are shared inside the face. Throws FoldedMap.
QuadMesh extract_mesh(const PlaneGraph& g, const std::vector<BSplineCurve>& curves,
                      const std::vector<MultipatchMap>& maps, int n);
std::string mesh_to_string(const QuadMesh& m);

std::string svg_overview(const std::vector<BSplineCurve>& curves, const std::vector<MultipatchMap>& maps, int samples_per_span);

nlohmann::json face_spline_json(const MultipatchMap& x);

struct RunOutcome {
    nlohmann::json report;
    nlohmann::json timings;
    int exit_code = 0; // 0 done, 2 manual intervention needed
};

// Runs every stage and writes report.json, timings.json, overview.svg, face_<i>.json and
// (optionally) mesh.txt into `out_dir`. Stage errors are rethrown with the stage name.
RunOutcome run_pipeline(const PipelineConfig& cfg, const std::string& graph_path, const std::string& out_dir);

} // namespace mpp
