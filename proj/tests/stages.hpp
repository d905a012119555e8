#pragma once

// The pipeline stages replayed in memory, so tests can inspect intermediate objects that
// run_pipeline only writes to disk.

#include "mpp/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace stages {

struct Run {
    mpp::PlaneGraph graph;
    std::vector<mpp::BSplineCurve> curves;
    std::vector<mpp::FaceProblem> problems;
    std::vector<mpp::FaceSolution> solutions;
    std::vector<mpp::MultipatchMap> maps;
};

inline Run replay(const std::string& graph_path, const mpp::PipelineConfig& cfg) {
    Run r;
    mpp::PlaneGraph g = mpp::load_graph(graph_path);
    for (int e = 0; e < g.n_edges(); ++e) mpp::densify_edge(g, e, cfg.min_edge_points);
    g = mpp::remove_concave_corners(g, cfg.concavity).graph;
    mpp::StrategyConfig sc = cfg.strategy;
    sc.seed = cfg.seed;
    r.graph = mpp::templatise(g, mpp::TemplateCatalogue{}, sc);
    r.curves = mpp::fit_edges(r.graph, cfg.fit).curves;
    if (cfg.conformity) mpp::make_conforming(r.graph, r.curves);
    for (int f = 0; f < r.graph.n_faces(); ++f) r.problems.push_back(mpp::face_problem(r.graph, r.curves, f, cfg));
    for (const auto& p : r.problems) {
        r.solutions.push_back(mpp::solve_face(p, cfg));
        r.maps.push_back(r.solutions.back().map);
    }
    return r;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

inline std::filesystem::path scratch(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("mpp_" + name);
    std::filesystem::remove_all(p);
    return p;
}

} // namespace stages
