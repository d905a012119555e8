// Command line front end: run the pipeline, build template catalogues, validate graphs.

#include "mpp/errors.hpp"
#include "mpp/pipeline.hpp"
#include "mpp/preprocess.hpp"
#include "mpp/templates.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

int run(const std::string& config, const std::string& input, const std::string& out, std::optional<int> strategy,
        std::optional<double> k, bool interface_removal, std::optional<int> mesh) {
    mpp::PipelineConfig cfg = config.empty() ? mpp::PipelineConfig{} : mpp::load_config(config);
    if (strategy) cfg.strategy.strategy = *strategy;
    if (k) {
        cfg.diffusivity.kind = mpp::DiffusivitySpec::Kind::Homogenise;
        cfg.diffusivity.k = *k;
    }
    if (interface_removal) cfg.interface_removal = true;
    if (mesh) cfg.extract_mesh = *mesh;
    const mpp::RunOutcome r = mpp::run_pipeline(cfg, input, out);
    if (r.exit_code == 2)
        std::cout << "manual intervention needed for faces " << r.report["manual_faces"].dump() << '\n';
    else
        std::cout << "parameterised " << r.report["faces"].size() << " faces into " << out << '\n';
    return r.exit_code;
}

int validate(const std::string& path) {
    const mpp::PlaneGraph g = mpp::load_graph(path, true);
    int concave = 0;
    for (int f = 0; f < g.n_faces(); ++f) concave += static_cast<int>(mpp::concave_vertices(g, f, 0.02).size());
    std::cout << "valid: " << g.vertices.size() << " vertices, " << g.n_edges() << " edges, " << g.n_faces()
              << " faces, " << concave << " concave corners\n";
    return 0;
}

int build_catalogue(int n_min, int n_max, int max_patches, const std::string& out) {
    mpp::CatalogueOptions opt;
    opt.max_patches = max_patches;
    mpp::TemplateCatalogue cat(opt);
    cat.build(n_min, n_max);
    cat.save(out);
    std::cout << "catalogue with " << cat.total() << " templates written to " << out << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multipatch parameterisation of plane graphs"};
    app.require_subcommand(1);

    auto* run_cmd = app.add_subcommand("run", "parameterise every face of a graph");
    std::string config, input, out;
    std::optional<int> strategy, mesh;
    std::optional<double> k;
    bool ir = false;
    run_cmd->add_option("--config", config, "pipeline configuration JSON")->check(CLI::ExistingFile);
    run_cmd->add_option("--input", input, "plane graph JSON")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--out", out, "output directory")->required();
    run_cmd->add_option("--strategy", strategy, "template selection strategy")->check(CLI::Range(1, 3));
    run_cmd->add_option("--homogenise-k", k, "apply the homogenising diffusivity with exponent K");
    run_cmd->add_flag("--interface-removal", ir, "re-solve the control map to remove interface kinks");
    run_cmd->add_option("--extract-mesh", mesh, "write an N x N per patch quad mesh");

    auto* cat_cmd = app.add_subcommand("catalogue", "template catalogue tools");
    cat_cmd->require_subcommand(1);
    auto* build_cmd = cat_cmd->add_subcommand("build", "enumerate templates and save them");
    int n_min = 4, n_max = 8, max_patches = 0;
    std::string cat_out;
    build_cmd->add_option("--n-min", n_min, "smallest boundary size")->check(CLI::Range(2, 64));
    build_cmd->add_option("--n-max", n_max, "largest boundary size")->check(CLI::Range(2, 64));
    build_cmd->add_option("--max-patches", max_patches, "patch cap (0: N/2 + 2)");
    build_cmd->add_option("--out", cat_out, "catalogue JSON")->required();

    auto* val_cmd = app.add_subcommand("validate", "check a plane graph");
    std::string graph;
    val_cmd->add_option("graph", graph, "plane graph JSON")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run_cmd) return run(config, input, out, strategy, k, ir, mesh);
        if (*build_cmd) return build_catalogue(n_min, n_max, max_patches, cat_out);
        if (*val_cmd) return validate(graph);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
