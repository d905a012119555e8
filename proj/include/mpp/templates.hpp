#pragma once

#include "mpp/plane_graph.hpp"
#include "mpp/template.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mpp {

// Patch adjacency graph together with the side gluing that embeds it. Node ids of the
// abstract graph: boundary node b is b, patch p is n_boundary + p.
struct PAG {
    int n_boundary = 0;
    int n_patches = 0;
    // sides[p][s] >= 0 encodes 4*q + t (glued to side t of patch q); < 0 encodes -1-b
    // (boundary edge b). Side s of a patch runs from its corner s to corner s+1.
    std::vector<std::array<int, 4>> sides;

    std::vector<int> boundary_patch() const;
    // Undirected edges of the abstract graph, including the boundary cycle.
    std::vector<std::array<int, 2>> adjacency() const;
};

struct EnumerationLimits {
    size_t max_results = 0;           // 0 = unlimited
    size_t max_search_nodes = 5000000; // search budget per call
};

// Throws InfeasibleConfig when counting rules out every PAG.
std::vector<PAG> enumerate_pags(int n, int n_patches, EnumerationLimits limits = {});

// Canonical encoding of the abstract PAG, minimal over boundary rotations and reflections.
std::vector<int> pag_canonical_key(const PAG& pag);

// Harmonic glue solve over the corner network, repaired by the untangler if folded.
// Throws SingularGlueSystem.
Template pag_to_template(const PAG& pag);

Template rc_n_leaf(int n);

// Boundary labels shifted by `rotation` (and mirrored first when `reflect`); positions
// follow the corresponding symmetry of the N-gon.
Template relabel_template(const Template& t, int rotation, bool reflect);

// Interior vertices and quads renumbered by a traversal seeded at the boundary edges.
void canonicalize(Template& t);
// Combinatorial key with the boundary labels held fixed.
std::vector<int> template_key(const Template& t);

// Interior positions from the uniform graph Laplacian with boundary at the N-gon corners.
void harmonic_positions(Template& t);
// Harmonic positions followed by untangling when any corner cross product is <= 0.
void embed_template(Template& t);

struct CatalogueOptions {
    int max_patches = 0;       // 0: N/2 + 2
    size_t per_cell_cap = 40;  // PAGs kept per (N, N_p)
    size_t search_budget = 400000;
    bool include_reflections = true;
};

class TemplateCatalogue {
public:
    TemplateCatalogue() = default;
    explicit TemplateCatalogue(CatalogueOptions opt) : opt_(opt) {}

    // Templates with N boundary edges, generated on first use unless loaded.
    const std::vector<Template>& for_n(int n) const;
    void add(const Template& t);
    void build(int n_min, int n_max);
    std::vector<int> sizes() const;
    size_t total() const;

    nlohmann::json to_json() const;
    static TemplateCatalogue from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static TemplateCatalogue load(const std::string& path);

private:
    CatalogueOptions opt_;
    mutable std::map<int, std::vector<Template>> by_n_;
    void generate(int n) const;
};

nlohmann::json template_to_json(const Template& t);
Template template_from_json(const nlohmann::json& j);

// Templates with |F| boundary edges whose boundary vertices paired to flat face vertices
// (angle >= pi - mu_angle) have valence >= 3; RC N-leaf when nothing survives.
std::vector<Template> prefilter(const std::vector<double>& face_angles, const TemplateCatalogue& cat, double mu_angle);
std::vector<Template> prefilter(const PlaneGraph& g, int face, const TemplateCatalogue& cat, double mu_angle);

// Exit boundary edge and crossed quads of the quad strip entering at boundary edge `i`.
struct Strip {
    int entry = 0, exit = 0;
    std::vector<std::pair<int, int>> quads; // (quad, entry side)
};
Strip template_strip(const Template& t, int boundary_edge);

// Splits `edge` (at `fraction` of its length when given, else balanced) and propagates the
// split through the opposite-edge chain of templated faces, refining every affected
// template. Returns the ids of all graph edges that were split. Throws RefinementCycle.
std::vector<int> refine_template(PlaneGraph& g, int edge, std::optional<double> fraction = std::nullopt);

} // namespace mpp
