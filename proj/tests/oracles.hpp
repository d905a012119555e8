#pragma once

// Independent reference computations used by the unit tests and the acceptance binary.
// They deliberately avoid the library routines they are checking.

#include "mpp/plane_graph.hpp"
#include "mpp/selection.hpp"
#include "mpp/templates.hpp"

#include <set>
#include <vector>

namespace oracle {

// Abstract PAG: boundary edge b attaches to patch attach[b]; mult[i][j] parallel patch edges.
struct AbstractPag {
    int n = 0, q = 0;
    std::vector<int> attach;
    std::vector<std::vector<int>> mult;
};

AbstractPag abstract_of(const mpp::PAG& pag);

// Lexicographically smallest encoding over all boundary rotations, reflections and patch
// permutations (plain brute force).
std::vector<int> canonical_key(const AbstractPag& a);

// Every abstract PAG with N boundary nodes and q patches that has a planar rotation system
// whose faces form a quad layout of a disc (checked by face tracing and Euler's formula).
std::set<std::vector<int>> brute_force_pags(int n, int q);

// Interior angle of every face vertex from atan2 of the adjacent polygon segments.
std::vector<double> interior_angles(const mpp::PlaneGraph& g, int face);

// Template selection cost recomputed from its definition.
double template_cost(const mpp::ControlTemplate& ct, const mpp::SurrogateMap& s, double lambda_patch);

} // namespace oracle
