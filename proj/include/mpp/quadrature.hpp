#pragma once

#include <vector>

namespace mpp {

struct GaussRule {
    std::vector<double> x; // nodes on [0, 1]
    std::vector<double> w; // weights summing to 1
};

// Gauss-Legendre rule with n points (1 <= n <= 10).
const GaussRule& gauss_rule(int n);

} // namespace mpp
