#include "mpp/quadrature.hpp"
#include "mpp/errors.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <array>
#include <mutex>

namespace mpp {

namespace {

template <int N>
GaussRule make_rule() {
    using Q = boost::math::quadrature::gauss<double, N>;
    GaussRule r;
    const auto& a = Q::abscissa();
    const auto& w = Q::weights();
    // boost stores the nonnegative half of the symmetric rule
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 0.0) {
            r.x.push_back(0.5);
            r.w.push_back(0.5 * w[i]);
        } else {
            r.x.push_back(0.5 - 0.5 * a[i]);
            r.w.push_back(0.5 * w[i]);
            r.x.push_back(0.5 + 0.5 * a[i]);
            r.w.push_back(0.5 * w[i]);
        }
    }
    std::vector<size_t> order(r.x.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t i, size_t j) { return r.x[i] < r.x[j]; });
    GaussRule sorted;
    for (size_t i : order) {
        sorted.x.push_back(r.x[i]);
        sorted.w.push_back(r.w[i]);
    }
    return sorted;
}

} // namespace

const GaussRule& gauss_rule(int n) {
    static const std::array<GaussRule, 10> rules = {
        GaussRule{{0.5}, {1.0}}, make_rule<2>(), make_rule<3>(), make_rule<4>(), make_rule<5>(),
        make_rule<6>(),          make_rule<7>(), make_rule<8>(), make_rule<9>(), make_rule<10>()};
    if (n < 1 || n > 10) throw Error(ErrorCode::InvalidInput, "unsupported Gauss rule size");
    return rules[n - 1];
}

} // namespace mpp
