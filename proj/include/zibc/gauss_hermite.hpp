#ifndef ZIBC_GAUSS_HERMITE_HPP
#define ZIBC_GAUSS_HERMITE_HPP

#include <cmath>
#include <vector>

namespace zibc {

/// Physicists' Gauss-Hermite rule: sum_i w_i f(x_i) ~ int e^{-x^2} f(x) dx.
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Nodes and weights by Newton iteration on the Hermite recurrence.
QuadratureRule gauss_hermite(int n);

/// E[g(Z)] for Z ~ N(0,1): (1/sqrt(pi)) sum w_i g(sqrt(2) x_i).
template <class G>
double expect_standard_normal(const QuadratureRule& rule, G&& g) {
    const double sqrt2 = std::sqrt(2.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        acc += rule.weights[i] * g(sqrt2 * rule.nodes[i]);
    }
    return acc / std::sqrt(M_PI);
}

} // namespace zibc

#endif
