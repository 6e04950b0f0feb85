#include "zibc/gauss_hermite.hpp"

#include <cmath>

#include "zibc/errors.hpp"

namespace zibc {

QuadratureRule gauss_hermite(int n) {
    if (n < 1) {
        throw ContractError("quadrature order must be positive");
    }
    QuadratureRule rule;
    rule.nodes.assign(n, 0.0);
    rule.weights.assign(n, 0.0);

    const int half = (n + 1) / 2;
    double z = 0.0, pp = 0.0;
    for (int i = 0; i < half; ++i) {
        // asymptotic initial guesses for the largest roots, then stepping down
        if (i == 0) {
            z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
        } else if (i == 1) {
            z -= 1.14 * std::pow(n, 0.426) / z;
        } else if (i == 2) {
            z = 1.86 * z - 0.86 * rule.nodes[0];
        } else if (i == 3) {
            z = 1.91 * z - 0.91 * rule.nodes[1];
        } else {
            z = 2.0 * z - rule.nodes[i - 2];
        }
        for (int iter = 0; iter < 100; ++iter) {
            // orthonormal Hermite recurrence
            double p1 = 1.0 / std::sqrt(std::sqrt(M_PI));
            double p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / (j + 1.0)) * p2 -
                     std::sqrt(static_cast<double>(j) / (j + 1.0)) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            const double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) {
                break;
            }
        }
        rule.nodes[i] = z;
        rule.nodes[n - 1 - i] = -z;
        rule.weights[i] = 2.0 / (pp * pp);
        rule.weights[n - 1 - i] = rule.weights[i];
    }
    return rule;
}

} // namespace zibc
