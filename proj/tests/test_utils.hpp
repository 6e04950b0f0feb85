#ifndef ZIBC_TEST_UTILS_HPP
#define ZIBC_TEST_UTILS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "zibc/design.hpp"

namespace test_util {

// Central finite-difference gradient, independent of any analytic score path.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-6) {
    Eigen::VectorXd g(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        Eigen::VectorXd xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        g[j] = (f(xp) - f(xm)) / (2.0 * h);
    }
    return g;
}

// Simulated zero-inflated Poisson trial data for test fixtures. Uses the
// standard library generator: tests only need reproducibility, not the
// library's counter-based streams.
struct SyntheticTrial {
    Eigen::VectorXd y;
    Eigen::VectorXd treat;
    Eigen::VectorXd cov;
};

inline SyntheticTrial make_zip_trial(int n, double beta0, double beta1, double beta2,
                                     double pi0, double pi1, unsigned seed,
                                     double p_treat = 0.5) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    SyntheticTrial t;
    t.y.resize(n);
    t.treat.resize(n);
    t.cov.resize(n);
    for (int i = 0; i < n; ++i) {
        const double tr = unif(rng) < p_treat ? 1.0 : 0.0;
        const double z = normal(rng);
        const double pi = tr == 1.0 ? pi1 : pi0;
        const double mu = std::exp(beta0 + beta1 * tr + beta2 * z);
        t.treat[i] = tr;
        t.cov[i] = z;
        if (unif(rng) < pi) {
            t.y[i] = 0.0;
        } else {
            std::poisson_distribution<long> pois(mu);
            t.y[i] = static_cast<double>(pois(rng));
        }
    }
    t.cov.array() -= t.cov.mean();
    return t;
}

inline zibc::DesignMatrix trial_design(const SyntheticTrial& t) {
    Eigen::MatrixXd cov(t.cov.size(), 1);
    cov.col(0) = t.cov;
    return zibc::DesignMatrix::trial(t.treat, cov, {"cov"});
}

} // namespace test_util

#endif
