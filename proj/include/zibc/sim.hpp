#ifndef ZIBC_SIM_HPP
#define ZIBC_SIM_HPP

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "zibc/meta.hpp"
#include "zibc/rng.hpp"
#include "zibc/zibc.hpp"
#include "zibc/zip_em.hpp"

namespace zibc {

/// One Monte Carlo scenario: K trials with zero-inflated Poisson outcomes,
/// count model log(mu) = beta0 + beta1*treat + beta2*cov and zero model
/// logit(pi) = gamma0 + gamma1*treat + gamma2*cov, cov ~ N(0,1).
struct SimScenario {
    int k_studies = 10;
    double beta0 = 1.2;
    double beta1 = -0.5;
    double beta2 = 0.25;
    double gamma1 = 0.5;
    double target_zero_rate = 0.4;
    std::vector<int> sample_sizes;   // empty: 200 for the first half, 400 after
    std::vector<double> treat_probs; // empty: cycle 0.4, 0.5, 0.6
    int replications = 1000;
    std::uint64_t seed = 0;
    ZeroModel zero_model = ZeroModel::FullCovariates;
    int workers = 1;
    double gamma2_factor = 0.5; // identifiability constraint gamma2 = factor*gamma0

    std::vector<int> resolved_sizes() const;
    std::vector<double> resolved_treat_probs() const;
    void validate() const;
};

/// Result of solving for gamma0 so the marginal zero rate hits its target.
struct GammaCalibration {
    double gamma0 = 0.0;
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    double achieved_zero_rate = 0.0;
    double quadrature_error = 0.0;
    double mean_pi_treated = 0.0; // quadrature E[pi | arm]
    double mean_pi_control = 0.0;
};

/// Finds gamma0 on [-20, 20] such that
/// E[pi + (1-pi) e^{-mu}] = target, expectation over cov ~ N(0,1)
/// (64-node Gauss-Hermite) and treat ~ Bernoulli(p_t). Throws NumericalError
/// when the target is outside the attainable range.
GammaCalibration calibrate_gamma0(double target_zero_rate, double gamma1,
                                  const std::array<double, 3>& beta, double p_t,
                                  double gamma2_factor = 0.5);

/// Participant-level data of one generated trial. The covariate is returned
/// grand-mean centered (the analysis-side convention); the subtracted mean is
/// kept for reference.
struct StudyData {
    Eigen::VectorXd y;
    Eigen::VectorXd treat;
    Eigen::VectorXd covariate;
    double covariate_offset = 0.0;
};

/// Deterministic in (key.seed, key.replication, key.study): each row has its
/// own counter-based stream, so output never depends on execution order.
StudyData generate_study(int n, double p_t, const std::array<double, 3>& beta,
                         const std::array<double, 3>& gamma, RngKey key);

/// One study's fits under all three methods.
struct StudyFit {
    bool ok = false;
    std::string failure;
    double beta1_cv = 0.0;
    double se1_cv = 0.0;
    double beta1_mle = 0.0;
    double se1_mle = 0.0;
    CorrectionResult correction;
    StudySummary summary;
};

struct ReplicationResult {
    std::vector<StudyFit> studies;
    bool flagged = false; // at least one study fit failed
    MetaResult pooled_true;
    MetaResult pooled_cv;
    MetaResult pooled_zibc;
};

ReplicationResult run_replication(const SimScenario& scenario,
                                  const GammaCalibration& calibration,
                                  int rep_index);
/// Convenience overload that calibrates internally.
ReplicationResult run_replication(const SimScenario& scenario, int rep_index);

struct MethodSummary {
    double coverage = 0.0;
    double mse = 0.0;
    double avg_pooled_se = 0.0;
    double aprd = 0.0; // |avg_pooled_se - avg_pooled_se_true| / avg_pooled_se_true
};

struct SimReport {
    SimScenario scenario;
    GammaCalibration calibration;
    MethodSummary true_method;
    MethodSummary conventional;
    MethodSummary zibc;
    // per-study averages across replications
    double avg_delta1 = 0.0;     // beta1_mle - beta1_cv (realized zero-inflation bias)
    double avg_delta1_hat = 0.0; // estimated correction -log(1-pi_t)+log(1-pi_c)
    double avg_pi_t = 0.0;       // solved arm-level structural zero rates
    double avg_pi_c = 0.0;
    double avg_beta1_cv = 0.0;
    double avg_beta1_mle = 0.0;
    double avg_beta1_zibc = 0.0;
    int replications_used = 0;
    std::vector<int> flagged_replications;
};

/// Runs all replications (optionally on scenario.workers threads; the
/// reduction is ordered by replication index so worker count never changes
/// the report).
SimReport run_simulation(const SimScenario& scenario);

} // namespace zibc

#endif
