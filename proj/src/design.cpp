#include "zibc/design.hpp"

#include <cmath>

#include "zibc/errors.hpp"

namespace zibc {

void DesignMatrix::validate(bool require_treatment) const {
    if (values.rows() == 0 || values.cols() == 0) {
        throw ContractError("design matrix is empty");
    }
    if (labels.size() != static_cast<std::size_t>(values.cols())) {
        throw ContractError("design matrix has " + std::to_string(values.cols()) +
                            " columns but " + std::to_string(labels.size()) + " labels");
    }
    if (!values.allFinite()) {
        throw ContractError("design matrix contains non-finite entries");
    }
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        if (values(i, 0) != 1.0) {
            throw ContractError("intercept column must be constant 1 (row " +
                                std::to_string(i) + ")");
        }
    }
    if (require_treatment) {
        if (values.cols() < 2) {
            throw ContractError("trial design requires a treatment column");
        }
        for (Eigen::Index i = 0; i < values.rows(); ++i) {
            const double t = values(i, 1);
            if (t != 0.0 && t != 1.0) {
                throw ContractError("treatment column must be 0/1 (row " +
                                    std::to_string(i) + ")");
            }
        }
    }
}

DesignMatrix DesignMatrix::intercept_only(Eigen::Index n) {
    DesignMatrix d;
    d.values = Eigen::MatrixXd::Ones(n, 1);
    d.labels = {"intercept"};
    return d;
}

DesignMatrix DesignMatrix::trial(const Eigen::VectorXd& treat,
                                 const Eigen::MatrixXd& covariates,
                                 const std::vector<std::string>& cov_labels) {
    const Eigen::Index n = treat.size();
    if (covariates.size() > 0 && covariates.rows() != n) {
        throw ContractError("treatment and covariate row counts differ");
    }
    const Eigen::Index q = covariates.size() > 0 ? covariates.cols() : 0;
    if (cov_labels.size() != static_cast<std::size_t>(q)) {
        throw ContractError("covariate label count does not match covariate columns");
    }
    DesignMatrix d;
    d.values.resize(n, 2 + q);
    d.values.col(0).setOnes();
    d.values.col(1) = treat;
    for (Eigen::Index j = 0; j < q; ++j) {
        d.values.col(2 + j) = covariates.col(j);
    }
    d.labels = {"intercept", "treat"};
    d.labels.insert(d.labels.end(), cov_labels.begin(), cov_labels.end());
    d.validate(true);
    return d;
}

} // namespace zibc
