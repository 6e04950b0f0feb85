#ifndef ZIBC_DESIGN_HPP
#define ZIBC_DESIGN_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace zibc {

/// Regression design: n rows by p columns, first column an intercept of ones.
/// For trial layouts the second column is the 0/1 intervention indicator.
struct DesignMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> labels;

    Eigen::Index n() const { return values.rows(); }
    Eigen::Index p() const { return values.cols(); }

    // Throws ContractError on shape/label mismatch, non-finite entries, or a
    // non-constant intercept column. When require_treatment is set the second
    // column must be 0/1.
    void validate(bool require_treatment = false) const;

    static DesignMatrix intercept_only(Eigen::Index n);
    // [1, treat, cov...] with labels {"intercept","treat",cov_labels...}.
    static DesignMatrix trial(const Eigen::VectorXd& treat,
                              const Eigen::MatrixXd& covariates,
                              const std::vector<std::string>& cov_labels);
};

/// Fitted coefficients with the column labels of the design they came from.
struct Coefficients {
    Eigen::VectorXd values;
    std::vector<std::string> labels;
};

} // namespace zibc

#endif
