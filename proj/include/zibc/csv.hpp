#ifndef ZIBC_CSV_HPP
#define ZIBC_CSV_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "zibc/meta.hpp"
#include "zibc/zibc.hpp"

namespace zibc {

/// Parsed CSV contents (RFC-4180 quoting, UTF-8, '.' decimal separator).
struct CsvTable {
    std::string path;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // column index by case-insensitive name; -1 if absent
    int column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

/// Doubles rendered with enough digits to round-trip exactly.
std::string format_double(double v);

/// Parse helpers that name file/row/field in every diagnostic.
double parse_double(const CsvTable& table, std::size_t row, int col);
long parse_count(const CsvTable& table, std::size_t row, int col);

/// Study aggregate table with the exact header
/// study_id,n_c,n_t,ybar_c,ybar_t,p0_c,p0_t,beta1_cv,se1_cv (any order,
/// case-insensitive). Extra or missing columns are contract errors.
std::vector<StudySummary> read_study_table(const std::string& path);

/// Effects table: study_id,effect,se with an optional method column.
std::vector<StudyEffect> read_effects_table(const std::string& path);

/// Participant-level data: a count column y, a 0/1 column treat, and the
/// requested covariate columns.
struct IpdData {
    Eigen::VectorXd y;
    Eigen::VectorXd treat;
    Eigen::MatrixXd covariates;
    std::vector<std::string> covariate_names;
};

IpdData read_ipd(const std::string& path, const std::vector<std::string>& covariates);

} // namespace zibc

#endif
