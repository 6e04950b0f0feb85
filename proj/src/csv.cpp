#include "zibc/csv.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "zibc/errors.hpp"

namespace zibc {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string field_name(const CsvTable& table, int col) {
    if (col >= 0 && col < static_cast<int>(table.header.size())) {
        return table.header[static_cast<std::size_t>(col)];
    }
    return "<column " + std::to_string(col) + ">";
}

[[noreturn]] void fail(const CsvTable& table, std::size_t row, int col,
                       const std::string& what) {
    throw ContractError(table.path + ": row " + std::to_string(row + 2) +
                        ", field '" + field_name(table, col) + "': " + what);
}

// RFC-4180 record parser handling quoted fields, doubled quotes, and embedded
// newlines. Returns one record per call.
bool read_record(std::istream& in, std::vector<std::string>& out) {
    out.clear();
    std::string field;
    bool in_quotes = false;
    bool any = false;
    int c;
    while ((c = in.get()) != EOF) {
        any = true;
        const char ch = static_cast<char>(c);
        if (in_quotes) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"') {
            in_quotes = true;
        } else if (ch == ',') {
            out.push_back(field);
            field.clear();
        } else if (ch == '\r') {
            if (in.peek() == '\n') {
                in.get();
            }
            out.push_back(field);
            return true;
        } else if (ch == '\n') {
            out.push_back(field);
            return true;
        } else {
            field.push_back(ch);
        }
    }
    if (any) {
        out.push_back(field);
    }
    return any;
}

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) {
        return s;
    }
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') {
            q += "\"\"";
        } else {
            q.push_back(c);
        }
    }
    q += "\"";
    return q;
}

} // namespace

int CsvTable::column(const std::string& name) const {
    const std::string want = lower(name);
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (lower(header[j]) == want) {
            return static_cast<int>(j);
        }
    }
    return -1;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ContractError(path + ": cannot open file");
    }
    CsvTable table;
    table.path = path;
    std::vector<std::string> record;
    if (!read_record(in, record)) {
        throw ContractError(path + ": file is empty");
    }
    table.header = record;
    while (read_record(in, record)) {
        if (record.size() == 1 && record[0].empty()) {
            continue; // trailing blank line
        }
        if (record.size() != table.header.size()) {
            throw ContractError(path + ": row " + std::to_string(table.rows.size() + 2) +
                                " has " + std::to_string(record.size()) +
                                " fields, expected " + std::to_string(table.header.size()));
        }
        table.rows.push_back(record);
    }
    return table;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ContractError(path + ": cannot open file for writing");
    }
    for (std::size_t j = 0; j < header.size(); ++j) {
        out << (j ? "," : "") << quote_if_needed(header[j]);
    }
    out << "\n";
    for (const auto& row : rows) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            out << (j ? "," : "") << quote_if_needed(row[j]);
        }
        out << "\n";
    }
    if (!out) {
        throw ContractError(path + ": write failed");
    }
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const CsvTable& table, std::size_t row, int col) {
    const std::string& s = table.rows[row][static_cast<std::size_t>(col)];
    if (s.empty()) {
        fail(table, row, col, "empty numeric field");
    }
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) {
        fail(table, row, col, "not a valid number: '" + s + "'");
    }
    if (!std::isfinite(v)) {
        fail(table, row, col, "value is not finite: '" + s + "'");
    }
    return v;
}

long parse_count(const CsvTable& table, std::size_t row, int col) {
    const double v = parse_double(table, row, col);
    if (v < 0.0 || v != std::floor(v)) {
        fail(table, row, col, "expected a nonnegative integer");
    }
    return static_cast<long>(v);
}

std::vector<StudySummary> read_study_table(const std::string& path) {
    const CsvTable table = read_csv(path);
    static const char* expected[] = {"study_id", "n_c",  "n_t",      "ybar_c", "ybar_t",
                                     "p0_c",     "p0_t", "beta1_cv", "se1_cv"};
    if (table.header.size() != 9) {
        throw ContractError(path + ": study table must have exactly the 9 columns "
                            "study_id,n_c,n_t,ybar_c,ybar_t,p0_c,p0_t,beta1_cv,se1_cv");
    }
    int cols[9];
    for (int j = 0; j < 9; ++j) {
        cols[j] = table.column(expected[j]);
        if (cols[j] < 0) {
            throw ContractError(path + ": missing required column '" +
                                std::string(expected[j]) + "'");
        }
    }
    std::vector<StudySummary> out;
    out.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        StudySummary s;
        s.study_id = table.rows[r][static_cast<std::size_t>(cols[0])];
        if (s.study_id.empty()) {
            fail(table, r, cols[0], "study_id must not be empty");
        }
        s.n_c = parse_count(table, r, cols[1]);
        s.n_t = parse_count(table, r, cols[2]);
        s.ybar_c = parse_double(table, r, cols[3]);
        s.ybar_t = parse_double(table, r, cols[4]);
        s.p0_c = parse_double(table, r, cols[5]);
        s.p0_t = parse_double(table, r, cols[6]);
        if (s.p0_c < 0.0 || s.p0_c > 1.0) {
            fail(table, r, cols[5], "proportion must lie in [0, 1]");
        }
        if (s.p0_t < 0.0 || s.p0_t > 1.0) {
            fail(table, r, cols[6], "proportion must lie in [0, 1]");
        }
        s.beta1_cv = parse_double(table, r, cols[7]);
        s.se1_cv = parse_double(table, r, cols[8]);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<StudyEffect> read_effects_table(const std::string& path) {
    const CsvTable table = read_csv(path);
    const int id_col = table.column("study_id");
    const int eff_col = table.column("effect");
    const int se_col = table.column("se");
    if (id_col < 0 || eff_col < 0 || se_col < 0) {
        throw ContractError(path + ": effects table requires columns study_id,effect,se");
    }
    const int method_col = table.column("method");
    std::vector<StudyEffect> out;
    out.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        StudyEffect e;
        e.study_id = table.rows[r][static_cast<std::size_t>(id_col)];
        e.effect = parse_double(table, r, eff_col);
        e.se = parse_double(table, r, se_col);
        if (e.se <= 0.0) {
            fail(table, r, se_col, "standard error must be positive");
        }
        if (method_col >= 0) {
            e.method_label = table.rows[r][static_cast<std::size_t>(method_col)];
        }
        out.push_back(std::move(e));
    }
    return out;
}

IpdData read_ipd(const std::string& path, const std::vector<std::string>& covariates) {
    const CsvTable table = read_csv(path);
    const int y_col = table.column("y");
    const int treat_col = table.column("treat");
    if (y_col < 0 || treat_col < 0) {
        throw ContractError(path + ": participant-level table requires columns y and treat");
    }
    std::vector<int> cov_cols;
    for (const auto& name : covariates) {
        const int c = table.column(name);
        if (c < 0) {
            throw ContractError(path + ": missing covariate column '" + name + "'");
        }
        cov_cols.push_back(c);
    }
    const Eigen::Index n = static_cast<Eigen::Index>(table.rows.size());
    if (n == 0) {
        throw ContractError(path + ": no data rows");
    }
    IpdData data;
    data.y.resize(n);
    data.treat.resize(n);
    data.covariates.resize(n, static_cast<Eigen::Index>(cov_cols.size()));
    data.covariate_names = covariates;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        data.y[static_cast<Eigen::Index>(r)] =
            static_cast<double>(parse_count(table, r, y_col));
        const double t = parse_double(table, r, treat_col);
        if (t != 0.0 && t != 1.0) {
            fail(table, r, treat_col, "treatment indicator must be 0 or 1");
        }
        data.treat[static_cast<Eigen::Index>(r)] = t;
        for (std::size_t j = 0; j < cov_cols.size(); ++j) {
            data.covariates(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
                parse_double(table, r, cov_cols[j]);
        }
    }
    return data;
}

} // namespace zibc
