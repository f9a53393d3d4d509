#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crlasso/robust.hpp"

namespace crlasso {

/// Numeric table with a header row. Every data cell must parse as a finite
/// number; empty and NA cells are rejected.
struct NumericTable {
    std::vector<std::string> header;
    Eigen::MatrixXd values;
};

/// Throws DataError naming the source and the 1-based line of the problem.
NumericTable parse_numeric_csv(std::istream& in, const std::string& source);
NumericTable read_numeric_csv(const std::filesystem::path& path);

/// Resolves a response column given by name or, failing that, by 0-based index.
std::size_t resolve_column(const std::vector<std::string>& header, const std::string& column);

/// Splits a table into response and design.
Dataset to_dataset(const NumericTable& table, std::size_t response_column);

/// 10 significant digits, "NA" for NaN, no negative zero.
std::string format_number(double value);

/// 17 significant digits; round-trips exactly through parse_numeric_csv.
/// Used for data exports, where 10 digits would perturb downstream fits.
std::string format_exact(double value);

/// Joins fields with commas and appends LF. Fields containing a comma,
/// quote or newline are quoted.
std::string csv_line(const std::vector<std::string>& fields);

}  // namespace crlasso
