#include "crlasso/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <stdexcept>

#include "crlasso/errors.hpp"

namespace crlasso {

namespace {

std::vector<std::string> split_fields(const std::string& line, const std::string& source, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field += c;
        }
    }
    if (quoted) throw DataError(source + ":" + std::to_string(line_no) + ": unterminated quoted field");
    fields.push_back(std::move(field));
    return fields;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

}  // namespace

NumericTable parse_numeric_csv(std::istream& in, const std::string& source) {
    NumericTable table;
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::vector<double>> rows;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto fields = split_fields(line, source, line_no);
        if (!have_header) {
            for (auto& f : fields) table.header.push_back(trim(f));
            have_header = true;
            continue;
        }
        if (fields.size() != table.header.size())
            throw DataError(source + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(table.header.size()) + " fields, found " + std::to_string(fields.size()));
        std::vector<double> row;
        row.reserve(fields.size());
        for (std::size_t c = 0; c < fields.size(); ++c) {
            const std::string cell = trim(fields[c]);
            double value = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
            if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value))
                throw DataError(source + ":" + std::to_string(line_no) + ": column '" + table.header[c] +
                                "' has non-numeric or missing value '" + cell + "'");
            row.push_back(value);
        }
        rows.push_back(std::move(row));
    }
    if (!have_header) throw DataError(source + ": file is empty");
    if (rows.empty()) throw DataError(source + ": no data rows");
    table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(table.header.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return table;
}

NumericTable read_numeric_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError(path.string() + ": cannot open file");
    return parse_numeric_csv(in, path.string());
}

std::size_t resolve_column(const std::vector<std::string>& header, const std::string& column) {
    for (std::size_t j = 0; j < header.size(); ++j)
        if (header[j] == column) return j;
    std::size_t index = 0;
    const auto [ptr, ec] = std::from_chars(column.data(), column.data() + column.size(), index);
    if (!column.empty() && ec == std::errc() && ptr == column.data() + column.size() && index < header.size())
        return index;
    throw std::invalid_argument("response column '" + column + "' not found");
}

Dataset to_dataset(const NumericTable& table, std::size_t response_column) {
    const auto cols = static_cast<std::size_t>(table.values.cols());
    if (response_column >= cols) throw std::invalid_argument("response column out of range");
    if (cols < 2) throw DataError("need at least one predictor besides the response");
    Dataset data;
    data.x.resize(table.values.rows(), static_cast<Eigen::Index>(cols - 1));
    data.y = table.values.col(static_cast<Eigen::Index>(response_column));
    data.response_name = table.header[response_column];
    Eigen::Index out = 0;
    for (std::size_t j = 0; j < cols; ++j) {
        if (j == response_column) continue;
        data.x.col(out++) = table.values.col(static_cast<Eigen::Index>(j));
        data.column_names.push_back(table.header[j]);
    }
    return data;
}

std::string format_number(double value) {
    if (std::isnan(value)) return "NA";
    if (value == 0.0) return "0";
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.10g", value);
    return buffer;
}

std::string format_exact(double value) {
    if (value == 0.0) return "0";
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.17g", value);
    return buffer;
}

std::string csv_line(const std::vector<std::string>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) line += ',';
        const std::string& f = fields[i];
        if (f.find_first_of(",\"\n") == std::string::npos) {
            line += f;
        } else {
            line += '"';
            for (char c : f) {
                if (c == '"') line += '"';
                line += c;
            }
            line += '"';
        }
    }
    line += '\n';
    return line;
}

}  // namespace crlasso
