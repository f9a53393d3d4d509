#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace crlasso {

// Input data that cannot be modelled (parse failures, missing cells,
// degenerate columns). Distinct from std::invalid_argument, which flags
// caller mistakes such as mismatched shapes or out-of-range options.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DegenerateColumnError : public DataError {
public:
    DegenerateColumnError(std::size_t column, const std::string& name)
        : DataError("column '" + name + "' (index " + std::to_string(column) +
                    ") has zero robust scale; constant or near-constant columns cannot be standardized"),
          column_(column) {}

    std::size_t column() const noexcept { return column_; }

private:
    std::size_t column_;
};

class RankDeficientError : public DataError {
public:
    RankDeficientError(std::size_t rank, std::size_t columns, double condition)
        : DataError("least-squares design is rank deficient: numerical rank " + std::to_string(rank) +
                    " of " + std::to_string(columns) + " columns, condition estimate " +
                    std::to_string(condition)),
          rank_(rank),
          condition_(condition) {}

    std::size_t rank() const noexcept { return rank_; }
    double condition() const noexcept { return condition_; }

private:
    std::size_t rank_;
    double condition_;
};

}  // namespace crlasso
