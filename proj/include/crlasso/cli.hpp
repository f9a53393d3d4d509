#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "crlasso/simlab.hpp"

namespace crlasso::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_failure = 1,
    exit_usage = 2,
    exit_data = 3,
    exit_convergence = 4,
};

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One block of a scenario file.
struct ScenarioSpec {
    std::string name;
    SimulationScenario scenario;
    std::size_t replicates = 50;
    std::vector<Method> methods{Method::cr_lasso, Method::cr_lasso_no_post, Method::lasso};
    PathOptions path;
};

/// Flat key=value format. Blocks are separated by blank lines or by a
/// "[name]" header; '#' starts a comment. Keys not given in a block keep
/// their defaults, and seed falls back to default_seed. Throws UsageError
/// naming the offending line and field.
std::vector<ScenarioSpec> parse_scenarios(std::istream& in, const std::string& source,
                                          std::uint64_t default_seed = 1);

/// Runs one command line (args excludes the program name). Never throws;
/// messages go to err and the return value is an ExitCode.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace crlasso::cli
