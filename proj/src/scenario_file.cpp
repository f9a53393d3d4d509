#include <charconv>
#include <cmath>
#include <istream>
#include <set>
#include <sstream>

#include "crlasso/cli.hpp"

namespace crlasso::cli {
namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

struct Entry {
    std::string key;
    std::string value;
    std::size_t line = 0;
};

struct Block {
    std::string name;
    std::size_t line = 0;
    std::vector<Entry> entries;
};

class BlockParser {
public:
    BlockParser(const std::string& source, const Block& block) : source_(source), block_(block) {}

    [[noreturn]] void fail(const Entry& entry, const std::string& why) const {
        throw UsageError(source_ + ":" + std::to_string(entry.line) + ": field '" + entry.key + "': " + why);
    }

    double real(const Entry& entry) const {
        double value = 0.0;
        const char* end = entry.value.data() + entry.value.size();
        const auto [ptr, ec] = std::from_chars(entry.value.data(), end, value);
        if (ec != std::errc() || ptr != end || !std::isfinite(value)) fail(entry, "expected a number, got '" + entry.value + "'");
        return value;
    }

    template <typename T>
    T integer(const Entry& entry) const {
        T value = 0;
        const char* end = entry.value.data() + entry.value.size();
        const auto [ptr, ec] = std::from_chars(entry.value.data(), end, value);
        if (ec != std::errc() || ptr != end) fail(entry, "expected a non-negative integer, got '" + entry.value + "'");
        return value;
    }

    bool boolean(const Entry& entry) const {
        if (entry.value == "true" || entry.value == "1") return true;
        if (entry.value == "false" || entry.value == "0") return false;
        fail(entry, "expected true or false, got '" + entry.value + "'");
    }

    ScenarioSpec build(std::size_t ordinal, std::uint64_t default_seed) const {
        ScenarioSpec spec;
        spec.name = block_.name.empty() ? "scenario" + std::to_string(ordinal) : block_.name;
        spec.scenario.seed = default_seed;
        SimulationScenario& s = spec.scenario;
        std::set<std::string> seen;
        for (const Entry& e : block_.entries) {
            if (!seen.insert(e.key).second) fail(e, "given twice");
            const std::string& k = e.key;
            if (k == "name") {
                spec.name = e.value;
            } else if (k == "n") {
                s.n = integer<std::size_t>(e);
            } else if (k == "p") {
                s.p = integer<std::size_t>(e);
            } else if (k == "n_active") {
                s.n_active = integer<std::size_t>(e);
            } else if (k == "rho") {
                s.rho = real(e);
            } else if (k == "distribution") {
                if (e.value == "normal") s.distribution = PredictorDistribution::normal;
                else if (e.value == "t4") s.distribution = PredictorDistribution::t4;
                else if (e.value == "cauchy") s.distribution = PredictorDistribution::cauchy;
                else fail(e, "expected normal, t4 or cauchy, got '" + e.value + "'");
            } else if (k == "sigma_eps") {
                s.sigma_eps = real(e);
            } else if (k == "intercept") {
                s.intercept = real(e);
            } else if (k == "e") {
                s.e = real(e);
            } else if (k == "gamma") {
                s.gamma = real(e);
            } else if (k == "mode") {
                if (e.value == "cellwise") s.mode = ContaminationMode::cellwise;
                else if (e.value == "rowwise") s.mode = ContaminationMode::rowwise;
                else fail(e, "expected cellwise or rowwise, got '" + e.value + "'");
            } else if (k == "contaminate_response") {
                s.contaminate_response = boolean(e);
            } else if (k == "seed") {
                s.seed = integer<std::uint64_t>(e);
            } else if (k == "reps" || k == "replicates") {
                spec.replicates = integer<std::size_t>(e);
                if (spec.replicates == 0) fail(e, "must be at least 1");
            } else if (k == "methods") {
                spec.methods.clear();
                std::stringstream list(e.value);
                std::string item;
                while (std::getline(list, item, ',')) {
                    try {
                        spec.methods.push_back(parse_method(trim(item)));
                    } catch (const std::invalid_argument& ex) {
                        fail(e, ex.what());
                    }
                }
                if (spec.methods.empty()) fail(e, "no methods listed");
            } else if (k == "eta") {
                spec.path.fit.eta = real(e);
            } else if (k == "theta") {
                spec.path.fit.theta = real(e);
            } else if (k == "eps1") {
                spec.path.fit.eps1 = real(e);
            } else if (k == "eps2") {
                spec.path.fit.eps2 = real(e);
            } else if (k == "max_outer") {
                spec.path.fit.max_outer = integer<std::size_t>(e);
            } else if (k == "iota") {
                spec.path.iota = real(e);
                if (!(spec.path.iota > 0.0 && spec.path.iota < 1.0)) fail(e, "must lie in (0, 1)");
            } else if (k == "grid_size") {
                spec.path.grid_size = integer<std::size_t>(e);
                if (spec.path.grid_size < 2) fail(e, "must be at least 2");
            } else {
                fail(e, "unknown field");
            }
        }
        if (spec.name.empty() || spec.name.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
                                                             "0123456789_-.") != std::string::npos)
            throw UsageError(source_ + ":" + std::to_string(block_.line) + ": scenario name '" + spec.name +
                             "' may only use letters, digits, '_', '-' and '.'");
        try {
            s.validate();
            spec.path.fit.validate();
        } catch (const std::invalid_argument& ex) {
            throw UsageError(source_ + ": scenario '" + spec.name + "': " + ex.what());
        }
        return spec;
    }

private:
    const std::string& source_;
    const Block& block_;
};

}  // namespace

std::vector<ScenarioSpec> parse_scenarios(std::istream& in, const std::string& source, std::uint64_t default_seed) {
    std::vector<Block> blocks;
    Block current;
    const auto close = [&] {
        if (!current.entries.empty() || !current.name.empty()) blocks.push_back(std::move(current));
        current = Block{};
    };

    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) {
            // A blank line ends a block, but not one that so far only has a header.
            if (!current.entries.empty()) close();
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3)
                throw UsageError(source + ":" + std::to_string(line_no) + ": malformed block header '" + line + "'");
            close();
            current.name = trim(line.substr(1, line.size() - 2));
            current.line = line_no;
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError(source + ":" + std::to_string(line_no) + ": expected key=value, got '" + line + "'");
        if (current.entries.empty() && current.name.empty()) current.line = line_no;
        current.entries.push_back({trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no});
        if (current.entries.back().key.empty())
            throw UsageError(source + ":" + std::to_string(line_no) + ": missing key before '='");
    }
    close();
    if (blocks.empty()) throw UsageError(source + ": no scenarios found");

    std::vector<ScenarioSpec> specs;
    std::set<std::string> names;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        specs.push_back(BlockParser(source, blocks[b]).build(b + 1, default_seed));
        if (!names.insert(specs.back().name).second)
            throw UsageError(source + ": duplicate scenario name '" + specs.back().name + "'");
    }
    return specs;
}

}  // namespace crlasso::cli
