#include "crlasso/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>
#include <utility>

#include <CLI11.hpp>
#include <json.hpp>

#include "crlasso/csv.hpp"
#include "crlasso/errors.hpp"

namespace crlasso::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr std::size_t kMinRows = 10;

struct FitFlags {
    std::string input;
    std::string response = "0";
    double eta = kNormalQuantile995;
    double theta = 1.0;
    double sigma = 0.0;
    double iota = 0.001;
    std::size_t grid_size = 50;
    double eps1 = 1e-6;
    double eps2 = 1e-3;
    std::size_t max_outer = 50;
    std::uint64_t seed = 1;
    std::string out_dir = ".";
    bool no_post = false;
    bool strict = false;
};

struct ScreenFlags {
    std::string input;
    std::string response = "0";
    std::size_t k = 0;
    bool log = false;
    double eta = kNormalQuantile995;
    std::string out_dir = ".";
};

struct SimulateFlags {
    std::string input;
    std::string out_dir = ".";
    std::uint64_t seed = 1;
    std::size_t threads = 0;
    bool write_data = false;
};

// Collects every output in memory and publishes them together, so a failed
// command never leaves a partial set of primary files behind.
class OutputSet {
public:
    explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}

    void add(const std::string& name, std::string content) { files_.emplace_back(name, std::move(content)); }

    void commit() {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw DataError("cannot create output directory '" + dir_.string() + "': " + ec.message());
        std::vector<fs::path> staged;
        try {
            for (const auto& [name, content] : files_) {
                const fs::path tmp = dir_ / ("." + name + ".partial");
                std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
                staged.push_back(tmp);
                out << content;
                out.close();
                if (!out) throw DataError("cannot write '" + tmp.string() + "'");
            }
            for (std::size_t i = 0; i < files_.size(); ++i) fs::rename(staged[i], dir_ / files_[i].first);
        } catch (...) {
            for (const auto& path : staged) fs::remove(path, ec);
            throw;
        }
    }

private:
    fs::path dir_;
    std::vector<std::pair<std::string, std::string>> files_;
};

// JSON numbers carry the same 10 significant digits as the CSV outputs.
json number(double value) {
    if (!std::isfinite(value)) return nullptr;
    return std::stod(format_number(value));
}

PathOptions path_options(const FitFlags& flags) {
    PathOptions options;
    options.fit.eta = flags.eta;
    options.fit.theta = flags.theta;
    options.fit.eps1 = flags.eps1;
    options.fit.eps2 = flags.eps2;
    options.fit.max_outer = flags.max_outer;
    options.iota = flags.iota;
    options.grid_size = flags.grid_size;
    options.post_regression = !flags.no_post;
    if (flags.sigma > 0.0) options.sigma_override = flags.sigma;
    return options;
}

void validate(const PathOptions& options) {
    try {
        options.fit.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    if (!(options.iota > 0.0 && options.iota < 1.0)) throw UsageError("--iota must lie in (0, 1)");
    if (options.grid_size < 2) throw UsageError("--grid-size must be at least 2");
}

struct LoadedData {
    NumericTable table;
    std::size_t response = 0;
};

LoadedData load(const std::string& input, const std::string& response) {
    LoadedData loaded;
    loaded.table = read_numeric_csv(input);
    try {
        loaded.response = resolve_column(loaded.table.header, response);
    } catch (const std::invalid_argument& e) {
        throw UsageError(std::string(e.what()) + " in '" + input + "'");
    }
    if (loaded.table.values.cols() < 2) throw DataError("'" + input + "' needs a response and at least one predictor");
    return loaded;
}

Dataset load_dataset(const FitFlags& flags) {
    const LoadedData loaded = load(flags.input, flags.response);
    Dataset data = to_dataset(loaded.table, loaded.response);
    if (data.rows() < kMinRows)
        throw DataError("'" + flags.input + "' has " + std::to_string(data.rows()) + " rows; at least " +
                        std::to_string(kMinRows) + " are required");
    return data;
}

void check_convergence(const PathResult& path) {
    std::string problems;
    if (!path.selected_fit.converged) problems += " selected CR-Lasso fit did not converge;";
    if (!path.final_model.converged) problems += " final model did not converge;";
    if (!path.final_model.inner_converged) problems += " a cellwise step hit its iteration limit;";
    if (!problems.empty()) throw ConvergenceError("--strict:" + problems);
}

json diagnostics(const Dataset& data, const PathResult& path, const PathOptions& options) {
    const CellwiseSolution& model = path.final_model;
    json d;
    d["n"] = data.rows();
    d["p"] = data.cols();
    d["response"] = data.response_name;
    d["sigma_hat"] = number(path.standardized.info.sigma_hat);
    d["sigma_overridden"] = options.sigma_override.has_value();
    d["eta"] = number(options.fit.eta);
    d["theta"] = number(options.fit.theta);
    d["lambda_opt"] = number(path.lambdas[static_cast<Eigen::Index>(path.selected_index)]);
    d["lambda_index"] = path.selected_index;
    d["criterion"] = number(path.criterion_values[static_cast<Eigen::Index>(path.selected_index)]);
    d["model_size"] = model.model_size();
    d["post_regression"] = path.post_regression_applied;
    d["selected_fit"] = {{"outer_iterations", path.selected_fit.outer_iterations},
                         {"converged", path.selected_fit.converged},
                         {"inner_converged", path.selected_fit.inner_converged}};
    d["final_model"] = {{"outer_iterations", model.outer_iterations},
                        {"converged", model.converged},
                        {"inner_converged", model.inner_converged}};
    d["path"] = {{"grid_size", static_cast<std::size_t>(path.grid.size())},
                 {"fitted", static_cast<std::size_t>(path.lambdas.size())},
                 {"truncated", path.truncated},
                 {"all_converged", path.all_converged()},
                 {"max_outer_iterations", path.max_outer_iterations()}};
    d["flagged_cells"] = static_cast<std::size_t>((model.delta.array() != 0.0).count());
    d["flagged_responses"] = static_cast<std::size_t>((model.zeta.array() != 0.0).count());
    d["exclusion_waived"] = path.exclusion_waived;
    json excluded = json::array();
    for (std::size_t k = 0; k < path.excluded.size(); ++k) {
        if (!path.excluded[k]) continue;
        excluded.push_back({{"index", k},
                            {"lambda", number(path.lambdas[static_cast<Eigen::Index>(k)])},
                            {"reason", path.exclusion_reasons[k]}});
    }
    d["excluded"] = std::move(excluded);
    d["warnings"] = path.warnings;
    return d;
}

std::string coefficients_csv(const Dataset& data, const PathResult& path) {
    const CellwiseSolution& model = path.final_model;
    std::string out = csv_line({"variable", "beta_raw", "beta_standardized", "selected"});
    out += csv_line({"(intercept)", format_number(model.intercept), "NA", "1"});
    for (std::size_t j = 0; j < data.cols(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        out += csv_line({data.column_name(j), format_number(model.beta[jj]), format_number(model.beta_star[jj]),
                         model.beta_star[jj] != 0.0 ? "1" : "0"});
    }
    return out;
}

const char* direction(double value) { return value > 0.0 ? "high" : "low"; }

// Rows are 1-based data rows. Design cells report the standardized-scale
// delta; response rows report zeta on the sigma-scaled response.
std::string cellflags_csv(const Dataset& data, const PathResult& path) {
    const CellwiseSolution& model = path.final_model;
    std::string out = csv_line({"row", "column", "delta_hat", "direction"});
    for (Eigen::Index i = 0; i < model.delta.rows(); ++i) {
        for (Eigen::Index j = 0; j < model.delta.cols(); ++j) {
            const double d = model.delta(i, j);
            if (d == 0.0) continue;
            out += csv_line({std::to_string(i + 1), data.column_name(static_cast<std::size_t>(j)), format_number(d),
                             direction(d)});
        }
        const double z = model.zeta[i];
        if (z != 0.0) out += csv_line({std::to_string(i + 1), data.response_name, format_number(z), direction(z)});
    }
    return out;
}

std::string path_csv(const PathResult& path) {
    std::string out = csv_line({"index", "lambda", "model_size", "criterion", "excluded", "reason",
                                "outer_iterations", "converged", "selected"});
    for (std::size_t k = 0; k < path.solutions.size(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const CellwiseSolution& s = path.solutions[k];
        out += csv_line({std::to_string(k), format_number(path.lambdas[kk]), std::to_string(s.model_size()),
                         format_number(path.criterion_values[kk]), path.excluded[k] ? "1" : "0",
                         path.exclusion_reasons[k], std::to_string(s.outer_iterations), s.converged ? "1" : "0",
                         k == path.selected_index ? "1" : "0"});
    }
    return out;
}

std::string path_coefficients_csv(const Dataset& data, const PathResult& path) {
    std::string out = csv_line({"index", "variable", "beta_standardized"});
    for (std::size_t k = 0; k < path.solutions.size(); ++k) {
        const Eigen::VectorXd& b = path.solutions[k].beta_star;
        for (Eigen::Index j = 0; j < b.size(); ++j)
            if (b[j] != 0.0)
                out += csv_line({std::to_string(k), data.column_name(static_cast<std::size_t>(j)), format_number(b[j])});
    }
    return out;
}

int cmd_fit(const FitFlags& flags, bool full_path, std::ostream& out) {
    const PathOptions options = path_options(flags);
    validate(options);
    const Dataset data = load_dataset(flags);
    const PathResult path = fit_path(data, options);
    if (flags.strict) check_convergence(path);

    OutputSet outputs(flags.out_dir);
    if (full_path) {
        outputs.add("path.csv", path_csv(path));
        outputs.add("path_coefficients.csv", path_coefficients_csv(data, path));
    } else {
        outputs.add("coefficients.csv", coefficients_csv(data, path));
        outputs.add("cellflags.csv", cellflags_csv(data, path));
    }
    outputs.add("diagnostics.json", diagnostics(data, path, options).dump(2) + "\n");
    outputs.commit();

    out << "lambda_opt=" << format_number(path.lambdas[static_cast<Eigen::Index>(path.selected_index)])
        << " model_size=" << path.final_model.model_size()
        << " sigma_hat=" << format_number(path.standardized.info.sigma_hat) << '\n';
    for (const auto& w : path.warnings) out << "warning: " << w << '\n';
    return exit_ok;
}

int cmd_screen(const ScreenFlags& flags, std::ostream& out) {
    if (!(flags.eta > 0.0)) throw UsageError("--eta must be positive");
    LoadedData loaded = load(flags.input, flags.response);
    Dataset data = to_dataset(loaded.table, loaded.response);
    const std::size_t p = data.cols();
    if (flags.k == 0 || flags.k > p)
        throw UsageError("--k must lie in [1, " + std::to_string(p) + "], got " + std::to_string(flags.k));

    if (flags.log) {
        std::string offending;
        for (std::size_t j = 0; j < p; ++j) {
            if ((data.x.col(static_cast<Eigen::Index>(j)).array() > 0.0).all()) continue;
            if (!offending.empty()) offending += ", ";
            offending += data.column_name(j);
        }
        if (!offending.empty()) throw DataError("--log needs strictly positive predictors; offending columns: " + offending);
        data.x = data.x.array().log().matrix();
    }

    const auto correlations = column_correlations(data.x, data.y, flags.eta);
    std::vector<double> scores;
    scores.reserve(p);
    for (const auto& c : correlations) scores.push_back(c.value);
    const std::vector<std::size_t> order = rank_by_magnitude(scores, flags.k);

    // Input-file column index of predictor j.
    const auto original = [&](std::size_t j) { return j < loaded.response ? j : j + 1; };

    std::vector<std::string> header{data.response_name};
    for (std::size_t j : order) header.push_back(data.column_name(j));
    std::string screened = csv_line(header);
    std::vector<std::string> fields(order.size() + 1);
    for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
        fields[0] = format_exact(data.y[i]);
        for (std::size_t r = 0; r < order.size(); ++r)
            fields[r + 1] = format_exact(data.x(i, static_cast<Eigen::Index>(order[r])));
        screened += csv_line(fields);
    }

    std::string index = csv_line({"rank", "variable", "original_index", "correlation", "degenerate"});
    for (std::size_t r = 0; r < order.size(); ++r) {
        const std::size_t j = order[r];
        index += csv_line({std::to_string(r + 1), data.column_name(j), std::to_string(original(j)),
                           format_number(correlations[j].value), correlations[j].degenerate ? "1" : "0"});
    }

    OutputSet outputs(flags.out_dir);
    outputs.add("screened.csv", std::move(screened));
    outputs.add("screen_index.csv", std::move(index));
    outputs.commit();
    out << "kept " << order.size() << " of " << p << " predictors\n";
    return exit_ok;
}

std::string data_csv(const GeneratedInstance& instance) {
    const auto p = static_cast<std::size_t>(instance.x_contaminated.cols());
    std::vector<std::string> fields{"y"};
    for (std::size_t j = 0; j < p; ++j) fields.push_back("x" + std::to_string(j + 1));
    std::string out = csv_line(fields);
    for (Eigen::Index i = 0; i < instance.x_contaminated.rows(); ++i) {
        fields[0] = format_exact(instance.y_contaminated[i]);
        for (std::size_t j = 0; j < p; ++j)
            fields[j + 1] = format_exact(instance.x_contaminated(i, static_cast<Eigen::Index>(j)));
        out += csv_line(fields);
    }
    return out;
}

int cmd_simulate(const SimulateFlags& flags, std::ostream& out, std::ostream& err) {
    std::ifstream in(flags.input);
    if (!in) throw UsageError("cannot open scenario file '" + flags.input + "'");
    const std::vector<ScenarioSpec> specs = parse_scenarios(in, flags.input, flags.seed);
    const std::size_t threads =
        flags.threads > 0 ? flags.threads : std::max<std::size_t>(1, std::thread::hardware_concurrency());

    OutputSet outputs(flags.out_dir);
    std::string summary = csv_line({"scenario", "method", "metric", "mean", "sd", "count"});
    for (const ScenarioSpec& spec : specs) {
        ExperimentOptions options;
        options.path = spec.path;
        options.threads = threads;
        const ExperimentResult result =
            run_experiment(spec.scenario, spec.methods, spec.replicates, spec.scenario.seed, options);

        std::string metrics = csv_line({"replicate", "method", "metric", "value"});
        for (const MetricRow& row : result.rows)
            metrics += csv_line({std::to_string(row.replicate), row.method, row.metric, format_number(row.value)});
        outputs.add(spec.name + "_metrics.csv", std::move(metrics));

        std::string failures = csv_line({"replicate", "method", "reason"});
        for (const FitFailure& f : result.failures) {
            failures += csv_line({std::to_string(f.replicate), f.method, f.reason});
            err << spec.name << ": replicate " << f.replicate << " " << f.method << " failed: " << f.reason << '\n';
        }
        outputs.add(spec.name + "_failures.csv", std::move(failures));

        for (const SummaryRow& row : summarize(result.rows))
            summary += csv_line({spec.name, row.method, row.metric, format_number(row.mean), format_number(row.sd),
                                 std::to_string(row.count)});

        if (flags.write_data) {
            for (std::size_t r = 0; r < spec.replicates; ++r) {
                SimulationScenario s = spec.scenario;
                s.seed = spec.scenario.seed + r;
                outputs.add(spec.name + "_data_" + std::to_string(r) + ".csv", data_csv(generate(s)));
            }
        }
        out << spec.name << ": " << spec.replicates << " replicates, " << result.failures.size() << " failures\n";
    }
    outputs.add("summary.csv", std::move(summary));
    outputs.commit();
    return exit_ok;
}

void add_fit_options(CLI::App& cmd, FitFlags& f) {
    cmd.add_option("--input", f.input, "CSV file with a header row")->required();
    cmd.add_option("--response", f.response, "response column name or 0-based index")->capture_default_str();
    cmd.add_option("--eta", f.eta, "cell penalty for the design")->capture_default_str();
    cmd.add_option("--theta", f.theta, "cell penalty for the response")->capture_default_str();
    cmd.add_option("--sigma", f.sigma, "fixed residual scale instead of the plug-in estimate");
    cmd.add_option("--iota", f.iota, "smallest lambda as a fraction of lambda_max")->capture_default_str();
    cmd.add_option("--grid-size", f.grid_size, "number of lambda values")->capture_default_str();
    cmd.add_option("--eps1", f.eps1, "cellwise step tolerance")->capture_default_str();
    cmd.add_option("--eps2", f.eps2, "outer loop tolerance")->capture_default_str();
    cmd.add_option("--max-outer", f.max_outer, "outer iteration limit")->capture_default_str();
    cmd.add_option("--seed", f.seed, "accepted for interface symmetry; fitting is deterministic");
    cmd.add_option("--out-dir", f.out_dir, "output directory")->capture_default_str();
    cmd.add_flag("--no-post", f.no_post, "skip the post-selection CR-LS refit");
    cmd.add_flag("--strict", f.strict, "exit with code 4 when the reported fit did not converge");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Cellwise regularized Lasso"};
    app.name("crlasso");
    app.require_subcommand(1);

    FitFlags fit_flags;
    FitFlags path_flags;
    ScreenFlags screen_flags;
    SimulateFlags sim_flags;

    auto* fit = app.add_subcommand("fit", "select lambda by BIC and write coefficients and flagged cells");
    add_fit_options(*fit, fit_flags);
    auto* path = app.add_subcommand("path", "write every model on the lambda path");
    add_fit_options(*path, path_flags);

    auto* screen = app.add_subcommand("screen", "keep the k predictors most correlated with the response");
    screen->add_option("--input", screen_flags.input, "CSV file with a header row")->required();
    screen->add_option("--response", screen_flags.response, "response column name or 0-based index")
        ->capture_default_str();
    screen->add_option("--k", screen_flags.k, "number of predictors to keep")->required();
    screen->add_flag("--log", screen_flags.log, "log-transform the predictors first");
    screen->add_option("--eta", screen_flags.eta, "clipping level for the correlations")->capture_default_str();
    screen->add_option("--out-dir", screen_flags.out_dir, "output directory")->capture_default_str();

    auto* simulate = app.add_subcommand("simulate", "run Monte Carlo scenarios from a key=value file");
    simulate->add_option("--input", sim_flags.input, "scenario file")->required();
    simulate->add_option("--out-dir", sim_flags.out_dir, "output directory")->capture_default_str();
    simulate->add_option("--seed", sim_flags.seed, "base seed for blocks without one")->capture_default_str();
    simulate->add_option("--threads", sim_flags.threads, "worker threads, 0 for all cores")->capture_default_str();
    simulate->add_flag("--write-data", sim_flags.write_data, "also export every training data set");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? exit_ok : exit_usage;
    }

    try {
        if (fit->parsed()) return cmd_fit(fit_flags, false, out);
        if (path->parsed()) return cmd_fit(path_flags, true, out);
        if (screen->parsed()) return cmd_screen(screen_flags, out);
        return cmd_simulate(sim_flags, out, err);
    } catch (const UsageError& e) {
        err << "crlasso: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::invalid_argument& e) {
        err << "crlasso: " << e.what() << '\n';
        return exit_usage;
    } catch (const DataError& e) {
        err << "crlasso: " << e.what() << '\n';
        return exit_data;
    } catch (const ConvergenceError& e) {
        err << "crlasso: " << e.what() << '\n';
        return exit_convergence;
    } catch (const std::exception& e) {
        err << "crlasso: " << e.what() << '\n';
        return exit_failure;
    }
}

}  // namespace crlasso::cli
