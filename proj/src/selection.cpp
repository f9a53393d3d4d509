#include "crlasso/selection.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "crlasso/errors.hpp"

namespace crlasso {

Eigen::VectorXd lambda_grid(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double iota,
                            std::size_t grid_size) {
    if (grid_size < 2) throw std::invalid_argument("lambda_grid: grid size must be at least 2");
    if (!(iota > 0.0 && iota < 1.0)) throw std::invalid_argument("lambda_grid: iota must lie in (0, 1)");
    if (x.rows() != y.size()) throw std::invalid_argument("lambda_grid: shape mismatch");
    const double lambda_max = x.cols() > 0 ? (x.transpose() * y).cwiseAbs().maxCoeff() : 0.0;
    if (!(lambda_max > 0.0)) throw DataError("lambda_grid: lambda_max is zero, the path is degenerate");

    Eigen::VectorXd grid(static_cast<Eigen::Index>(grid_size));
    const double log_max = std::log(lambda_max);
    const double log_step = std::log(iota) / static_cast<double>(grid_size - 1);
    grid[0] = lambda_max;
    for (std::size_t k = 1; k + 1 < grid_size; ++k)
        grid[static_cast<Eigen::Index>(k)] = std::exp(log_max + log_step * static_cast<double>(k));
    grid[static_cast<Eigen::Index>(grid_size - 1)] = iota * lambda_max;
    return grid;
}

double selection_loss(const CellwiseSolution& solution, const Eigen::MatrixXd& x_star,
                      const Eigen::VectorXd& y_centered, double sigma_hat, double theta) {
    if (solution.beta_star.size() != x_star.cols() || solution.delta.rows() != x_star.rows() ||
        solution.delta.cols() != x_star.cols() || solution.zeta.size() != x_star.rows() ||
        y_centered.size() != x_star.rows())
        throw std::invalid_argument("selection_loss: solution shape does not match the data");
    const Eigen::VectorXd u =
        (y_centered - (x_star - solution.delta) * solution.beta_star) / sigma_hat - solution.zeta;
    return u.squaredNorm() + 2.0 * theta * solution.zeta.lpNorm<1>();
}

double bic(const CellwiseSolution& solution, const Eigen::MatrixXd& x_star, const Eigen::VectorXd& y_centered,
           double sigma_hat, double theta) {
    const double n = static_cast<double>(x_star.rows());
    return selection_loss(solution, x_star, y_centered, sigma_hat, theta) +
           std::log(n) * static_cast<double>(solution.model_size());
}

double aic(const CellwiseSolution& solution, const Eigen::MatrixXd& x_star, const Eigen::VectorXd& y_centered,
           double sigma_hat, double theta) {
    return selection_loss(solution, x_star, y_centered, sigma_hat, theta) +
           2.0 * static_cast<double>(solution.model_size());
}

std::optional<ShrinkViolation> find_shrink_violation(const CellwiseSolution& solution, std::size_t n,
                                                     double threshold) {
    const double limit = threshold * static_cast<double>(n);
    for (Eigen::Index j = 0; j < solution.beta_star.size(); ++j) {
        if (solution.beta_star[j] == 0.0) continue;
        const auto shrunk = static_cast<std::size_t>((solution.delta.col(j).array() != 0.0).count());
        if (static_cast<double>(shrunk) > limit) return ShrinkViolation{static_cast<std::size_t>(j), shrunk};
    }
    return std::nullopt;
}

std::size_t PathResult::max_outer_iterations() const {
    std::size_t out = final_model.outer_iterations;
    for (const auto& s : solutions) out = std::max(out, s.outer_iterations);
    return out;
}

bool PathResult::all_converged() const {
    bool ok = final_model.converged;
    for (const auto& s : solutions) ok = ok && s.converged;
    return ok;
}

namespace {

void apply_back_transform(CellwiseSolution& solution, const StandardizationInfo& info) {
    RawCoefficients raw = back_transform(solution.beta_star, info);
    solution.beta = std::move(raw.beta);
    solution.intercept = raw.intercept;
}

}  // namespace

PathResult fit_path_standardized(Standardized standardized, const PathOptions& options) {
    options.fit.validate();
    if (!(options.shrink_threshold >= 0.0)) throw std::invalid_argument("fit_path: shrink threshold must be >= 0");

    PathResult result;
    result.standardized = std::move(standardized);
    const Eigen::MatrixXd& x = result.standardized.x_star;
    const Eigen::VectorXd& y = result.standardized.y_centered;
    const StandardizationInfo& info = result.standardized.info;
    const double sigma = info.sigma_hat;
    const auto n = static_cast<std::size_t>(x.rows());
    const FitConfig& base = options.fit;

    if (!options.custom_lambdas.empty()) {
        result.lambdas = Eigen::Map<const Eigen::VectorXd>(options.custom_lambdas.data(),
                                                           static_cast<Eigen::Index>(options.custom_lambdas.size()));
        for (Eigen::Index k = 0; k < result.lambdas.size(); ++k) {
            if (!(result.lambdas[k] >= 0.0)) throw std::invalid_argument("fit_path: lambdas must be non-negative");
            if (k > 0 && !(result.lambdas[k] < result.lambdas[k - 1]))
                throw std::invalid_argument("fit_path: lambdas must be strictly decreasing");
        }
    } else {
        // Data seen by the inner Lasso when beta_star = 0.
        const Eigen::MatrixXd x_null = x - soft_threshold(x, base.eta);
        const Eigen::VectorXd y_scaled = y / sigma;
        const Eigen::VectorXd y_null = y_scaled - soft_threshold(y_scaled, base.theta);
        result.lambdas = lambda_grid(x_null, y_null, options.iota, options.grid_size);
    }

    result.grid = result.lambdas;
    const auto grid_count = static_cast<std::size_t>(result.grid.size());
    const std::size_t size_cap = options.max_model_size > 0 ? options.max_model_size : n / 2;
    std::vector<double> criteria;
    result.solutions.reserve(grid_count);

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
    Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(x.rows(), x.cols());
    for (std::size_t k = 0; k < grid_count; ++k) {
        FitConfig config = base;
        config.lambda = result.grid[static_cast<Eigen::Index>(k)];
        CellwiseSolution sol = cr_lasso(x, y, sigma, config, beta, delta);
        beta = sol.beta_star;
        delta = sol.delta;
        apply_back_transform(sol, info);
        criteria.push_back(options.criterion == Criterion::bic ? bic(sol, x, y, sigma, base.theta)
                                                               : aic(sol, x, y, sigma, base.theta));
        result.excluded.push_back(false);
        result.exclusion_reasons.emplace_back();
        if (const auto violation = find_shrink_violation(sol, n, options.shrink_threshold)) {
            result.excluded[k] = true;
            result.exclusion_reasons[k] = "column " + std::to_string(violation->column) + " has " +
                                          std::to_string(violation->shrunk_cells) + " of " + std::to_string(n) +
                                          " cells shrunk";
        }
        const std::size_t size = sol.model_size();
        result.solutions.push_back(std::move(sol));
        if (size > size_cap && k + 1 < grid_count) {
            result.truncated = true;
            result.warnings.push_back("path stopped at lambda index " + std::to_string(k) + ": model size " +
                                      std::to_string(size) + " exceeds " + std::to_string(size_cap));
            break;
        }
    }
    const std::size_t count = result.solutions.size();
    result.lambdas = result.grid.head(static_cast<Eigen::Index>(count));
    result.criterion_values = Eigen::Map<const Eigen::VectorXd>(criteria.data(), static_cast<Eigen::Index>(count));

    const bool any_kept = std::find(result.excluded.begin(), result.excluded.end(), false) != result.excluded.end();
    if (!any_kept) {
        result.exclusion_waived = true;
        result.warnings.push_back("every lambda violated the cell-shrinkage rule; the rule was waived");
    }
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < count; ++k) {
        if (any_kept && result.excluded[k]) continue;
        if (!best || result.criterion_values[static_cast<Eigen::Index>(k)] <
                         result.criterion_values[static_cast<Eigen::Index>(*best)])
            best = k;
    }
    result.selected_index = *best;
    result.selected_fit = result.solutions[*best];

    result.final_model = result.selected_fit;
    if (options.post_regression) {
        FitConfig config = base;
        config.lambda = 0.0;
        try {
            result.final_model = post_cr_regression(x, y, sigma, result.selected_fit.support(), config);
            apply_back_transform(result.final_model, info);
            result.post_regression_applied = true;
        } catch (const std::exception& e) {
            result.final_model = result.selected_fit;
            result.warnings.push_back(std::string("post-regression skipped: ") + e.what());
        }
    }
    return result;
}

PathResult fit_path(const Dataset& data, const PathOptions& options) {
    options.fit.validate();
    return fit_path_standardized(standardize(data, options.fit.eta, options.sigma_override.value_or(0.0)),
                                 options);
}

}  // namespace crlasso
