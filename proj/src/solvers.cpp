#include "crlasso/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "crlasso/errors.hpp"

namespace crlasso {

void FitConfig::validate() const {
    if (!(lambda >= 0.0)) throw std::invalid_argument("FitConfig: lambda must be non-negative");
    if (!(eta > 0.0)) throw std::invalid_argument("FitConfig: eta must be positive");
    if (!(theta > 0.0)) throw std::invalid_argument("FitConfig: theta must be positive");
    if (!(eps1 > 0.0)) throw std::invalid_argument("FitConfig: eps1 must be positive");
    if (!(eps2 > 0.0)) throw std::invalid_argument("FitConfig: eps2 must be positive");
    if (!(lasso_tol > 0.0)) throw std::invalid_argument("FitConfig: lasso_tol must be positive");
    if (max_outer == 0) throw std::invalid_argument("FitConfig: max_outer must be at least 1");
    if (max_inner == 0) throw std::invalid_argument("FitConfig: max_inner must be at least 1");
}

std::size_t CellwiseSolution::model_size() const {
    return static_cast<std::size_t>((beta_star.array() != 0.0).count());
}

std::vector<std::size_t> CellwiseSolution::support() const {
    std::vector<std::size_t> out;
    for (Eigen::Index j = 0; j < beta_star.size(); ++j)
        if (beta_star[j] != 0.0) out.push_back(static_cast<std::size_t>(j));
    return out;
}

Eigen::VectorXd ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (x.rows() != y.size()) throw std::invalid_argument("ols: shape mismatch");
    const auto p = static_cast<std::size_t>(x.cols());
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    const auto rank = static_cast<std::size_t>(qr.rank());
    if (x.rows() < x.cols() || rank < p) {
        const Eigen::VectorXd diag = qr.matrixR().diagonal().cwiseAbs();
        const double smallest = diag.size() > 0 ? diag.minCoeff() : 0.0;
        const double condition =
            smallest > 0.0 ? diag.maxCoeff() / smallest : std::numeric_limits<double>::infinity();
        throw RankDeficientError(rank, p, condition);
    }
    return qr.solve(y);
}

LassoResult lasso_cd(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda,
                     const Eigen::VectorXd& beta_init, double tol, std::size_t max_sweeps) {
    if (x.rows() != y.size()) throw std::invalid_argument("lasso_cd: shape mismatch");
    if (beta_init.size() != x.cols()) throw std::invalid_argument("lasso_cd: beta_init length != columns");
    if (!(lambda >= 0.0)) throw std::invalid_argument("lasso_cd: lambda must be non-negative");
    if (!(tol > 0.0)) throw std::invalid_argument("lasso_cd: tol must be positive");

    const Eigen::Index p = x.cols();
    const Eigen::VectorXd norms = x.colwise().squaredNorm().transpose();
    LassoResult result;
    result.beta = beta_init;
    for (Eigen::Index j = 0; j < p; ++j) {
        if (norms[j] == 0.0) {
            if (lambda == 0.0) throw std::invalid_argument("lasso_cd: zero column with lambda = 0");
            result.beta[j] = 0.0;
        }
    }
    Eigen::VectorXd residual = y - x * result.beta;

    auto update = [&](Eigen::Index j) {
        if (norms[j] == 0.0) return 0.0;
        const double old = result.beta[j];
        const double z = x.col(j).dot(residual) + norms[j] * old;
        const double fresh = soft_threshold(z, lambda) / norms[j];
        if (fresh != old) {
            residual.noalias() -= (fresh - old) * x.col(j);
            result.beta[j] = fresh;
        }
        return std::abs(fresh - old);
    };

    while (result.sweeps < max_sweeps) {
        double full_change = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) full_change = std::max(full_change, update(j));
        ++result.sweeps;
        if (full_change < tol) {
            result.converged = true;
            break;
        }
        while (result.sweeps < max_sweeps) {
            double active_change = 0.0;
            for (Eigen::Index j = 0; j < p; ++j)
                if (result.beta[j] != 0.0) active_change = std::max(active_change, update(j));
            ++result.sweeps;
            if (active_change < tol) break;
        }
        residual = y - x * result.beta;
    }
    return result;
}

namespace {

CellRegProblem make_problem(const Eigen::MatrixXd& x_star, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                            double sigma_hat, const FitConfig& config) {
    return CellRegProblem{x_star, y, beta, sigma_hat, config.eta, config.theta};
}

// Block coordinate descent shared by CR-LS and CR-Lasso. beta_step maps the
// regularized data (X* - D, y/s - z) and the current b = beta/s to the new b.
template <class BetaStep>
CellwiseSolution alternate(const Eigen::MatrixXd& x_star, const Eigen::VectorXd& y, double sigma_hat,
                           const FitConfig& config, double objective_lambda, Eigen::VectorXd beta,
                           Eigen::MatrixXd delta, BetaStep&& beta_step) {
    const CellRegOptions inner{config.eps1, config.max_inner, false};
    CellwiseSolution sol;

    Eigen::VectorXd zeta = optimal_zeta(make_problem(x_star, y, beta, sigma_hat, config), delta);
    sol.objective_trace.push_back(
        objective(make_problem(x_star, y, beta, sigma_hat, config), delta, zeta, objective_lambda));

    auto cell_step = [&]() {
        const auto problem = make_problem(x_star, y, beta, sigma_hat, config);
        CellRegResult cr = cellwise_regularize(problem, delta, inner);
        sol.inner_iterations += cr.iterations;
        sol.inner_converged = sol.inner_converged && cr.converged;
        delta = std::move(cr.delta);
        zeta = std::move(cr.zeta);
        sol.objective_trace.push_back(objective(problem, delta, zeta, objective_lambda));
    };

    for (std::size_t k = 1; k <= config.max_outer; ++k) {
        cell_step();
        const Eigen::MatrixXd x_tilde = x_star - delta;
        const Eigen::VectorXd y_tilde = y / sigma_hat - zeta;
        Eigen::VectorXd next = sigma_hat * beta_step(x_tilde, y_tilde, Eigen::VectorXd(beta / sigma_hat));
        const double change = (next - beta).cwiseAbs().maxCoeff();
        beta = std::move(next);
        sol.objective_trace.push_back(
            objective(make_problem(x_star, y, beta, sigma_hat, config), delta, zeta, objective_lambda));
        sol.outer_iterations = k;
        if (change < config.eps2) {
            sol.converged = true;
            break;
        }
    }
    cell_step();

    sol.beta_star = beta;
    sol.beta = beta;
    sol.intercept = 0.0;
    sol.delta = std::move(delta);
    sol.zeta = std::move(zeta);
    return sol;
}

void check_inputs(const Eigen::MatrixXd& x_star, const Eigen::VectorXd& y, double sigma_hat) {
    if (x_star.rows() != y.size()) throw std::invalid_argument("response length does not match design rows");
    if (x_star.rows() == 0 || x_star.cols() == 0) throw std::invalid_argument("empty design");
    if (!(sigma_hat > 0.0)) throw std::invalid_argument("sigma_hat must be positive");
}

}  // namespace

CellwiseSolution cr_ls(const Eigen::MatrixXd& x_star, const Eigen::VectorXd& y_centered, double sigma_hat,
                       const FitConfig& config) {
    config.validate();
    check_inputs(x_star, y_centered, sigma_hat);
    if (x_star.rows() <= x_star.cols())
        throw std::invalid_argument("cr_ls: need more observations than columns");
    return alternate(x_star, y_centered, sigma_hat, config, 0.0, Eigen::VectorXd::Zero(x_star.cols()),
                     Eigen::MatrixXd::Zero(x_star.rows(), x_star.cols()),
                     [](const Eigen::MatrixXd& xt, const Eigen::VectorXd& yt, const Eigen::VectorXd&) {
                         return ols(xt, yt);
                     });
}

CellwiseSolution cr_lasso(const Eigen::MatrixXd& x_star, const Eigen::VectorXd& y_centered, double sigma_hat,
                          const FitConfig& config, const std::optional<Eigen::VectorXd>& beta_init,
                          const std::optional<Eigen::MatrixXd>& delta_init) {
    config.validate();
    check_inputs(x_star, y_centered, sigma_hat);
    Eigen::VectorXd beta = beta_init ? *beta_init : Eigen::VectorXd::Zero(x_star.cols());
    Eigen::MatrixXd delta = delta_init ? *delta_init : Eigen::MatrixXd::Zero(x_star.rows(), x_star.cols());
    if (beta.size() != x_star.cols()) throw std::invalid_argument("cr_lasso: beta_init length != columns");
    if (delta.rows() != x_star.rows() || delta.cols() != x_star.cols())
        throw std::invalid_argument("cr_lasso: delta_init shape does not match the design");

    // The inner Lasso penalizes b = beta/s with lambda, which is the penalty
    // lambda/s on beta in the standardized objective.
    return alternate(x_star, y_centered, sigma_hat, config, config.lambda / sigma_hat, std::move(beta),
                     std::move(delta),
                     [&config](const Eigen::MatrixXd& xt, const Eigen::VectorXd& yt, const Eigen::VectorXd& b) {
                         return lasso_cd(xt, yt, config.lambda, b, config.lasso_tol, config.lasso_max_sweeps).beta;
                     });
}

CellwiseSolution post_cr_regression(const Eigen::MatrixXd& x_star, const Eigen::VectorXd& y_centered,
                                    double sigma_hat, const std::vector<std::size_t>& selected,
                                    const FitConfig& config) {
    config.validate();
    check_inputs(x_star, y_centered, sigma_hat);
    const Eigen::Index n = x_star.rows();
    const Eigen::Index p = x_star.cols();

    std::vector<std::size_t> columns = selected;
    std::sort(columns.begin(), columns.end());
    if (std::adjacent_find(columns.begin(), columns.end()) != columns.end())
        throw std::invalid_argument("post_cr_regression: duplicate column in selection");
    if (!columns.empty() && columns.back() >= static_cast<std::size_t>(p))
        throw std::invalid_argument("post_cr_regression: selected column out of range");
    if (static_cast<Eigen::Index>(columns.size()) >= n)
        throw std::invalid_argument("post_cr_regression: selection of " + std::to_string(columns.size()) +
                                    " columns needs more than " + std::to_string(n) + " observations");

    CellwiseSolution sol;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(n, p);
    sol.converged = true;

    if (!columns.empty()) {
        Eigen::MatrixXd sub(n, static_cast<Eigen::Index>(columns.size()));
        for (std::size_t c = 0; c < columns.size(); ++c)
            sub.col(static_cast<Eigen::Index>(c)) = x_star.col(static_cast<Eigen::Index>(columns[c]));
        CellwiseSolution fit = cr_ls(sub, y_centered, sigma_hat, config);
        for (std::size_t c = 0; c < columns.size(); ++c) {
            const auto j = static_cast<Eigen::Index>(columns[c]);
            beta[j] = fit.beta_star[static_cast<Eigen::Index>(c)];
            delta.col(j) = fit.delta.col(static_cast<Eigen::Index>(c));
        }
        sol.outer_iterations = fit.outer_iterations;
        sol.converged = fit.converged;
        sol.inner_iterations = fit.inner_iterations;
        sol.inner_converged = fit.inner_converged;
        sol.objective_trace = std::move(fit.objective_trace);
    }

    // Refresh D and z on the full design so unselected columns carry their
    // (decoupled) cellwise estimates too.
    const CellRegProblem problem{x_star, y_centered, beta, sigma_hat, config.eta, config.theta};
    CellRegResult cr = cellwise_regularize(problem, delta, CellRegOptions{config.eps1, config.max_inner, false});
    sol.inner_iterations += cr.iterations;
    sol.inner_converged = sol.inner_converged && cr.converged;
    sol.beta_star = beta;
    sol.beta = beta;
    sol.delta = std::move(cr.delta);
    sol.zeta = std::move(cr.zeta);
    return sol;
}

}  // namespace crlasso
