#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "crlasso/cellreg.hpp"
#include "crlasso/robust.hpp"

namespace crlasso {

struct FitConfig {
    // Penalty on the sigma-scaled coefficients b = beta_star / sigma_hat, i.e.
    // the inner Lasso solves 0.5*||y/s - z - (X* - D) b||^2 + lambda*||b||_1.
    // In terms of the standardized objective this is a penalty lambda / s on
    // beta_star.
    double lambda = 0.0;
    double eta = kNormalQuantile995;
    double theta = 1.0;
    double eps1 = 1e-6;
    double eps2 = 1e-3;
    std::size_t max_outer = 50;
    std::size_t max_inner = 500;
    double lasso_tol = 1e-10;
    std::size_t lasso_max_sweeps = 100000;

    void validate() const;
};

struct CellwiseSolution {
    Eigen::VectorXd beta_star;
    Eigen::VectorXd beta;       // raw scale; equals beta_star until back-transformed
    double intercept = 0.0;
    Eigen::MatrixXd delta;
    Eigen::VectorXd zeta;
    std::size_t outer_iterations = 0;
    bool converged = false;
    std::size_t inner_iterations = 0;     // total over all cellwise steps
    bool inner_converged = true;          // every cellwise step met eps1
    // Standardized objective at (b0,D0,z0), then after each cellwise step and
    // each coefficient step, in order. Non-increasing.
    std::vector<double> objective_trace;

    std::size_t model_size() const;
    std::vector<std::size_t> support() const;
};

/// Least squares via column-pivoted Householder QR. Throws RankDeficientError
/// when the numerical rank is below the column count or n < p.
Eigen::VectorXd ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

struct LassoResult {
    Eigen::VectorXd beta;
    std::size_t sweeps = 0;
    bool converged = false;
};

/// Cyclic coordinate descent for 0.5*||y - X b||^2 + lambda*||b||_1.
///
/// Columns are visited in ascending order. After each full sweep the active
/// set is iterated until stable, then a full sweep confirms. Stops when the
/// largest coefficient change of a full sweep is below tol. A zero column
/// pins its coefficient at 0 when lambda > 0 and throws when lambda == 0.
LassoResult lasso_cd(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda,
                     const Eigen::VectorXd& beta_init, double tol = 1e-10, std::size_t max_sweeps = 100000);

/// Cellwise regularized least squares (alternating cellwise step and OLS).
/// Requires n > p. lambda in the config is ignored.
CellwiseSolution cr_ls(const Eigen::MatrixXd& x_star, const Eigen::VectorXd& y_centered, double sigma_hat,
                       const FitConfig& config);

/// Cellwise regularized Lasso.
///
/// Alternates the cellwise step (warm-started from the previous D) and the
/// Lasso on (X* - D, y/s - z) until the sup-norm change of beta_star is below
/// eps2. A final cellwise step makes D and z match the returned beta_star.
CellwiseSolution cr_lasso(const Eigen::MatrixXd& x_star, const Eigen::VectorXd& y_centered, double sigma_hat,
                          const FitConfig& config, const std::optional<Eigen::VectorXd>& beta_init = std::nullopt,
                          const std::optional<Eigen::MatrixXd>& delta_init = std::nullopt);

/// CR-LS on the selected columns, embedded back into a length-p solution.
/// D and z are then refreshed by a cellwise step on the full design.
/// An empty selection yields the null model. Throws std::invalid_argument
/// when the selection has n or more columns.
CellwiseSolution post_cr_regression(const Eigen::MatrixXd& x_star, const Eigen::VectorXd& y_centered,
                                    double sigma_hat, const std::vector<std::size_t>& selected,
                                    const FitConfig& config);

}  // namespace crlasso
