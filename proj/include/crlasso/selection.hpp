#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crlasso/robust.hpp"
#include "crlasso/solvers.hpp"

namespace crlasso {

/// K log-spaced penalties from ||X^T y||_inf down to iota times that value.
/// Requires K >= 2 and 0 < iota < 1; throws DataError when the maximum is 0.
Eigen::VectorXd lambda_grid(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double iota = 0.001,
                            std::size_t grid_size = 50);

enum class Criterion { bic, aic };

/// Selection loss L = ||(y - (X* - D) b)/s - z||^2 + 2 theta ||z||_1.
double selection_loss(const CellwiseSolution& solution, const Eigen::MatrixXd& x_star,
                      const Eigen::VectorXd& y_centered, double sigma_hat, double theta);

/// L + log(n) k, with k the number of nonzero coefficients.
double bic(const CellwiseSolution& solution, const Eigen::MatrixXd& x_star, const Eigen::VectorXd& y_centered,
           double sigma_hat, double theta);

/// L + 2 k.
double aic(const CellwiseSolution& solution, const Eigen::MatrixXd& x_star, const Eigen::VectorXd& y_centered,
           double sigma_hat, double theta);

struct ShrinkViolation {
    std::size_t column = 0;
    std::size_t shrunk_cells = 0;
};

/// First active column whose count of nonzero D cells exceeds threshold * n.
std::optional<ShrinkViolation> find_shrink_violation(const CellwiseSolution& solution, std::size_t n,
                                                     double threshold = 0.30);

inline bool shrink_rate_exclusion(const CellwiseSolution& solution, std::size_t n, double threshold = 0.30) {
    return find_shrink_violation(solution, n, threshold).has_value();
}

struct PathOptions {
    FitConfig fit;                       // lambda is ignored
    double iota = 0.001;
    std::size_t grid_size = 50;
    std::vector<double> custom_lambdas;  // overrides the generated grid when non-empty
    double shrink_threshold = 0.30;
    Criterion criterion = Criterion::bic;
    bool post_regression = true;
    std::optional<double> sigma_override;
    // The path stops after the first fit with more than this many nonzero
    // coefficients; 0 means floor(n/2). Such models are never competitive
    // under BIC and their Lasso steps are badly conditioned.
    std::size_t max_model_size = 0;
};

struct PathResult {
    Eigen::VectorXd lambdas;                     // fitted prefix of the grid
    Eigen::VectorXd grid;                        // full requested grid
    bool truncated = false;                      // stopped early on model size
    std::vector<CellwiseSolution> solutions;
    Eigen::VectorXd criterion_values;
    std::vector<bool> excluded;
    std::vector<std::string> exclusion_reasons;  // empty when kept
    std::size_t selected_index = 0;              // index into lambdas
    bool exclusion_waived = false;               // every model was excluded
    bool post_regression_applied = false;
    CellwiseSolution selected_fit;               // CR-Lasso fit at the selected lambda
    CellwiseSolution final_model;                // post-regression applied when enabled
    Standardized standardized;
    std::vector<std::string> warnings;

    std::size_t max_outer_iterations() const;
    bool all_converged() const;
};

/// Robustly standardizes, estimates sigma once, runs CR-Lasso from the largest
/// to the smallest lambda with warm starts, scores every fit, drops fits that
/// over-shrink an active column, picks the best remaining one (ties go to the
/// larger lambda), optionally refits its support by CR-LS, and back-transforms.
///
/// The default grid starts at the smallest lambda that keeps beta_star = 0,
/// computed on the winsorized design and response (the cellwise solution at
/// beta_star = 0).
PathResult fit_path(const Dataset& data, const PathOptions& options = {});

/// Same as fit_path but on already standardized data.
PathResult fit_path_standardized(Standardized standardized, const PathOptions& options = {});

}  // namespace crlasso
