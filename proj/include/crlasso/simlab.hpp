#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crlasso/selection.hpp"

namespace crlasso {

enum class PredictorDistribution { normal, t4, cauchy };
enum class ContaminationMode { cellwise, rowwise };

struct SimulationScenario {
    std::size_t n = 200;
    std::size_t p = 50;
    std::size_t n_active = 10;
    double rho = 0.5;
    PredictorDistribution distribution = PredictorDistribution::normal;
    double sigma_eps = 3.0;
    double intercept = 1.0;
    double e = 0.0;       // per-cell (or per-row) contamination probability
    double gamma = 8.0;   // outliers are drawn from N(+gamma, 1) or N(-gamma, 1)
    ContaminationMode mode = ContaminationMode::cellwise;
    bool contaminate_response = true;
    std::uint64_t seed = 1;

    void validate() const;
};

struct GeneratedInstance {
    Eigen::MatrixXd x_clean;
    Eigen::MatrixXd x_contaminated;
    Eigen::VectorXd y_clean;
    Eigen::VectorXd y_contaminated;
    Eigen::VectorXd true_beta;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> outlier_mask_x;
    Eigen::Matrix<bool, Eigen::Dynamic, 1> outlier_mask_y;
};

/// Sigma_ij = rho^|i-j|.
Eigen::MatrixXd ar1_covariance(std::size_t p, double rho);

/// Draws one instance. Clean predictors, noise and contamination come from
/// separate streams derived from scenario.seed, so the clean part of an
/// instance does not depend on e, gamma or the contamination mode.
///
/// Cellwise mode contaminates every cell independently with probability e;
/// rowwise mode picks rows with probability e and contaminates all their
/// cells, plus the response of that row when contaminate_response is set.
/// In cellwise mode each response is contaminated independently with
/// probability e. Contamination is additive.
GeneratedInstance generate(const SimulationScenario& scenario);

double rmspe(std::span<const double> y_true, std::span<const double> y_pred);
double mape(std::span<const double> y_true, std::span<const double> y_pred);

struct SelectionMetrics {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;
    double f1 = 0.0;
};

/// Zero-based indices in [0, p).
SelectionMetrics selection_metrics(const std::vector<std::size_t>& selected, const std::vector<std::size_t>& truth,
                                   std::size_t p);

/// Plain Lasso baseline: columns centred and scaled by mean/standard deviation,
/// 100-point path, 10-fold cross-validation (fold = row index mod 10), refit on
/// all data at the minimizing lambda.
struct LassoFit {
    Eigen::VectorXd beta;
    double intercept = 0.0;
    double lambda = 0.0;  // per-observation scale
    std::vector<std::size_t> support;
};
LassoFit fit_lasso_cv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::size_t folds = 10,
                      std::size_t grid_size = 100);

enum class Method { cr_lasso, cr_lasso_no_post, lasso };
std::string to_string(Method method);
Method parse_method(const std::string& name);

struct MetricRow {
    std::size_t replicate = 0;
    std::string method;
    std::string metric;
    double value = 0.0;  // NaN marks a missing value
};

struct FitFailure {
    std::size_t replicate = 0;
    std::string method;
    std::string reason;
};

struct ExperimentResult {
    std::vector<MetricRow> rows;
    std::vector<FitFailure> failures;
};

struct ExperimentOptions {
    PathOptions path;
    std::size_t threads = 1;
};

/// Metric names emitted per replicate and method, in output order.
/// outer_iterations and converged describe the fits behind the reported
/// model (the selected path fit, plus the post-regression for cr_lasso);
/// path_outer_iterations is the maximum over the whole lambda path.
const std::vector<std::string>& metric_names();

/// Replicate r uses seed base_seed + r for the training instance and an
/// independent clean test instance of the same size. Rows are ordered by
/// replicate, then method order, then metric_names() order, independent of
/// the thread count.
ExperimentResult run_experiment(const SimulationScenario& scenario, const std::vector<Method>& methods,
                                std::size_t replicates, std::uint64_t base_seed,
                                const ExperimentOptions& options = {});

/// Seed of the clean test instance for a training seed.
std::uint64_t test_seed(std::uint64_t training_seed);

struct SummaryRow {
    std::string method;
    std::string metric;
    double mean = 0.0;
    double sd = 0.0;
    std::size_t count = 0;  // non-missing values
};

std::vector<SummaryRow> summarize(const std::vector<MetricRow>& rows);

/// Mean of one metric for one method, ignoring missing values.
double mean_metric(const std::vector<MetricRow>& rows, const std::string& method, const std::string& metric);

}  // namespace crlasso
