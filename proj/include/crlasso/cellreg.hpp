#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace crlasso {

/// Inputs of the cellwise subproblem for a fixed coefficient vector.
///
/// The views must outlive the problem. beta is on the standardized scale
/// (response units per standardized predictor unit).
struct CellRegProblem {
    Eigen::Ref<const Eigen::MatrixXd> x_star;
    Eigen::Ref<const Eigen::VectorXd> y_centered;
    Eigen::Ref<const Eigen::VectorXd> beta;
    double sigma_hat = 1.0;
    double eta = 2.576;
    double theta = 1.0;

    /// Throws std::invalid_argument on inconsistent shapes or non-positive
    /// eta, theta or sigma_hat.
    void validate() const;
};

struct CellRegResult {
    Eigen::MatrixXd delta;
    Eigen::VectorXd zeta;
    std::size_t iterations = 0;
    bool converged = false;
    double final_objective = 0.0;          // smooth + cell + response terms, no lambda term
    std::vector<double> objective_trace;   // start, then one per iteration; when requested
};

struct CellRegOptions {
    double eps1 = 1e-6;
    std::size_t max_inner = 500;
    bool record_trace = false;
};

inline double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& x, double t);
Eigen::VectorXd soft_threshold(const Eigen::VectorXd& x, double t);

/// Standardized objective:
///   0.5 * ||(y - (X* - D) b) / s - z||^2 + 0.5 * ||X* - D||_F^2
///   + lambda * ||b||_1 + eta * ||D||_1 + theta * ||z||_1
double objective(const CellRegProblem& problem, const Eigen::MatrixXd& delta, const Eigen::VectorXd& zeta,
                 double lambda);

/// Gradient of the smooth part with respect to D:
///   (1/s) u b^T + (D - X*),  u = (y - (X* - D) b) / s - z.
Eigen::MatrixXd gradient_delta(const CellRegProblem& problem, const Eigen::MatrixXd& delta,
                               const Eigen::VectorXd& zeta);

/// Exact minimizer of the objective over z for fixed D and b.
Eigen::VectorXd optimal_zeta(const CellRegProblem& problem, const Eigen::MatrixXd& delta);

/// Proximal gradient on D with step 1/(1 + ||b||^2/s^2), followed by the
/// closed-form z update, until the sup-norm change of D drops below eps1.
/// Hitting max_inner is reported through converged = false.
CellRegResult cellwise_regularize(const CellRegProblem& problem, const Eigen::MatrixXd& delta_init,
                                  const CellRegOptions& options = {});

}  // namespace crlasso
