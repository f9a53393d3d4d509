#include "crlasso/cellreg.hpp"

#include <cmath>
#include <stdexcept>

namespace crlasso {

void CellRegProblem::validate() const {
    if (x_star.rows() == 0 || x_star.cols() == 0) throw std::invalid_argument("CellRegProblem: empty design");
    if (y_centered.size() != x_star.rows()) throw std::invalid_argument("CellRegProblem: response length != rows");
    if (beta.size() != x_star.cols()) throw std::invalid_argument("CellRegProblem: beta length != columns");
    if (!(sigma_hat > 0.0)) throw std::invalid_argument("CellRegProblem: sigma_hat must be positive");
    if (!(eta > 0.0)) throw std::invalid_argument("CellRegProblem: eta must be positive");
    if (!(theta > 0.0)) throw std::invalid_argument("CellRegProblem: theta must be positive");
}

Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& x, double t) {
    return x.unaryExpr([t](double v) { return soft_threshold(v, t); });
}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& x, double t) {
    return x.unaryExpr([t](double v) { return soft_threshold(v, t); });
}

namespace {

void check_shapes(const CellRegProblem& problem, const Eigen::MatrixXd& delta, const Eigen::VectorXd& zeta) {
    if (delta.rows() != problem.x_star.rows() || delta.cols() != problem.x_star.cols())
        throw std::invalid_argument("delta shape does not match the design");
    if (zeta.size() != problem.x_star.rows()) throw std::invalid_argument("zeta length does not match the design");
}

// (y - (X* - D) b) / s, the standardized residual before removing z.
Eigen::VectorXd scaled_residual(const CellRegProblem& problem, const Eigen::VectorXd& fitted_clean,
                                const Eigen::MatrixXd& delta) {
    return (problem.y_centered - fitted_clean + delta * problem.beta) / problem.sigma_hat;
}

double smooth_plus_cells(const CellRegProblem& problem, const Eigen::VectorXd& u, const Eigen::MatrixXd& delta,
                         const Eigen::VectorXd& zeta) {
    return 0.5 * u.squaredNorm() + 0.5 * (problem.x_star - delta).squaredNorm() +
           problem.eta * delta.lpNorm<1>() + problem.theta * zeta.lpNorm<1>();
}

}  // namespace

double objective(const CellRegProblem& problem, const Eigen::MatrixXd& delta, const Eigen::VectorXd& zeta,
                 double lambda) {
    check_shapes(problem, delta, zeta);
    const Eigen::VectorXd u =
        (problem.y_centered - (problem.x_star - delta) * problem.beta) / problem.sigma_hat - zeta;
    return smooth_plus_cells(problem, u, delta, zeta) + lambda * problem.beta.lpNorm<1>();
}

Eigen::MatrixXd gradient_delta(const CellRegProblem& problem, const Eigen::MatrixXd& delta,
                               const Eigen::VectorXd& zeta) {
    check_shapes(problem, delta, zeta);
    const Eigen::VectorXd u =
        (problem.y_centered - (problem.x_star - delta) * problem.beta) / problem.sigma_hat - zeta;
    return (u / problem.sigma_hat) * problem.beta.transpose() + (delta - problem.x_star);
}

Eigen::VectorXd optimal_zeta(const CellRegProblem& problem, const Eigen::MatrixXd& delta) {
    const Eigen::VectorXd r = (problem.y_centered - (problem.x_star - delta) * problem.beta) / problem.sigma_hat;
    return soft_threshold(r, problem.theta);
}

CellRegResult cellwise_regularize(const CellRegProblem& problem, const Eigen::MatrixXd& delta_init,
                                  const CellRegOptions& options) {
    problem.validate();
    if (!(options.eps1 > 0.0)) throw std::invalid_argument("cellwise_regularize: eps1 must be positive");
    if (delta_init.rows() != problem.x_star.rows() || delta_init.cols() != problem.x_star.cols())
        throw std::invalid_argument("cellwise_regularize: delta_init shape does not match the design");
    if (!delta_init.allFinite()) throw std::invalid_argument("cellwise_regularize: delta_init is not finite");

    const double s = problem.sigma_hat;
    const double t = 1.0 / (1.0 + problem.beta.squaredNorm() / (s * s));
    const Eigen::VectorXd fitted_clean = problem.x_star * problem.beta;
    const Eigen::RowVectorXd beta_row = problem.beta.transpose();

    CellRegResult result;
    result.delta = delta_init;
    Eigen::VectorXd r = scaled_residual(problem, fitted_clean, result.delta);
    result.zeta = soft_threshold(r, problem.theta);
    if (options.record_trace) result.objective_trace.push_back(smooth_plus_cells(problem, r - result.zeta, result.delta, result.zeta));

    Eigen::MatrixXd next(result.delta.rows(), result.delta.cols());
    for (std::size_t h = 1; h <= options.max_inner; ++h) {
        const Eigen::VectorXd u = r - result.zeta;
        // D - t * grad, arranged as (1 - t) D + t X* - (t/s) u b^T so that the
        // b = 0 case reproduces X* bit for bit.
        next.noalias() = (1.0 - t) * result.delta + t * problem.x_star;
        next.noalias() -= ((t / s) * u) * beta_row;
        next = soft_threshold(next, t * problem.eta);

        const double change = (next - result.delta).cwiseAbs().maxCoeff();
        result.delta.swap(next);
        r = scaled_residual(problem, fitted_clean, result.delta);
        result.zeta = soft_threshold(r, problem.theta);
        result.iterations = h;
        if (options.record_trace)
            result.objective_trace.push_back(smooth_plus_cells(problem, r - result.zeta, result.delta, result.zeta));
        if (change < options.eps1) {
            result.converged = true;
            break;
        }
    }
    result.final_objective = smooth_plus_cells(problem, r - result.zeta, result.delta, result.zeta);
    return result;
}

}  // namespace crlasso
