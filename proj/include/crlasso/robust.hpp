#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace crlasso {

/// Normal-consistency factor for the Qn scale estimator.
inline constexpr double kQnConsistency = 2.2219;

/// 99.5% standard normal quantile; default cell penalty and clipping level.
inline constexpr double kNormalQuantile995 = 2.576;

inline std::span<const double> as_span(const Eigen::VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

/// Raw regression data: response y and n x p design X.
struct Dataset {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    std::vector<std::string> column_names;  // may be empty; defaults to x1..xp
    std::string response_name = "y";

    std::size_t rows() const { return static_cast<std::size_t>(x.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(x.cols()); }
    std::string column_name(std::size_t j) const;
};

struct StandardizationInfo {
    Eigen::VectorXd col_medians;
    Eigen::VectorXd col_scales;  // Qn, strictly positive
    double response_median = 0.0;
    double sigma_hat = 1.0;
};

struct Standardized {
    Eigen::MatrixXd x_star;
    Eigen::VectorXd y_centered;
    StandardizationInfo info;
};

struct RawCoefficients {
    Eigen::VectorXd beta;
    double intercept = 0.0;
};

/// Middle order statistic; mean of the two middle values for even n.
/// Throws std::invalid_argument on empty input.
double median(std::span<const double> x);

/// Qn scale: kQnConsistency times the k-th smallest pairwise absolute
/// difference, k = h(h-1)/2 with h = floor(n/2) + 1.
///
/// The order statistic is found by bisection on the difference value with an
/// O(n) two-pointer count over the sorted sample, followed by an exact
/// selection among the few pairs left in the final bracket. The result is
/// identical to full pairwise enumeration but needs O(n) memory, so samples
/// of 10^5 and beyond are fine. Throws std::invalid_argument for n < 2.
double qn_scale(std::span<const double> x);

/// Robust standardization: columns by median/Qn, response centred by its
/// median, and sigma_hat from estimate_sigma (unless sigma_override > 0).
/// Throws DegenerateColumnError for a column with zero Qn.
Standardized standardize(const Dataset& data, double eta = kNormalQuantile995, double sigma_override = 0.0);

/// Maps coefficients fitted on the standardized scale back to raw units.
RawCoefficients back_transform(const Eigen::VectorXd& beta_star, const StandardizationInfo& info);

/// Residual-scale plug-in.
///
/// Clips every cell of the standardized design to [-eta, eta], fits a plain
/// Lasso path (100 points down to 1e-6 lambda_max) on the clipped design, picks the path point with the smallest
/// n*log(RSS/n) + k*log(n) among models with k <= n/2, and returns the Qn of
/// its residuals. Falls back to Qn(y_centered) when the path is degenerate.
/// The result is floored at 1e-3 * Qn(y_centered).
double estimate_sigma(const Eigen::MatrixXd& x_star, const Eigen::VectorXd& y_centered,
                      double eta = kNormalQuantile995);

struct WinsorizedCorrelation {
    double value = 0.0;
    bool degenerate = false;  // a variable had zero spread after clipping
};

/// Pearson correlation after each variable is median/Qn standardized and
/// clipped to [-clip, clip].
WinsorizedCorrelation winsorized_correlation(std::span<const double> x, std::span<const double> y,
                                             double clip = kNormalQuantile995);

/// Indices of the k largest |score|, descending; ties go to the lower index.
std::vector<std::size_t> rank_by_magnitude(std::span<const double> scores, std::size_t k);

/// Indices of the k columns most correlated (winsorized) with y.
std::vector<std::size_t> screen_top_k(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::size_t k,
                                      double clip = kNormalQuantile995);

/// Winsorized correlation of every column with y.
std::vector<WinsorizedCorrelation> column_correlations(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                                       double clip = kNormalQuantile995);

}  // namespace crlasso
