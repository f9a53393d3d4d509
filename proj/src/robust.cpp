#include "crlasso/robust.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "crlasso/errors.hpp"
#include "crlasso/solvers.hpp"

namespace crlasso {

std::string Dataset::column_name(std::size_t j) const {
    if (j < column_names.size()) return column_names[j];
    return "x" + std::to_string(j + 1);
}

double median(std::span<const double> x) {
    if (x.empty()) throw std::invalid_argument("median: empty input");
    std::vector<double> v(x.begin(), x.end());
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + mid);
    return 0.5 * (lower + upper);
}

namespace {

// Number of pairs i < j of the sorted sample with s[j] - s[i] <= t.
std::uint64_t count_pairs_at_most(const std::vector<double>& s, double t) {
    const std::size_t n = s.size();
    std::uint64_t count = 0;
    std::size_t j = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (j < i) j = i;
        while (j + 1 < n && s[j + 1] - s[i] <= t) ++j;
        count += j - i;
    }
    return count;
}

}  // namespace

double qn_scale(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 2) throw std::invalid_argument("qn_scale: need at least two observations");

    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());

    const std::uint64_t h = n / 2 + 1;
    const std::uint64_t k = h * (h - 1) / 2;

    double lo = -1.0;
    double hi = s.back() - s.front();
    std::uint64_t count_lo = 0;
    std::uint64_t count_hi = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    const std::uint64_t bracket_limit = std::max<std::uint64_t>(4 * n, 64);

    // Invariant: count(lo) < k <= count(hi).
    while (count_hi - count_lo > bracket_limit) {
        const double mid = lo + 0.5 * (hi - lo);
        if (!(mid > lo && mid < hi)) {
            // No representable value strictly inside the bracket: every pair
            // difference in (lo, hi] equals hi.
            return kQnConsistency * hi;
        }
        const std::uint64_t c = count_pairs_at_most(s, mid);
        if (c >= k) {
            hi = mid;
            count_hi = c;
        } else {
            lo = mid;
            count_lo = c;
        }
    }

    std::vector<double> bracket;
    bracket.reserve(count_hi - count_lo);
    std::size_t first = 0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (first <= i) first = i + 1;
        while (first < n && s[first] - s[i] <= lo) ++first;
        if (last < i) last = i;
        while (last + 1 < n && s[last + 1] - s[i] <= hi) ++last;
        for (std::size_t j = first; j <= last && j < n; ++j) bracket.push_back(s[j] - s[i]);
    }
    const std::size_t rank = static_cast<std::size_t>(k - count_lo - 1);
    std::nth_element(bracket.begin(), bracket.begin() + static_cast<std::ptrdiff_t>(rank), bracket.end());
    return kQnConsistency * bracket[rank];
}

Standardized standardize(const Dataset& data, double eta, double sigma_override) {
    const Eigen::Index n = data.x.rows();
    const Eigen::Index p = data.x.cols();
    if (data.y.size() != n) throw std::invalid_argument("standardize: response length does not match design rows");
    if (n < 2) throw DataError("standardize: need at least two observations");
    if (!data.x.allFinite() || !data.y.allFinite()) throw DataError("standardize: data contain non-finite values");

    Standardized out;
    out.info.col_medians.resize(p);
    out.info.col_scales.resize(p);
    out.x_star.resize(n, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const std::span<const double> col(data.x.col(j).data(), static_cast<std::size_t>(n));
        const double med = median(col);
        const double scale = qn_scale(col);
        if (!(scale > 0.0)) throw DegenerateColumnError(static_cast<std::size_t>(j), data.column_name(j));
        out.info.col_medians[j] = med;
        out.info.col_scales[j] = scale;
        out.x_star.col(j) = (data.x.col(j).array() - med) / scale;
    }
    out.info.response_median = median(as_span(data.y));
    out.y_centered = data.y.array() - out.info.response_median;
    out.info.sigma_hat = sigma_override > 0.0 ? sigma_override : estimate_sigma(out.x_star, out.y_centered, eta);
    return out;
}

RawCoefficients back_transform(const Eigen::VectorXd& beta_star, const StandardizationInfo& info) {
    if (beta_star.size() != info.col_scales.size() || info.col_medians.size() != info.col_scales.size())
        throw std::invalid_argument("back_transform: coefficient length does not match standardization");
    RawCoefficients out;
    out.beta = beta_star.array() / info.col_scales.array();
    out.intercept = info.response_median - out.beta.dot(info.col_medians);
    return out;
}

double estimate_sigma(const Eigen::MatrixXd& x_star, const Eigen::VectorXd& y_centered, double eta) {
    if (x_star.rows() != y_centered.size()) throw std::invalid_argument("estimate_sigma: shape mismatch");
    const Eigen::Index n = x_star.rows();
    const double y_scale = n >= 2 ? qn_scale(as_span(y_centered)) : 0.0;

    double floor = 1e-3 * y_scale;
    if (!(floor > 0.0)) floor = 1e-3 * y_centered.cwiseAbs().maxCoeff();
    if (!(floor > 0.0)) return 1.0;  // all-zero response: any positive scale is equivalent

    const Eigen::MatrixXd clipped = x_star.cwiseMax(-eta).cwiseMin(eta);
    const double lambda_max = (clipped.transpose() * y_centered).cwiseAbs().maxCoeff();
    if (!(lambda_max > 0.0) || x_star.cols() == 0) return std::max(y_scale, floor);

    // Six decades at the density of a 50-point, three-decade grid, so that
    // near-noiseless data reach residuals below the floor.
    constexpr int kGrid = 100;
    constexpr double kIota = 1e-6;
    const double log_n = std::log(static_cast<double>(n));
    const auto max_size = static_cast<std::size_t>(n / 2);

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(x_star.cols());
    Eigen::VectorXd best_residual = y_centered;
    double best_criterion = std::numeric_limits<double>::infinity();
    for (int step = 0; step < kGrid; ++step) {
        const double lambda = lambda_max * std::pow(kIota, static_cast<double>(step) / (kGrid - 1));
        beta = lasso_cd(clipped, y_centered, lambda, beta, 1e-8).beta;
        const auto size = static_cast<std::size_t>((beta.array() != 0.0).count());
        if (size > max_size) break;
        const Eigen::VectorXd residual = y_centered - clipped * beta;
        const double rss = std::max(residual.squaredNorm() / static_cast<double>(n),
                                    std::numeric_limits<double>::min());
        const double criterion = static_cast<double>(n) * std::log(rss) + log_n * static_cast<double>(size);
        if (criterion < best_criterion) {
            best_criterion = criterion;
            best_residual = residual;
        }
    }

    const double sigma = qn_scale(as_span(best_residual));
    if (!std::isfinite(sigma)) return std::max(y_scale, floor);
    return std::max(sigma, floor);
}

WinsorizedCorrelation winsorized_correlation(std::span<const double> x, std::span<const double> y, double clip) {
    if (x.size() != y.size()) throw std::invalid_argument("winsorized_correlation: length mismatch");
    if (x.size() < 3) throw std::invalid_argument("winsorized_correlation: need at least three pairs");
    if (!(clip > 0.0)) throw std::invalid_argument("winsorized_correlation: clip must be positive");

    auto winsorize = [clip](std::span<const double> v, std::vector<double>& out) {
        const double scale = qn_scale(v);
        if (!(scale > 0.0)) return false;
        const double med = median(v);
        out.resize(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::clamp((v[i] - med) / scale, -clip, clip);
        return true;
    };

    std::vector<double> u;
    std::vector<double> w;
    if (!winsorize(x, u) || !winsorize(y, w)) return {0.0, true};

    const double n = static_cast<double>(u.size());
    const double mean_u = std::accumulate(u.begin(), u.end(), 0.0) / n;
    const double mean_w = std::accumulate(w.begin(), w.end(), 0.0) / n;
    double suu = 0.0;
    double sww = 0.0;
    double suw = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double du = u[i] - mean_u;
        const double dw = w[i] - mean_w;
        suu += du * du;
        sww += dw * dw;
        suw += du * dw;
    }
    if (!(suu > 0.0) || !(sww > 0.0)) return {0.0, true};
    return {std::clamp(suw / std::sqrt(suu * sww), -1.0, 1.0), false};
}

std::vector<std::size_t> rank_by_magnitude(std::span<const double> scores, std::size_t k) {
    if (k > scores.size()) throw std::invalid_argument("rank_by_magnitude: k exceeds the number of scores");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(scores[a]) > std::abs(scores[b]); });
    order.resize(k);
    return order;
}

std::vector<WinsorizedCorrelation> column_correlations(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                                       double clip) {
    if (x.rows() != y.size()) throw std::invalid_argument("column_correlations: shape mismatch");
    std::vector<WinsorizedCorrelation> out;
    out.reserve(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        out.push_back(winsorized_correlation({x.col(j).data(), static_cast<std::size_t>(x.rows())}, as_span(y), clip));
    }
    return out;
}

std::vector<std::size_t> screen_top_k(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::size_t k,
                                      double clip) {
    if (k > static_cast<std::size_t>(x.cols()))
        throw std::invalid_argument("screen_top_k: k = " + std::to_string(k) + " exceeds p = " +
                                    std::to_string(x.cols()));
    const auto correlations = column_correlations(x, y, clip);
    std::vector<double> values;
    values.reserve(correlations.size());
    for (const auto& c : correlations) values.push_back(c.value);
    return rank_by_magnitude(values, k);
}

}  // namespace crlasso
