#include "crlasso/simlab.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "crlasso/rng.hpp"

namespace crlasso {

void SimulationScenario::validate() const {
    if (n < 2) throw std::invalid_argument("scenario: n must be at least 2");
    if (p < 1) throw std::invalid_argument("scenario: p must be at least 1");
    if (n_active > p) throw std::invalid_argument("scenario: n_active exceeds p");
    if (!(rho > -1.0 && rho < 1.0)) throw std::invalid_argument("scenario: rho must lie in (-1, 1)");
    if (!(e >= 0.0 && e < 1.0)) throw std::invalid_argument("scenario: e must lie in [0, 1)");
    if (!std::isfinite(gamma) || !std::isfinite(intercept)) throw std::invalid_argument("scenario: gamma and intercept must be finite");
    if (!(sigma_eps >= 0.0) || !std::isfinite(sigma_eps)) throw std::invalid_argument("scenario: sigma_eps must be finite and >= 0");
}

Eigen::MatrixXd ar1_covariance(std::size_t p, double rho) {
    const auto dim = static_cast<Eigen::Index>(p);
    Eigen::MatrixXd sigma(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
        for (Eigen::Index j = 0; j < dim; ++j) sigma(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
    return sigma;
}

GeneratedInstance generate(const SimulationScenario& scenario) {
    scenario.validate();
    const auto n = static_cast<Eigen::Index>(scenario.n);
    const auto p = static_cast<Eigen::Index>(scenario.p);
    Rng clean(derive_seed(scenario.seed, 0));
    Rng contamination(derive_seed(scenario.seed, 1));

    GeneratedInstance out;
    out.x_clean.resize(n, p);
    if (scenario.distribution == PredictorDistribution::cauchy) {
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < p; ++j) out.x_clean(i, j) = clean.cauchy();
    } else {
        const Eigen::LLT<Eigen::MatrixXd> llt(ar1_covariance(scenario.p, scenario.rho));
        if (llt.info() != Eigen::Success) throw std::logic_error("generate: AR(1) covariance is not positive definite");
        const Eigen::MatrixXd lower = llt.matrixL();
        Eigen::VectorXd z(p);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < p; ++j) z[j] = clean.normal();
            double scale = 1.0;
            if (scenario.distribution == PredictorDistribution::t4) scale = 1.0 / std::sqrt(clean.chi_square_even(4) / 4.0);
            out.x_clean.row(i) = (lower * z).transpose() * scale;
        }
    }

    out.true_beta = Eigen::VectorXd::Zero(p);
    out.true_beta.head(static_cast<Eigen::Index>(scenario.n_active)).setOnes();
    out.y_clean = (out.x_clean * out.true_beta).array() + scenario.intercept;
    for (Eigen::Index i = 0; i < n; ++i) out.y_clean[i] += scenario.sigma_eps * clean.normal();

    auto outlier = [&]() {
        const double sign = contamination.uniform() < 0.5 ? 1.0 : -1.0;
        return sign * scenario.gamma + contamination.normal();
    };

    out.x_contaminated = out.x_clean;
    out.y_contaminated = out.y_clean;
    out.outlier_mask_x.setConstant(n, p, false);
    out.outlier_mask_y.setConstant(n, false);
    auto add_cell = [&](Eigen::Index i, Eigen::Index j) {
        const double shift = outlier();
        out.x_contaminated(i, j) = out.x_clean(i, j) + shift;
        out.outlier_mask_x(i, j) = out.x_contaminated(i, j) != out.x_clean(i, j);
    };
    auto add_response = [&](Eigen::Index i) {
        const double shift = outlier();
        out.y_contaminated[i] = out.y_clean[i] + shift;
        out.outlier_mask_y[i] = out.y_contaminated[i] != out.y_clean[i];
    };

    if (scenario.e > 0.0) {
        if (scenario.mode == ContaminationMode::rowwise) {
            for (Eigen::Index i = 0; i < n; ++i) {
                if (!contamination.bernoulli(scenario.e)) continue;
                for (Eigen::Index j = 0; j < p; ++j) add_cell(i, j);
                if (scenario.contaminate_response) add_response(i);
            }
        } else {
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < p; ++j)
                    if (contamination.bernoulli(scenario.e)) add_cell(i, j);
            if (scenario.contaminate_response) {
                for (Eigen::Index i = 0; i < n; ++i)
                    if (contamination.bernoulli(scenario.e)) add_response(i);
            }
        }
    }
    return out;
}

namespace {

void check_pair(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("prediction error: length mismatch");
    if (a.empty()) throw std::invalid_argument("prediction error: empty input");
}

}  // namespace

double rmspe(std::span<const double> y_true, std::span<const double> y_pred) {
    check_pair(y_true, y_pred);
    double sum = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) sum += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
    return std::sqrt(sum / static_cast<double>(y_true.size()));
}

double mape(std::span<const double> y_true, std::span<const double> y_pred) {
    check_pair(y_true, y_pred);
    double sum = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) sum += std::abs(y_true[i] - y_pred[i]);
    return sum / static_cast<double>(y_true.size());
}

SelectionMetrics selection_metrics(const std::vector<std::size_t>& selected, const std::vector<std::size_t>& truth,
                                   std::size_t p) {
    std::vector<char> in_selected(p, 0);
    std::vector<char> in_truth(p, 0);
    for (auto j : selected) {
        if (j >= p) throw std::invalid_argument("selection_metrics: selected index out of range");
        in_selected[j] = 1;
    }
    for (auto j : truth) {
        if (j >= p) throw std::invalid_argument("selection_metrics: true index out of range");
        in_truth[j] = 1;
    }
    SelectionMetrics m;
    for (std::size_t j = 0; j < p; ++j) {
        if (in_selected[j] && in_truth[j]) ++m.tp;
        else if (in_selected[j]) ++m.fp;
        else if (in_truth[j]) ++m.fn;
        else ++m.tn;
    }
    const std::size_t denom = 2 * m.tp + m.fp + m.fn;
    m.f1 = denom == 0 ? 1.0 : 2.0 * static_cast<double>(m.tp) / static_cast<double>(denom);
    return m;
}

namespace {

struct ClassicScaling {
    Eigen::VectorXd means;
    Eigen::VectorXd scales;
    double y_mean = 0.0;
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
};

ClassicScaling classic_scaling(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    ClassicScaling s;
    const double n = static_cast<double>(x.rows());
    s.means = x.colwise().mean().transpose();
    s.x = x.rowwise() - s.means.transpose();
    s.scales = (s.x.colwise().squaredNorm().transpose() / n).cwiseSqrt();
    for (Eigen::Index j = 0; j < s.scales.size(); ++j) {
        if (s.scales[j] > 0.0) s.x.col(j) /= s.scales[j];
        else s.scales[j] = 1.0;
    }
    s.y_mean = y.mean();
    s.y = y.array() - s.y_mean;
    return s;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]);
    return out;
}

Eigen::VectorXd take_rows(const Eigen::VectorXd& y, const std::vector<Eigen::Index>& rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) out[static_cast<Eigen::Index>(r)] = y[rows[r]];
    return out;
}

constexpr double kBaselineTol = 1e-7;
constexpr std::size_t kBaselineSweeps = 10000;

}  // namespace

LassoFit fit_lasso_cv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::size_t folds,
                      std::size_t grid_size) {
    if (x.rows() != y.size()) throw std::invalid_argument("fit_lasso_cv: shape mismatch");
    if (folds < 2 || static_cast<Eigen::Index>(folds) > x.rows())
        throw std::invalid_argument("fit_lasso_cv: invalid fold count");
    if (grid_size < 2) throw std::invalid_argument("fit_lasso_cv: grid size must be at least 2");

    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    const ClassicScaling full = classic_scaling(x, y);

    LassoFit fit;
    fit.beta = Eigen::VectorXd::Zero(p);
    fit.intercept = full.y_mean;
    const double lambda_max = (full.x.transpose() * full.y).cwiseAbs().maxCoeff() / static_cast<double>(n);
    if (!(lambda_max > 0.0)) return fit;

    const double iota = n > p ? 1e-4 : 1e-2;
    std::vector<double> grid(grid_size);
    for (std::size_t k = 0; k < grid_size; ++k)
        grid[k] = lambda_max * std::pow(iota, static_cast<double>(k) / static_cast<double>(grid_size - 1));

    std::vector<double> cv_error(grid_size, 0.0);
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<Eigen::Index> train;
        std::vector<Eigen::Index> held;
        for (Eigen::Index i = 0; i < n; ++i)
            (static_cast<std::size_t>(i) % folds == f ? held : train).push_back(i);
        const ClassicScaling s = classic_scaling(take_rows(x, train), take_rows(y, train));
        const Eigen::MatrixXd x_held = take_rows(x, held);
        const Eigen::VectorXd y_held = take_rows(y, held);
        const double n_train = static_cast<double>(train.size());

        Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
        bool saturated = false;
        for (std::size_t k = 0; k < grid_size; ++k) {
            if (saturated) {
                cv_error[k] = std::numeric_limits<double>::infinity();
                continue;
            }
            b = lasso_cd(s.x, s.y, n_train * grid[k], b, kBaselineTol, kBaselineSweeps).beta;
            const Eigen::VectorXd raw = b.array() / s.scales.array();
            const double intercept = s.y_mean - raw.dot(s.means);
            const Eigen::VectorXd pred = (x_held * raw).array() + intercept;
            cv_error[k] += (y_held - pred).squaredNorm();
            if ((b.array() != 0.0).count() > static_cast<Eigen::Index>(train.size()) / 2) saturated = true;
        }
    }

    const auto best = static_cast<std::size_t>(std::min_element(cv_error.begin(), cv_error.end()) - cv_error.begin());
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    for (std::size_t k = 0; k <= best; ++k)
        b = lasso_cd(full.x, full.y, static_cast<double>(n) * grid[k], b, kBaselineTol, kBaselineSweeps).beta;

    fit.lambda = grid[best];
    fit.beta = b.array() / full.scales.array();
    fit.intercept = full.y_mean - fit.beta.dot(full.means);
    for (Eigen::Index j = 0; j < p; ++j)
        if (b[j] != 0.0) fit.support.push_back(static_cast<std::size_t>(j));
    return fit;
}

std::string to_string(Method method) {
    switch (method) {
        case Method::cr_lasso: return "cr_lasso";
        case Method::cr_lasso_no_post: return "cr_lasso_no_post";
        case Method::lasso: return "lasso";
    }
    return "unknown";
}

Method parse_method(const std::string& name) {
    if (name == "cr_lasso") return Method::cr_lasso;
    if (name == "cr_lasso_no_post") return Method::cr_lasso_no_post;
    if (name == "lasso") return Method::lasso;
    throw std::invalid_argument("unknown method '" + name + "'");
}

const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names{"rmspe", "mape", "tp", "fp", "fn", "tn", "f1",
                                                "model_size", "outer_iterations", "converged", "path_outer_iterations",
                                                "sigma_hat"};
    return names;
}

std::uint64_t test_seed(std::uint64_t training_seed) { return derive_seed(training_seed, 0x7e57); }

namespace {

struct MethodOutcome {
    Eigen::VectorXd beta;
    double intercept = 0.0;
    std::vector<std::size_t> support;
    double outer_iterations = std::numeric_limits<double>::quiet_NaN();
    double converged = std::numeric_limits<double>::quiet_NaN();
    double path_outer_iterations = std::numeric_limits<double>::quiet_NaN();
    double sigma_hat = std::numeric_limits<double>::quiet_NaN();
};

std::vector<std::size_t> support_of(const Eigen::VectorXd& beta) {
    std::vector<std::size_t> out;
    for (Eigen::Index j = 0; j < beta.size(); ++j)
        if (beta[j] != 0.0) out.push_back(static_cast<std::size_t>(j));
    return out;
}

struct ReplicateOutput {
    std::vector<MetricRow> rows;
    std::vector<FitFailure> failures;
};

ReplicateOutput run_replicate(const SimulationScenario& scenario, const std::vector<Method>& methods,
                              std::size_t replicate, std::uint64_t base_seed, const ExperimentOptions& options) {
    ReplicateOutput out;
    SimulationScenario train_scenario = scenario;
    train_scenario.seed = base_seed + replicate;
    const GeneratedInstance train = generate(train_scenario);

    SimulationScenario test_scenario = scenario;
    test_scenario.e = 0.0;
    test_scenario.seed = test_seed(train_scenario.seed);
    const GeneratedInstance test = generate(test_scenario);

    std::vector<std::size_t> truth(scenario.n_active);
    for (std::size_t j = 0; j < scenario.n_active; ++j) truth[j] = j;

    Dataset data;
    data.x = train.x_contaminated;
    data.y = train.y_contaminated;

    std::optional<PathResult> path;
    std::string path_error;
    const bool needs_path = std::any_of(methods.begin(), methods.end(), [](Method m) { return m != Method::lasso; });
    if (needs_path) {
        try {
            path = fit_path(data, options.path);
        } catch (const std::exception& e) {
            path_error = e.what();
        }
    }

    for (Method method : methods) {
        const std::string name = to_string(method);
        std::optional<MethodOutcome> outcome;
        try {
            if (method == Method::lasso) {
                LassoFit fit = fit_lasso_cv(data.x, data.y);
                outcome = MethodOutcome{fit.beta, fit.intercept, fit.support, 0.0, 1.0,
                                        std::numeric_limits<double>::quiet_NaN()};
            } else if (path) {
                MethodOutcome o;
                const bool post = method == Method::cr_lasso;
                const CellwiseSolution& model = post ? path->final_model : path->selected_fit;
                o.beta = model.beta;
                o.intercept = model.intercept;
                o.support = support_of(path->selected_fit.beta_star);
                // iterations and convergence of the fits behind the reported model
                std::size_t iterations = path->selected_fit.outer_iterations;
                bool converged = path->selected_fit.converged;
                if (post) {
                    iterations = std::max(iterations, path->final_model.outer_iterations);
                    converged = converged && path->final_model.converged;
                }
                o.outer_iterations = static_cast<double>(iterations);
                o.converged = converged ? 1.0 : 0.0;
                o.path_outer_iterations = static_cast<double>(path->max_outer_iterations());
                o.sigma_hat = path->standardized.info.sigma_hat;
                outcome = std::move(o);
            } else {
                out.failures.push_back({replicate, name, path_error});
            }
        } catch (const std::exception& e) {
            out.failures.push_back({replicate, name, e.what()});
        }

        std::vector<double> values(metric_names().size(), std::numeric_limits<double>::quiet_NaN());
        if (outcome) {
            const Eigen::VectorXd pred = (test.x_clean * outcome->beta).array() + outcome->intercept;
            const SelectionMetrics sel = selection_metrics(outcome->support, truth, scenario.p);
            values = {rmspe(as_span(test.y_clean), as_span(pred)),
                      mape(as_span(test.y_clean), as_span(pred)),
                      static_cast<double>(sel.tp),
                      static_cast<double>(sel.fp),
                      static_cast<double>(sel.fn),
                      static_cast<double>(sel.tn),
                      sel.f1,
                      static_cast<double>(outcome->support.size()),
                      outcome->outer_iterations,
                      outcome->converged,
                      outcome->path_outer_iterations,
                      outcome->sigma_hat};
        }
        for (std::size_t m = 0; m < values.size(); ++m)
            out.rows.push_back({replicate, name, metric_names()[m], values[m]});
    }
    return out;
}

}  // namespace

ExperimentResult run_experiment(const SimulationScenario& scenario, const std::vector<Method>& methods,
                                std::size_t replicates, std::uint64_t base_seed, const ExperimentOptions& options) {
    scenario.validate();
    if (methods.empty()) throw std::invalid_argument("run_experiment: no methods requested");

    std::vector<ReplicateOutput> outputs(replicates);
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    auto worker = [&]() {
        for (std::size_t r = next++; r < replicates; r = next++) {
            try {
                outputs[r] = run_replicate(scenario, methods, r, base_seed, options);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::clamp<std::size_t>(options.threads, 1, std::max<std::size_t>(replicates, 1));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);

    ExperimentResult result;
    for (auto& o : outputs) {
        result.rows.insert(result.rows.end(), o.rows.begin(), o.rows.end());
        result.failures.insert(result.failures.end(), o.failures.begin(), o.failures.end());
    }
    return result;
}

std::vector<SummaryRow> summarize(const std::vector<MetricRow>& rows) {
    std::vector<std::pair<std::string, std::string>> order;
    std::map<std::pair<std::string, std::string>, std::vector<double>> values;
    for (const auto& row : rows) {
        const auto key = std::make_pair(row.method, row.metric);
        auto [it, inserted] = values.try_emplace(key);
        if (inserted) order.push_back(key);
        if (!std::isnan(row.value)) it->second.push_back(row.value);
    }
    std::vector<SummaryRow> out;
    for (const auto& key : order) {
        const auto& v = values[key];
        SummaryRow s{key.first, key.second, std::numeric_limits<double>::quiet_NaN(),
                     std::numeric_limits<double>::quiet_NaN(), v.size()};
        if (!v.empty()) {
            double sum = 0.0;
            for (double x : v) sum += x;
            s.mean = sum / static_cast<double>(v.size());
            if (v.size() > 1) {
                double ss = 0.0;
                for (double x : v) ss += (x - s.mean) * (x - s.mean);
                s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
            }
        }
        out.push_back(s);
    }
    return out;
}

double mean_metric(const std::vector<MetricRow>& rows, const std::string& method, const std::string& metric) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& row : rows) {
        if (row.method != method || row.metric != metric || std::isnan(row.value)) continue;
        sum += row.value;
        ++count;
    }
    return count == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(count);
}

}  // namespace crlasso
