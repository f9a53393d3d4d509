#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "crlasso/rng.hpp"
#include "crlasso/simlab.hpp"

using namespace crlasso;

namespace {

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::ArrayXd ca = a.array() - a.mean();
    const Eigen::ArrayXd cb = b.array() - b.mean();
    return (ca * cb).sum() / std::sqrt(ca.square().sum() * cb.square().sum());
}

void check_masks(const GeneratedInstance& g) {
    CHECK((g.outlier_mask_x.array() == (g.x_contaminated.array() != g.x_clean.array())).all());
    CHECK((g.outlier_mask_y.array() == (g.y_contaminated.array() != g.y_clean.array())).all());
}

}  // namespace

TEST_CASE("AR(1) covariance") {
    const Eigen::MatrixXd s = ar1_covariance(5, 0.5);
    CHECK(s(0, 2) == 0.25);
    CHECK(s(3, 1) == 0.25);
    CHECK(s(2, 2) == 1.0);
    CHECK(s(0, 4) == 0.0625);
    CHECK(s.isApprox(s.transpose(), 0.0));
}

TEST_CASE("adjacent clean columns have correlation rho") {
    SimulationScenario sc;
    sc.n = 100000;
    sc.p = 4;
    sc.n_active = 2;
    sc.seed = 5;
    const GeneratedInstance g = generate(sc);
    for (Eigen::Index j = 0; j + 1 < 4; ++j) CHECK(std::abs(correlation(g.x_clean.col(j), g.x_clean.col(j + 1)) - 0.5) < 0.01);
    CHECK(std::abs(correlation(g.x_clean.col(0), g.x_clean.col(2)) - 0.25) < 0.01);
}

TEST_CASE("generate: clean instance and response model") {
    SimulationScenario sc;
    sc.seed = 11;
    const GeneratedInstance g = generate(sc);
    CHECK(g.x_clean.rows() == 200);
    CHECK(g.x_clean.cols() == 50);
    CHECK(g.x_contaminated == g.x_clean);
    CHECK(g.y_contaminated == g.y_clean);
    CHECK_FALSE(g.outlier_mask_x.any());
    CHECK_FALSE(g.outlier_mask_y.any());
    CHECK(g.true_beta.head(10).isOnes());
    CHECK(g.true_beta.tail(40).isZero(0.0));
    const Eigen::VectorXd eps = g.y_clean - g.x_clean * g.true_beta - Eigen::VectorXd::Ones(200);
    CHECK(std::abs(eps.mean()) < 0.7);
    CHECK(std::sqrt(eps.squaredNorm() / 200.0) == doctest::Approx(3.0).epsilon(0.2));
}

TEST_CASE("clean part does not depend on contamination settings") {
    SimulationScenario a;
    a.seed = 12;
    SimulationScenario b = a;
    b.e = 0.1;
    b.gamma = 20.0;
    const GeneratedInstance ga = generate(a), gb = generate(b);
    CHECK(ga.x_clean == gb.x_clean);
    CHECK(ga.y_clean == gb.y_clean);
    check_masks(gb);
}

TEST_CASE("cellwise contamination count concentrates") {
    SimulationScenario sc;
    sc.e = 0.05;
    int inside = 0;
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        sc.seed = seed;
        const GeneratedInstance g = generate(sc);
        check_masks(g);
        const auto cells = g.outlier_mask_x.count();
        inside += cells >= 400 && cells <= 600;
    }
    CHECK(inside >= 190);
}

TEST_CASE("contamination magnitudes and signs") {
    SimulationScenario sc;
    sc.e = 0.2;
    sc.gamma = 8.0;
    sc.seed = 13;
    const GeneratedInstance g = generate(sc);
    const Eigen::ArrayXXd d = g.x_contaminated - g.x_clean;
    int positive = 0, total = 0;
    double abs_sum = 0.0;
    for (Eigen::Index k = 0; k < d.size(); ++k) {
        if (!g.outlier_mask_x.data()[k]) continue;
        ++total;
        positive += d.data()[k] > 0.0;
        abs_sum += std::abs(d.data()[k]);
    }
    CHECK(total > 1800);
    CHECK(std::abs(positive / static_cast<double>(total) - 0.5) < 0.05);
    CHECK(abs_sum / total == doctest::Approx(8.0).epsilon(0.02));
}

TEST_CASE("rowwise contamination hits whole rows") {
    SimulationScenario sc;
    sc.e = 0.1;
    sc.mode = ContaminationMode::rowwise;
    sc.seed = 14;
    const GeneratedInstance g = generate(sc);
    check_masks(g);
    int rows = 0;
    for (Eigen::Index i = 0; i < g.outlier_mask_x.rows(); ++i) {
        const bool any = g.outlier_mask_x.row(i).any();
        CHECK(any == g.outlier_mask_x.row(i).all());
        CHECK(g.outlier_mask_y[i] == any);
        rows += any;
    }
    CHECK(rows > 5);
    CHECK(rows < 40);

    sc.contaminate_response = false;
    CHECK_FALSE(generate(sc).outlier_mask_y.any());
}

TEST_CASE("heavy-tailed predictor distributions") {
    SimulationScenario sc;
    sc.n = 20000;
    sc.p = 3;
    sc.n_active = 1;
    sc.seed = 15;
    sc.distribution = PredictorDistribution::t4;
    const GeneratedInstance t = generate(sc);
    // t4 has variance 2 and heavier tails than the normal
    const double var = t.x_clean.col(0).squaredNorm() / sc.n;
    CHECK(var == doctest::Approx(2.0).epsilon(0.2));
    CHECK((t.x_clean.col(0).array().abs() > 4.0).count() > 100);
    CHECK(std::abs(correlation(t.x_clean.col(0), t.x_clean.col(1)) - 0.5) < 0.05);

    sc.distribution = PredictorDistribution::cauchy;
    const GeneratedInstance c = generate(sc);
    // standard Cauchy: P(|x| > 1) = 1/2, and columns are independent
    const double above = (c.x_clean.col(0).array().abs() > 1.0).count() / static_cast<double>(sc.n);
    CHECK(above == doctest::Approx(0.5).epsilon(0.05));
    const Eigen::ArrayXd s0 = c.x_clean.col(0).array().sign(), s1 = c.x_clean.col(1).array().sign();
    CHECK(std::abs((s0 * s1).mean()) < 0.03);
}

TEST_CASE("scenario validation") {
    SimulationScenario sc;
    sc.n_active = 51;
    CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
    sc = {};
    sc.rho = 1.0;
    CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
    sc = {};
    sc.e = 1.0;
    CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
    sc = {};
    sc.sigma_eps = std::nan("");
    CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
}

TEST_CASE("rmspe and mape") {
    const std::vector<double> truth{3.0, 4.0}, zero{0.0, 0.0};
    CHECK(rmspe(truth, zero) == doctest::Approx(std::sqrt(12.5)));
    CHECK(rmspe(truth, truth) == 0.0);
    CHECK(mape(std::vector<double>{3.0, -4.0}, zero) == 3.5);
    CHECK(mape(truth, truth) == 0.0);
    CHECK_THROWS_AS(rmspe(truth, std::vector<double>{1.0}), std::invalid_argument);
    CHECK_THROWS_AS(mape(truth, std::vector<double>{1.0}), std::invalid_argument);

    Rng rng(16);
    std::vector<double> r(100000), z(100000, 0.0);
    for (double& v : r) v = rng.normal();
    CHECK(std::abs(mape(r, z) - std::sqrt(2.0 / std::numbers::pi)) < 0.01);
}

TEST_CASE("true coefficients predict at the noise level") {
    SimulationScenario sc;
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        sc.seed = test_seed(seed);
        const GeneratedInstance g = generate(sc);
        const Eigen::VectorXd pred = (g.x_clean * g.true_beta).array() + sc.intercept;
        total += rmspe(std::span<const double>(g.y_clean.data(), 200), std::span<const double>(pred.data(), 200));
    }
    const double mean = total / 50.0;
    CHECK(mean >= 2.9);
    CHECK(mean <= 3.1);
}

TEST_CASE("selection metrics") {
    std::vector<std::size_t> truth(10);
    for (std::size_t j = 0; j < 10; ++j) truth[j] = j;
    SelectionMetrics m = selection_metrics(truth, truth, 50);
    CHECK(m.tp == 10);
    CHECK(m.fp == 0);
    CHECK(m.tn == 40);
    CHECK(m.f1 == 1.0);

    m = selection_metrics({0, 1, 2, 3, 4, 5, 6, 7, 20, 21}, truth, 50);
    CHECK(m.tp == 8);
    CHECK(m.fp == 2);
    CHECK(m.fn == 2);
    CHECK(m.tn == 38);
    CHECK(m.f1 == doctest::Approx(0.8));

    CHECK(selection_metrics({}, truth, 50).f1 == 0.0);
    CHECK(selection_metrics({}, {}, 50).f1 == 1.0);
    CHECK(selection_metrics({3}, {}, 50).f1 == 0.0);
    CHECK_THROWS_AS(selection_metrics({50}, truth, 50), std::invalid_argument);
}

TEST_CASE("method names") {
    for (Method m : {Method::cr_lasso, Method::cr_lasso_no_post, Method::lasso}) CHECK(parse_method(to_string(m)) == m);
    CHECK_THROWS_AS(parse_method("ridge"), std::invalid_argument);
}

TEST_CASE("plain Lasso baseline recovers a strong signal") {
    SimulationScenario sc;
    sc.seed = 17;
    const GeneratedInstance g = generate(sc);
    const LassoFit fit = fit_lasso_cv(g.x_clean, g.y_clean);
    CHECK(fit.beta.size() == 50);
    CHECK(fit.support.size() >= 10);
    CHECK(selection_metrics(fit.support, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, 50).tp == 10);
    CHECK(std::abs(fit.intercept - 1.0) < 1.0);
}

TEST_CASE("run_experiment is reproducible and thread independent") {
    SimulationScenario sc;
    sc.n = 60;
    sc.p = 12;
    sc.n_active = 3;
    sc.e = 0.05;
    const std::vector<Method> methods{Method::cr_lasso, Method::cr_lasso_no_post, Method::lasso};
    ExperimentOptions one;
    one.path.grid_size = 15;
    ExperimentOptions three = one;
    three.threads = 3;
    const ExperimentResult a = run_experiment(sc, methods, 4, 100, one);
    const ExperimentResult b = run_experiment(sc, methods, 4, 100, one);
    const ExperimentResult c = run_experiment(sc, methods, 4, 100, three);
    REQUIRE(a.rows.size() == 4 * 3 * metric_names().size());
    for (std::size_t k = 0; k < a.rows.size(); ++k) {
        for (const ExperimentResult* other : {&b, &c}) {
            const MetricRow& r = other->rows[k];
            CHECK(r.replicate == a.rows[k].replicate);
            CHECK(r.method == a.rows[k].method);
            CHECK(r.metric == a.rows[k].metric);
            const bool both_nan = std::isnan(r.value) && std::isnan(a.rows[k].value);
            CHECK((both_nan || r.value == a.rows[k].value));
        }
    }
    CHECK(a.rows.front().replicate == 0);
    CHECK(a.rows.back().replicate == 3);

    // replicate r depends only on base_seed + r
    const ExperimentResult shifted = run_experiment(sc, methods, 1, 102, one);
    const std::size_t per = 3 * metric_names().size();
    for (std::size_t k = 0; k < per; ++k) {
        const double x = shifted.rows[k].value, y = a.rows[2 * per + k].value;
        CHECK(((std::isnan(x) && std::isnan(y)) || x == y));
    }
}

TEST_CASE("summaries skip missing values") {
    const double nan = std::nan("");
    const std::vector<MetricRow> rows{{0, "lasso", "rmspe", 1.0}, {1, "lasso", "rmspe", 3.0},
                                      {2, "lasso", "rmspe", nan}, {0, "lasso", "f1", nan}};
    const auto summary = summarize(rows);
    REQUIRE(summary.size() == 2);
    CHECK(summary[0].metric == "rmspe");
    CHECK(summary[0].mean == 2.0);
    CHECK(summary[0].sd == doctest::Approx(std::sqrt(2.0)));
    CHECK(summary[0].count == 2);
    CHECK(summary[1].count == 0);
    CHECK(std::isnan(summary[1].mean));
    CHECK(mean_metric(rows, "lasso", "rmspe") == 2.0);
}
