#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "switchode/emfit.hpp"
#include "switchode/errors.hpp"
#include "switchode/model_select.hpp"
#include "switchode/rng.hpp"
#include "test_support.hpp"

using namespace switchode;
using namespace switchode::select;
using switchode::ctmc::RateMatrix;
using test_support::random_psi;
using test_support::random_rate_matrix;
using test_support::random_theta;
using test_support::synth_observations;

namespace {

// Tiny synthetic problem shared across cases.
struct Problem {
    simulate::ObservationSet y;
    denoise::PsiFeatures psi;
    int k, p, m;
};

Problem make_problem(std::uint64_t seed, int k = 2, int n = 60) {
    Rng rng(seed);
    Problem prob;
    prob.k = k;
    prob.p = 2;
    prob.m = 1;
    ModelParams params(k == 1 ? RateMatrix::make(Eigen::MatrixXd::Zero(1, 1), false)
                              : random_rate_matrix(rng, k, 0.2, 1.0),
                       random_theta(rng, k, prob.p, prob.m, 0.7), 0.4);
    prob.psi = random_psi(rng, n, prob.p, prob.m, 0.4);
    prob.y = synth_observations(rng, params, prob.psi);
    return prob;
}

}  // namespace

TEST_CASE("nonzero entry counting") {
    ThetaTensor theta(2, 2, 3);
    CHECK(nnz_entries(theta) == 0);
    theta.block(0, 0, 1)(1) = 0.5;
    theta.block(0, 0, 1)(2) = -2.0;
    theta.block(1, 1, 0)(0) = 1e-12;  // below the zero threshold
    CHECK(nnz_entries(theta) == 2);
    theta.block(1, 1, 0)(0) = 1e-3;
    CHECK(nnz_entries(theta) == 3);
    CHECK(nnz_entries(theta, 0.1) == 2);
}

TEST_CASE("information criterion of a single state zero model") {
    Problem prob = make_problem(901, 1);
    emfit::FitConfig config;
    config.max_iter = 1;
    // Hold theta at zero; only sigma and the posterior move.
    ModelParams init(RateMatrix::make(Eigen::MatrixXd::Zero(1, 1), false),
                     ThetaTensor(1, prob.p, prob.m), 0.4);
    emfit::FitConfig frozen = config;
    frozen.lambda = 1e9;  // forces the update to keep theta at zero
    emfit::FitResult res = emfit::fit(prob.y, prob.psi, init, frozen);
    REQUIRE(nnz_entries(res.params.theta) == 0);

    double value = bic(prob.y, prob.psi, res);
    // k^2 - k = 0 and no active entries: the criterion is -2 log-likelihood.
    CHECK(value == doctest::Approx(-2.0 * res.posterior.loglik).epsilon(1e-10));
}

TEST_CASE("one extra active entry costs exactly log N") {
    Problem prob = make_problem(902, 1);
    emfit::FitConfig config;
    config.max_iter = 3;
    ModelParams init = emfit::init_params(1, prob.p, prob.m, 11);
    emfit::FitResult res = emfit::fit(prob.y, prob.psi, init, config);

    emfit::FitResult bumped = res;
    REQUIRE(bumped.params.theta.block_norm(0, 0, 0) > kZeroTol);
    int before = nnz_entries(res.params.theta);
    bumped.params.theta.block(0, 0, 0)(0) = 0.0;
    REQUIRE(nnz_entries(bumped.params.theta) == before - 1);

    // Same fit, one fewer active entry; the complexity parts differ by log N
    // and the likelihood parts differ by the refit surrogate.
    double full = bic(prob.y, prob.psi, res);
    double dropped = bic(prob.y, prob.psi, bumped);
    double loglik_full = emfit::penalized_objective(prob.y, prob.psi, res.params,
                                                    res.posterior, 0.0);
    double loglik_drop = emfit::penalized_objective(prob.y, prob.psi, bumped.params,
                                                    bumped.posterior, 0.0);
    double complexity_gap = (full + 2.0 * loglik_full) - (dropped + 2.0 * loglik_drop);
    CHECK(complexity_gap == doctest::Approx(std::log(60.0)).epsilon(1e-9));
}

TEST_CASE("criterion recomputes from its parts") {
    Problem prob = make_problem(903, 2);
    emfit::FitConfig config;
    config.lambda = 0.05;
    config.max_iter = 20;
    emfit::FitResult res = emfit::fit(prob.y, prob.psi, emfit::init_params(2, 2, 1, 3), config);

    double value = bic(prob.y, prob.psi, res);
    double surrogate =
        emfit::penalized_objective(prob.y, prob.psi, res.params, res.posterior, 0.0);
    int k = res.params.k();
    double expect = (k * k - k + nnz_entries(res.params.theta)) * std::log(60.0) -
                    2.0 * surrogate;
    CHECK(value == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("grid search with a single cell returns that cell") {
    Problem prob = make_problem(904, 2);
    SelectionGrid grid;
    grid.k_candidates = {2};
    grid.m_candidates = {1};
    grid.lambda_grid = {0.05};
    emfit::FitConfig config;
    config.max_iter = 25;

    auto psi_for_m = [&](int) { return prob.psi; };
    SelectionReport report = grid_search(prob.y, psi_for_m, grid, config, 41);
    REQUIRE(report.cells.size() == 1);
    CHECK(report.k_best == 2);
    CHECK(report.m_best == 1);
    CHECK(report.lambda_best == 0.05);
    CHECK(report.bic_best == report.cells[0].bic);
    CHECK(report.dropped_cells == 0);
}

TEST_CASE("winning cell matches a recomputed criterion") {
    Problem prob = make_problem(905, 2);
    SelectionGrid grid;
    grid.k_candidates = {1, 2};
    grid.m_candidates = {1};
    grid.lambda_grid = {0.2, 0.05, 0.01};
    emfit::FitConfig config;
    config.max_iter = 30;

    auto psi_for_m = [&](int) { return prob.psi; };
    SelectionReport report = grid_search(prob.y, psi_for_m, grid, config, 42);
    CHECK(report.bic_best == doctest::Approx(bic(prob.y, prob.psi, report.best)).epsilon(1e-9));

    // Two-stage rule: the winner's k attains the best BIC over all cells.
    double global_best = report.cells[0].bic;
    for (const auto& cell : report.cells) global_best = std::min(global_best, cell.bic);
    double winner_k_best = global_best + 1.0;
    for (const auto& cell : report.cells)
        if (cell.k == report.k_best) winner_k_best = std::min(winner_k_best, cell.bic);
    CHECK(winner_k_best == doctest::Approx(global_best).epsilon(1e-12));
}

TEST_CASE("grid search is deterministic") {
    Problem prob = make_problem(906, 2);
    SelectionGrid grid;
    grid.k_candidates = {1, 2};
    grid.m_candidates = {1};
    grid.lambda_grid = {0.1, 0.02};
    emfit::FitConfig config;
    config.max_iter = 15;
    auto psi_for_m = [&](int) { return prob.psi; };

    SelectionReport a = grid_search(prob.y, psi_for_m, grid, config, 7);
    SelectionReport b = grid_search(prob.y, psi_for_m, grid, config, 7);
    REQUIRE(a.cells.size() == b.cells.size());
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
        CHECK(a.cells[i].bic == b.cells[i].bic);
        CHECK(a.cells[i].lambda == b.cells[i].lambda);
    }
    CHECK(a.k_best == b.k_best);
    CHECK(a.m_best == b.m_best);
    CHECK(a.lambda_best == b.lambda_best);

    // Cells enumerate k, then m, then lambda.
    REQUIRE(a.cells.size() == 4);
    CHECK(a.cells[0].k == 1);
    CHECK(a.cells[0].lambda == 0.1);
    CHECK(a.cells[1].k == 1);
    CHECK(a.cells[1].lambda == 0.02);
    CHECK(a.cells[2].k == 2);
    CHECK(a.cells[3].k == 2);
    CHECK(a.cells[3].lambda == 0.02);
}

TEST_CASE("default grid shape") {
    SelectionGrid grid = SelectionGrid::defaults(15);
    CHECK(grid.k_candidates == std::vector<int>{1, 2, 3, 4, 5, 6});
    CHECK(grid.m_candidates == std::vector<int>{1, 2, 3, 4, 5});
    CHECK(grid.lambda_grid.size() == 100);
    for (std::size_t i = 1; i < grid.lambda_grid.size(); ++i)
        CHECK(grid.lambda_grid[i] <= grid.lambda_grid[i - 1]);
}

TEST_CASE("all cells failing raises a numerical error") {
    Problem prob = make_problem(907, 2);
    prob.y.y(5, 0) = std::numeric_limits<double>::quiet_NaN();
    SelectionGrid grid;
    grid.k_candidates = {2};
    grid.m_candidates = {1};
    grid.lambda_grid = {0.1, 0.05};
    emfit::FitConfig config;
    config.max_iter = 10;
    auto psi_for_m = [&](int) { return prob.psi; };
    CHECK_THROWS_AS(grid_search(prob.y, psi_for_m, grid, config, 3), NumericalError);
}
