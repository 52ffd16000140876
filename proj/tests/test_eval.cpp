#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "switchode/ctmc.hpp"
#include "switchode/emfit.hpp"
#include "switchode/errors.hpp"
#include "switchode/eval.hpp"
#include "switchode/model.hpp"
#include "switchode/rng.hpp"
#include "test_support.hpp"

using namespace switchode;
using namespace switchode::eval;
using switchode::ctmc::RateMatrix;
using test_support::random_psi;
using test_support::random_rate_matrix;
using test_support::random_theta;
using test_support::synth_observations;

namespace {

ModelParams random_params(std::uint64_t seed, int k, int p, int m) {
    Rng rng(seed);
    return ModelParams(random_rate_matrix(rng, k, 0.2, 1.5),
                       random_theta(rng, k, p, m), 0.3 + rng.uniform());
}

// Relabeled copy: state l of the result is state perm[l] of the input.
ModelParams permute_params(const ModelParams& params, const std::vector<int>& perm) {
    int k = params.k();
    Eigen::MatrixXd q(k, k);
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) q(a, b) = params.q.q()(perm[a], perm[b]);
    return ModelParams(RateMatrix::make(q), params.theta.permute_states(perm),
                       params.sigma2);
}

// Two clearly separated states on a 2-node graph, asymmetric rates.
ModelParams toy_truth() {
    ThetaTensor theta(2, 2, 1);
    theta.block(0, 0, 0)(0) = 1.0;
    theta.block(1, 1, 1)(0) = 1.0;
    return ModelParams(RateMatrix::make((Eigen::MatrixXd(2, 2) << -1.0, 1.0,
                                         2.0, -2.0).finished()),
                       theta, 0.5);
}

// Ground truth for the ROC cases: 3 edges in state 0, 2 in state 1.
ModelParams roc_truth() {
    ThetaTensor theta(2, 4, 2);
    theta.block(0, 0, 1) << 1.0, 0.2;
    theta.block(0, 1, 0) << -0.7, 0.1;
    theta.block(0, 2, 2) << 0.5, 0.5;
    theta.block(1, 0, 0) << 0.9, -0.3;
    theta.block(1, 3, 1) << 0.8, 0.2;
    return ModelParams(RateMatrix::make((Eigen::MatrixXd(2, 2) << -0.4, 0.4,
                                         0.9, -0.9).finished()),
                       theta, 0.25);
}

emfit::FitResult as_fit(const ModelParams& params, double lambda) {
    emfit::FitResult res;
    res.params = params;
    res.lambda = lambda;
    return res;
}

}  // namespace

TEST_CASE("matching identical parameters gives the identity") {
    ModelParams truth = random_params(71, 3, 2, 2);
    StateMatch match = match_states(truth, truth);
    CHECK(match.xi1 == std::vector<int>{0, 1, 2});
    CHECK(match.xi2 == std::vector<int>{0, 1, 2});
    CHECK(match.consistent);

    ParamDistance d = param_distance(truth, truth, match.xi1);
    CHECK(d.d_theta == 0.0);
    CHECK(d.d_q == 0.0);
    CHECK(d.d_sigma == 0.0);
    CHECK(d.total == 0.0);
}

TEST_CASE("matching recovers a relabeling") {
    ModelParams truth = random_params(72, 3, 2, 2);
    std::vector<int> perm = {2, 0, 1};
    ModelParams est = permute_params(truth, perm);

    // est state xi[l] must equal truth state l, so xi is the inverse of perm.
    StateMatch match = match_states(est, truth);
    CHECK(match.xi1 == std::vector<int>{1, 2, 0});
    CHECK(match.xi2 == std::vector<int>{1, 2, 0});
    CHECK(match.consistent);
    CHECK(param_distance(est, truth, match.xi1).total == 0.0);

    ModelParams two = toy_truth();
    ModelParams swapped = permute_params(two, {1, 0});
    StateMatch swap = match_states(swapped, two);
    CHECK(swap.xi1 == std::vector<int>{1, 0});
    CHECK(swap.xi2 == std::vector<int>{1, 0});
    CHECK(swap.consistent);
}

TEST_CASE("drift and rate matchings can disagree") {
    ModelParams truth = toy_truth();
    // Same drift coefficients, but the rates of the two states exchanged.
    ModelParams est(RateMatrix::make((Eigen::MatrixXd(2, 2) << -2.0, 2.0,
                                      1.0, -1.0).finished()),
                    truth.theta, truth.sigma2);
    StateMatch match = match_states(est, truth);
    CHECK(match.xi1 == std::vector<int>{0, 1});
    CHECK(match.xi2 == std::vector<int>{1, 0});
    CHECK_FALSE(match.consistent);
}

TEST_CASE("matching validates its inputs") {
    CHECK_THROWS_AS(match_states(random_params(73, 9, 2, 1), random_params(74, 9, 2, 1)),
                    ValueError);
    CHECK_THROWS_AS(match_states(random_params(75, 2, 2, 1), random_params(76, 3, 2, 1)),
                    ValueError);
    CHECK_THROWS_AS(match_states(random_params(77, 2, 2, 1), random_params(78, 2, 3, 1)),
                    ValueError);
}

TEST_CASE("distance of a single perturbed block") {
    ModelParams truth = random_params(79, 2, 3, 2);
    truth.theta.block(1, 0, 2).setZero();
    ModelParams est = truth;
    est.theta.block(1, 0, 2) << 0.3, -0.4;

    ParamDistance d = param_distance(est, truth, {0, 1});
    CHECK(d.d_theta == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(d.d_q == 0.0);
    CHECK(d.d_sigma == 0.0);
    CHECK(d.total == doctest::Approx(0.5).epsilon(1e-12));

    est.sigma2 = truth.sigma2 + 0.125;
    d = param_distance(est, truth, {0, 1});
    CHECK(d.d_sigma == 0.125);
    CHECK(d.total == doctest::Approx(0.625).epsilon(1e-12));
}

TEST_CASE("distance matches a direct recomputation") {
    ModelParams est = random_params(80, 3, 3, 2);
    ModelParams truth = random_params(81, 3, 3, 2);
    std::vector<int> xi = {2, 0, 1};
    ParamDistance d = param_distance(est, truth, xi);

    double d_theta = 0.0;
    for (int l = 0; l < 3; ++l)
        for (int i = 0; i < 3; ++i) {
            double ss = 0.0;
            for (int c = 0; c < 6; ++c) {
                double diff = est.theta.state(xi[l])(i, c) - truth.theta.state(l)(i, c);
                ss += diff * diff;
            }
            d_theta += std::sqrt(ss);
        }
    double d_q = 0.0;
    for (int l = 0; l < 3; ++l)
        for (int lp = 0; lp < 3; ++lp)
            if (lp != l) d_q += std::abs(est.q(xi[l], xi[lp]) - truth.q(l, lp));
    CHECK(d.d_theta == doctest::Approx(d_theta).epsilon(1e-12));
    CHECK(d.d_q == doctest::Approx(d_q).epsilon(1e-12));
    CHECK(d.d_sigma == doctest::Approx(std::abs(est.sigma2 - truth.sigma2)).epsilon(1e-12));
    CHECK(d.total == doctest::Approx(d_theta + d_q + d.d_sigma).epsilon(1e-12));

    CHECK_THROWS_AS(param_distance(est, truth, {0, 1}), ValueError);
    CHECK_THROWS_AS(param_distance(est, truth, {0, 1, 1}), ValueError);
}

TEST_CASE("distance is a pseudometric at a fixed matching") {
    std::vector<int> xi = {0, 1};
    for (int trial = 0; trial < 10; ++trial) {
        ModelParams a = random_params(900 + 3 * trial, 2, 2, 2);
        ModelParams b = random_params(901 + 3 * trial, 2, 2, 2);
        ModelParams c = random_params(902 + 3 * trial, 2, 2, 2);
        ParamDistance ab = param_distance(a, b, xi);
        ParamDistance ba = param_distance(b, a, xi);
        ParamDistance ac = param_distance(a, c, xi);
        ParamDistance cb = param_distance(c, b, xi);
        CHECK(ab.total == doctest::Approx(ba.total).epsilon(1e-12));
        CHECK(ab.d_theta == doctest::Approx(ba.d_theta).epsilon(1e-12));
        CHECK(ab.total <= ac.total + cb.total + 1e-10);
        CHECK(ab.d_theta <= ac.d_theta + cb.d_theta + 1e-10);
        CHECK(ab.d_q <= ac.d_q + cb.d_q + 1e-10);
        CHECK(ab.d_sigma <= ac.d_sigma + cb.d_sigma + 1e-10);
    }
}

TEST_CASE("perfect recovery along the whole path gives unit area") {
    ModelParams truth = roc_truth();
    std::vector<emfit::FitResult> path = {as_fit(truth, 0.3), as_fit(truth, 0.2),
                                          as_fit(truth, 0.1)};
    RocResult roc = roc_auc(path, truth, 1e-6);
    REQUIRE(roc.points.size() == 3);
    CHECK(roc.dropped == 0);
    for (std::size_t i = 0; i < roc.points.size(); ++i) {
        CHECK(roc.points[i].lambda == path[i].lambda);
        for (int l = 0; l < 2; ++l) {
            CHECK(roc.points[i].tpr[l] == 1.0);
            CHECK(roc.points[i].fpr[l] == 0.0);
        }
    }
    CHECK(roc.auc[0] == 1.0);
    CHECK(roc.auc[1] == 1.0);
}

TEST_CASE("full then empty estimates trace the diagonal") {
    ModelParams truth = roc_truth();
    ModelParams full = truth;
    full.theta.state(0).setOnes();
    full.theta.state(1).setOnes();
    ModelParams empty = truth;
    empty.theta.state(0).setZero();
    empty.theta.state(1).setZero();

    RocResult roc = roc_auc({as_fit(full, 0.01), as_fit(empty, 10.0)}, truth, 1e-6);
    REQUIRE(roc.points.size() == 2);
    for (int l = 0; l < 2; ++l) {
        CHECK(roc.points[0].tpr[l] == 1.0);
        CHECK(roc.points[0].fpr[l] == 1.0);
        CHECK(roc.points[1].tpr[l] == 0.0);
        CHECK(roc.points[1].fpr[l] == 0.0);
        CHECK(roc.auc[l] == 0.5);
    }
}

TEST_CASE("area is invariant to duplicated points") {
    ModelParams truth = roc_truth();
    ModelParams partial = truth;
    partial.theta.block(0, 2, 2).setZero();      // miss one true edge
    partial.theta.block(0, 3, 3) << 0.6, 0.0;    // add one false edge
    ModelParams full = truth;
    full.theta.state(0).setOnes();
    full.theta.state(1).setOnes();

    std::vector<emfit::FitResult> once = {as_fit(partial, 0.2), as_fit(full, 0.05)};
    std::vector<emfit::FitResult> twice = {as_fit(partial, 0.2), as_fit(partial, 0.2),
                                           as_fit(full, 0.05), as_fit(full, 0.05)};
    RocResult a = roc_auc(once, truth, 1e-6);
    RocResult b = roc_auc(twice, truth, 1e-6);
    CHECK(a.points[0].tpr[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(a.points[0].fpr[0] == doctest::Approx(1.0 / 13.0).epsilon(1e-15));
    for (int l = 0; l < 2; ++l) {
        CHECK(a.auc[l] == b.auc[l]);
        CHECK(a.auc[l] >= 0.0);
        CHECK(a.auc[l] <= 1.0);
    }
}

TEST_CASE("inconsistent path entries are dropped") {
    ModelParams truth = toy_truth();
    ModelParams adversarial(RateMatrix::make((Eigen::MatrixXd(2, 2) << -2.0, 2.0,
                                              1.0, -1.0).finished()),
                            truth.theta, truth.sigma2);
    RocResult roc = roc_auc({as_fit(truth, 0.2), as_fit(adversarial, 0.1)}, truth, 1e-6);
    CHECK(roc.points.size() == 1);
    CHECK(roc.dropped == 1);
    CHECK(roc.auc[0] == 1.0);

    CHECK_THROWS_AS(roc_auc({as_fit(adversarial, 0.1)}, truth, 1e-6), DataError);
}

TEST_CASE("degenerate truth edge sets are rejected") {
    ModelParams truth = roc_truth();
    ModelParams no_edges = truth;
    no_edges.theta.state(1).setZero();
    CHECK_THROWS_AS(roc_auc({as_fit(truth, 0.1)}, no_edges, 1e-6), ValueError);

    ModelParams all_edges = truth;
    all_edges.theta.state(0).setOnes();
    CHECK_THROWS_AS(roc_auc({as_fit(truth, 0.1)}, all_edges, 1e-6), ValueError);

    CHECK_THROWS_AS(roc_auc({}, truth, 1e-6), ValueError);
    CHECK_THROWS_AS(roc_auc({as_fit(truth, 0.1)}, truth, -0.1), ValueError);
}

TEST_CASE("dwell time of a single state chain is the window length") {
    Rng rng(301);
    ModelParams params(RateMatrix::make(Eigen::MatrixXd::Zero(1, 1), false),
                       random_theta(rng, 1, 2, 1, 0.4), 0.09);
    std::vector<emfit::GroupedSeries> members(1);
    members[0].psi = random_psi(rng, 40, 2, 1, 0.25);
    members[0].y = synth_observations(rng, params, members[0].psi);
    members[0].group = 0;

    emfit::FitConfig config;
    config.max_iter = 3;
    emfit::GroupedFitResult fit =
        emfit::fit_grouped(members, 1, emfit::init_params(1, 2, 1, 5), config);
    Eigen::MatrixXd dwell = dwell_times(members, fit);
    REQUIRE(dwell.rows() == 1);
    REQUIRE(dwell.cols() == 1);
    CHECK(dwell(0, 0) == doctest::Approx(40 * 0.25).epsilon(1e-12));
}

TEST_CASE("dwell times partition the window per group") {
    Rng rng(302);
    ModelParams params(random_rate_matrix(rng, 2, 0.2, 0.8), random_theta(rng, 2, 2, 1),
                       0.04);
    std::vector<emfit::GroupedSeries> members(3);
    std::vector<int> groups = {0, 1, 0};
    for (int s = 0; s < 3; ++s) {
        members[s].psi = random_psi(rng, 30, 2, 1, 0.5);
        members[s].y = synth_observations(rng, params, members[s].psi);
        members[s].group = groups[s];
    }
    emfit::FitConfig config;
    config.max_iter = 4;
    emfit::GroupedFitResult fit =
        emfit::fit_grouped(members, 2, emfit::init_params(2, 2, 1, 9), config);

    Eigen::MatrixXd dwell = dwell_times(members, fit);
    REQUIRE(dwell.rows() == 2);
    REQUIRE(dwell.cols() == 2);
    CHECK(dwell.row(0).sum() == doctest::Approx(30 * 0.5).epsilon(1e-8));
    CHECK(dwell.row(1).sum() == doctest::Approx(30 * 0.5).epsilon(1e-8));

    CHECK_THROWS_AS(dwell_times({}, fit), ValueError);
    std::vector<emfit::GroupedSeries> short_list(members.begin(), members.begin() + 2);
    CHECK_THROWS_AS(dwell_times(short_list, fit), ValueError);
    std::vector<emfit::GroupedSeries> bad = members;
    bad[1].group = 7;
    CHECK_THROWS_AS(dwell_times(bad, fit), ValueError);
}

TEST_CASE("faster switchers have shorter sojourns") {
    Eigen::MatrixXd base(2, 2);
    base << -0.2, 0.2, 0.3, -0.3;
    RateMatrix q_slow = RateMatrix::make(base);
    RateMatrix q_fast = RateMatrix::make(4.0 * base);

    ThetaTensor theta(2, 2, 1);
    theta.block(0, 0, 0)(0) = 1.0;
    theta.block(0, 1, 1)(0) = -0.8;
    theta.block(1, 0, 1)(0) = 0.9;
    theta.block(1, 1, 0)(0) = 0.7;
    const double sigma2 = 0.02, h = 0.5;
    const int n = 200;
    ModelParams slow(q_slow, theta, sigma2);
    ModelParams fast(q_fast, theta, sigma2);

    for (int seed = 0; seed < 10; ++seed) {
        Rng rng(1000 + seed);
        std::vector<emfit::GroupedSeries> members;
        emfit::GroupedFitResult at_truth;
        at_truth.theta = theta;
        at_truth.sigma2 = sigma2;
        at_truth.q_by_group = {q_slow, q_fast};

        // Occupation splits into sojourns; the group mean sojourn length is
        // pooled occupation over pooled completed visits.
        Eigen::MatrixXd tau = Eigen::MatrixXd::Zero(2, 2);   // group x state
        Eigen::MatrixXd exits = Eigen::MatrixXd::Zero(2, 2);
        for (int member = 0; member < 3; ++member) {
            for (int g = 0; g < 2; ++g) {
                const ModelParams& params = g == 0 ? slow : fast;
                emfit::GroupedSeries series;
                series.psi = random_psi(rng, n, 2, 1, h);
                series.y = synth_observations(rng, params, series.psi);
                series.group = g;
                emfit::Posterior post =
                    emfit::forward_backward(series.y, series.psi, params);
                emfit::CtmcStats stats =
                    emfit::e_step_statistics(post, at_truth.q_by_group[g], h);
                for (int l = 0; l < 2; ++l) {
                    tau(g, l) += stats.tau[l];
                    exits(g, l) += stats.m(l, 1 - l);
                }
                members.push_back(std::move(series));
                at_truth.posteriors.push_back(std::move(post));
            }
        }

        Eigen::MatrixXd dwell = dwell_times(members, at_truth);
        CHECK(dwell.row(0).sum() == doctest::Approx(n * h).epsilon(1e-8));
        CHECK(dwell.row(1).sum() == doctest::Approx(n * h).epsilon(1e-8));
        for (int l = 0; l < 2; ++l)
            CHECK(tau(1, l) / exits(1, l) < tau(0, l) / exits(0, l));
    }
}

TEST_CASE("replicate summary strings") {
    CHECK(format_mean_sd({0.954, 0.960, 0.966}) == "0.96(0.006)");
    CHECK(format_mean_sd({0.95, 0.96, 0.97}) == "0.96(0.010)");
    CHECK(format_mean_sd({0.5}) == "0.50(0.000)");
    CHECK(format_mean_sd({1.0, 2.0}, 1, 1) == "1.5(0.7)");
    CHECK_THROWS_AS(format_mean_sd({}), ValueError);
}
