#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "switchode/emfit.hpp"
#include "switchode/errors.hpp"
#include "switchode/rng.hpp"
#include "test_support.hpp"

using namespace switchode;
using namespace switchode::emfit;
using switchode::ctmc::RateMatrix;
using test_support::random_psi;
using test_support::random_rate_matrix;
using test_support::random_theta;

namespace {

// Exhaustive posterior over all k^(N+1) latent sequences; emissions computed
// from the Gaussian increment density directly.
struct BruteResult {
    Eigen::MatrixXd w;
    std::vector<Eigen::MatrixXd> pair;
    Eigen::VectorXd w0;
    double loglik = 0.0;
};

BruteResult brute_force(const ObservationSet& y, const PsiFeatures& psi,
                        const ModelParams& params) {
    int n = psi.n();
    int k = params.k();
    int p = y.p();
    Eigen::VectorXd pi = ctmc::stationary_distribution(params.q);
    Eigen::MatrixXd pmat = ctmc::transition_matrix(params.q, y.h).p;

    // Per-step log emission table.
    Eigen::MatrixXd logb(n, k);
    for (int step = 1; step <= n; ++step) {
        Eigen::RowVectorXd dy = y.y.row(step) - y.y.row(step - 1);
        for (int l = 0; l < k; ++l) {
            double rss = 0.0;
            for (int i = 0; i < p; ++i) {
                double r = dy(i) - params.theta.state(l).row(i).dot(psi.row_for(step));
                rss += r * r;
            }
            logb(step - 1, l) = -0.5 * p * std::log(4.0 * M_PI * params.sigma2) -
                                rss / (4.0 * params.sigma2);
        }
    }

    long total = 1;
    for (int s = 0; s <= n; ++s) total *= k;

    std::vector<double> logw(static_cast<std::size_t>(total));
    std::vector<std::vector<int>> seqs(static_cast<std::size_t>(total),
                                       std::vector<int>(n + 1));
    double max_logw = -1e300;
    for (long code = 0; code < total; ++code) {
        long c = code;
        std::vector<int>& z = seqs[static_cast<std::size_t>(code)];
        for (int s = 0; s <= n; ++s) {
            z[s] = static_cast<int>(c % k);
            c /= k;
        }
        double lw = std::log(pi(z[0]));
        for (int s = 1; s <= n; ++s)
            lw += std::log(pmat(z[s - 1], z[s])) + logb(s - 1, z[s]);
        logw[static_cast<std::size_t>(code)] = lw;
        max_logw = std::max(max_logw, lw);
    }

    double norm = 0.0;
    for (double lw : logw) norm += std::exp(lw - max_logw);

    BruteResult out;
    out.loglik = max_logw + std::log(norm);
    out.w = Eigen::MatrixXd::Zero(n, k);
    out.w0 = Eigen::VectorXd::Zero(k);
    out.pair.assign(static_cast<std::size_t>(n), Eigen::MatrixXd::Zero(k, k));
    for (long code = 0; code < total; ++code) {
        double weight = std::exp(logw[static_cast<std::size_t>(code)] - max_logw) / norm;
        const std::vector<int>& z = seqs[static_cast<std::size_t>(code)];
        out.w0(z[0]) += weight;
        for (int s = 1; s <= n; ++s) {
            out.w(s - 1, z[s]) += weight;
            out.pair[static_cast<std::size_t>(s - 1)](z[s - 1], z[s]) += weight;
        }
    }
    return out;
}

ModelParams random_instance(Rng& rng, int k, int p, int m, int n, double h,
                            ObservationSet& y_out, PsiFeatures& psi_out) {
    psi_out = random_psi(rng, n, p, m, h);
    ThetaTensor theta = random_theta(rng, k, p, m);
    RateMatrix q = random_rate_matrix(rng, k, 0.1, 2.0);
    // Moderate sigma2 keeps emissions informative but not degenerate.
    ModelParams params(q, theta, rng.uniform(0.2, 1.5));
    y_out.h = h;
    y_out.y.resize(n + 1, p);
    for (int r = 0; r <= n; ++r)
        for (int c = 0; c < p; ++c) y_out.y(r, c) = rng.normal();
    return params;
}

void check_against_brute(const ObservationSet& y, const PsiFeatures& psi,
                         const ModelParams& params, double tol) {
    Posterior post = forward_backward(y, psi, params);
    BruteResult gold = brute_force(y, psi, params);
    CHECK(std::abs(post.loglik - gold.loglik) < tol);
    CHECK((post.w - gold.w).lpNorm<Eigen::Infinity>() < tol);
    CHECK((post.w0 - gold.w0).lpNorm<Eigen::Infinity>() < tol);
    for (std::size_t s = 0; s < gold.pair.size(); ++s)
        CHECK((post.pair[s] - gold.pair[s]).lpNorm<Eigen::Infinity>() < tol);
}

}  // namespace

TEST_CASE("matches exhaustive enumeration on random instances") {
    Rng rng(2024);
    struct Shape {
        int n, k;
    };
    for (Shape shape : {Shape{5, 2}, Shape{6, 3}, Shape{8, 2}}) {
        for (int trial = 0; trial < 12; ++trial) {
            ObservationSet y;
            PsiFeatures psi;
            ModelParams params = random_instance(rng, shape.k, 2, 2, shape.n, 0.3, y, psi);
            check_against_brute(y, psi, params, 1e-10);
        }
    }
}

TEST_CASE("single state posterior is trivial") {
    Rng rng(7);
    ObservationSet y;
    PsiFeatures psi;
    ModelParams params = random_instance(rng, 1, 3, 2, 6, 0.25, y, psi);
    Posterior post = forward_backward(y, psi, params);
    CHECK((post.w.array() - 1.0).abs().maxCoeff() < 1e-14);
    CHECK(post.w0(0) == doctest::Approx(1.0));
    double direct = 0.0;
    for (int n = 1; n <= 6; ++n) direct += emission_logdensity(y, psi, params, n, 0);
    CHECK(post.loglik == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("identical emissions reduce the posterior to the chain marginal") {
    Rng rng(8);
    ObservationSet y;
    PsiFeatures psi;
    ModelParams params = random_instance(rng, 2, 2, 2, 7, 0.4, y, psi);
    // Copy state 0 coefficients into state 1 so emissions carry no state
    // information; the smoothed marginal of a stationary chain is stationary.
    ThetaTensor tied = params.theta;
    tied.state(1) = tied.state(0);
    ModelParams tied_params(params.q, tied, params.sigma2);
    Posterior post = forward_backward(y, psi, tied_params);
    Eigen::VectorXd pi = ctmc::stationary_distribution(params.q);
    for (int r = 0; r < post.n(); ++r)
        CHECK((post.w.row(r).transpose() - pi).lpNorm<Eigen::Infinity>() < 1e-10);
    CHECK((post.w0 - pi).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("posterior invariants hold on larger instances") {
    Rng rng(9);
    ObservationSet y;
    PsiFeatures psi;
    ModelParams params = random_instance(rng, 3, 3, 2, 60, 0.2, y, psi);
    Posterior post = forward_backward(y, psi, params);
    for (int r = 0; r < post.n(); ++r) {
        CHECK(post.w.row(r).sum() == doctest::Approx(1.0).epsilon(1e-10));
        const Eigen::MatrixXd& pr = post.pair[static_cast<std::size_t>(r)];
        CHECK(pr.sum() == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(pr.minCoeff() >= 0.0);
        // Column sums of the pair slice are the marginal at step r.
        CHECK((pr.colwise().sum().transpose() -
               post.w.row(r).transpose()).lpNorm<Eigen::Infinity>() < 1e-9);
    }
    // Row sums of pair[r] give the marginal at step r-1 for r >= 1.
    for (int r = 1; r < post.n(); ++r)
        CHECK((post.pair[static_cast<std::size_t>(r)].rowwise().sum().transpose() -
               post.w.row(r - 1)).lpNorm<Eigen::Infinity>() < 1e-9);
    CHECK((post.pair[0].rowwise().sum() - post.w0).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("emission log density matches a direct evaluation") {
    Rng rng(10);
    ObservationSet y;
    PsiFeatures psi;
    ModelParams params = random_instance(rng, 2, 4, 3, 5, 0.3, y, psi);
    for (int n = 1; n <= 5; ++n)
        for (int l = 0; l < 2; ++l) {
            Eigen::RowVectorXd dy = y.y.row(n) - y.y.row(n - 1);
            double rss = 0.0;
            for (int i = 0; i < 4; ++i) {
                double r = dy(i) - params.theta.state(l).row(i).dot(psi.row_for(n));
                rss += r * r;
            }
            double direct = -0.5 * 4 * std::log(4.0 * M_PI * params.sigma2) -
                            rss / (4.0 * params.sigma2);
            CHECK(emission_logdensity(y, psi, params, n, l) ==
                  doctest::Approx(direct).epsilon(1e-12));
        }
}

TEST_CASE("emission density closed-form spot checks") {
    // One node, zero coefficients, zero increment: the density peak is
    // (4 pi sigma2)^(-1/2), which is 1 when sigma2 = 1/(4 pi).
    PsiFeatures psi;
    psi.p = 1;
    psi.m = 1;
    psi.h = 0.5;
    psi.psi = Eigen::MatrixXd::Zero(1, 1);
    ObservationSet y;
    y.h = 0.5;
    y.y = Eigen::MatrixXd::Zero(2, 1);
    ThetaTensor theta(1, 1, 1);
    RateMatrix q = RateMatrix::make(Eigen::MatrixXd::Zero(1, 1));
    ModelParams peak(q, theta, 1.0 / (4.0 * M_PI));
    CHECK(emission_logdensity(y, psi, peak, 1, 0) == doctest::Approx(0.0).epsilon(1e-14));

    // A residual of one standard deviation multiplies the density by
    // exp(-1/2).
    double sigma2 = 0.37;
    ModelParams one_sd(q, theta, sigma2);
    y.y(1, 0) = std::sqrt(2.0 * sigma2);
    double at_peak = -0.5 * std::log(4.0 * M_PI * sigma2);
    CHECK(emission_logdensity(y, psi, one_sd, 1, 0) ==
          doctest::Approx(at_peak - 0.5).epsilon(1e-13));
}

TEST_CASE("non-finite emissions are reported with their index") {
    Rng rng(21);
    ObservationSet y;
    PsiFeatures psi;
    ModelParams params = random_instance(rng, 2, 2, 2, 5, 0.3, y, psi);
    y.y(3, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(forward_backward(y, psi, params), NumericalError);
}

TEST_CASE("truncated posterior equals the full posterior for wide windows") {
    Rng rng(22);
    ObservationSet y;
    PsiFeatures psi;
    ModelParams params = random_instance(rng, 2, 2, 2, 24, 0.3, y, psi);
    Posterior full = forward_backward(y, psi, params);
    for (int r : {24, 30, 100}) {
        Posterior trunc = truncated_posterior(y, psi, params, r);
        CHECK((trunc.w - full.w).lpNorm<Eigen::Infinity>() < 1e-12);
        CHECK(std::abs(trunc.loglik - full.loglik) < 1e-12);
    }
    CHECK_THROWS_AS(truncated_posterior(y, psi, params, 0), ValueError);
}

TEST_CASE("truncated posterior error decreases with the window") {
    // Fast-mixing symmetric chain: exp(Q h) has off-diagonal 0.39, so the
    // window influence contracts well below 1e-6 within 16 steps.
    Rng rng(23);
    PsiFeatures psi = random_psi(rng, 64, 2, 2, 0.5);
    ThetaTensor theta = random_theta(rng, 2, 2, 2);
    Eigen::MatrixXd qm(2, 2);
    qm << -1.5, 1.5, 1.5, -1.5;
    ModelParams params(RateMatrix::make(qm), theta, 0.5);
    ObservationSet y;
    y.h = 0.5;
    y.y.resize(65, 2);
    for (int r = 0; r <= 64; ++r)
        for (int c = 0; c < 2; ++c) y.y(r, c) = rng.normal();
    Posterior full = forward_backward(y, psi, params);
    double prev = 1e9;
    for (int r : {1, 2, 4, 8, 16}) {
        Posterior trunc = truncated_posterior(y, psi, params, r);
        double err = 0.0;
        for (int row = 0; row < full.n(); ++row)
            err = std::max(err, (trunc.w.row(row) - full.w.row(row)).lpNorm<1>());
        CHECK(err <= prev + 1e-12);
        prev = err;
    }
    CHECK(prev < 1e-6);
}
