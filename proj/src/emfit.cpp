#include "switchode/emfit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "grouplasso.hpp"
#include "switchode/errors.hpp"
#include "switchode/matexp.hpp"
#include "switchode/rng.hpp"

namespace switchode::emfit {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void check_alignment(const ObservationSet& y, const PsiFeatures& psi, int p, int m) {
    if (y.p() != p || psi.p != p) throw ValueError("observation/feature/model p mismatch");
    if (psi.m != m) throw ValueError("feature/model m mismatch");
    if (psi.n() != y.n()) throw ValueError("feature rows must equal observation count N");
    if (std::abs(psi.h - y.h) > 1e-12 * std::max(1.0, y.h))
        throw ValueError("observation and feature sampling periods differ");
}

// Log emission densities for n = 1..N (row n-1), all states.
MatrixXd emission_logdensity_all(const ObservationSet& y, const PsiFeatures& psi,
                                 const ModelParams& params) {
    const int n = y.n(), p = y.p(), k = params.k();
    MatrixXd dy = y.y.bottomRows(n) - y.y.topRows(n);
    const double log_norm =
        -0.5 * p * std::log(4.0 * std::numbers::pi * params.sigma2);
    const double inv = 1.0 / (4.0 * params.sigma2);
    MatrixXd logb(n, k);
    for (int l = 0; l < k; ++l) {
        MatrixXd resid = dy - psi.psi * params.theta.state(l).transpose();
        logb.col(l) = log_norm - inv * resid.rowwise().squaredNorm().array();
    }
    for (int r = 0; r < n; ++r)
        if (!logb.row(r).allFinite())
            throw NumericalError("non-finite emission density at observation " +
                                 std::to_string(r + 1));
    return logb;
}

// Forward-backward over chain indices a..b (inclusive) with emissions for
// steps a+1..b taken from rows of logb. Scaled recursions; per-step max
// shift of the log emissions.
Posterior fb_range(const VectorXd& pi, const MatrixXd& p_mat, const MatrixXd& logb,
                   int a, int b) {
    const int k = static_cast<int>(pi.size());
    const int len = b - a;
    MatrixXd alpha(len + 1, k), beta(len + 1, k), bs(len, k);
    VectorXd c(len), mx(len);

    for (int s = 0; s < len; ++s) {
        mx[s] = logb.row(a + s).maxCoeff();
        bs.row(s) = (logb.row(a + s).array() - mx[s]).exp();
    }

    alpha.row(0) = pi;
    double loglik = 0.0;
    for (int s = 1; s <= len; ++s) {
        alpha.row(s) =
            (alpha.row(s - 1) * p_mat).cwiseProduct(bs.row(s - 1));
        double cs = alpha.row(s).sum();
        if (!(cs > 0.0) || !std::isfinite(cs))
            throw NumericalError("forward pass underflow at step " + std::to_string(a + s));
        alpha.row(s) /= cs;
        c[s - 1] = cs;
        loglik += std::log(cs) + mx[s - 1];
    }

    beta.row(len).setOnes();
    for (int s = len; s >= 1; --s)
        beta.row(s - 1) =
            (p_mat * beta.row(s).cwiseProduct(bs.row(s - 1)).transpose()).transpose() /
            c[s - 1];

    Posterior post;
    post.loglik = loglik;
    post.w.resize(len, k);
    post.pair.resize(len);
    for (int s = 1; s <= len; ++s) {
        post.w.row(s - 1) = alpha.row(s).cwiseProduct(beta.row(s));
        MatrixXd slice =
            (alpha.row(s - 1).transpose() *
             beta.row(s).cwiseProduct(bs.row(s - 1))) / c[s - 1];
        post.pair[s - 1] = slice.cwiseProduct(p_mat);
    }
    post.w0 = alpha.row(0).cwiseProduct(beta.row(0));
    post.w0 /= post.w0.sum();
    return post;
}

}  // namespace

double emission_logdensity(const ObservationSet& y, const PsiFeatures& psi,
                           const ModelParams& params, int n, int l) {
    check_alignment(y, psi, params.p(), params.m());
    if (n < 1 || n > y.n()) throw ValueError("emission_logdensity: n must be in [1, N]");
    if (l < 0 || l >= params.k()) throw ValueError("emission_logdensity: state out of range");
    VectorXd dy = y.y.row(n) - y.y.row(n - 1);
    VectorXd mean = params.theta.state(l) * psi.row_for(n).transpose();
    double sq = (dy - mean).squaredNorm();
    return -0.5 * y.p() * std::log(4.0 * std::numbers::pi * params.sigma2) -
           sq / (4.0 * params.sigma2);
}

Posterior forward_backward(const ObservationSet& y, const PsiFeatures& psi,
                           const ModelParams& params) {
    check_alignment(y, psi, params.p(), params.m());
    VectorXd pi = ctmc::stationary_distribution(params.q);
    MatrixXd p_mat = ctmc::transition_matrix(params.q, y.h).p;
    MatrixXd logb = emission_logdensity_all(y, psi, params);
    return fb_range(pi, p_mat, logb, 0, y.n());
}

Posterior truncated_posterior(const ObservationSet& y, const PsiFeatures& psi,
                              const ModelParams& params, int r) {
    if (r < 1) throw ValueError("truncated_posterior: r must be >= 1");
    check_alignment(y, psi, params.p(), params.m());
    const int n = y.n(), k = params.k();
    VectorXd pi = ctmc::stationary_distribution(params.q);
    MatrixXd p_mat = ctmc::transition_matrix(params.q, y.h).p;
    MatrixXd logb = emission_logdensity_all(y, psi, params);

    Posterior post;
    post.w.resize(n, k);
    post.pair.resize(n);
    for (int center = 1; center <= n; ++center) {
        int a = std::max(0, center - r);
        int b = std::min(n, center + r);
        Posterior local = fb_range(pi, p_mat, logb, a, b);
        post.w.row(center - 1) = local.w.row(center - a - 1);
        post.pair[center - 1] = local.pair[center - a - 1];
        if (center == 1) post.w0 = local.w0;
    }
    // The windowed pass approximates marginals only; report the exact
    // full-data log likelihood.
    post.loglik = fb_range(pi, p_mat, logb, 0, n).loglik;
    return post;
}

CtmcStats e_step_statistics(const Posterior& post, const ctmc::RateMatrix& q, double h) {
    const int k = q.k();
    if (post.k() != k) throw ValueError("e_step_statistics: posterior/state count mismatch");
    if (!(h > 0.0)) throw ValueError("e_step_statistics: h must be positive");

    MatrixXd s = MatrixXd::Zero(k, k);
    for (const auto& slice : post.pair) s += slice;

    CtmcStats stats;
    stats.m = MatrixXd::Zero(k, k);
    stats.tau = VectorXd::Zero(k);
    for (int l = 0; l < k; ++l) {
        stats.tau[l] = (s.array() * ctmc::expected_dwell_matrix(q, h, l).array()).sum();
        for (int lp = 0; lp < k; ++lp) {
            if (lp == l) continue;
            stats.m(l, lp) =
                (s.array() * ctmc::expected_transitions_matrix(q, h, l, lp).array()).sum();
        }
    }
    return stats;
}

ctmc::RateMatrix m_step_q(const CtmcStats& stats) {
    const int k = static_cast<int>(stats.tau.size());
    MatrixXd q = MatrixXd::Zero(k, k);
    for (int l = 0; l < k; ++l) {
        if (!(stats.tau[l] > 0.0))
            throw DegenerateStateError("m_step_q: state " + std::to_string(l) +
                                       " has no expected dwell time");
        for (int lp = 0; lp < k; ++lp)
            if (lp != l) q(l, lp) = stats.m(l, lp) / stats.tau[l];
        q(l, l) = -q.row(l).sum();
    }
    return ctmc::RateMatrix::make(q, /*require_irreducible=*/false);
}

double m_step_sigma(const ObservationSet& y, const PsiFeatures& psi,
                    const Eigen::MatrixXd& w, const ThetaTensor& theta) {
    check_alignment(y, psi, theta.p(), theta.m());
    if (w.rows() != y.n() || w.cols() != theta.k())
        throw ValueError("m_step_sigma: weight shape mismatch");
    const int n = y.n();
    MatrixXd dy = y.y.bottomRows(n) - y.y.topRows(n);
    internal::Stacked data{{{&dy, &psi.psi, &w}}, theta.p(), theta.m(), theta.k()};
    // Floor keeps a perfect fit from collapsing the variance to zero.
    return std::max(internal::weighted_rss(data, theta) / (2.0 * theta.p() * n), 1e-12);
}

ThetaTensor m_step_theta(const ObservationSet& y, const PsiFeatures& psi,
                         const Eigen::MatrixXd& w, double sigma2, double lambda,
                         const ThetaTensor& theta_init, const ThetaOptions& options) {
    check_alignment(y, psi, theta_init.p(), theta_init.m());
    if (w.rows() != y.n() || w.cols() != theta_init.k())
        throw ValueError("m_step_theta: weight shape mismatch");
    const int n = y.n();
    MatrixXd dy = y.y.bottomRows(n) - y.y.topRows(n);
    internal::Stacked data{
        {{&dy, &psi.psi, &w}}, theta_init.p(), theta_init.m(), theta_init.k()};
    return internal::solve_theta(data, sigma2, lambda, theta_init, options);
}

KktReport kkt_residuals(const ObservationSet& y, const PsiFeatures& psi,
                        const Eigen::MatrixXd& w, double sigma2, double lambda,
                        const ThetaTensor& theta) {
    check_alignment(y, psi, theta.p(), theta.m());
    const int n = y.n();
    MatrixXd dy = y.y.bottomRows(n) - y.y.topRows(n);
    internal::Stacked data{{{&dy, &psi.psi, &w}}, theta.p(), theta.m(), theta.k()};
    return internal::kkt_residuals(data, sigma2, lambda, theta);
}

double group_penalty(const PsiFeatures& psi, const ThetaTensor& theta) {
    MatrixXd dummy_dy(psi.psi.rows(), theta.p());
    MatrixXd dummy_w(psi.psi.rows(), theta.k());
    internal::Stacked data{
        {{&dummy_dy, &psi.psi, &dummy_w}}, theta.p(), theta.m(), theta.k()};
    return internal::group_penalty_metric(internal::block_metrics(data, 1e-10), theta);
}

namespace {

// CTMC part of the EM surrogate: sum m log q - q tau over off-diagonal pairs.
double ctmc_surrogate(const CtmcStats& stats, const MatrixXd& q) {
    const int k = static_cast<int>(stats.tau.size());
    double val = 0.0;
    for (int l = 0; l < k; ++l) {
        for (int lp = 0; lp < k; ++lp) {
            if (lp == l) continue;
            double mhat = stats.m(l, lp);
            if (mhat > 0.0) {
                if (q(l, lp) <= 0.0)
                    throw ValueError("penalized objective: zero rate with positive "
                                     "expected jump count");
                val += mhat * std::log(q(l, lp));
            }
        }
        val -= (-q(l, l)) * stats.tau[l];
    }
    return val;
}

}  // namespace

double penalized_objective(const ObservationSet& y, const PsiFeatures& psi,
                           const ModelParams& params_new, const Posterior& posterior_old,
                           double lambda) {
    check_alignment(y, psi, params_new.p(), params_new.m());
    if (lambda < 0.0) throw ValueError("penalized_objective: lambda must be >= 0");
    const int n = y.n(), p = y.p();
    CtmcStats stats = e_step_statistics(posterior_old, params_new.q, y.h);
    double val = ctmc_surrogate(stats, params_new.q.q());

    MatrixXd dy = y.y.bottomRows(n) - y.y.topRows(n);
    internal::Stacked data{
        {{&dy, &psi.psi, &posterior_old.w}}, p, params_new.m(), params_new.k()};
    double rss = internal::weighted_rss(data, params_new.theta);
    val += -0.5 * n * p * std::log(4.0 * std::numbers::pi * params_new.sigma2) -
           rss / (4.0 * params_new.sigma2);
    val -= lambda * (n / (2.0 * params_new.sigma2)) * group_penalty(psi, params_new.theta);
    return val;
}

ModelParams init_params(int k, int p, int m, std::uint64_t seed) {
    if (k < 1 || p < 1 || m < 1) throw ValueError("init_params: dimensions must be positive");
    Rng rng(seed);
    MatrixXd q = MatrixXd::Zero(k, k);
    for (int l = 0; l < k; ++l) {
        for (int lp = 0; lp < k; ++lp)
            if (lp != l) q(l, lp) = -rng.uniform(-1.0, 0.0);
        q(l, l) = -q.row(l).sum();
    }
    ThetaTensor theta(k, p, m);
    for (int l = 0; l < k; ++l)
        for (int i = 0; i < p; ++i)
            for (int col = 0; col < p * m; ++col) theta.state(l)(i, col) = rng.normal();
    return ModelParams(ctmc::RateMatrix::make(q), std::move(theta), 1.0);
}

namespace {

// Sigma-dependent part of the surrogate, penalty included; used to accept or
// reject the closed-form variance update so the EM objective never decreases.
double sigma_part(double sigma2, double rss, double pen_lin, int n, int p) {
    return -0.5 * n * p * std::log(4.0 * std::numbers::pi * sigma2) -
           (0.25 * rss + 0.5 * pen_lin) / sigma2;
}

struct QGuardTerms {
    const CtmcStats* stats;
    const VectorXd* w0;
};

// q-dependent surrogate part including the stationary initial-distribution
// term, which the closed-form update ignores.
double q_part(const ctmc::RateMatrix& q, const std::vector<QGuardTerms>& terms) {
    double val = 0.0;
    VectorXd logpi = ctmc::stationary_distribution(q).array().log();
    for (const auto& t : terms) {
        val += ctmc_surrogate(*t.stats, q.q());
        val += t.w0->dot(logpi);
    }
    return val;
}

ctmc::RateMatrix floored_q(const CtmcStats& stats, double floor) {
    const int k = static_cast<int>(stats.tau.size());
    if (k == 1) return ctmc::RateMatrix::make(MatrixXd::Zero(1, 1));
    MatrixXd q = m_step_q(stats).q();
    for (int l = 0; l < k; ++l) {
        for (int lp = 0; lp < k; ++lp)
            if (lp != l && q(l, lp) < floor) q(l, lp) = floor;
        q(l, l) = 0.0;
        q(l, l) = -q.row(l).sum();
    }
    return ctmc::RateMatrix::make(q);
}

}  // namespace

FitResult fit(const ObservationSet& y, const PsiFeatures& psi, const ModelParams& init,
              const FitConfig& config) {
    check_alignment(y, psi, init.p(), init.m());
    if (config.max_iter < 1) throw ValueError("fit: max_iter must be >= 1");
    const int n = y.n(), p = y.p();
    const double lambda = config.lambda;
    ThetaOptions theta_opts = config.theta;
    theta_opts.threads = config.threads;

    MatrixXd dy = y.y.bottomRows(n) - y.y.topRows(n);
    auto stacked = [&](const MatrixXd& w) {
        return internal::Stacked{{{&dy, &psi.psi, &w}}, p, init.m(), init.k()};
    };

    auto e_step = [&](const ModelParams& params) {
        return config.trunc_r ? truncated_posterior(y, psi, params, *config.trunc_r)
                              : forward_backward(y, psi, params);
    };
    auto objective = [&](const ModelParams& params, const Posterior& post) {
        return post.loglik -
               lambda * (n / (2.0 * params.sigma2)) * group_penalty(psi, params.theta);
    };

    ModelParams params = init;
    Posterior post = e_step(params);
    double j_cur = objective(params, post);
    FitResult result{params, post, {j_cur}, 0, false, lambda};

    for (int it = 1; it <= config.max_iter; ++it) {
        CtmcStats stats = e_step_statistics(post, params.q, y.h);

        double lambda_lit = lambda * n / (2.0 * params.sigma2);
        ThetaTensor theta_new = internal::solve_theta(stacked(post.w), params.sigma2,
                                                      lambda_lit, params.theta, theta_opts);

        double rss = internal::weighted_rss(stacked(post.w), theta_new);
        double pen = group_penalty(psi, theta_new);
        double pen_lin = lambda * n * pen;
        double sigma_cand = std::max(rss / (2.0 * p * n), config.sigma_floor);
        double sigma_new =
            (sigma_part(sigma_cand, rss, pen_lin, n, p) >=
             sigma_part(params.sigma2, rss, pen_lin, n, p))
                ? sigma_cand
                : params.sigma2;

        ctmc::RateMatrix q_new = params.q;
        if (init.k() > 1) {
            ctmc::RateMatrix q_cand = floored_q(stats, config.q_floor);
            std::vector<QGuardTerms> terms{{&stats, &post.w0}};
            if (q_part(q_cand, terms) >= q_part(params.q, terms)) q_new = q_cand;
        }

        params = ModelParams(q_new, std::move(theta_new), sigma_new);
        post = e_step(params);
        double j_next = objective(params, post);
        result.trace.push_back(j_next);
        result.iterations = it;

        if (!config.trunc_r && j_next < j_cur - 1e-6 * (1.0 + std::abs(j_cur)))
            throw NumericalError("fit: penalized objective decreased");
        if (std::abs(j_next - j_cur) / (1.0 + std::abs(j_next)) < config.tol) {
            result.converged = true;
            j_cur = j_next;
            break;
        }
        j_cur = j_next;
    }
    result.params = params;
    result.posterior = std::move(post);
    return result;
}

std::vector<double> default_lambda_grid(std::uint64_t seed, int count) {
    if (count < 1) throw ValueError("default_lambda_grid: count must be >= 1");
    Rng rng(seed);
    std::vector<double> grid(count);
    for (auto& g : grid) g = std::exp(rng.uniform(-7.0, -1.0));
    std::sort(grid.begin(), grid.end(), std::greater<>());
    return grid;
}

std::vector<FitResult> lambda_path_fit(const ObservationSet& y, const PsiFeatures& psi,
                                       int k, const std::vector<double>& lambdas,
                                       const FitConfig& config, std::uint64_t seed) {
    if (lambdas.empty()) throw ValueError("lambda_path_fit: empty lambda sequence");
    for (std::size_t i = 1; i < lambdas.size(); ++i)
        if (lambdas[i] > lambdas[i - 1])
            throw ValueError("lambda_path_fit: lambdas must be sorted descending");

    std::vector<FitResult> results;
    results.reserve(lambdas.size());
    ModelParams warm = init_params(k, y.p(), psi.m, seed);
    for (double lam : lambdas) {
        FitConfig cfg = config;
        cfg.lambda = lam;
        results.push_back(fit(y, psi, warm, cfg));
        warm = results.back().params;
    }
    return results;
}

GroupedFitResult fit_grouped(const std::vector<GroupedSeries>& members, int k,
                             const ModelParams& init, const FitConfig& config) {
    if (members.empty()) throw ValueError("fit_grouped: no members");
    const int p = init.p(), m = init.m();
    int n_groups = 0;
    Eigen::Index n_total = 0;
    for (const auto& mem : members) {
        check_alignment(mem.y, mem.psi, p, m);
        if (mem.group < 0) throw ValueError("fit_grouped: group labels must be 0..G-1");
        n_groups = std::max(n_groups, mem.group + 1);
        n_total += mem.y.n();
    }
    for (int g = 0; g < n_groups; ++g) {
        bool found = false;
        for (const auto& mem : members) found = found || mem.group == g;
        if (!found) throw ValueError("fit_grouped: group labels must be 0..G-1 contiguous");
    }

    const std::size_t n_mem = members.size();
    const double lambda = config.lambda;
    ThetaOptions theta_opts = config.theta;
    theta_opts.threads = config.threads;

    std::vector<MatrixXd> dy(n_mem);
    for (std::size_t s = 0; s < n_mem; ++s) {
        int n = members[s].y.n();
        dy[s] = members[s].y.y.bottomRows(n) - members[s].y.y.topRows(n);
    }

    GroupedFitResult result;
    result.theta = init.theta;
    result.sigma2 = init.sigma2;
    result.q_by_group.assign(n_groups, init.q);
    result.posteriors.resize(n_mem);

    // Pooled feature metric for the shared penalty.
    auto stacked_with = [&](const std::vector<MatrixXd>& w) {
        internal::Stacked data;
        data.p = p;
        data.m = m;
        data.k = k;
        for (std::size_t s = 0; s < n_mem; ++s)
            data.segments.push_back({&dy[s], &members[s].psi.psi, &w[s]});
        return data;
    };
    std::vector<MatrixXd> w(n_mem);

    auto penalty_of = [&](const ThetaTensor& theta) {
        internal::Stacked data = stacked_with(w);  // psi-only use
        return internal::group_penalty_metric(internal::block_metrics(data, 1e-10), theta);
    };

    double j_cur = -std::numeric_limits<double>::infinity();
    for (int it = 1; it <= config.max_iter; ++it) {
        // E-step per member under its group generator.
        double loglik = 0.0;
        std::vector<CtmcStats> stats(n_mem);
        for (std::size_t s = 0; s < n_mem; ++s) {
            ModelParams mp(result.q_by_group[members[s].group], result.theta, result.sigma2);
            result.posteriors[s] =
                config.trunc_r ? truncated_posterior(members[s].y, members[s].psi, mp,
                                                     *config.trunc_r)
                               : forward_backward(members[s].y, members[s].psi, mp);
            loglik += result.posteriors[s].loglik;
            stats[s] = e_step_statistics(result.posteriors[s],
                                         result.q_by_group[members[s].group],
                                         members[s].y.h);
            w[s] = result.posteriors[s].w;
        }
        double j_next = loglik - lambda * (static_cast<double>(n_total) /
                                           (2.0 * result.sigma2)) *
                                     penalty_of(result.theta);
        result.trace.push_back(j_next);
        if (it > 1 && std::abs(j_next - j_cur) / (1.0 + std::abs(j_next)) < config.tol) {
            result.converged = true;
            result.iterations = it - 1;
            break;
        }
        j_cur = j_next;
        result.iterations = it;

        // Shared theta / sigma; one generator per group.
        internal::Stacked data = stacked_with(w);
        double lambda_lit = lambda * static_cast<double>(n_total) / (2.0 * result.sigma2);
        ThetaTensor theta_new =
            internal::solve_theta(data, result.sigma2, lambda_lit, result.theta, theta_opts);
        double rss = internal::weighted_rss(data, theta_new);
        double pen_lin = lambda * static_cast<double>(n_total) * penalty_of(theta_new);
        double sigma_cand =
            std::max(rss / (2.0 * p * static_cast<double>(n_total)), config.sigma_floor);
        if (sigma_part(sigma_cand, rss, pen_lin, static_cast<int>(n_total), p) >=
            sigma_part(result.sigma2, rss, pen_lin, static_cast<int>(n_total), p))
            result.sigma2 = sigma_cand;
        result.theta = theta_new;

        if (k > 1) {
            for (int g = 0; g < n_groups; ++g) {
                CtmcStats agg;
                agg.m = MatrixXd::Zero(k, k);
                agg.tau = VectorXd::Zero(k);
                std::vector<QGuardTerms> terms;
                for (std::size_t s = 0; s < n_mem; ++s) {
                    if (members[s].group != g) continue;
                    agg.m += stats[s].m;
                    agg.tau += stats[s].tau;
                    terms.push_back({&stats[s], &result.posteriors[s].w0});
                }
                ctmc::RateMatrix q_cand = floored_q(agg, config.q_floor);
                if (q_part(q_cand, terms) >= q_part(result.q_by_group[g], terms))
                    result.q_by_group[g] = q_cand;
            }
        }
    }
    return result;
}

std::vector<std::vector<std::pair<int, int>>> edge_set(const ThetaTensor& theta,
                                                       double eps) {
    if (eps < 0.0) throw ValueError("edge_set: eps must be >= 0");
    std::vector<std::vector<std::pair<int, int>>> edges(theta.k());
    for (int l = 0; l < theta.k(); ++l)
        for (int i = 0; i < theta.p(); ++i)
            for (int j = 0; j < theta.p(); ++j)
                if (theta.block_norm(l, i, j) > eps) edges[l].emplace_back(i, j);
    return edges;
}

}  // namespace switchode::emfit
