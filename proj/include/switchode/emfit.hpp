#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "switchode/ctmc.hpp"
#include "switchode/denoise.hpp"
#include "switchode/model.hpp"
#include "switchode/simulate.hpp"

namespace switchode::emfit {

using simulate::ObservationSet;
using denoise::PsiFeatures;

// Smoothed latent posterior. w.row(n-1) is P(Z(t_n) = . | Y) for n = 1..N;
// pair[n-1] is the joint of (Z(t_{n-1}), Z(t_n)) given Y; w0 is the marginal
// of Z(t_0); loglik = log P(Y_1..Y_N | Y_0). Rows of w and every pair slice
// sum to one.
struct Posterior {
    Eigen::MatrixXd w;
    std::vector<Eigen::MatrixXd> pair;
    Eigen::VectorXd w0;
    double loglik = 0.0;

    int n() const { return static_cast<int>(w.rows()); }
    int k() const { return static_cast<int>(w.cols()); }
};

// log N(y_n - y_{n-1}; theta^l psi_n, 2 sigma^2 I_p) for observation index
// n in [1, N].
double emission_logdensity(const ObservationSet& y, const PsiFeatures& psi,
                           const ModelParams& params, int n, int l);

// Scaled forward-backward pass over Z(t_0)..Z(t_N) with transition exp(Q h),
// initial distribution the stationary law of Q, and increment emissions at
// n = 1..N. Log emissions are max-shifted per step before exponentiation.
Posterior forward_backward(const ObservationSet& y, const PsiFeatures& psi,
                           const ModelParams& params);

// Same marginals computed from a sliding window of half-width r observations
// around each index (exact for r >= N). loglik is still the full-data value.
Posterior truncated_posterior(const ObservationSet& y, const PsiFeatures& psi,
                              const ModelParams& params, int r);

// Expected dwell times and jump counts of the hidden path, aggregated from
// the pairwise posterior via endpoint-conditioned expectations under q.
// tau sums to N h.
struct CtmcStats {
    Eigen::MatrixXd m;    // k x k, zero diagonal
    Eigen::VectorXd tau;  // k
};
CtmcStats e_step_statistics(const Posterior& post, const ctmc::RateMatrix& q, double h);

// Closed-form generator update q_{l l'} = m_{l l'} / tau_l. The result may be
// reducible (check is_irreducible()); a state with tau <= 0 is an error.
ctmc::RateMatrix m_step_q(const CtmcStats& stats);

// Closed-form variance update: sum of posterior-weighted squared residuals
// over (n, l, i) divided by 2 p N.
double m_step_sigma(const ObservationSet& y, const PsiFeatures& psi,
                    const Eigen::MatrixXd& w, const ThetaTensor& theta);

struct ThetaOptions {
    int max_sweeps = 10000;
    double tol = 1e-8;          // sweep convergence: max block change
    int threads = 1;
    double freeze_tol = 1e-8;   // state weight below which theta is frozen
    double ridge = 1e-10;       // regularization for singular feature metrics
};

// Penalized regression update of theta. For every (i, l) it minimizes
//   (1/(4 sigma2)) sum_n w_l(t_n) (dy_{n,i} - theta_i . psi_n)^2
//     + lambda sum_j ||theta_{ij}||_{Khat_j},
// with block metric Khat_j = (1/N) sum_n psi_j(t_n) psi_j(t_n)^T: a weighted
// least-squares solve at lambda = 0, otherwise block coordinate descent with
// exact block minimizers, warm-started at theta_init.
ThetaTensor m_step_theta(const ObservationSet& y, const PsiFeatures& psi,
                         const Eigen::MatrixXd& w, double sigma2, double lambda,
                         const ThetaTensor& theta_init, const ThetaOptions& options = {});

// First-order optimality of the m_step_theta problem. zero_excess is
// max over zero blocks of ||grad||_{Khat^-1} / lambda - 1 (negative when
// strictly interior); stationarity is the largest norm of a stationarity
// residual over active blocks.
struct KktReport {
    double zero_excess = 0.0;
    double stationarity = 0.0;
};
KktReport kkt_residuals(const ObservationSet& y, const PsiFeatures& psi,
                        const Eigen::MatrixXd& w, double sigma2, double lambda,
                        const ThetaTensor& theta);

// sum_{l,i,j} ||theta_{ij}^l||_{Khat_j}.
double group_penalty(const PsiFeatures& psi, const ThetaTensor& theta);

// EM surrogate at params_new under the smoothed posterior posterior_old:
//   sum m log q - q tau - (N p / 2) log(4 pi sigma^2)
//     - (1/(4 sigma^2)) sum w res^2 - lambda (N / (2 sigma^2)) group_penalty.
// The dwell/jump expectations are evaluated under params_new.q.
double penalized_objective(const ObservationSet& y, const PsiFeatures& psi,
                           const ModelParams& params_new, const Posterior& posterior_old,
                           double lambda);

struct FitConfig {
    double lambda = 0.0;
    int max_iter = 500;
    double tol = 1e-6;            // relative change of the penalized objective
    std::optional<int> trunc_r;   // windowed E-step half-width
    int threads = 1;
    double q_floor = 1e-10;       // off-diagonal floor keeping Q irreducible
    double sigma_floor = 1e-12;
    ThetaOptions theta;
};

// trace holds the penalized observed objective (forward-backward log
// likelihood minus the penalty term) once per E-step; it is non-decreasing
// up to round-off for full-posterior fits.
struct FitResult {
    ModelParams params;
    Posterior posterior;
    std::vector<double> trace;
    int iterations = 0;
    bool converged = false;
    double lambda = 0.0;
};

// Random starting point: exit rates uniform on (0, 1), theta entries standard
// normal, sigma^2 = 1.
ModelParams init_params(int k, int p, int m, std::uint64_t seed);

FitResult fit(const ObservationSet& y, const PsiFeatures& psi, const ModelParams& init,
              const FitConfig& config);

// 100 draws of exp(U[-7, -1]), sorted descending.
std::vector<double> default_lambda_grid(std::uint64_t seed, int count = 100);

// Warm-started fits along a descending lambda sequence, starting from
// init_params(k, p, m, seed).
std::vector<FitResult> lambda_path_fit(const ObservationSet& y, const PsiFeatures& psi,
                                       int k, const std::vector<double>& lambdas,
                                       const FitConfig& config, std::uint64_t seed);

// One subject record and its group label for pooled fitting.
struct GroupedSeries {
    ObservationSet y;
    PsiFeatures psi;
    int group = 0;
};

// Pooled EM: theta and sigma^2 shared by all members, one generator per
// group, E-step per member under its group generator.
struct GroupedFitResult {
    ThetaTensor theta;
    double sigma2 = 0.0;
    std::vector<ctmc::RateMatrix> q_by_group;
    std::vector<Posterior> posteriors;  // one per member
    std::vector<double> trace;
    int iterations = 0;
    bool converged = false;
};

GroupedFitResult fit_grouped(const std::vector<GroupedSeries>& members, int k,
                             const ModelParams& init, const FitConfig& config);

// Directed edges (j -> i) per state: pairs (i, j) with ||theta_{ij}^l||_2
// strictly above eps.
std::vector<std::vector<std::pair<int, int>>> edge_set(const ThetaTensor& theta,
                                                       double eps);

}  // namespace switchode::emfit
