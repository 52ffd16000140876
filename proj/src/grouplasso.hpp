#pragma once

// Internal stacked-segment group-lasso machinery shared by the single-series
// and grouped M-steps. Not part of the installed interface.

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "switchode/emfit.hpp"
#include "switchode/model.hpp"

namespace switchode::emfit::internal {

// Runs body(0..jobs-1) striped across at most `threads` std::threads.
// Exceptions inside jobs are collected and the first one rethrown.
void run_chunked(std::size_t jobs, int threads,
                 const std::function<void(std::size_t)>& body);

// One regression segment: increments dy (N_s x p), features psi (N_s x p*m),
// posterior weights w (N_s x k). Pointers are non-owning.
struct Segment {
    const Eigen::MatrixXd* dy;
    const Eigen::MatrixXd* psi;
    const Eigen::MatrixXd* w;
};

struct Stacked {
    std::vector<Segment> segments;
    int p = 0;
    int m = 0;
    int k = 0;

    Eigen::Index total_n() const {
        Eigen::Index n = 0;
        for (const auto& s : segments) n += s.dy->rows();
        return n;
    }
};

// Cholesky factors of the per-block metrics Khat_j = (1/N) sum psi_j psi_j^T,
// ridge-regularized when numerically singular.
struct BlockMetric {
    std::vector<Eigen::MatrixXd> chol_lower;  // p factors, m x m
    bool ridged = false;
};
BlockMetric block_metrics(const Stacked& data, double ridge);

ThetaTensor solve_theta(const Stacked& data, double sigma2, double lambda,
                        const ThetaTensor& theta_init, const ThetaOptions& options);

// sum over segments and (n, l, i) of w res^2.
double weighted_rss(const Stacked& data, const ThetaTensor& theta);

double group_penalty_metric(const BlockMetric& metric, const ThetaTensor& theta);

KktReport kkt_residuals(const Stacked& data, double sigma2, double lambda,
                        const ThetaTensor& theta);

}  // namespace switchode::emfit::internal
