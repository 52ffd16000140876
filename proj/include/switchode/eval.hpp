#pragma once

// Evaluation of fitted models against ground truth: state matching by
// exhaustive permutation search, parameter distances, ROC/AUC along a lambda
// path, and per-group dwell-time summaries.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "switchode/emfit.hpp"
#include "switchode/model.hpp"

namespace switchode::eval {

// xi maps true state index -> estimated state index.
struct StateMatch {
    std::vector<int> xi1;  // minimizes the theta block-norm mismatch
    std::vector<int> xi2;  // minimizes the off-diagonal rate mismatch
    bool consistent = false;
};

// Exhaustive search over all k! permutations; requires k <= 8. Ties broken
// by lexicographic permutation order.
StateMatch match_states(const ModelParams& est, const ModelParams& truth);

struct ParamDistance {
    double d_theta = 0.0;  // sum over states and rows of theta row differences
    double d_q = 0.0;      // sum of absolute off-diagonal rate differences
    double d_sigma = 0.0;
    double total = 0.0;
};

ParamDistance param_distance(const ModelParams& est, const ModelParams& truth,
                             const std::vector<int>& xi);

struct RocPoint {
    double lambda = 0.0;
    Eigen::VectorXd tpr;  // per true state
    Eigen::VectorXd fpr;
};

struct RocResult {
    std::vector<RocPoint> points;  // eligible path entries in path order
    Eigen::VectorXd auc;           // per true state, trapezoid with (0,0),(1,1)
    int dropped = 0;               // entries dropped for inconsistent matching
};

// Edge detection at threshold epsilon_t on the estimates; truth edges are the
// exact nonzero blocks. FPR denominator is p^2 - |E| (self-loops count).
RocResult roc_auc(const std::vector<emfit::FitResult>& path, const ModelParams& truth,
                  double epsilon_t);

// Mean over each group's members of the expected per-state dwell time under
// the fitted posterior; rows indexed by group, columns by state.
Eigen::MatrixXd dwell_times(const std::vector<emfit::GroupedSeries>& members,
                            const emfit::GroupedFitResult& fit);

// "0.96(0.006)" style summary of replicate values.
std::string format_mean_sd(const std::vector<double>& values, int mean_digits = 2,
                           int sd_digits = 3);

}  // namespace switchode::eval
