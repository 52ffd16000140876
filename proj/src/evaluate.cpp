#include "switchode/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "switchode/errors.hpp"

namespace switchode::eval {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double theta_mismatch(const ModelParams& est, const ModelParams& truth,
                      const std::vector<int>& xi) {
    double cost = 0.0;
    const int p = truth.p(), m = truth.m();
    for (int l = 0; l < truth.k(); ++l) {
        const MatrixXd& a = est.theta.state(xi[l]);
        const MatrixXd& b = truth.theta.state(l);
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j)
                cost += (a.row(i).segment(j * m, m) - b.row(i).segment(j * m, m)).norm();
    }
    return cost;
}

double q_mismatch(const ModelParams& est, const ModelParams& truth,
                  const std::vector<int>& xi) {
    double cost = 0.0;
    const int k = truth.k();
    for (int l = 0; l < k; ++l)
        for (int lp = 0; lp < k; ++lp)
            if (lp != l)
                cost += std::abs(est.q.q()(xi[l], xi[lp]) - truth.q.q()(l, lp));
    return cost;
}

void check_shapes(const ModelParams& est, const ModelParams& truth) {
    if (est.k() != truth.k()) throw ValueError("state counts differ");
    if (est.p() != truth.p() || est.m() != truth.m())
        throw ValueError("theta shapes differ");
}

}  // namespace

StateMatch match_states(const ModelParams& est, const ModelParams& truth) {
    check_shapes(est, truth);
    const int k = truth.k();
    if (k > 8) throw ValueError("match_states: exhaustive search supports k <= 8");

    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    StateMatch match;
    double best1 = std::numeric_limits<double>::infinity();
    double best2 = std::numeric_limits<double>::infinity();
    do {
        double c1 = theta_mismatch(est, truth, perm);
        if (c1 < best1) {
            best1 = c1;
            match.xi1 = perm;
        }
        double c2 = q_mismatch(est, truth, perm);
        if (c2 < best2) {
            best2 = c2;
            match.xi2 = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    match.consistent = match.xi1 == match.xi2;
    return match;
}

ParamDistance param_distance(const ModelParams& est, const ModelParams& truth,
                             const std::vector<int>& xi) {
    check_shapes(est, truth);
    const int k = truth.k();
    if (static_cast<int>(xi.size()) != k) throw ValueError("param_distance: xi size");
    std::vector<bool> seen(k, false);
    for (int v : xi) {
        if (v < 0 || v >= k || seen[v]) throw ValueError("param_distance: xi not a permutation");
        seen[v] = true;
    }

    ParamDistance d;
    for (int l = 0; l < k; ++l) {
        const MatrixXd& a = est.theta.state(xi[l]);
        const MatrixXd& b = truth.theta.state(l);
        for (int i = 0; i < truth.p(); ++i) d.d_theta += (a.row(i) - b.row(i)).norm();
    }
    d.d_q = q_mismatch(est, truth, xi);
    d.d_sigma = std::abs(est.sigma2 - truth.sigma2);
    d.total = d.d_theta + d.d_q + d.d_sigma;
    return d;
}

RocResult roc_auc(const std::vector<emfit::FitResult>& path, const ModelParams& truth,
                  double epsilon_t) {
    if (path.empty()) throw ValueError("roc_auc: empty path");
    if (epsilon_t < 0.0) throw ValueError("roc_auc: epsilon_t must be >= 0");
    const int k = truth.k(), p = truth.p();

    std::vector<MatrixXd> true_edge(k);
    std::vector<int> n_true(k);
    for (int l = 0; l < k; ++l) {
        true_edge[l] = MatrixXd::Zero(p, p);
        int count = 0;
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j)
                if (truth.theta.block_norm(l, i, j) > 0.0) {
                    true_edge[l](i, j) = 1.0;
                    ++count;
                }
        n_true[l] = count;
        if (count == 0 || count == p * p)
            throw ValueError("roc_auc: true edge set of state " + std::to_string(l) +
                             " is degenerate");
    }

    RocResult result;
    for (const auto& fit : path) {
        StateMatch match = match_states(fit.params, truth);
        if (!match.consistent) {
            ++result.dropped;
            continue;
        }
        RocPoint pt;
        pt.lambda = fit.lambda;
        pt.tpr.resize(k);
        pt.fpr.resize(k);
        for (int l = 0; l < k; ++l) {
            int tp = 0, fp = 0;
            for (int i = 0; i < p; ++i)
                for (int j = 0; j < p; ++j) {
                    bool est_on =
                        fit.params.theta.block_norm(match.xi1[l], i, j) > epsilon_t;
                    if (!est_on) continue;
                    if (true_edge[l](i, j) > 0.0)
                        ++tp;
                    else
                        ++fp;
                }
            pt.tpr[l] = static_cast<double>(tp) / n_true[l];
            pt.fpr[l] = static_cast<double>(fp) / (p * p - n_true[l]);
        }
        result.points.push_back(std::move(pt));
    }
    if (result.points.empty())
        throw DataError("roc_auc: no eligible points (every entry had inconsistent "
                        "state matching)");

    result.auc.resize(k);
    for (int l = 0; l < k; ++l) {
        std::vector<std::pair<double, double>> pts;
        pts.reserve(result.points.size() + 2);
        pts.emplace_back(0.0, 0.0);
        for (const auto& pt : result.points) pts.emplace_back(pt.fpr[l], pt.tpr[l]);
        pts.emplace_back(1.0, 1.0);
        std::sort(pts.begin(), pts.end());
        double auc = 0.0;
        for (std::size_t i = 1; i < pts.size(); ++i)
            auc += (pts[i].first - pts[i - 1].first) * (pts[i].second + pts[i - 1].second) *
                   0.5;
        result.auc[l] = auc;
    }
    return result;
}

Eigen::MatrixXd dwell_times(const std::vector<emfit::GroupedSeries>& members,
                            const emfit::GroupedFitResult& fit) {
    if (members.empty()) throw ValueError("dwell_times: no members");
    if (fit.posteriors.size() != members.size())
        throw ValueError("dwell_times: fit does not cover the member list");
    const int n_groups = static_cast<int>(fit.q_by_group.size());
    const int k = fit.theta.k();

    MatrixXd sums = MatrixXd::Zero(n_groups, k);
    VectorXd counts = VectorXd::Zero(n_groups);
    for (std::size_t s = 0; s < members.size(); ++s) {
        int g = members[s].group;
        if (g < 0 || g >= n_groups) throw ValueError("dwell_times: group label out of range");
        emfit::CtmcStats stats = emfit::e_step_statistics(
            fit.posteriors[s], fit.q_by_group[g], members[s].y.h);
        sums.row(g) += stats.tau.transpose();
        counts[g] += 1.0;
    }
    for (int g = 0; g < n_groups; ++g) {
        if (counts[g] == 0.0) throw ValueError("dwell_times: empty group");
        sums.row(g) /= counts[g];
    }
    return sums;
}

std::string format_mean_sd(const std::vector<double>& values, int mean_digits,
                           int sd_digits) {
    if (values.empty()) throw ValueError("format_mean_sd: no values");
    double mean = std::accumulate(values.begin(), values.end(), 0.0) /
                  static_cast<double>(values.size());
    double sd = 0.0;
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - mean) * (v - mean);
        sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f(%.*f)", mean_digits, mean, sd_digits, sd);
    return buf;
}

}  // namespace switchode::eval
