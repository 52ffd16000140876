#include "switchode/ctmc.hpp"

#include <algorithm>
#include <cmath>

#include "switchode/errors.hpp"
#include "switchode/matexp.hpp"
#include "switchode/rng.hpp"

namespace switchode::ctmc {

namespace {

constexpr double kRowSumTol = 1e-12;
constexpr double kNullEventFloor = 1e-300;

// Reachability over the positive off-diagonal rate graph.
std::vector<bool> reachable_from(const Eigen::MatrixXd& q, int start, bool transpose) {
    const int k = static_cast<int>(q.rows());
    std::vector<bool> seen(k, false);
    std::vector<int> stack{start};
    seen[start] = true;
    while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        for (int v = 0; v < k; ++v) {
            double rate = transpose ? q(v, u) : q(u, v);
            if (u != v && rate > 0.0 && !seen[v]) {
                seen[v] = true;
                stack.push_back(v);
            }
        }
    }
    return seen;
}

bool strongly_connected(const Eigen::MatrixXd& q) {
    const int k = static_cast<int>(q.rows());
    if (k <= 1) return true;
    auto fwd = reachable_from(q, 0, false);
    auto bwd = reachable_from(q, 0, true);
    for (int v = 0; v < k; ++v)
        if (!fwd[v] || !bwd[v]) return false;
    return true;
}

}  // namespace

RateMatrix RateMatrix::make(const Eigen::MatrixXd& q, bool require_irreducible) {
    if (q.rows() != q.cols() || q.rows() == 0)
        throw InvalidRateMatrix("rate matrix must be square and non-empty");
    if (!q.allFinite()) throw InvalidRateMatrix("rate matrix has non-finite entries");
    const int k = static_cast<int>(q.rows());
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j)
            if (i != j && q(i, j) < 0.0)
                throw InvalidRateMatrix("negative off-diagonal rate at (" +
                                        std::to_string(i) + "," + std::to_string(j) + ")");
        double scale = std::max(1.0, q.row(i).cwiseAbs().maxCoeff());
        if (std::abs(q.row(i).sum()) > kRowSumTol * scale)
            throw InvalidRateMatrix("row " + std::to_string(i) + " does not sum to zero");
    }
    bool irreducible = strongly_connected(q);
    if (require_irreducible && !irreducible)
        throw IrreducibilityError("rate matrix is not irreducible");
    return RateMatrix(q, irreducible);
}

int PathSample::state_at(double t) const {
    auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
    auto idx = static_cast<std::size_t>(it - jump_times.begin());
    if (idx == 0) return states.front();
    return states[idx - 1];
}

Eigen::VectorXd PathSample::occupation() const {
    int k = *std::max_element(states.begin(), states.end()) + 1;
    Eigen::VectorXd occ = Eigen::VectorXd::Zero(k);
    for (std::size_t i = 0; i < states.size(); ++i) {
        double end = (i + 1 < jump_times.size()) ? jump_times[i + 1] : T;
        occ[states[i]] += end - jump_times[i];
    }
    return occ;
}

Eigen::VectorXd stationary_distribution(const RateMatrix& q) {
    if (!q.is_irreducible())
        throw IrreducibilityError("stationary distribution requires an irreducible generator");
    const int k = q.k();
    if (k == 1) return Eigen::VectorXd::Ones(1);
    // pi^T Q = 0 with the normalization replacing the last (redundant) equation.
    Eigen::MatrixXd a = q.q().transpose();
    a.row(k - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
    b[k - 1] = 1.0;
    Eigen::VectorXd pi = a.fullPivLu().solve(b);
    if (!pi.allFinite() || pi.minCoeff() <= 0.0)
        throw NumericalError("stationary distribution solve failed");
    pi /= pi.sum();
    return pi;
}

TransitionMatrix transition_matrix(const RateMatrix& q, double h) {
    if (!(h >= 0.0)) throw ValueError("transition_matrix: h must be >= 0");
    Eigen::MatrixXd p = matexp(q.q() * h);
    // Round-off can leave entries marginally outside [0, 1]; clamp and keep
    // rows normalized.
    p = p.cwiseMax(0.0).cwiseMin(1.0);
    for (int i = 0; i < p.rows(); ++i) p.row(i) /= p.row(i).sum();
    return TransitionMatrix{std::move(p), h};
}

Eigen::MatrixXd van_loan_integral(const RateMatrix& q, double h, int l, int lp) {
    const int k = q.k();
    if (l < 0 || l >= k || lp < 0 || lp >= k)
        throw ValueError("van_loan_integral: state index out of range");
    if (!(h >= 0.0)) throw ValueError("van_loan_integral: h must be >= 0");
    Eigen::MatrixXd block = Eigen::MatrixXd::Zero(2 * k, 2 * k);
    block.topLeftCorner(k, k) = q.q();
    block.bottomRightCorner(k, k) = q.q();
    block(l, k + lp) = 1.0;
    Eigen::MatrixXd e = matexp(block * h);
    return e.topRightCorner(k, k);
}

namespace {

Eigen::MatrixXd conditional_matrix(const RateMatrix& q, double h, int l, int lp,
                                   const double* scale_opt) {
    Eigen::MatrixXd num = van_loan_integral(q, h, l, lp);
    TransitionMatrix p = transition_matrix(q, h);
    const int k = q.k();
    Eigen::MatrixXd out(k, k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            out(i, j) = (p(i, j) < kNullEventFloor)
                            ? 0.0
                            : (scale_opt ? *scale_opt : 1.0) * num(i, j) / p(i, j);
    return out;
}

}  // namespace

Eigen::MatrixXd expected_dwell_matrix(const RateMatrix& q, double h, int l) {
    return conditional_matrix(q, h, l, l, nullptr);
}

Eigen::MatrixXd expected_transitions_matrix(const RateMatrix& q, double h, int l, int lp) {
    if (l == lp) throw ValueError("expected_transitions: l and lp must differ");
    double rate = q(l, lp);
    return conditional_matrix(q, h, l, lp, &rate);
}

double expected_dwell(const RateMatrix& q, double h, int i, int j, int l) {
    const int k = q.k();
    if (i < 0 || i >= k || j < 0 || j >= k || l < 0 || l >= k)
        throw ValueError("expected_dwell: state index out of range");
    TransitionMatrix p = transition_matrix(q, h);
    if (p(i, j) < kNullEventFloor)
        throw NullEventError("expected_dwell: endpoint pair has zero probability");
    return van_loan_integral(q, h, l, l)(i, j) / p(i, j);
}

double expected_transitions(const RateMatrix& q, double h, int i, int j, int l, int lp) {
    const int k = q.k();
    if (i < 0 || i >= k || j < 0 || j >= k || l < 0 || l >= k || lp < 0 || lp >= k)
        throw ValueError("expected_transitions: state index out of range");
    if (l == lp) throw ValueError("expected_transitions: l and lp must differ");
    TransitionMatrix p = transition_matrix(q, h);
    if (p(i, j) < kNullEventFloor)
        throw NullEventError("expected_transitions: endpoint pair has zero probability");
    return q(l, lp) * van_loan_integral(q, h, l, lp)(i, j) / p(i, j);
}

PathSample sample_path(const RateMatrix& q, double T, std::optional<int> initial,
                       std::uint64_t seed) {
    if (!(T > 0.0)) throw ValueError("sample_path: T must be positive");
    const int k = q.k();
    Rng rng(seed);
    int z;
    if (initial.has_value()) {
        z = *initial;
        if (z < 0 || z >= k) throw ValueError("sample_path: initial state out of range");
    } else {
        Eigen::VectorXd pi = stationary_distribution(q);
        double u = rng.uniform();
        z = k - 1;
        double acc = 0.0;
        for (int s = 0; s < k; ++s) {
            acc += pi[s];
            if (u < acc) {
                z = s;
                break;
            }
        }
    }

    PathSample path;
    path.T = T;
    path.jump_times.push_back(0.0);
    path.states.push_back(z);
    double t = 0.0;
    for (;;) {
        double rate = q.exit_rate(z);
        if (rate <= 0.0) break;
        t += rng.exponential(rate);
        if (t >= T) break;
        double u = rng.uniform() * rate;
        int next = -1;
        double acc = 0.0;
        for (int s = 0; s < k; ++s) {
            if (s == z) continue;
            acc += q(z, s);
            if (u < acc) {
                next = s;
                break;
            }
        }
        if (next < 0) {
            // Round-off pushed u past the accumulated mass; take the last
            // positive-rate state.
            for (int s = k - 1; s >= 0; --s)
                if (s != z && q(z, s) > 0.0) {
                    next = s;
                    break;
                }
        }
        z = next;
        path.jump_times.push_back(t);
        path.states.push_back(z);
    }
    return path;
}

bool check_reversibility(const RateMatrix& q, double tol) {
    Eigen::VectorXd pi = stationary_distribution(q);
    const int k = q.k();
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j)
            if (std::abs(pi[i] * q(i, j) - pi[j] * q(j, i)) > tol) return false;
    return true;
}

}  // namespace switchode::ctmc
