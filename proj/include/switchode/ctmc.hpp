#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

namespace switchode::ctmc {

// Conservative generator of a finite continuous-time Markov chain.
// Invariants: square, off-diagonal entries >= 0, row sums 0 (tolerance 1e-12).
// Irreducibility (strong connectivity of the positive-rate graph) is enforced
// by default; relaxed construction is available for raw M-step outputs, which
// callers must check via is_irreducible() before using as a chain.
class RateMatrix {
  public:
    // Empty placeholder (k = 0); only assignment and k() are meaningful.
    RateMatrix() : irreducible_(false) {}

    static RateMatrix make(const Eigen::MatrixXd& q, bool require_irreducible = true);

    int k() const { return static_cast<int>(q_.rows()); }
    const Eigen::MatrixXd& q() const { return q_; }
    double operator()(int i, int j) const { return q_(i, j); }

    // Total exit rate -q_{ll} of a state.
    double exit_rate(int l) const { return -q_(l, l); }

    bool is_irreducible() const { return irreducible_; }

  private:
    RateMatrix(Eigen::MatrixXd q, bool irreducible)
        : q_(std::move(q)), irreducible_(irreducible) {}
    Eigen::MatrixXd q_;
    bool irreducible_;
};

// Stochastic matrix exp(Q h) together with the step h it was built for.
// Invariants: entries in [0, 1] (clamped from round-off), rows sum to 1
// within 1e-12.
struct TransitionMatrix {
    Eigen::MatrixXd p;
    double h = 0.0;

    double operator()(int i, int j) const { return p(i, j); }
};

// Piecewise-constant latent path on [0, T]. states[i] holds on
// [jump_times[i], jump_times[i+1]) and states.back() holds to T.
// Invariants: jump_times strictly increasing, jump_times.front() == 0,
// jump_times.back() <= T, consecutive states differ.
struct PathSample {
    double T = 0.0;
    std::vector<double> jump_times;
    std::vector<int> states;

    int state_at(double t) const;
    // Time spent in each state over [0, T].
    Eigen::VectorXd occupation() const;
    int num_jumps() const { return static_cast<int>(states.size()) - 1; }
};

// Unique distribution pi with pi^T Q = 0, sum(pi) = 1. Requires an
// irreducible generator; entries are strictly positive.
Eigen::VectorXd stationary_distribution(const RateMatrix& q);

// exp(Q h) for h >= 0.
TransitionMatrix transition_matrix(const RateMatrix& q, double h);

// Matrix with (i, j) entry  integral_0^h P_{i l}(u) P_{lp j}(h - u) du,
// computed as the upper-right block of exp([[Q, E_{l lp}], [0, Q]] h).
Eigen::MatrixXd van_loan_integral(const RateMatrix& q, double h, int l, int lp);

// E[time spent in state l over (0, h) | Z(0) = i, Z(h) = j].
double expected_dwell(const RateMatrix& q, double h, int i, int j, int l);

// E[number of l -> lp jumps over (0, h) | Z(0) = i, Z(h) = j]; requires l != lp.
double expected_transitions(const RateMatrix& q, double h, int i, int j, int l, int lp);

// Endpoint-conditioned expectations for all endpoint pairs at once: entry
// (i, j) equals expected_dwell(q, h, i, j, l) resp. expected_transitions.
// Cells whose endpoint probability P_{ij}(h) underflows are set to 0; the
// scalar entry points throw NullEventError instead.
Eigen::MatrixXd expected_dwell_matrix(const RateMatrix& q, double h, int l);
Eigen::MatrixXd expected_transitions_matrix(const RateMatrix& q, double h, int l, int lp);

// Gillespie sampling of a trajectory on [0, T]. The initial state is drawn
// from the stationary distribution when `initial` is empty.
PathSample sample_path(const RateMatrix& q, double T, std::optional<int> initial,
                       std::uint64_t seed);

// Detailed balance pi_i q_{ij} == pi_j q_{ji} for all pairs, within tol.
bool check_reversibility(const RateMatrix& q, double tol = 1e-10);

}  // namespace switchode::ctmc
