#pragma once

#include <Eigen/Dense>
#include <vector>

#include "switchode/ctmc.hpp"
#include "switchode/errors.hpp"

namespace switchode {

// Per-state interaction coefficients theta_{ij}^l in R^m, stored per state as
// a p x (p*m) matrix whose row i is the concatenation over j of theta_{ij}^l.
class ThetaTensor {
  public:
    ThetaTensor() = default;
    ThetaTensor(int k, int p, int m)
        : k_(k), p_(p), m_(m), state_(static_cast<std::size_t>(k)) {
        if (k < 1 || p < 1 || m < 1) throw ValueError("theta dimensions must be positive");
        for (auto& s : state_) s = Eigen::MatrixXd::Zero(p, p * m);
    }

    int k() const { return k_; }
    int p() const { return p_; }
    int m() const { return m_; }

    Eigen::MatrixXd& state(int l) { return state_[check_l(l)]; }
    const Eigen::MatrixXd& state(int l) const { return state_[check_l(l)]; }

    // Coefficient vector theta_{ij}^l of length m. The underlying storage is
    // column-major, so the reference has a non-unit inner stride.
    using BlockRef = Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;
    using ConstBlockRef = Eigen::Ref<const Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;

    BlockRef block(int l, int i, int j) {
        return BlockRef(state_[check_l(l)].row(i).segment(j * m_, m_));
    }
    ConstBlockRef block(int l, int i, int j) const {
        return ConstBlockRef(state_[check_l(l)].row(i).segment(j * m_, m_));
    }

    double block_norm(int l, int i, int j) const { return block(l, i, j).norm(); }

    // Relabel states: result state l is input state perm[l].
    ThetaTensor permute_states(const std::vector<int>& perm) const {
        if (static_cast<int>(perm.size()) != k_) throw ValueError("permutation size mismatch");
        ThetaTensor out(k_, p_, m_);
        for (int l = 0; l < k_; ++l) out.state_[l] = state_[check_l(perm[l])];
        return out;
    }

    bool all_finite() const {
        for (const auto& s : state_)
            if (!s.allFinite()) return false;
        return true;
    }

  private:
    std::size_t check_l(int l) const {
        if (l < 0 || l >= k_) throw ValueError("state index out of range");
        return static_cast<std::size_t>(l);
    }

    int k_ = 0, p_ = 0, m_ = 0;
    std::vector<Eigen::MatrixXd> state_;
};

// Full parameter set of the switching regression model: generator, drift
// coefficients, and observation-increment noise variance sigma^2 > 0.
struct ModelParams {
    ctmc::RateMatrix q;
    ThetaTensor theta;
    double sigma2 = 1.0;

    // Empty placeholder (k = 0) so result aggregates are default-constructible.
    ModelParams() = default;

    ModelParams(ctmc::RateMatrix q_, ThetaTensor theta_, double sigma2_)
        : q(std::move(q_)), theta(std::move(theta_)), sigma2(sigma2_) {
        if (q.k() != theta.k()) throw ValueError("generator and theta state counts differ");
        if (!(sigma2 > 0.0)) throw ValueError("sigma2 must be positive");
    }

    int k() const { return theta.k(); }
    int p() const { return theta.p(); }
    int m() const { return theta.m(); }
};

}  // namespace switchode
