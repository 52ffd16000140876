#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>

#include "switchode/basis.hpp"
#include "switchode/ctmc.hpp"
#include "switchode/model.hpp"

namespace switchode::simulate {

// Additive drift: dx_i/dt = sum_j theta_{ij}^l . g(x_j) under latent state l.
struct AdditiveODEModel {
    ThetaTensor theta;
    BasisFamily basis;

    AdditiveODEModel(ThetaTensor theta_, BasisFamily basis_)
        : theta(std::move(theta_)), basis(basis_) {
        if (basis.m != theta.m()) throw ValueError("basis size and theta m differ");
    }

    int k() const { return theta.k(); }
    int p() const { return theta.p(); }
    int m() const { return theta.m(); }

    Eigen::VectorXd drift(const Eigen::VectorXd& x, int l) const;
};

// Continuous trajectory stored on a uniform fine grid; x.row(g) is the state
// at time g * dt, with x.rows() == G + 1 and G * dt == T.
struct SwitchingTrajectory {
    double T = 0.0;
    double dt = 0.0;
    Eigen::MatrixXd x;
    ctmc::PathSample path;

    int grid_size() const { return static_cast<int>(x.rows()) - 1; }
    // Linear interpolation between grid points; t clamped to [0, T].
    Eigen::VectorXd value_at(double t) const;
};

// Noisy samples y.row(n) = X(n h) + sigma * eps_n, n = 0..N, with h = T / N.
struct ObservationSet {
    Eigen::MatrixXd y;
    double h = 0.0;
    std::optional<double> sigma_true;

    int n() const { return static_cast<int>(y.rows()) - 1; }
    int p() const { return static_cast<int>(y.cols()); }
    double T() const { return n() * h; }
};

// Classic RK4 on the fine grid with sub-steps aligned to the latent jump
// times, so every RK4 stage sees a constant latent state. Throws
// DivergenceError when the sup norm of the state exceeds `guard`.
SwitchingTrajectory integrate(const AdditiveODEModel& model, const ctmc::PathSample& path,
                              const Eigen::VectorXd& x0, double dt_fine,
                              double guard = 1e6);

ObservationSet observe(const SwitchingTrajectory& traj, int N, double sigma,
                       std::uint64_t seed);

// Ground-truth bundle for the simulation studies.
struct GroundTruth {
    AdditiveODEModel model;
    ctmc::RateMatrix q;
    double sigma_star;
    Eigen::VectorXd x0;

    ModelParams params() const {
        return ModelParams(q, model.theta, sigma_star * sigma_star);
    }
};

// Two-state network of 10 nodes with cubic drift basis (m = 3): self-exciting
// pairs whose location shifts between the states.
GroundTruth dgp1();
// Two-state network of 20 nodes with linear drift (m = 1): four hub stars in
// one state, a directed ring in the other.
GroundTruth dgp2();

}  // namespace switchode::simulate
