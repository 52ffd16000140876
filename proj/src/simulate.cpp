#include "switchode/simulate.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "switchode/errors.hpp"
#include "switchode/rng.hpp"

namespace switchode::simulate {

namespace {

// Stacked feature vector (g(x_1), ..., g(x_p)) of length p*m.
void features_into(const BasisFamily& basis, const Eigen::VectorXd& x, Eigen::VectorXd& out) {
    const int p = static_cast<int>(x.size());
    for (int j = 0; j < p; ++j) basis.eval_into(x[j], out.data() + j * basis.m);
}

}  // namespace

Eigen::VectorXd AdditiveODEModel::drift(const Eigen::VectorXd& x, int l) const {
    if (x.size() != p()) throw ValueError("drift: state dimension mismatch");
    Eigen::VectorXd g(p() * m());
    features_into(basis, x, g);
    return theta.state(l) * g;
}

Eigen::VectorXd SwitchingTrajectory::value_at(double t) const {
    if (t <= 0.0) return x.row(0);
    if (t >= T) return x.row(x.rows() - 1);
    double pos = t / dt;
    auto g = static_cast<Eigen::Index>(pos);
    if (g >= x.rows() - 1) g = x.rows() - 2;
    double w = pos - static_cast<double>(g);
    return x.row(g) * (1.0 - w) + x.row(g + 1) * w;
}

namespace {

void rk4_step(const AdditiveODEModel& model, int l, double dt, Eigen::VectorXd& x,
              Eigen::VectorXd& k1, Eigen::VectorXd& k2, Eigen::VectorXd& k3,
              Eigen::VectorXd& k4) {
    k1 = model.drift(x, l);
    k2 = model.drift(x + 0.5 * dt * k1, l);
    k3 = model.drift(x + 0.5 * dt * k2, l);
    k4 = model.drift(x + dt * k3, l);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

SwitchingTrajectory integrate(const AdditiveODEModel& model, const ctmc::PathSample& path,
                              const Eigen::VectorXd& x0, double dt_fine, double guard) {
    if (x0.size() != model.p()) throw ValueError("integrate: x0 dimension mismatch");
    if (!(dt_fine > 0.0)) throw ValueError("integrate: dt_fine must be positive");
    const double T = path.T;
    const auto grid = static_cast<Eigen::Index>(std::max(1.0, std::round(T / dt_fine)));
    const double dt = T / static_cast<double>(grid);

    SwitchingTrajectory traj;
    traj.T = T;
    traj.dt = dt;
    traj.path = path;
    traj.x.resize(grid + 1, model.p());
    traj.x.row(0) = x0;

    Eigen::VectorXd x = x0, k1, k2, k3, k4;
    std::size_t next_jump = 1;  // jump_times[0] == 0 marks the initial state
    for (Eigen::Index g = 0; g < grid; ++g) {
        const double a = static_cast<double>(g) * dt;
        const double b = static_cast<double>(g + 1) * dt;
        double lo = a;
        while (next_jump < path.jump_times.size() && path.jump_times[next_jump] < b) {
            const double s = path.jump_times[next_jump];
            if (s > lo) {
                int l = path.state_at(0.5 * (lo + s));
                rk4_step(model, l, s - lo, x, k1, k2, k3, k4);
                lo = s;
            }
            ++next_jump;
        }
        if (b > lo) {
            int l = path.state_at(0.5 * (lo + b));
            rk4_step(model, l, b - lo, x, k1, k2, k3, k4);
        }
        if (!x.allFinite() || x.cwiseAbs().maxCoeff() > guard)
            throw DivergenceError("trajectory escaped the guard bound near t = " +
                                  std::to_string(b));
        traj.x.row(g + 1) = x;
    }
    return traj;
}

ObservationSet observe(const SwitchingTrajectory& traj, int N, double sigma,
                       std::uint64_t seed) {
    if (N < 1) throw ValueError("observe: N must be >= 1");
    if (sigma < 0.0) throw ValueError("observe: sigma must be >= 0");
    const int p = static_cast<int>(traj.x.cols());
    ObservationSet obs;
    obs.h = traj.T / N;
    obs.sigma_true = sigma;
    obs.y.resize(N + 1, p);
    Rng rng(seed);
    for (int n = 0; n <= N; ++n) {
        Eigen::VectorXd row = traj.value_at(n * obs.h);
        for (int i = 0; i < p; ++i) row[i] += sigma * rng.normal();
        obs.y.row(n) = row;
    }
    return obs;
}

GroundTruth dgp1() {
    const int p = 10, m = 3;
    ThetaTensor theta(2, p, m);
    auto set = [&](int l, int i, int j, double a, double b, double c) {
        theta.block(l, i - 1, j - 1) << a, b, c;  // 1-indexed node labels
    };
    // State 1: active pairs (1,2), (3,4), (5,6).
    set(0, 1, 1, 1.2, 0.3, -0.6);
    set(0, 1, 2, 0.1, 0.2, 0.2);
    set(0, 2, 1, -2.0, 0.0, 0.4);
    set(0, 2, 2, 0.5, 0.2, -0.3);
    set(0, 3, 4, -0.3, 0.4, 0.1);
    set(0, 4, 3, 0.2, -0.1, -0.2);
    set(0, 5, 6, 0.1, 0.0, -0.8);
    set(0, 6, 5, 0.0, 0.0, 0.5);
    // State 2: the same motifs shifted four nodes down, to (5,6), (7,8), (9,10).
    set(1, 5, 5, 1.2, 0.3, -0.6);
    set(1, 5, 6, 0.1, 0.2, 0.2);
    set(1, 6, 5, -2.0, 0.0, 0.4);
    set(1, 6, 6, 0.5, 0.2, -0.3);
    set(1, 7, 8, -0.3, 0.4, 0.1);
    set(1, 8, 7, 0.2, -0.1, -0.2);
    set(1, 9, 10, 0.1, 0.0, -0.8);
    set(1, 10, 9, 0.0, 0.0, 0.5);

    Eigen::MatrixXd q(2, 2);
    q << -0.27, 0.27, 0.18, -0.18;

    Eigen::VectorXd x0(p);
    x0 << -2, 2, 2, -2, -1.5, 1.5, -1, 1, 1, -1;

    return GroundTruth{AdditiveODEModel(std::move(theta), BasisFamily(m)),
                       ctmc::RateMatrix::make(q), 0.01, std::move(x0)};
}

GroundTruth dgp2() {
    const int p = 20, m = 1;
    const double w = 0.8 * std::numbers::pi;
    ThetaTensor theta(2, p, m);
    // State 1: four stars with hubs 0, 5, 10, 15; leaves pull toward the hub,
    // the hub is excited by its leaves.
    for (int hub = 0; hub < p; hub += 5) {
        for (int r = 1; r <= 4; ++r) {
            theta.block(0, hub + r, hub)[0] = -w;
            theta.block(0, hub, hub + r)[0] = w;
        }
    }
    // State 2: directed ring over all 20 nodes.
    for (int i = 0; i < p; ++i) {
        theta.block(1, i, (i + 1) % p)[0] = w;
        theta.block(1, i, (i + p - 1) % p)[0] = -w;
    }

    Eigen::MatrixXd q(2, 2);
    q << -0.27, 0.27, 0.18, -0.18;

    Eigen::VectorXd x0(p);
    for (int i = 0; i < p; ++i) x0[i] = (i % 2 == 0) ? 1.0 : -1.0;

    return GroundTruth{AdditiveODEModel(std::move(theta), BasisFamily(m)),
                       ctmc::RateMatrix::make(q), 0.01, std::move(x0)};
}

}  // namespace switchode::simulate
