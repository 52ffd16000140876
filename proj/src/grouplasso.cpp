#include "grouplasso.hpp"

#include <cmath>
#include <exception>
#include <iostream>
#include <limits>
#include <mutex>
#include <thread>

#include "switchode/errors.hpp"

namespace switchode::emfit::internal {

void run_chunked(std::size_t jobs, int threads,
                 const std::function<void(std::size_t)>& body) {
    if (threads <= 1 || jobs <= 1) {
        for (std::size_t j = 0; j < jobs; ++j) body(j);
        return;
    }
    std::size_t workers = std::min<std::size_t>(threads, jobs);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr first_error;
    std::mutex error_mu;
    for (std::size_t wkr = 0; wkr < workers; ++wkr)
        pool.emplace_back([&, wkr] {
            for (std::size_t j = wkr; j < jobs; j += workers) {
                try {
                    body(j);
                } catch (...) {
                    std::scoped_lock lock(error_mu);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Root of sum c_i^2 / (d_i t + lambda)^2 = 1 over t > 0; exists and is unique
// when ||c|| > lambda and some d_i > 0. Safeguarded Newton on a bracket.
double secular_root(const VectorXd& d, const VectorXd& c, double lambda) {
    auto value = [&](double t) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < d.size(); ++i) {
            double den = d[i] * t + lambda;
            s += c[i] * c[i] / (den * den);
        }
        return s - 1.0;
    };
    auto slope = [&](double t) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < d.size(); ++i) {
            double den = d[i] * t + lambda;
            s -= 2.0 * c[i] * c[i] * d[i] / (den * den * den);
        }
        return s;
    };

    double lo = 0.0, hi = 1.0;
    int grow = 0;
    while (value(hi) > 0.0) {
        lo = hi;
        hi *= 4.0;
        if (++grow > 600) throw NumericalError("group block subproblem is unbounded");
    }
    double t = 0.5 * (lo + hi);
    for (int iter = 0; iter < 200; ++iter) {
        double f = value(t);
        if (f > 0.0)
            lo = t;
        else
            hi = t;
        double g = slope(t);
        double next = (g < 0.0) ? t - f / g : 0.5 * (lo + hi);
        t = (next > lo && next < hi) ? next : 0.5 * (lo + hi);
        if (hi - lo <= 1e-14 * hi) break;
    }
    return t;
}

// argmin 1/2 u^T A u - b^T u + lambda ||u||_2 given the eigensystem of A.
VectorXd block_minimizer(const MatrixXd& vecs, const VectorXd& vals, const VectorXd& b,
                         double lambda) {
    if (b.norm() <= lambda) return VectorXd::Zero(b.size());
    VectorXd c = vecs.transpose() * b;
    double t = secular_root(vals, c, lambda);
    VectorXd u(c.size());
    for (Eigen::Index i = 0; i < c.size(); ++i) u[i] = c[i] * t / (vals[i] * t + lambda);
    return vecs * u;
}

MatrixXd chol_with_ridge(MatrixXd g, double ridge, bool* used_ridge) {
    Eigen::LLT<MatrixXd> llt(g);
    if (llt.info() == Eigen::Success && g.diagonal().minCoeff() > 0.0)
        return llt.matrixL();
    if (used_ridge) *used_ridge = true;
    g.diagonal().array() += ridge;
    Eigen::LLT<MatrixXd> retry(g);
    if (retry.info() != Eigen::Success)
        throw NumericalError("feature metric is not positive definite even after ridge");
    return retry.matrixL();
}

}  // namespace

BlockMetric block_metrics(const Stacked& data, double ridge) {
    const int p = data.p, m = data.m;
    const double n_inv = 1.0 / static_cast<double>(data.total_n());
    BlockMetric metric;
    metric.chol_lower.resize(p);
    for (int j = 0; j < p; ++j) {
        MatrixXd g = MatrixXd::Zero(m, m);
        for (const auto& seg : data.segments) {
            auto block = seg.psi->middleCols(j * m, m);
            g.noalias() += block.transpose() * block;
        }
        g *= n_inv;
        metric.chol_lower[j] = chol_with_ridge(std::move(g), ridge, &metric.ridged);
    }
    return metric;
}

double weighted_rss(const Stacked& data, const ThetaTensor& theta) {
    double rss = 0.0;
    for (const auto& seg : data.segments) {
        for (int l = 0; l < data.k; ++l) {
            MatrixXd resid = *seg.dy - *seg.psi * theta.state(l).transpose();
            rss += (resid.rowwise().squaredNorm().array() * seg.w->col(l).array()).sum();
        }
    }
    return rss;
}

double group_penalty_metric(const BlockMetric& metric, const ThetaTensor& theta) {
    const int p = theta.p(), m = theta.m();
    double pen = 0.0;
    for (int l = 0; l < theta.k(); ++l)
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j)
                pen += (metric.chol_lower[j].transpose() *
                        theta.block(l, i, j).transpose())
                           .norm();
    (void)m;
    return pen;
}

ThetaTensor solve_theta(const Stacked& data, double sigma2, double lambda,
                        const ThetaTensor& theta_init, const ThetaOptions& options) {
    const int p = data.p, m = data.m, k = data.k;
    if (!(sigma2 > 0.0)) throw ValueError("m_step_theta: sigma2 must be positive");
    if (lambda < 0.0) throw ValueError("m_step_theta: lambda must be >= 0");
    const auto total_n = data.total_n();

    // Pooled posterior mass per state; a state with (numerically) no mass
    // keeps its previous coefficients.
    VectorXd state_mass = VectorXd::Zero(k);
    for (const auto& seg : data.segments) state_mass += seg.w->colwise().sum();

    ThetaTensor theta = theta_init;

    if (lambda == 0.0) {
        bool ridged = false;
        for (int l = 0; l < k; ++l) {
            if (state_mass[l] < options.freeze_tol) continue;
            MatrixXd gram = MatrixXd::Zero(p * m, p * m);
            MatrixXd rhs = MatrixXd::Zero(p * m, p);
            for (const auto& seg : data.segments) {
                MatrixXd wpsi = seg.psi->array().colwise() * seg.w->col(l).array();
                gram.noalias() += wpsi.transpose() * *seg.psi;
                rhs.noalias() += wpsi.transpose() * *seg.dy;
            }
            Eigen::LDLT<MatrixXd> ldlt(gram);
            if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
                gram.diagonal().array() += options.ridge;
                ldlt.compute(gram);
                ridged = true;
            }
            theta.state(l) = ldlt.solve(rhs).transpose();
        }
        if (ridged)
            std::cerr << "m_step_theta: singular normal equations, ridge applied\n";
        return theta;
    }

    BlockMetric metric = block_metrics(data, options.ridge);
    if (metric.ridged)
        std::cerr << "m_step_theta: singular feature metric, ridge applied\n";

    // Features rotated so every block penalty is Euclidean: psit_j =
    // psi_j L_j^{-T}, u_j = L_j^T theta_{ij}.
    std::vector<MatrixXd> psit(data.segments.size());
    for (std::size_t s = 0; s < data.segments.size(); ++s) {
        const MatrixXd& psi = *data.segments[s].psi;
        psit[s].resize(psi.rows(), p * m);
        for (int j = 0; j < p; ++j)
            psit[s].middleCols(j * m, m) =
                metric.chol_lower[j]
                    .triangularView<Eigen::Lower>()
                    .solve(psi.middleCols(j * m, m).transpose())
                    .transpose();
    }

    const double c = 1.0 / (2.0 * sigma2);

    // Per (l, j): weighted Gram of rotated features and its eigensystem.
    std::vector<std::vector<MatrixXd>> eigvecs(k, std::vector<MatrixXd>(p));
    std::vector<std::vector<VectorXd>> eigvals(k, std::vector<VectorXd>(p));
    for (int l = 0; l < k; ++l) {
        if (state_mass[l] < options.freeze_tol) continue;
        for (int j = 0; j < p; ++j) {
            MatrixXd a = MatrixXd::Zero(m, m);
            for (std::size_t s = 0; s < data.segments.size(); ++s) {
                auto block = psit[s].middleCols(j * m, m);
                MatrixXd wblock =
                    block.array().colwise() * data.segments[s].w->col(l).array();
                a.noalias() += wblock.transpose() * block;
            }
            Eigen::SelfAdjointEigenSolver<MatrixXd> eig(c * a);
            eigvecs[l][j] = eig.eigenvectors();
            eigvals[l][j] = eig.eigenvalues().cwiseMax(0.0);
        }
    }

    struct Job {
        int l, i;
    };
    std::vector<Job> jobs;
    for (int l = 0; l < k; ++l) {
        if (state_mass[l] < options.freeze_tol) continue;
        for (int i = 0; i < p; ++i) jobs.push_back({l, i});
    }

    std::vector<MatrixXd> u_all(k, MatrixXd::Zero(p, p * m));
    for (const auto& job : jobs)
        for (int j = 0; j < p; ++j)
            u_all[job.l].row(job.i).segment(j * m, m) =
                (metric.chol_lower[j].transpose() *
                 theta.block(job.l, job.i, j).transpose())
                    .transpose();

    auto solve_job = [&](std::size_t idx) {
        const int l = jobs[idx].l, i = jobs[idx].i;
        auto u = u_all[l].row(i);
        // Residuals of this coordinate under the current u, segment by segment.
        std::vector<VectorXd> resid(data.segments.size());
        for (std::size_t s = 0; s < data.segments.size(); ++s)
            resid[s] = data.segments[s].dy->col(i) - psit[s] * u.transpose();

        VectorXd g(m), b(m), u_new(m), delta(m);
        for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
            double max_change = 0.0;
            for (int j = 0; j < p; ++j) {
                g.setZero();
                for (std::size_t s = 0; s < data.segments.size(); ++s) {
                    auto block = psit[s].middleCols(j * m, m);
                    g.noalias() += block.transpose() *
                                   (resid[s].array() *
                                    data.segments[s].w->col(l).array())
                                       .matrix();
                }
                auto u_j = u.segment(j * m, m);
                b = c * g + eigvecs[l][j] *
                                (eigvals[l][j].array() *
                                 (eigvecs[l][j].transpose() * u_j.transpose()).array())
                                    .matrix();
                u_new = block_minimizer(eigvecs[l][j], eigvals[l][j], b, lambda);
                delta = u_new - u_j.transpose();
                double change = delta.cwiseAbs().maxCoeff();
                if (change > 0.0) {
                    for (std::size_t s = 0; s < data.segments.size(); ++s)
                        resid[s].noalias() -= psit[s].middleCols(j * m, m) * delta;
                    u_j = u_new.transpose();
                    if (change > max_change) max_change = change;
                }
            }
            if (max_change < options.tol) break;
        }
    };
    run_chunked(jobs.size(), options.threads, solve_job);

    for (const auto& job : jobs)
        for (int j = 0; j < p; ++j)
            theta.block(job.l, job.i, j) =
                metric.chol_lower[j]
                    .transpose()
                    .triangularView<Eigen::Upper>()
                    .solve(u_all[job.l].row(job.i).segment(j * m, m).transpose())
                    .transpose();

    (void)total_n;
    return theta;
}

KktReport kkt_residuals(const Stacked& data, double sigma2, double lambda,
                        const ThetaTensor& theta) {
    const int p = data.p, m = data.m, k = data.k;
    BlockMetric metric = block_metrics(data, 1e-10);
    const double c = 1.0 / (2.0 * sigma2);

    KktReport report;
    report.zero_excess = -std::numeric_limits<double>::infinity();
    report.stationarity = 0.0;
    bool any_zero = false;

    for (int l = 0; l < k; ++l) {
        for (int i = 0; i < p; ++i) {
            std::vector<VectorXd> resid(data.segments.size());
            for (std::size_t s = 0; s < data.segments.size(); ++s)
                resid[s] = data.segments[s].dy->col(i) -
                           *data.segments[s].psi * theta.state(l).row(i).transpose();
            for (int j = 0; j < p; ++j) {
                VectorXd grad = VectorXd::Zero(m);
                for (std::size_t s = 0; s < data.segments.size(); ++s) {
                    auto block = data.segments[s].psi->middleCols(j * m, m);
                    grad.noalias() -= c * block.transpose() *
                                      (resid[s].array() *
                                       data.segments[s].w->col(l).array())
                                          .matrix();
                }
                const auto& low = metric.chol_lower[j];
                Eigen::VectorXd tb = theta.block(l, i, j).transpose();
                double norm_k = (low.transpose() * tb).norm();
                if (norm_k == 0.0) {
                    if (lambda > 0.0) {
                        any_zero = true;
                        double v = low.triangularView<Eigen::Lower>().solve(grad).norm();
                        report.zero_excess = std::max(report.zero_excess, v / lambda - 1.0);
                    } else {
                        report.stationarity = std::max(report.stationarity, grad.norm());
                    }
                } else {
                    VectorXd kdir = low * (low.transpose() * tb) / norm_k;
                    report.stationarity =
                        std::max(report.stationarity, (grad + lambda * kdir).norm());
                }
            }
        }
    }
    if (!any_zero) report.zero_excess = 0.0;
    return report;
}

}  // namespace switchode::emfit::internal
