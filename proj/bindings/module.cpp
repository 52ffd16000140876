// Python bindings for the core pipeline: simulate, denoise, features,
// penalized EM, selection, and evaluation.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <vector>

#include "switchode/denoise.hpp"
#include "switchode/emfit.hpp"
#include "switchode/eval.hpp"
#include "switchode/model_select.hpp"
#include "switchode/rng.hpp"
#include "switchode/simulate.hpp"

namespace py = pybind11;
using namespace switchode;

namespace {

py::dict params_to_dict(const ModelParams& params) {
    py::dict out;
    out["q"] = params.q.q();
    std::vector<Eigen::MatrixXd> theta;
    for (int l = 0; l < params.k(); ++l) theta.push_back(params.theta.state(l));
    out["theta"] = theta;
    out["sigma2"] = params.sigma2;
    out["k"] = params.k();
    out["p"] = params.p();
    out["m"] = params.m();
    return out;
}

ModelParams params_from_parts(const Eigen::MatrixXd& q,
                              const std::vector<Eigen::MatrixXd>& theta, double sigma2,
                              int m) {
    if (theta.empty()) throw ValueError("theta must have at least one state");
    const int k = static_cast<int>(theta.size());
    const int p = static_cast<int>(theta[0].rows());
    ThetaTensor tensor(k, p, m);
    for (int l = 0; l < k; ++l) {
        if (theta[l].rows() != p || theta[l].cols() != static_cast<Eigen::Index>(p) * m)
            throw ValueError("theta state " + std::to_string(l) + " must be p x (p*m)");
        tensor.state(l) = theta[l];
    }
    return ModelParams(ctmc::RateMatrix::make(q, /*require_irreducible=*/false),
                       std::move(tensor), sigma2);
}

emfit::FitConfig make_config(double lambda, int max_iter, double tol,
                             std::optional<int> trunc_r, int threads) {
    emfit::FitConfig config;
    config.lambda = lambda;
    config.max_iter = max_iter;
    config.tol = tol;
    config.trunc_r = trunc_r;
    config.threads = threads;
    return config;
}

py::dict fit_to_dict(const emfit::FitResult& fit) {
    py::dict out = params_to_dict(fit.params);
    out["loglik"] = fit.posterior.loglik;
    out["posterior_w"] = fit.posterior.w;
    out["trace"] = fit.trace;
    out["converged"] = fit.converged;
    out["iterations"] = fit.iterations;
    out["lambda"] = fit.lambda;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
    mod.doc() = "Markov-switching additive ODE estimation core";

    mod.def(
        "simulate",
        [](const std::string& dgp, int n, double t, double sigma, std::uint64_t seed,
           double dt_fine) {
            simulate::GroundTruth truth =
                dgp == "dgp1" ? simulate::dgp1()
                              : (dgp == "dgp2" ? simulate::dgp2()
                                               : throw ValueError("dgp must be dgp1 or dgp2"));
            ctmc::PathSample path =
                ctmc::sample_path(truth.q, t, std::nullopt, derive_seed(seed, 1));
            simulate::SwitchingTrajectory traj =
                simulate::integrate(truth.model, path, truth.x0, dt_fine);
            simulate::ObservationSet obs = simulate::observe(traj, n, sigma,
                                                             derive_seed(seed, 2));
            double h = t / n;
            Eigen::MatrixXd x(n + 1, truth.x0.size());
            for (int i = 0; i <= n; ++i) x.row(i) = traj.value_at(h * i).transpose();
            py::dict out;
            out["y"] = obs.y;
            out["x"] = x;
            out["h"] = h;
            out["truth"] = params_to_dict(truth.params());
            return out;
        },
        py::arg("dgp"), py::arg("n"), py::arg("t") = 40.0, py::arg("sigma") = 0.01,
        py::arg("seed") = 0, py::arg("dt_fine") = 0.005);

    mod.def(
        "denoise",
        [](const Eigen::MatrixXd& y, double delta, std::optional<double> sigma, int j0) {
            denoise::DenoiseConfig config;
            config.delta = delta;
            config.sigma = sigma;
            config.j0 = j0;
            denoise::DenoiseMatrixResult result = denoise::denoise_matrix(y, config);
            py::dict out;
            out["x_hat"] = result.xhat;
            out["sigma"] = result.sigma;
            out["lambda"] = result.lambda;
            return out;
        },
        py::arg("y"), py::arg("delta") = 0.1, py::arg("sigma") = std::nullopt,
        py::arg("j0") = 3);

    mod.def(
        "psi_features",
        [](const Eigen::MatrixXd& x_hat, int m, double h) {
            return denoise::compute_psi_features(x_hat, m, h).psi;
        },
        py::arg("x_hat"), py::arg("m"), py::arg("h"));

    mod.def(
        "fit",
        [](const Eigen::MatrixXd& y, double h, int k, int m, double lambda,
           std::uint64_t seed, int max_iter, double tol, std::optional<int> trunc_r,
           int threads) {
            simulate::ObservationSet obs;
            obs.y = y;
            obs.h = h;
            denoise::DenoiseConfig dn;
            denoise::DenoiseMatrixResult den = denoise::denoise_matrix(y, dn);
            denoise::PsiFeatures psi = denoise::compute_psi_features(den.xhat, m, h);
            ModelParams init = emfit::init_params(k, obs.p(), m, seed);
            emfit::FitResult fit = emfit::fit(
                obs, psi, init, make_config(lambda, max_iter, tol, trunc_r, threads));
            return fit_to_dict(fit);
        },
        py::arg("y"), py::arg("h"), py::arg("k"), py::arg("m"), py::arg("lambda_") = 0.0,
        py::arg("seed") = 0, py::arg("max_iter") = 500, py::arg("tol") = 1e-6,
        py::arg("trunc_r") = std::nullopt, py::arg("threads") = 1);

    mod.def(
        "fit_with_features",
        [](const Eigen::MatrixXd& y, double h, const Eigen::MatrixXd& psi_matrix, int m,
           int k, double lambda, std::uint64_t seed, int max_iter, double tol,
           std::optional<int> trunc_r, int threads) {
            simulate::ObservationSet obs;
            obs.y = y;
            obs.h = h;
            denoise::PsiFeatures psi;
            psi.p = obs.p();
            psi.m = m;
            psi.h = h;
            psi.psi = psi_matrix;
            ModelParams init = emfit::init_params(k, obs.p(), m, seed);
            emfit::FitResult fit = emfit::fit(
                obs, psi, init, make_config(lambda, max_iter, tol, trunc_r, threads));
            return fit_to_dict(fit);
        },
        py::arg("y"), py::arg("h"), py::arg("psi"), py::arg("m"), py::arg("k"),
        py::arg("lambda_") = 0.0, py::arg("seed") = 0, py::arg("max_iter") = 500,
        py::arg("tol") = 1e-6, py::arg("trunc_r") = std::nullopt, py::arg("threads") = 1);

    mod.def(
        "select",
        [](const Eigen::MatrixXd& y, double h, const Eigen::MatrixXd& x_hat,
           const std::vector<int>& k_grid, const std::vector<int>& m_grid,
           const std::vector<double>& lambda_grid, std::uint64_t seed, int max_iter,
           double tol, int threads) {
            simulate::ObservationSet obs;
            obs.y = y;
            obs.h = h;
            select::SelectionGrid grid;
            grid.k_candidates = k_grid;
            grid.m_candidates = m_grid;
            grid.lambda_grid = lambda_grid;
            select::SelectionReport report = select::grid_search(
                obs, [&](int m) { return denoise::compute_psi_features(x_hat, m, h); },
                grid, make_config(0.0, max_iter, tol, std::nullopt, threads), seed);
            py::dict out;
            out["k"] = report.k_best;
            out["m"] = report.m_best;
            out["lambda"] = report.lambda_best;
            out["bic"] = report.bic_best;
            out["best"] = fit_to_dict(report.best);
            py::list cells;
            for (const auto& cell : report.cells) {
                py::dict c;
                c["k"] = cell.k;
                c["m"] = cell.m;
                c["lambda"] = cell.lambda;
                c["bic"] = cell.bic;
                c["converged"] = cell.converged;
                cells.append(c);
            }
            out["cells"] = cells;
            return out;
        },
        py::arg("y"), py::arg("h"), py::arg("x_hat"), py::arg("k_grid"),
        py::arg("m_grid"), py::arg("lambda_grid"), py::arg("seed") = 0,
        py::arg("max_iter") = 500, py::arg("tol") = 1e-6, py::arg("threads") = 1);

    mod.def(
        "default_lambda_grid",
        [](std::uint64_t seed, int count) { return emfit::default_lambda_grid(seed, count); },
        py::arg("seed"), py::arg("count") = 100);

    mod.def(
        "match_distance",
        [](const Eigen::MatrixXd& est_q, const std::vector<Eigen::MatrixXd>& est_theta,
           double est_sigma2, const Eigen::MatrixXd& true_q,
           const std::vector<Eigen::MatrixXd>& true_theta, double true_sigma2, int m) {
            ModelParams est = params_from_parts(est_q, est_theta, est_sigma2, m);
            ModelParams truth = params_from_parts(true_q, true_theta, true_sigma2, m);
            eval::StateMatch match = eval::match_states(est, truth);
            py::dict out;
            out["consistent"] = match.consistent;
            out["xi1"] = match.xi1;
            out["xi2"] = match.xi2;
            if (match.consistent) {
                eval::ParamDistance dist = eval::param_distance(est, truth, match.xi1);
                out["d_theta"] = dist.d_theta;
                out["d_q"] = dist.d_q;
                out["d_sigma"] = dist.d_sigma;
                out["total"] = dist.total;
            }
            return out;
        },
        py::arg("est_q"), py::arg("est_theta"), py::arg("est_sigma2"), py::arg("true_q"),
        py::arg("true_theta"), py::arg("true_sigma2"), py::arg("m"));
}
