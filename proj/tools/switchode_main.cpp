// Command-line front end: simulate -> denoise -> fit/select -> eval over
// file-based interchange. Exit codes: 0 ok, 2 usage, 3 data, 4 numerical.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "switchode/denoise.hpp"
#include "switchode/emfit.hpp"
#include "switchode/errors.hpp"
#include "switchode/eval.hpp"
#include "switchode/io.hpp"
#include "switchode/model_select.hpp"
#include "switchode/rng.hpp"
#include "switchode/simulate.hpp"

namespace fs = std::filesystem;
using namespace switchode;
using namespace switchode::simulate;
using switchode::denoise::compute_psi_features;
using switchode::denoise::PsiFeatures;

namespace {

int resolve_threads(int flag_value) {
    if (const char* env = std::getenv("SWITCHODE_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
        throw ValueError("SWITCHODE_THREADS must be a positive integer");
    }
    return flag_value;
}

std::vector<double> parse_lambda_grid(const std::string& spec, std::uint64_t seed) {
    if (spec == "default") return emfit::default_lambda_grid(derive_seed(seed, 0x11));
    io::CsvTable table = io::read_csv(spec);
    if (table.values.cols() != 1 || table.header[0] != "lambda")
        throw DataError(spec + ": lambda grid file needs a single 'lambda' column");
    std::vector<double> grid(table.values.rows());
    for (Eigen::Index i = 0; i < table.values.rows(); ++i) grid[i] = table.values(i, 0);
    std::sort(grid.begin(), grid.end(), std::greater<>());
    return grid;
}

GroundTruth make_truth(const std::string& dgp) {
    if (dgp == "dgp1") return dgp1();
    if (dgp == "dgp2") return dgp2();
    throw ValueError("unknown --dgp '" + dgp + "' (use dgp1 or dgp2)");
}

PsiFeatures load_features(const std::string& path, int m, double h_expected) {
    if (path.size() > 5 && path.substr(path.size() - 5) == ".json") {
        PsiFeatures psi = io::read_psi(path);
        if (psi.m != m)
            throw DataError(path + ": stored basis order m=" + std::to_string(psi.m) +
                            " does not match --m " + std::to_string(m));
        return psi;
    }
    double h = 0.0;
    Eigen::MatrixXd x_hat = io::read_series_csv(path, &h);
    if (std::abs(h - h_expected) > 1e-9 * std::max(1.0, h_expected))
        throw DataError(path + ": feature grid step does not match observations");
    return compute_psi_features(x_hat, m, h);
}

void write_posterior_csv(const std::string& path, const emfit::Posterior& post, double h) {
    std::vector<std::string> header{"t"};
    for (int l = 0; l < post.k(); ++l) header.push_back("w" + std::to_string(l));
    Eigen::MatrixXd values(post.w.rows(), post.k() + 1);
    for (Eigen::Index r = 0; r < post.w.rows(); ++r)
        values(r, 0) = h * static_cast<double>(r + 1);
    values.rightCols(post.k()) = post.w;
    io::write_csv(path, header, values);
}

void write_trace_csv(const std::string& path, const std::vector<double>& trace) {
    Eigen::MatrixXd values(static_cast<Eigen::Index>(trace.size()), 2);
    for (std::size_t i = 0; i < trace.size(); ++i) {
        values(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i);
        values(static_cast<Eigen::Index>(i), 1) = trace[i];
    }
    io::write_csv(path, {"iteration", "objective"}, values);
}

int cmd_simulate(const std::string& dgp, int n, double t_span, double sigma,
                 std::uint64_t seed, double dt_fine, const std::string& out_dir) {
    if (n < 2) throw ValueError("--n must be >= 2");
    if (t_span <= 0.0) throw ValueError("--t must be > 0");
    if (sigma < 0.0) throw ValueError("--sigma must be >= 0");
    GroundTruth truth = make_truth(dgp);

    ctmc::PathSample path =
        ctmc::sample_path(truth.q, t_span, std::nullopt, derive_seed(seed, 1));
    SwitchingTrajectory traj = integrate(truth.model, path, truth.x0, dt_fine);
    double h = t_span / n;
    ObservationSet obs = observe(traj, n, sigma, derive_seed(seed, 2));

    fs::create_directories(out_dir);
    Eigen::MatrixXd x_samples(n + 1, truth.x0.size());
    for (int i = 0; i <= n; ++i) x_samples.row(i) = traj.value_at(h * i).transpose();
    io::write_series_csv((fs::path(out_dir) / "observations.csv").string(), obs.y, h, "y");
    io::write_series_csv((fs::path(out_dir) / "trajectory.csv").string(), x_samples, h,
                         "x");
    io::write_params_json((fs::path(out_dir) / "truth_params.json").string(),
                          truth.params());
    io::write_path_json((fs::path(out_dir) / "latent_path.json").string(), path);
    std::cout << "simulate: wrote " << out_dir << " (N=" << n << ", h=" << h << ")\n";
    return 0;
}

int cmd_denoise(const std::string& in, double delta, const std::string& sigma_mode,
                int j0, std::optional<int> m, const std::string& out_dir) {
    ObservationSet obs = io::read_observations_csv(in);
    denoise::DenoiseConfig config;
    config.delta = delta;
    config.j0 = j0;
    if (sigma_mode != "auto") {
        char* end = nullptr;
        double v = std::strtod(sigma_mode.c_str(), &end);
        if (end == sigma_mode.c_str() || *end != '\0' || v < 0.0)
            throw ValueError("--sigma must be 'auto' or a non-negative number");
        config.sigma = v;
    }

    denoise::DenoiseMatrixResult result = denoise::denoise_matrix(obs.y, config);
    fs::create_directories(out_dir);
    io::write_series_csv((fs::path(out_dir) / "x_hat.csv").string(), result.xhat, obs.h,
                         "x");
    std::vector<double> sigma_cols(result.sigma.data(),
                                   result.sigma.data() + result.sigma.size());
    std::vector<double> lambda_cols(result.lambda.data(),
                                    result.lambda.data() + result.lambda.size());
    nlohmann::json report{{"delta", delta},
                          {"j0", j0},
                          {"sigma_given", sigma_mode != "auto"},
                          {"sigma_by_column", sigma_cols},
                          {"lambda_by_column", lambda_cols}};
    io::write_text_atomic((fs::path(out_dir) / "sigma_report.json").string(),
                          report.dump(2) + "\n");
    if (m) {
        PsiFeatures psi = compute_psi_features(result.xhat, *m, obs.h);
        io::write_psi((fs::path(out_dir) / "psi.json").string(),
                      (fs::path(out_dir) / "psi.bin").string(), psi);
    }
    std::cout << "denoise: wrote " << out_dir << "\n";
    return 0;
}

struct FitIo {
    ObservationSet obs;
    PsiFeatures psi;
};

FitIo load_fit_inputs(const std::string& obs_path, const std::string& features_path,
                      int m) {
    FitIo io;
    io.obs = io::read_observations_csv(obs_path);
    io.psi = load_features(features_path, m, io.obs.h);
    return io;
}

int cmd_fit(const std::string& obs_path, const std::string& features_path, int k, int m,
            std::optional<double> lambda, const std::string& lambda_grid,
            std::uint64_t seed, std::optional<int> trunc_r, int max_iter, double tol,
            int threads, const std::string& out_dir) {
    if (k < 1) throw ValueError("--k must be >= 1");
    if (m < 1) throw ValueError("--m must be >= 1");
    FitIo data = load_fit_inputs(obs_path, features_path, m);

    emfit::FitConfig config;
    config.max_iter = max_iter;
    config.tol = tol;
    config.trunc_r = trunc_r;
    config.threads = resolve_threads(threads);
    fs::create_directories(out_dir);

    if (lambda) {
        config.lambda = *lambda;
        ModelParams init = emfit::init_params(k, data.obs.p(), m, seed);
        emfit::FitResult fit = emfit::fit(data.obs, data.psi, init, config);
        io::write_fit_json((fs::path(out_dir) / "params.json").string(), fit.params,
                           fit.lambda, fit.converged, fit.iterations,
                           fit.posterior.loglik);
        write_trace_csv((fs::path(out_dir) / "trace.csv").string(), fit.trace);
        write_posterior_csv((fs::path(out_dir) / "posterior.csv").string(), fit.posterior,
                            data.obs.h);
        std::cout << "fit: converged=" << fit.converged << " iterations=" << fit.iterations
                  << " loglik=" << fit.posterior.loglik << "\n";
        return 0;
    }

    std::vector<double> grid = parse_lambda_grid(lambda_grid, seed);
    std::vector<emfit::FitResult> path =
        emfit::lambda_path_fit(data.obs, data.psi, k, grid, config, seed);
    Eigen::MatrixXd index(static_cast<Eigen::Index>(path.size()), 4);
    for (std::size_t i = 0; i < path.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "params_%04zu.json", i);
        io::write_fit_json((fs::path(out_dir) / name).string(), path[i].params,
                           path[i].lambda, path[i].converged, path[i].iterations,
                           path[i].posterior.loglik);
        index(static_cast<Eigen::Index>(i), 0) = path[i].lambda;
        index(static_cast<Eigen::Index>(i), 1) = static_cast<double>(i);
        index(static_cast<Eigen::Index>(i), 2) = path[i].converged ? 1.0 : 0.0;
        index(static_cast<Eigen::Index>(i), 3) = path[i].posterior.loglik;
    }
    io::write_csv((fs::path(out_dir) / "path_index.csv").string(),
                  {"lambda", "index", "converged", "loglik"}, index);
    std::cout << "fit: wrote " << path.size() << " path entries to " << out_dir << "\n";
    return 0;
}

int cmd_fit_grouped(const std::string& manifest_path, int k, int m,
                    double lambda, std::uint64_t seed, std::optional<int> trunc_r,
                    int max_iter, double tol, int threads, const std::string& out_dir) {
    nlohmann::json doc = nlohmann::json::parse(io::read_text(manifest_path), nullptr, false);
    if (doc.is_discarded() || !doc.contains("members") || !doc["members"].is_array())
        throw DataError(manifest_path + ": expected {\"members\": [...]}");

    std::vector<emfit::GroupedSeries> members;
    fs::path base = fs::path(manifest_path).parent_path();
    for (const auto& entry : doc["members"]) {
        for (const char* key : {"obs", "features", "group"})
            if (!entry.contains(key)) throw DataError(manifest_path + ": member missing " + key);
        auto resolve = [&](const std::string& p) {
            return fs::path(p).is_absolute() ? p : (base / p).string();
        };
        emfit::GroupedSeries series;
        series.y = io::read_observations_csv(resolve(entry["obs"].get<std::string>()));
        series.psi = load_features(resolve(entry["features"].get<std::string>()), m, series.y.h);
        series.group = entry["group"].get<int>();
        members.push_back(std::move(series));
    }
    if (members.empty()) throw DataError(manifest_path + ": no members");

    emfit::FitConfig config;
    config.lambda = lambda;
    config.max_iter = max_iter;
    config.tol = tol;
    config.trunc_r = trunc_r;
    config.threads = resolve_threads(threads);

    ModelParams init = emfit::init_params(k, members[0].y.p(), m, seed);
    emfit::GroupedFitResult fit = emfit::fit_grouped(members, k, init, config);

    fs::create_directories(out_dir);
    for (std::size_t g = 0; g < fit.q_by_group.size(); ++g) {
        ModelParams group_params(fit.q_by_group[g], fit.theta, fit.sigma2);
        io::write_params_json(
            (fs::path(out_dir) / ("params_group" + std::to_string(g) + ".json")).string(),
            group_params);
    }
    write_trace_csv((fs::path(out_dir) / "trace.csv").string(), fit.trace);

    Eigen::MatrixXd dwell = eval::dwell_times(members, fit);
    std::vector<std::string> header{"group"};
    for (int l = 0; l < k; ++l) header.push_back("dwell" + std::to_string(l));
    Eigen::MatrixXd dwell_out(dwell.rows(), k + 1);
    for (Eigen::Index g = 0; g < dwell.rows(); ++g) dwell_out(g, 0) = static_cast<double>(g);
    dwell_out.rightCols(k) = dwell;
    io::write_csv((fs::path(out_dir) / "dwell_times.csv").string(), header, dwell_out);
    std::cout << "fit --grouped: " << fit.q_by_group.size() << " groups, converged="
              << fit.converged << "\n";
    return 0;
}

int cmd_select(const std::string& obs_path, const std::string& features_path,
               const std::string& k_list, const std::string& m_list,
               const std::string& lambda_grid, std::uint64_t seed, int max_iter,
               double tol, std::optional<int> trunc_r, int threads,
               const std::string& out_dir) {
    ObservationSet obs = io::read_observations_csv(obs_path);
    if (features_path.size() > 5 && features_path.substr(features_path.size() - 5) == ".json")
        throw ValueError("select rebuilds features for every basis order; pass the denoised "
                         "series CSV (x_hat.csv), not a precomputed feature file");
    double h = 0.0;
    Eigen::MatrixXd x_hat = io::read_series_csv(features_path, &h);
    if (std::abs(h - obs.h) > 1e-9 * std::max(1.0, obs.h))
        throw DataError(features_path + ": feature grid step does not match observations");

    auto parse_ints = [](const std::string& csv) {
        std::vector<int> out;
        std::istringstream ss(csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (tok.empty()) continue;
            out.push_back(std::stoi(tok));
        }
        if (out.empty()) throw ValueError("empty integer list");
        return out;
    };

    select::SelectionGrid grid = select::SelectionGrid::defaults(derive_seed(seed, 0x11));
    if (!k_list.empty()) grid.k_candidates = parse_ints(k_list);
    if (!m_list.empty()) grid.m_candidates = parse_ints(m_list);
    if (lambda_grid != "default") grid.lambda_grid = parse_lambda_grid(lambda_grid, seed);

    emfit::FitConfig config;
    config.max_iter = max_iter;
    config.tol = tol;
    config.trunc_r = trunc_r;
    config.threads = resolve_threads(threads);

    select::SelectionReport report = select::grid_search(
        obs, [&](int m) { return compute_psi_features(x_hat, m, h); }, grid, config, seed);

    fs::create_directories(out_dir);
    io::write_selection_csv((fs::path(out_dir) / "selection.csv").string(), report);
    io::write_selection_json((fs::path(out_dir) / "selection.json").string(), report);
    io::write_fit_json((fs::path(out_dir) / "best_params.json").string(),
                       report.best.params, report.lambda_best, report.best.converged,
                       report.best.iterations, report.best.posterior.loglik);
    std::cout << "select: k=" << report.k_best << " m=" << report.m_best
              << " lambda=" << report.lambda_best << " bic=" << report.bic_best << "\n";
    return 0;
}

int cmd_eval(const std::string& fit_path, const std::string& truth_path, double epsilon_t,
             const std::string& out_dir) {
    ModelParams truth = io::read_params_json(truth_path);
    fs::create_directories(out_dir);

    if (fs::path(fit_path).filename() == "path_index.csv") {
        io::CsvTable index = io::read_csv(fit_path);
        fs::path dir = fs::path(fit_path).parent_path();
        std::vector<emfit::FitResult> path;
        for (Eigen::Index r = 0; r < index.values.rows(); ++r) {
            char name[32];
            std::snprintf(name, sizeof(name), "params_%04d.json",
                          static_cast<int>(index.values(r, 1)));
            emfit::FitResult entry;
            entry.params = io::read_params_json((dir / name).string());
            entry.lambda = index.values(r, 0);
            path.push_back(std::move(entry));
        }
        eval::RocResult roc = eval::roc_auc(path, truth, epsilon_t);

        const int k = truth.k();
        std::vector<std::string> header{"lambda"};
        for (int l = 0; l < k; ++l) {
            header.push_back("fpr" + std::to_string(l));
            header.push_back("tpr" + std::to_string(l));
        }
        Eigen::MatrixXd points(static_cast<Eigen::Index>(roc.points.size()), 1 + 2 * k);
        for (std::size_t i = 0; i < roc.points.size(); ++i) {
            auto r = static_cast<Eigen::Index>(i);
            points(r, 0) = roc.points[i].lambda;
            for (int l = 0; l < k; ++l) {
                points(r, 1 + 2 * l) = roc.points[i].fpr[l];
                points(r, 2 + 2 * l) = roc.points[i].tpr[l];
            }
        }
        io::write_csv((fs::path(out_dir) / "roc.csv").string(), header, points);

        std::vector<std::string> auc_header;
        for (int l = 0; l < k; ++l) auc_header.push_back("auc" + std::to_string(l));
        Eigen::MatrixXd auc_row(1, k);
        auc_row.row(0) = roc.auc.transpose();
        io::write_csv((fs::path(out_dir) / "auc.csv").string(), auc_header, auc_row);
        std::cout << "eval: " << roc.points.size() << " eligible points, dropped "
                  << roc.dropped << ", mean AUC " << roc.auc.mean() << "\n";
        return 0;
    }

    ModelParams est = io::read_params_json(fit_path);
    eval::StateMatch match = eval::match_states(est, truth);
    if (!match.consistent) {
        std::cout << "eval: state matching inconsistent; distances not comparable\n";
        nlohmann::json doc{{"consistent", false}, {"xi1", match.xi1}, {"xi2", match.xi2}};
        io::write_text_atomic((fs::path(out_dir) / "distance.json").string(),
                              doc.dump(2) + "\n");
        return 0;
    }
    eval::ParamDistance dist = eval::param_distance(est, truth, match.xi1);
    nlohmann::json doc{{"consistent", true},
                       {"xi", match.xi1},
                       {"d_theta", dist.d_theta},
                       {"d_q", dist.d_q},
                       {"d_sigma", dist.d_sigma},
                       {"total", dist.total}};
    io::write_text_atomic((fs::path(out_dir) / "distance.json").string(), doc.dump(2) + "\n");
    std::cout << "eval: d_theta=" << dist.d_theta << " d_q=" << dist.d_q
              << " d_sigma=" << dist.d_sigma << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Markov-switching additive ODE simulation, denoising, and estimation"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
    std::string sim_dgp = "dgp1", sim_out = "out";
    int sim_n = 200;
    double sim_t = 40.0, sim_sigma = 0.01, sim_dt = 0.005;
    std::uint64_t sim_seed = 0;
    sim->add_option("--dgp", sim_dgp, "dgp1 | dgp2");
    sim->add_option("--n", sim_n, "number of sampling intervals N");
    sim->add_option("--t", sim_t, "physical time span");
    sim->add_option("--sigma", sim_sigma, "observation noise s.d.");
    sim->add_option("--seed", sim_seed)->required();
    sim->add_option("--dt-fine", sim_dt, "integrator step");
    sim->add_option("--out-dir", sim_out)->required();

    // denoise
    auto* den = app.add_subcommand("denoise", "Wavelet-shrink observations");
    std::string den_in, den_sigma = "auto", den_out = "out";
    double den_delta = 0.1;
    int den_j0 = 3;
    int den_m = 0;
    den->add_option("--in", den_in)->required();
    den->add_option("--delta", den_delta, "tail probability");
    den->add_option("--sigma", den_sigma, "'auto' or known noise s.d.");
    den->add_option("--j0", den_j0, "coarsest detail level");
    den->add_option("--m", den_m, "also write integrated features for this basis order");
    den->add_option("--out-dir", den_out)->required();

    // fit
    auto* fit = app.add_subcommand("fit", "Penalized EM at fixed (k, m)");
    std::string fit_obs, fit_features, fit_grid = "default", fit_out = "out";
    int fit_k = 2, fit_m = 1, fit_max_iter = 500, fit_threads = 1, fit_trunc = 0;
    double fit_lambda = -1.0, fit_tol = 1e-6;
    bool fit_grouped_flag = false;
    std::uint64_t fit_seed = 0;
    fit->add_option("--obs", fit_obs, "observations CSV (or grouped manifest JSON)")
        ->required();
    fit->add_option("--features", fit_features, "denoised series CSV or psi JSON");
    fit->add_option("--k", fit_k)->required();
    fit->add_option("--m", fit_m)->required();
    fit->add_option("--lambda", fit_lambda, "single penalty value (>= 0)");
    fit->add_option("--lambda-grid", fit_grid, "'default' or CSV path for a warm path");
    fit->add_option("--seed", fit_seed)->required();
    fit->add_option("--trunc-r", fit_trunc, "truncated smoothing radius (0 = exact)");
    fit->add_option("--max-iter", fit_max_iter);
    fit->add_option("--tol", fit_tol);
    fit->add_option("--threads", fit_threads);
    fit->add_flag("--grouped", fit_grouped_flag, "treat --obs as a member manifest");
    fit->add_option("--out-dir", fit_out)->required();

    // select
    auto* sel = app.add_subcommand("select", "BIC grid search over (k, m, lambda)");
    std::string sel_obs, sel_features, sel_k, sel_m, sel_grid = "default", sel_out = "out";
    int sel_max_iter = 500, sel_threads = 1, sel_trunc = 0;
    double sel_tol = 1e-6;
    std::uint64_t sel_seed = 0;
    sel->add_option("--obs", sel_obs)->required();
    sel->add_option("--features", sel_features, "denoised series CSV")->required();
    sel->add_option("--k-grid", sel_k, "comma-separated k candidates");
    sel->add_option("--m-grid", sel_m, "comma-separated m candidates");
    sel->add_option("--lambda-grid", sel_grid, "'default' or CSV path");
    sel->add_option("--seed", sel_seed)->required();
    sel->add_option("--max-iter", sel_max_iter);
    sel->add_option("--tol", sel_tol);
    sel->add_option("--trunc-r", sel_trunc);
    sel->add_option("--threads", sel_threads);
    sel->add_option("--out-dir", sel_out)->required();

    // eval
    auto* ev = app.add_subcommand("eval", "Compare a fit (or path) to ground truth");
    std::string ev_fit, ev_truth, ev_out = "out";
    double ev_eps = 1e-6;
    ev->add_option("--fit", ev_fit, "params JSON or path_index.csv")->required();
    ev->add_option("--truth", ev_truth, "truth params JSON")->required();
    ev->add_option("--epsilon-t", ev_eps, "edge detection threshold");
    ev->add_option("--out-dir", ev_out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed())
            return cmd_simulate(sim_dgp, sim_n, sim_t, sim_sigma, sim_seed, sim_dt, sim_out);
        if (den->parsed())
            return cmd_denoise(den_in, den_delta, den_sigma, den_j0,
                               den_m > 0 ? std::optional<int>(den_m) : std::nullopt,
                               den_out);
        if (fit->parsed()) {
            std::optional<int> trunc =
                fit_trunc > 0 ? std::optional<int>(fit_trunc) : std::nullopt;
            if (fit_grouped_flag) {
                if (fit_lambda < 0.0) fit_lambda = 0.0;
                return cmd_fit_grouped(fit_obs, fit_k, fit_m, fit_lambda, fit_seed, trunc,
                                       fit_max_iter, fit_tol, fit_threads, fit_out);
            }
            if (fit_features.empty())
                throw ValueError("--features is required unless --grouped");
            return cmd_fit(fit_obs, fit_features, fit_k, fit_m,
                           fit_lambda >= 0.0 ? std::optional<double>(fit_lambda)
                                             : std::nullopt,
                           fit_grid, fit_seed, trunc, fit_max_iter, fit_tol, fit_threads,
                           fit_out);
        }
        if (sel->parsed())
            return cmd_select(sel_obs, sel_features, sel_k, sel_m, sel_grid, sel_seed,
                              sel_max_iter, sel_tol,
                              sel_trunc > 0 ? std::optional<int>(sel_trunc) : std::nullopt,
                              sel_threads, sel_out);
        if (ev->parsed()) return cmd_eval(ev_fit, ev_truth, ev_eps, ev_out);
        std::cerr << "no subcommand\n";
        return 2;
    } catch (const ValueError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
