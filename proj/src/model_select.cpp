#include "switchode/model_select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "grouplasso.hpp"
#include "switchode/errors.hpp"
#include "switchode/rng.hpp"

namespace switchode::select {

SelectionGrid SelectionGrid::defaults(std::uint64_t seed) {
    SelectionGrid grid;
    grid.k_candidates = {1, 2, 3, 4, 5, 6};
    grid.m_candidates = {1, 2, 3, 4, 5};
    grid.lambda_grid = emfit::default_lambda_grid(seed);
    return grid;
}

void SelectionGrid::validate() const {
    if (k_candidates.empty() || m_candidates.empty() || lambda_grid.empty())
        throw ValueError("SelectionGrid: empty candidate list");
    for (int k : k_candidates)
        if (k < 1) throw ValueError("SelectionGrid: k candidates must be >= 1");
    for (int m : m_candidates)
        if (m < 1) throw ValueError("SelectionGrid: m candidates must be >= 1");
    for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
        if (!(lambda_grid[i] > 0.0)) throw ValueError("SelectionGrid: lambdas must be > 0");
        if (i > 0 && lambda_grid[i] > lambda_grid[i - 1])
            throw ValueError("SelectionGrid: lambda grid must be sorted descending");
    }
}

int nnz_entries(const ThetaTensor& theta, double tol) {
    int count = 0;
    for (int l = 0; l < theta.k(); ++l)
        count += static_cast<int>((theta.state(l).array().abs() > tol).count());
    return count;
}

double bic(const ObservationSet& y, const PsiFeatures& psi, const emfit::FitResult& fit) {
    const int k = fit.params.k();
    const double n = static_cast<double>(y.n());
    double complexity = (static_cast<double>(k) * k - k + nnz_entries(fit.params.theta));
    double surrogate =
        emfit::penalized_objective(y, psi, fit.params, fit.posterior, /*lambda=*/0.0);
    return complexity * std::log(n) - 2.0 * surrogate;
}

SelectionReport grid_search(const ObservationSet& y,
                            const std::function<PsiFeatures(int)>& psi_for_m,
                            const SelectionGrid& grid, const emfit::FitConfig& config,
                            std::uint64_t seed) {
    grid.validate();
    if (!psi_for_m) throw ValueError("grid_search: psi_for_m is required");

    std::map<int, PsiFeatures> psi_cache;
    for (int m : grid.m_candidates)
        if (!psi_cache.count(m)) psi_cache.emplace(m, psi_for_m(m));

    const std::size_t n_pairs = grid.k_candidates.size() * grid.m_candidates.size();
    const std::size_t n_lambda = grid.lambda_grid.size();

    struct PairOut {
        std::vector<SelectionCell> cells;
        std::vector<emfit::FitResult> fits;
        std::vector<std::string> failures;
    };
    std::vector<PairOut> outs(n_pairs);

    emfit::FitConfig cell_config = config;
    if (config.threads > 1) cell_config.threads = 1;

    auto run_pair = [&](std::size_t pair_idx) {
        const int k = grid.k_candidates[pair_idx / grid.m_candidates.size()];
        const int m = grid.m_candidates[pair_idx % grid.m_candidates.size()];
        const PsiFeatures& psi = psi_cache.at(m);
        PairOut& out = outs[pair_idx];

        ModelParams warm = emfit::init_params(k, y.p(), m, derive_seed(seed, pair_idx));
        for (std::size_t li = 0; li < n_lambda; ++li) {
            emfit::FitConfig cfg = cell_config;
            cfg.lambda = grid.lambda_grid[li];
            try {
                emfit::FitResult fit = emfit::fit(y, psi, warm, cfg);
                warm = fit.params;
                SelectionCell cell;
                cell.k = k;
                cell.m = m;
                cell.lambda = cfg.lambda;
                cell.bic = bic(y, psi, fit);
                cell.loglik = fit.posterior.loglik;
                cell.nnz = nnz_entries(fit.params.theta);
                cell.converged = fit.converged;
                cell.iterations = fit.iterations;
                out.cells.push_back(cell);
                out.fits.push_back(std::move(fit));
            } catch (const std::exception& e) {
                out.failures.push_back("k=" + std::to_string(k) + " m=" +
                                       std::to_string(m) + " lambda=" +
                                       std::to_string(cfg.lambda) + ": " + e.what());
            }
        }
    };
    emfit::internal::run_chunked(n_pairs, config.threads, run_pair);

    SelectionReport report;
    // Stage 1: best BIC within each k; smallest k wins ties.
    std::map<int, double> best_by_k;
    for (std::size_t pi = 0; pi < n_pairs; ++pi) {
        for (const auto& cell : outs[pi].cells) {
            auto it = best_by_k.find(cell.k);
            if (it == best_by_k.end() || cell.bic < it->second) best_by_k[cell.k] = cell.bic;
        }
        for (const auto& f : outs[pi].failures) report.failures.push_back(f);
        report.dropped_cells += static_cast<int>(outs[pi].failures.size());
    }
    if (best_by_k.empty()) {
        std::string detail;
        for (const auto& f : report.failures) detail += "\n  " + f;
        throw NumericalError("grid_search: all fits failed:" + detail);
    }
    int k_star = best_by_k.begin()->first;
    double k_star_bic = best_by_k.begin()->second;
    for (const auto& [k, b] : best_by_k)
        if (b < k_star_bic) {
            k_star = k;
            k_star_bic = b;
        }

    // Stage 2: minimal BIC within k_star, first cell in enumeration order on ties.
    double best_bic = std::numeric_limits<double>::infinity();
    const emfit::FitResult* best_fit = nullptr;
    const SelectionCell* best_cell = nullptr;
    for (std::size_t pi = 0; pi < n_pairs; ++pi) {
        for (std::size_t ci = 0; ci < outs[pi].cells.size(); ++ci) {
            const SelectionCell& cell = outs[pi].cells[ci];
            report.cells.push_back(cell);
            if (cell.k == k_star && cell.bic < best_bic) {
                best_bic = cell.bic;
                best_cell = &cell;
                best_fit = &outs[pi].fits[ci];
            }
        }
    }
    report.k_best = best_cell->k;
    report.m_best = best_cell->m;
    report.lambda_best = best_cell->lambda;
    report.bic_best = best_cell->bic;
    report.best = *best_fit;
    return report;
}

}  // namespace switchode::select
