#pragma once

// Hyperparameter selection over (k, m, lambda) by BIC grid search with
// warm-started lambda paths and a two-stage rule: pick k by the best BIC
// achieved over (m, lambda), then pick (m, lambda) within that k.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "switchode/emfit.hpp"
#include "switchode/model.hpp"
#include "switchode/simulate.hpp"

namespace switchode::select {

using denoise::PsiFeatures;
using simulate::ObservationSet;

struct SelectionGrid {
    std::vector<int> k_candidates;
    std::vector<int> m_candidates;
    std::vector<double> lambda_grid;  // descending

    // k in 1..6, m in 1..5, 100 log-uniform lambdas on [e^-7, e^-1].
    static SelectionGrid defaults(std::uint64_t seed);
    void validate() const;
};

struct SelectionCell {
    int k = 0;
    int m = 0;
    double lambda = 0.0;
    double bic = 0.0;
    double loglik = 0.0;  // marginal data log-likelihood at the fit
    int nnz = 0;          // entries of theta with |value| > kZeroTol
    bool converged = false;
    int iterations = 0;
};

struct SelectionReport {
    std::vector<SelectionCell> cells;  // enumeration order: k, then m, then lambda
    int k_best = 0;
    int m_best = 0;
    double lambda_best = 0.0;
    double bic_best = 0.0;
    emfit::FitResult best;                // winning cell's fit
    std::vector<std::string> failures;    // per-cell error messages
    int dropped_cells = 0;
};

// Exact-zero detection threshold for the complexity term.
inline constexpr double kZeroTol = 1e-10;

// Number of theta entries with magnitude above tol.
int nnz_entries(const ThetaTensor& theta, double tol = kZeroTol);

// (k^2 - k + nnz) log N - 2 * (EM surrogate at the fit without the sparsity
// penalty). N is taken from y.
double bic(const ObservationSet& y, const PsiFeatures& psi, const emfit::FitResult& fit);

// psi_for_m builds features for a given basis order from the same denoised
// trajectory; it is called once per candidate m. config.lambda is ignored
// (the grid supplies it). Throws NumericalError if every cell fails.
SelectionReport grid_search(const ObservationSet& y,
                            const std::function<PsiFeatures(int)>& psi_for_m,
                            const SelectionGrid& grid, const emfit::FitConfig& config,
                            std::uint64_t seed);

}  // namespace switchode::select
