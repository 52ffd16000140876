#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "switchode/basis.hpp"

namespace switchode::denoise {

// Periodic orthonormal Daubechies-3 decomposition of a length-2^J series down
// to approximation level j0. details[r] has length 2^(j0 + r), coarsest first.
struct WaveletCoeffs {
    int j0 = 0;
    int J = 0;
    Eigen::VectorXd approx;
    std::vector<Eigen::VectorXd> details;

    double sq_norm() const {
        double s = approx.squaredNorm();
        for (const auto& d : details) s += d.squaredNorm();
        return s;
    }
};

struct DenoiseConfig {
    int j0 = 3;
    double delta = 0.1;
    // Noise level if known; estimated from the finest details otherwise.
    std::optional<double> sigma;
    // When set, the threshold includes the high-dimensional 3*log(p) term.
    std::optional<int> highdim_p;
};

struct DenoiseResult {
    Eigen::VectorXd xhat;
    double sigma = 0.0;
    double lambda = 0.0;
};

// Forward/inverse transform. The input length must be a power of two with
// 2^j0 < length; the transform is orthonormal, so coefficient and sample
// norms agree.
WaveletCoeffs dwt(const Eigen::VectorXd& series, int j0);
Eigen::VectorXd idwt(const WaveletCoeffs& coeffs);

// Robust noise scale: median(|finest detail|) / 0.6745. Series of non-power-
// of-two length are symmetrically padded first. Requires length >= 4.
double estimate_noise_sigma(const Eigen::VectorXd& series);

// Soft shrinkage eta -> sign(eta) max(|eta| - lambda, 0) on detail levels;
// approximation coefficients pass through.
WaveletCoeffs soft_threshold(const WaveletCoeffs& coeffs, double lambda);

// Wavelet shrinkage of one series: symmetric-pad to the next power of two,
// transform, soft-threshold every detail level at
//   lambda = 3 sigma sqrt(2 (log Npad + [3 log p] - log delta)),
// invert, crop. The bracketed term enters only in high-dimensional mode.
// (The threshold is stated on the sampled-coefficient scale, where white
// noise of standard deviation sigma keeps that deviation per coefficient.)
DenoiseResult denoise_trajectory(const Eigen::VectorXd& series, const DenoiseConfig& config);

// Column-wise denoising of a multi-node record; returns per-column results
// assembled into a matrix plus per-column sigma / lambda.
struct DenoiseMatrixResult {
    Eigen::MatrixXd xhat;
    Eigen::VectorXd sigma;
    Eigen::VectorXd lambda;
};
DenoiseMatrixResult denoise_matrix(const Eigen::MatrixXd& y, const DenoiseConfig& config);

// Trapezoid features Psi_j(t_n) = h (g(X_j(t_n)) + g(X_j(t_{n-1}))) / 2 for
// n = 1..N, stored row-major: row (n-1) holds the p*m vector
// (Psi_1(t_n), ..., Psi_p(t_n)).
struct PsiFeatures {
    int p = 0;
    int m = 0;
    double h = 0.0;
    Eigen::MatrixXd psi;  // N x (p*m)

    int n() const { return static_cast<int>(psi.rows()); }
    // Feature vector of interval n (1-based observation index).
    Eigen::Ref<const Eigen::RowVectorXd> row_for(int n) const { return psi.row(n - 1); }
    Eigen::Ref<const Eigen::RowVectorXd> block(int n, int j) const {
        return psi.row(n - 1).segment(j * m, m);
    }
};

PsiFeatures compute_psi_features(const Eigen::MatrixXd& xhat, const BasisFamily& basis,
                                 double h);

inline PsiFeatures compute_psi_features(const Eigen::MatrixXd& xhat, int m, double h) {
    return compute_psi_features(xhat, BasisFamily(m), h);
}

}  // namespace switchode::denoise
