#include "switchode/denoise.hpp"

#include <algorithm>
#include <cmath>

#include "switchode/errors.hpp"

namespace switchode::denoise {

namespace {

// Daubechies-3 orthonormal scaling filter, built from its closed form so the
// moment conditions (sum = sqrt 2, alternating sum = 0) hold to full double
// precision; rounded literals leak constants into the detail levels.
constexpr int kTaps = 6;

struct Db3Filter {
    double lo[kTaps];
    Db3Filter() {
        const double s = std::sqrt(10.0);
        const double t = std::sqrt(5.0 + 2.0 * s);
        const double c = std::sqrt(2.0) / 32.0;
        lo[0] = c * (1.0 + s + t);
        lo[1] = c * (5.0 + s + 3.0 * t);
        lo[2] = c * (10.0 - 2.0 * s + 2.0 * t);
        lo[3] = c * (10.0 - 2.0 * s - 2.0 * t);
        lo[4] = c * (5.0 + s - 3.0 * t);
        lo[5] = c * (1.0 + s - t);
    }
};

const Db3Filter kDb3;
const double* const kLo = kDb3.lo;

double hi_tap(int t) {
    double v = kLo[kTaps - 1 - t];
    return (t % 2 == 0) ? v : -v;
}

bool is_pow2(Eigen::Index n) { return n > 0 && (n & (n - 1)) == 0; }

int log2_of(Eigen::Index n) {
    int j = 0;
    while ((Eigen::Index{1} << j) < n) ++j;
    return j;
}

// One analysis stage with periodic boundary handling.
void analysis_stage(const Eigen::VectorXd& a, Eigen::VectorXd& approx,
                    Eigen::VectorXd& detail) {
    const auto len = a.size();
    const auto half = len / 2;
    approx.resize(half);
    detail.resize(half);
    for (Eigen::Index n = 0; n < half; ++n) {
        double lo = 0.0, hi = 0.0;
        for (int t = 0; t < kTaps; ++t) {
            double v = a[(2 * n + t) % len];
            lo += kLo[t] * v;
            hi += hi_tap(t) * v;
        }
        approx[n] = lo;
        detail[n] = hi;
    }
}

// Transpose of the analysis stage; exact inverse by orthonormality.
Eigen::VectorXd synthesis_stage(const Eigen::VectorXd& approx, const Eigen::VectorXd& detail) {
    const auto half = approx.size();
    const auto len = 2 * half;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(len);
    for (Eigen::Index n = 0; n < half; ++n) {
        for (int t = 0; t < kTaps; ++t) {
            auto idx = (2 * n + t) % len;
            a[idx] += kLo[t] * approx[n] + hi_tap(t) * detail[n];
        }
    }
    return a;
}

// Symmetric (edge-repeating) padding to the next power of two.
Eigen::VectorXd pad_pow2(const Eigen::VectorXd& series) {
    const auto n = series.size();
    if (is_pow2(n)) return series;
    Eigen::Index target = 1;
    while (target < n) target *= 2;
    Eigen::VectorXd out(target);
    out.head(n) = series;
    for (Eigen::Index i = n; i < target; ++i) {
        Eigen::Index r = 2 * n - 1 - i;  // ..., y[n-2], y[n-1] | y[n-1], y[n-2], ...
        if (r < 0) r = (i - n) % n;      // degenerate: series shorter than the pad
        out[i] = series[r];
    }
    return out;
}

double median_abs(Eigen::VectorXd v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = std::abs(v[i]);
    std::sort(v.data(), v.data() + v.size());
    const auto n = v.size();
    return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

WaveletCoeffs dwt(const Eigen::VectorXd& series, int j0) {
    if (!is_pow2(series.size()))
        throw ValueError("dwt: series length must be a power of two");
    const int J = log2_of(series.size());
    if (j0 < 0 || j0 >= J) throw ValueError("dwt: requires 0 <= j0 < log2(length)");

    WaveletCoeffs coeffs;
    coeffs.j0 = j0;
    coeffs.J = J;
    coeffs.details.resize(J - j0);
    Eigen::VectorXd a = series, approx, detail;
    for (int j = J; j > j0; --j) {
        analysis_stage(a, approx, detail);
        coeffs.details[j - 1 - j0] = detail;
        a = approx;
    }
    coeffs.approx = a;
    return coeffs;
}

Eigen::VectorXd idwt(const WaveletCoeffs& coeffs) {
    Eigen::VectorXd a = coeffs.approx;
    for (const auto& detail : coeffs.details) {
        if (detail.size() != a.size())
            throw ValueError("idwt: inconsistent coefficient lengths");
        a = synthesis_stage(a, detail);
    }
    return a;
}

double estimate_noise_sigma(const Eigen::VectorXd& series) {
    if (series.size() < 4) throw ValueError("estimate_noise_sigma: need at least 4 samples");
    Eigen::VectorXd padded = pad_pow2(series);
    Eigen::VectorXd approx, detail;
    analysis_stage(padded, approx, detail);
    return median_abs(std::move(detail)) / 0.6745;
}

WaveletCoeffs soft_threshold(const WaveletCoeffs& coeffs, double lambda) {
    if (lambda < 0.0) throw ValueError("soft_threshold: lambda must be >= 0");
    WaveletCoeffs out = coeffs;
    for (auto& detail : out.details)
        for (Eigen::Index i = 0; i < detail.size(); ++i) {
            double v = detail[i];
            detail[i] = (v > lambda) ? v - lambda : (v < -lambda ? v + lambda : 0.0);
        }
    return out;
}

DenoiseResult denoise_trajectory(const Eigen::VectorXd& series, const DenoiseConfig& config) {
    if (!(config.delta > 0.0)) throw ValueError("denoise: delta must be positive");
    const auto n_orig = series.size();
    Eigen::VectorXd padded = pad_pow2(series);
    const auto n = padded.size();
    if ((Eigen::Index{1} << (config.j0 + 1)) > n)
        throw ValueError("denoise: series too short for the requested j0");

    double sigma = config.sigma ? *config.sigma : estimate_noise_sigma(series);
    double logs = std::log(static_cast<double>(n)) - std::log(config.delta);
    if (config.highdim_p) {
        if (*config.highdim_p < 1) throw ValueError("denoise: highdim p must be >= 1");
        logs += 3.0 * std::log(static_cast<double>(*config.highdim_p));
    }
    double lambda = 3.0 * sigma * std::sqrt(2.0 * logs);

    Eigen::VectorXd rec = idwt(soft_threshold(dwt(padded, config.j0), lambda));
    return DenoiseResult{rec.head(n_orig), sigma, lambda};
}

DenoiseMatrixResult denoise_matrix(const Eigen::MatrixXd& y, const DenoiseConfig& config) {
    DenoiseMatrixResult out;
    out.xhat.resize(y.rows(), y.cols());
    out.sigma.resize(y.cols());
    out.lambda.resize(y.cols());
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
        DenoiseResult r = denoise_trajectory(y.col(c), config);
        out.xhat.col(c) = r.xhat;
        out.sigma[c] = r.sigma;
        out.lambda[c] = r.lambda;
    }
    return out;
}

PsiFeatures compute_psi_features(const Eigen::MatrixXd& xhat, const BasisFamily& basis,
                                 double h) {
    if (xhat.rows() < 2) throw ValueError("compute_psi_features: need at least two samples");
    if (!(h > 0.0)) throw ValueError("compute_psi_features: h must be positive");
    const int N = static_cast<int>(xhat.rows()) - 1;
    const int p = static_cast<int>(xhat.cols());
    const int m = basis.m;

    PsiFeatures feats;
    feats.p = p;
    feats.m = m;
    feats.h = h;
    feats.psi.resize(N, p * m);
    Eigen::VectorXd prev(p * m), cur(p * m);
    for (int j = 0; j < p; ++j) basis.eval_into(xhat(0, j), prev.data() + j * m);
    for (int n = 1; n <= N; ++n) {
        for (int j = 0; j < p; ++j) basis.eval_into(xhat(n, j), cur.data() + j * m);
        feats.psi.row(n - 1) = (0.5 * h) * (prev + cur);
        prev.swap(cur);
    }
    return feats;
}

}  // namespace switchode::denoise
