#include "switchode/matexp.hpp"

#include <cmath>

#include "switchode/errors.hpp"

namespace switchode {

namespace {

using Eigen::MatrixXd;

MatrixXd pade_solve(const MatrixXd& u, const MatrixXd& v) {
    // (v - u) x = (v + u); v - u is nonsingular within the Pade trust regions.
    return (v - u).partialPivLu().solve(v + u);
}

MatrixXd pade3(const MatrixXd& a, const MatrixXd& a2) {
    static const double b[] = {120, 60, 12, 1};
    MatrixXd i = MatrixXd::Identity(a.rows(), a.cols());
    MatrixXd u = a * (b[3] * a2 + b[1] * i);
    MatrixXd v = b[2] * a2 + b[0] * i;
    return pade_solve(u, v);
}

MatrixXd pade5(const MatrixXd& a, const MatrixXd& a2, const MatrixXd& a4) {
    static const double b[] = {30240, 15120, 3360, 420, 30, 1};
    MatrixXd i = MatrixXd::Identity(a.rows(), a.cols());
    MatrixXd u = a * (b[5] * a4 + b[3] * a2 + b[1] * i);
    MatrixXd v = b[4] * a4 + b[2] * a2 + b[0] * i;
    return pade_solve(u, v);
}

MatrixXd pade7(const MatrixXd& a, const MatrixXd& a2, const MatrixXd& a4,
               const MatrixXd& a6) {
    static const double b[] = {17297280, 8648640, 1995840, 277200, 25200, 1512, 56, 1};
    MatrixXd i = MatrixXd::Identity(a.rows(), a.cols());
    MatrixXd u = a * (b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * i);
    MatrixXd v = b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * i;
    return pade_solve(u, v);
}

MatrixXd pade9(const MatrixXd& a, const MatrixXd& a2, const MatrixXd& a4,
               const MatrixXd& a6) {
    static const double b[] = {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0,
                               30270240.0,    2162160.0,    110880.0,     3960.0,
                               90.0,          1.0};
    MatrixXd i = MatrixXd::Identity(a.rows(), a.cols());
    MatrixXd a8 = a6 * a2;
    MatrixXd u = a * (b[9] * a8 + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * i);
    MatrixXd v = b[8] * a8 + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * i;
    return pade_solve(u, v);
}

MatrixXd pade13(const MatrixXd& a, const MatrixXd& a2, const MatrixXd& a4,
                const MatrixXd& a6) {
    static const double b[] = {64764752532480000.0, 32382376266240000.0,
                               7771770303897600.0,  1187353796428800.0,
                               129060195264000.0,   10559470521600.0,
                               670442572800.0,      33522128640.0,
                               1323241920.0,        40840800.0,
                               960960.0,            16380.0,
                               182.0,               1.0};
    MatrixXd i = MatrixXd::Identity(a.rows(), a.cols());
    MatrixXd u = a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 +
                      b[5] * a4 + b[3] * a2 + b[1] * i);
    MatrixXd v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 +
                 b[2] * a2 + b[0] * i;
    return pade_solve(u, v);
}

}  // namespace

Eigen::MatrixXd matexp(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols()) throw ValueError("matexp: matrix must be square");
    if (!a.allFinite()) throw NumericalError("matexp: non-finite entries");
    const Eigen::Index n = a.rows();
    if (n == 0) return MatrixXd(0, 0);
    if (n == 1) return (MatrixXd(1, 1) << std::exp(a(0, 0))).finished();

    const double norm = a.cwiseAbs().colwise().sum().maxCoeff();
    MatrixXd a2 = a * a;
    if (norm <= 1.495585217958292e-2) return pade3(a, a2);
    MatrixXd a4 = a2 * a2;
    if (norm <= 2.539398330063230e-1) return pade5(a, a2, a4);
    MatrixXd a6 = a4 * a2;
    if (norm <= 9.504178996162932e-1) return pade7(a, a2, a4, a6);
    if (norm <= 2.097847961257068) return pade9(a, a2, a4, a6);

    const double theta13 = 5.371920351148152;
    int squarings = 0;
    if (norm > theta13) {
        squarings = static_cast<int>(std::ceil(std::log2(norm / theta13)));
        double scale = std::ldexp(1.0, -squarings);
        MatrixXd as = a * scale;
        a2 = as * as;
        a4 = a2 * a2;
        a6 = a4 * a2;
        MatrixXd r = pade13(as, a2, a4, a6);
        for (int s = 0; s < squarings; ++s) r = r * r;
        return r;
    }
    return pade13(a, a2, a4, a6);
}

}  // namespace switchode
