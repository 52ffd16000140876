#pragma once

#include <Eigen/Dense>

#include "switchode/errors.hpp"

namespace switchode {

// Scalar feature map g(x) = (g_1(x), ..., g_m(x)) for the additive drift
// expansion. The monomial family has g_i(x) = x^i.
struct BasisFamily {
    enum class Kind { monomial };

    Kind kind = Kind::monomial;
    int m = 1;

    BasisFamily() = default;
    explicit BasisFamily(int m_, Kind kind_ = Kind::monomial) : kind(kind_), m(m_) {
        if (m < 1) throw ValueError("basis size m must be >= 1");
    }

    void eval_into(double x, double* out) const {
        double v = 1.0;
        for (int i = 0; i < m; ++i) {
            v *= x;
            out[i] = v;
        }
    }

    Eigen::VectorXd eval(double x) const {
        Eigen::VectorXd g(m);
        eval_into(x, g.data());
        return g;
    }

    // d/dx of eval: (1, 2x, 3x^2, ...).
    Eigen::VectorXd deriv(double x) const {
        Eigen::VectorXd d(m);
        double v = 1.0;
        for (int i = 0; i < m; ++i) {
            d[i] = (i + 1) * v;
            v *= x;
        }
        return d;
    }
};

}  // namespace switchode
