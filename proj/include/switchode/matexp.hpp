#pragma once

#include <Eigen/Dense>

namespace switchode {

// Dense matrix exponential via scaling-and-squaring with diagonal Pade
// approximants of order 3/5/7/9/13 selected by the 1-norm.
Eigen::MatrixXd matexp(const Eigen::MatrixXd& a);

}  // namespace switchode
