#pragma once

#include <Eigen/Dense>

namespace daeo {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

}  // namespace daeo
