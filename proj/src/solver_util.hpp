#pragma once

#include "spmx/solvers.hpp"

namespace spmx::detail {

ConcentrationMap make_estimate(const SpectralImage& s, const MixingMatrix& m);
Eigen::VectorXd gather(const Tensor4& t, std::size_t p);
void scatter(Tensor4& t, std::size_t p, const Eigen::VectorXd& v);
void require_bands(const SpectralImage& s, const MixingMatrix& m);

}  // namespace spmx::detail
