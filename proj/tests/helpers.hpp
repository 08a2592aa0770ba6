#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "spmx/types.hpp"

namespace spmx::test {

// Random mixing matrix with l1-normalized columns and condition number
// below `max_kappa` (rejection sampling).
inline MixingMatrix random_mixing(std::size_t bands, std::size_t fps, std::mt19937_64& rng,
                                  double max_kappa = 10.0) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  while (true) {
    Eigen::MatrixXd m(bands, fps);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = uni(rng);
    // Emphasize one band per column so the matrix is well conditioned.
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(static_cast<Eigen::Index>((static_cast<std::size_t>(j) * bands) / fps), j) += 2.0;
    const MixingMatrix mm = MixingMatrix::normalized(m);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(mm.matrix());
    const auto sv = svd.singularValues();
    if (sv(sv.size() - 1) > 0 && sv(0) / sv(sv.size() - 1) < max_kappa) return mm;
  }
}

inline ConcentrationMap random_map(std::size_t fps, std::size_t y, std::size_t x,
                                   std::mt19937_64& rng, double lo = 0.0, double hi = 10.0) {
  std::uniform_real_distribution<double> uni(lo, hi);
  ConcentrationMap u{Tensor4(Shape{fps, 1, y, x}), {}, Json::object()};
  for (double& v : u.data.values()) v = uni(rng);
  return u;
}

inline SpectralImage image_from(const Eigen::MatrixXd& columns) {
  // columns: L x P, one voxel spectrum per column.
  SpectralImage s{Tensor4(Shape{static_cast<std::size_t>(columns.rows()), 1, 1,
                                static_cast<std::size_t>(columns.cols())}),
                  {},
                  Json::object()};
  for (Eigen::Index l = 0; l < columns.rows(); ++l)
    for (Eigen::Index p = 0; p < columns.cols(); ++p)
      s.data(static_cast<std::size_t>(l), static_cast<std::size_t>(p)) = columns(l, p);
  return s;
}

inline Eigen::VectorXd voxel(const ConcentrationMap& u, std::size_t p) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(u.fluorophores()));
  for (std::size_t j = 0; j < u.fluorophores(); ++j) v(static_cast<Eigen::Index>(j)) = u.data(j, p);
  return v;
}

inline double max_abs_diff(const Tensor4& a, const Tensor4& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i)
    d = std::max(d, std::abs(a.values()[i] - b.values()[i]));
  return d;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("spmx_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace spmx::test
