#include <cmath>

#include "spmx/error.hpp"
#include "spmx/random.hpp"
#include "spmx/solvers.hpp"
#include "solver_util.hpp"

namespace spmx {

// Lee-Seung multiplicative updates for ||S - M U||_F^2 with the mixing
// matrix initialized from reference spectra. Per iteration: U update, M
// update, then column renormalization of M with the scale moved into U.
NmfResult unmix_nmf_ri(const SpectralImage& s, const MixingMatrix& m_init,
                       const SolverConfig& cfg) {
  detail::require_bands(s, m_init);
  cfg.validate();
  constexpr double kEps = 1e-12;
  const auto bands = static_cast<Eigen::Index>(s.bands());
  const auto voxels = static_cast<Eigen::Index>(s.voxels());
  const auto fps = static_cast<Eigen::Index>(m_init.fluorophores());

  // Channel-planar storage is already row-major L x P.
  Eigen::MatrixXd data(bands, voxels);
  for (Eigen::Index l = 0; l < bands; ++l)
    for (Eigen::Index p = 0; p < voxels; ++p)
      data(l, p) = std::max(s.data(static_cast<std::size_t>(l), static_cast<std::size_t>(p)), 0.0);

  Eigen::MatrixXd m = m_init.matrix();
  Eigen::MatrixXd u(fps, voxels);
  for (Eigen::Index p = 0; p < voxels; ++p) {
    PhiloxStream rng(cfg.rng_seed, static_cast<std::uint64_t>(p));
    const double scale = 2.0 * data.col(p).sum() / static_cast<double>(fps);
    for (Eigen::Index j = 0; j < fps; ++j) u(j, p) = rng.uniform() * scale;
  }

  NmfResult result{ConcentrationMap{}, m_init, {}, Json::object()};
  result.objective.reserve(static_cast<std::size_t>(cfg.nmf_iters));
  Eigen::MatrixXd numer_u(fps, voxels);
  Eigen::MatrixXd denom_u(fps, voxels);
  for (int it = 0; it < cfg.nmf_iters; ++it) {
    numer_u.noalias() = m.transpose() * data;
    denom_u.noalias() = (m.transpose() * m) * u;
    u = u.cwiseProduct(numer_u).cwiseQuotient(denom_u.array().max(kEps).matrix());

    const Eigen::MatrixXd uut = u * u.transpose();
    const Eigen::MatrixXd numer_m = data * u.transpose();
    const Eigen::MatrixXd denom_m = m * uut;
    m = m.cwiseProduct(numer_m).cwiseQuotient(denom_m.array().max(kEps).matrix());

    result.objective.push_back((data - m * u).squaredNorm());

    for (Eigen::Index j = 0; j < fps; ++j) {
      const double sum = m.col(j).sum();
      if (sum > 0.0) {
        m.col(j) /= sum;
        u.row(j) *= sum;
      } else {
        // Column collapsed (e.g. all-zero data): keep the reference spectrum.
        m.col(j) = m_init.matrix().col(j);
      }
    }
  }

  ConcentrationMap estimate = detail::make_estimate(s, m_init);
  for (Eigen::Index j = 0; j < fps; ++j)
    for (Eigen::Index p = 0; p < voxels; ++p)
      estimate.data(static_cast<std::size_t>(j), static_cast<std::size_t>(p)) = u(j, p);
  result.estimate = std::move(estimate);
  result.spectra = MixingMatrix(std::move(m), m_init.labels());
  result.meta = Json{{"method", "nmf-ri"},
                     {"iterations", cfg.nmf_iters},
                     {"final_objective", result.objective.empty() ? 0.0 : result.objective.back()}};
  return result;
}

}  // namespace spmx
