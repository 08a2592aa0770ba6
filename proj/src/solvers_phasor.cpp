#include <algorithm>
#include <cmath>
#include <numbers>

#include "spmx/error.hpp"
#include "spmx/parallel.hpp"
#include "spmx/solvers.hpp"
#include "solver_util.hpp"

namespace spmx {

Phasor phasor_transform(const SpectralImage& s, int harmonic) {
  if (harmonic < 1) fail(ErrorKind::InvalidArgument, "phasor harmonic must be >= 1");
  const std::size_t bands = s.bands();
  const std::size_t voxels = s.voxels();
  std::vector<double> cosines(bands), sines(bands);
  for (std::size_t l = 0; l < bands; ++l) {
    // Band centres sit at (l + 1/2) / L of the period.
    const double phase = 2.0 * std::numbers::pi * harmonic * (static_cast<double>(l) + 0.5) /
                         static_cast<double>(bands);
    cosines[l] = std::cos(phase);
    sines[l] = std::sin(phase);
  }
  Phasor out{std::vector<double>(voxels, 0.0), std::vector<double>(voxels, 0.0),
             std::vector<std::uint8_t>(voxels, 0)};
  parallel_for(voxels, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      double norm = 0.0;
      for (std::size_t l = 0; l < bands; ++l) norm += std::abs(s.data(l, p));
      if (norm == 0.0) {
        out.zero[p] = 1;
        continue;
      }
      double g = 0.0, q = 0.0;
      for (std::size_t l = 0; l < bands; ++l) {
        const double v = s.data(l, p) / norm;
        g += v * cosines[l];
        q += v * sines[l];
      }
      out.g[p] = std::clamp(g, -1.0, 1.0);
      out.s[p] = std::clamp(q, -1.0, 1.0);
    }
  });
  return out;
}

namespace {

std::size_t bin_index(double v, int bins) {
  const auto idx = static_cast<long long>(std::floor((v + 1.0) * 0.5 * bins));
  return static_cast<std::size_t>(std::clamp<long long>(idx, 0, bins - 1));
}

}  // namespace

UnmixResult unmix_hyu(const SpectralImage& s, const MixingMatrix& m, const SolverConfig& cfg) {
  detail::require_bands(s, m);
  cfg.validate();
  const Phasor phasor = phasor_transform(s, cfg.hyu_harmonic);
  const std::size_t bands = s.bands();
  const std::size_t voxels = s.voxels();
  const std::size_t fps = m.fluorophores();
  const auto bins = static_cast<std::size_t>(cfg.hyu_bins);

  // Aggregation phase: serial, pixel order, so bin sums are reproducible.
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> slot_of_bin(bins * bins, kNone);
  std::vector<std::size_t> slot_of_voxel(voxels, kNone);
  std::vector<double> norms(voxels, 0.0);
  std::vector<double> sums;  // slot-major, L values per slot
  std::vector<std::size_t> counts;
  for (std::size_t p = 0; p < voxels; ++p) {
    if (phasor.zero[p]) continue;
    const std::size_t bin =
        bin_index(phasor.g[p], cfg.hyu_bins) * bins + bin_index(phasor.s[p], cfg.hyu_bins);
    if (slot_of_bin[bin] == kNone) {
      slot_of_bin[bin] = counts.size();
      counts.push_back(0);
      sums.resize(sums.size() + bands, 0.0);
    }
    const std::size_t slot = slot_of_bin[bin];
    slot_of_voxel[p] = slot;
    double norm = 0.0;
    for (std::size_t l = 0; l < bands; ++l) norm += std::abs(s.data(l, p));
    norms[p] = norm;
    for (std::size_t l = 0; l < bands; ++l) sums[slot * bands + l] += s.data(l, p) / norm;
    ++counts[slot];
  }

  // Unmix each occupied bin's mean spectrum.
  const Eigen::MatrixXd pinv = pseudo_inverse(m.matrix());
  std::vector<double> abundances(counts.size() * fps, 0.0);
  for (std::size_t slot = 0; slot < counts.size(); ++slot) {
    const double inv_count = 1.0 / static_cast<double>(counts[slot]);
    for (std::size_t j = 0; j < fps; ++j) {
      double acc = 0.0;
      for (std::size_t l = 0; l < bands; ++l)
        acc += pinv(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l)) *
               (sums[slot * bands + l] * inv_count);
      abundances[slot * fps + j] = acc;
    }
  }

  UnmixResult result{detail::make_estimate(s, m), Json{{"method", "hyu"}}};
  parallel_for(voxels, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      const std::size_t slot = slot_of_voxel[p];
      if (slot == kNone) continue;
      for (std::size_t j = 0; j < fps; ++j)
        result.estimate.data(j, p) = abundances[slot * fps + j] * norms[p];
    }
  });
  std::size_t zero_voxels = 0;
  for (auto z : phasor.zero) zero_voxels += z;
  result.meta["occupied_bins"] = counts.size();
  result.meta["zero_voxels"] = zero_voxels;
  result.meta["harmonic"] = cfg.hyu_harmonic;
  result.meta["bins"] = cfg.hyu_bins;
  return result;
}

}  // namespace spmx
