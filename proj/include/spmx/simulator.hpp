#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spmx/types.hpp"

namespace spmx {

// Detector and exposure model. Expected photons per band and voxel are
// (M U) * photons_per_unit_per_ms * exposure_ms.
struct AcquisitionConfig {
  double exposure_ms = 20.0;
  double photons_per_unit_per_ms = 45.0;  // calibrated: SNR_sp ~ 45 at 20 ms
  double read_noise_sigma = 2.0;  // ADU
  double offset = 100.0;          // ADU
  bool quantize = false;
  int bit_depth = 16;
  bool noiseless = false;  // Poisson replaced by its mean, no read noise
  std::uint64_t rng_seed = 0;

  double gain() const noexcept { return photons_per_unit_per_ms * exposure_ms; }
  void validate() const;
  Json to_json() const;
  static AcquisitionConfig from_json(const Json& j);
};

enum class PhantomKind { Blobs, Filaments, Rings, Mixed };

struct PhantomSpec {
  PhantomKind kind = PhantomKind::Blobs;
  std::size_t z = 1;
  std::size_t y = 128;
  std::size_t x = 128;
  std::size_t fluorophores = 2;
  double density = 20.0;        // objects per 10^4 voxels, per channel
  double size_px = 3.0;         // blob sigma / filament half-width / ring thickness scale
  double intensity = 1.0;       // peak concentration of one object
  double colocalization = 0.0;  // fraction of channel j+1 objects placed on channel j objects
  std::uint64_t rng_seed = 0;
  std::vector<std::string> labels;  // optional fluorophore names, length F

  void validate() const;
  Json to_json() const;
  static PhantomSpec from_json(const Json& j);
};

std::string phantom_kind_name(PhantomKind kind);

ConcentrationMap generate_phantom(const PhantomSpec& spec);

// Poisson shot noise, Gaussian read noise, offset and optional quantization.
// Each (band, voxel) draws from its own counter-based substream, so the
// result does not depend on evaluation order or thread count. The output
// meta records gain, offset and seeds.
SpectralImage simulate_acquisition(const ConcentrationMap& u, const MixingMatrix& m,
                                   const AcquisitionConfig& acq,
                                   const std::optional<BandLayout>& layout = std::nullopt);

// Undoes offset and gain recorded by simulate_acquisition:
// (S - offset) / gain. Images without that meta are returned unchanged.
SpectralImage normalize_acquisition(const SpectralImage& s);

// A partition of band indices 0..L-1 into contiguous, disjoint, ordered runs.
using BandGroups = std::vector<std::vector<std::size_t>>;

void validate_groups(const BandGroups& groups, std::size_t bands);
// `count` contiguous runs whose sizes differ by at most one (larger first).
BandGroups even_groups(std::size_t bands, std::size_t count);

SpectralImage rebin_bands(const SpectralImage& s, const BandGroups& groups);
MixingMatrix rebin_mixing(const MixingMatrix& m, const BandGroups& groups);
BandLayout rebin_layout(const BandLayout& layout, const BandGroups& groups);

}  // namespace spmx
