#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "spmx/types.hpp"

namespace spmx {

// Mean of the interpolated spectrum over each band (exact trapezoidal
// integration of the piecewise-linear profile divided by the band width),
// then l1-normalized. Throws NoOverlap when every band integral is zero.
Eigen::VectorXd discretize_spectrum(const EmissionSpectrum& spec, const BandLayout& layout);

// Column j = discretize_spectrum(specs[j]). Errors are re-raised with the
// offending fluorophore name.
MixingMatrix build_mixing_matrix(const std::vector<EmissionSpectrum>& specs,
                                 const BandLayout& layout);

// Rigid translation of the wavelength axis.
EmissionSpectrum shift_spectrum(const EmissionSpectrum& spec, double delta_nm);

// Skewed log-normal emission line shape.
//   I(w) = exp(-ln2 * (ln(1 + 2*skew*(w - peak)/width) / skew)^2)
// for 1 + 2*skew*(w - peak)/width > 0, zero otherwise. `width` is the FWHM;
// skew -> 0 recovers a Gaussian. Positive skew gives the red tail typical
// of fluorescent proteins.
struct LogNormalShape {
  double peak_nm = 510.0;
  double width_nm = 40.0;
  double skew = 0.3;

  double operator()(double wavelength_nm) const noexcept;
};

// Tabulates `shape` every `step_nm` over the range where it exceeds 1e-6.
EmissionSpectrum tabulate(const std::string& name, const LogNormalShape& shape,
                          double step_nm = 1.0);

// Built-in parametric stand-ins for common fluorescent proteins.
// Known names: mTurquoise, EGFP, EYFP, mOrange, mScarlet.
LogNormalShape builtin_shape(const std::string& name);
EmissionSpectrum builtin_spectrum(const std::string& name);

// Resolves a fluorophore reference. "*.csv" is a spectrum file (relative to
// base_dir); otherwise the name is looked up as <spectra_dir>/<name>.csv when
// spectra_dir is given, else among the built-ins. Failures are InvalidConfig
// and name the fluorophore.
EmissionSpectrum resolve_spectrum(const std::string& ref,
                                  const std::filesystem::path& spectra_dir = {},
                                  const std::filesystem::path& base_dir = {});

// Forward model S = M U (noise free). Per-voxel inner loop over j ascending.
SpectralImage mix_forward(const ConcentrationMap& u, const MixingMatrix& m);

ConditioningReport analyze_conditioning(const MixingMatrix& m);

// Relative threshold under which a singular value counts as zero.
inline constexpr double kSingularTolerance = 1e-12;

// Spectrum CSV: header `wavelength_nm,intensity`, one sample per row.
EmissionSpectrum read_spectrum_csv(const std::filesystem::path& path, std::string name = {});
void write_spectrum_csv(const std::filesystem::path& path, const EmissionSpectrum& spec);

// BandLayout JSON: {"bands": [[lo, hi], ...]}
BandLayout read_layout_json(const std::filesystem::path& path);
void write_layout_json(const std::filesystem::path& path, const BandLayout& layout);

// Mixing CSV: header `band_lo_nm,band_hi_nm,<label_1>,...,<label_F>`, one row
// per band. Columns must sum to 1 within `column_tol` unless `renormalize`.
struct MixingCsv {
  MixingMatrix matrix;
  BandLayout layout;
};
MixingCsv read_mixing_csv(const std::filesystem::path& path, bool renormalize = false,
                          double column_tol = 1e-6);
void write_mixing_csv(const std::filesystem::path& path, const MixingMatrix& m,
                      const BandLayout& layout);

}  // namespace spmx
