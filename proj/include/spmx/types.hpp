#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <string>
#include <utility>
#include <vector>

#include "spmx/tensor.hpp"

namespace spmx {

using Json = nlohmann::json;

struct Band {
  double lo_nm = 0.0;
  double hi_nm = 0.0;
  double width() const noexcept { return hi_nm - lo_nm; }
  friend bool operator==(const Band&, const Band&) = default;
};

// L disjoint half-open wavelength intervals, sorted ascending.
class BandLayout {
 public:
  BandLayout() = default;
  explicit BandLayout(std::vector<Band> bands);

  // `count` contiguous bands of equal width covering [lo, hi).
  static BandLayout uniform(double lo_nm, double hi_nm, std::size_t count);

  std::size_t size() const noexcept { return bands_.size(); }
  const std::vector<Band>& bands() const noexcept { return bands_; }
  const Band& operator[](std::size_t i) const { return bands_[i]; }

  Json to_json() const;
  static BandLayout from_json(const Json& j);

  friend bool operator==(const BandLayout&, const BandLayout&) = default;

 private:
  std::vector<Band> bands_;
};

struct SpectrumSample {
  double wavelength_nm = 0.0;
  double intensity = 0.0;
  friend bool operator==(const SpectrumSample&, const SpectrumSample&) = default;
};

// Tabulated emission profile. Wavelengths strictly increasing, at least two
// samples, intensities non-negative and not all zero.
class EmissionSpectrum {
 public:
  EmissionSpectrum() = default;
  EmissionSpectrum(std::string name, std::vector<SpectrumSample> samples);

  const std::string& name() const noexcept { return name_; }
  const std::vector<SpectrumSample>& samples() const noexcept { return samples_; }

  // Piecewise-linear interpolation, zero outside the tabulated range.
  double value_at(double wavelength_nm) const noexcept;

  friend bool operator==(const EmissionSpectrum&, const EmissionSpectrum&) = default;

 private:
  std::string name_;
  std::vector<SpectrumSample> samples_;
};

// L x F, non-negative, every column sums to one.
class MixingMatrix {
 public:
  static constexpr double kColumnSumTolerance = 1e-9;

  MixingMatrix() = default;
  // Validates the invariants (tolerance `column_tol` on column sums).
  explicit MixingMatrix(Eigen::MatrixXd m, std::vector<std::string> labels = {},
                        double column_tol = kColumnSumTolerance);

  // Rescales every column to unit sum before validating.
  static MixingMatrix normalized(Eigen::MatrixXd m, std::vector<std::string> labels = {});

  std::size_t bands() const noexcept { return static_cast<std::size_t>(m_.rows()); }
  std::size_t fluorophores() const noexcept { return static_cast<std::size_t>(m_.cols()); }
  const Eigen::MatrixXd& matrix() const noexcept { return m_; }
  double operator()(std::size_t band, std::size_t fp) const {
    return m_(static_cast<Eigen::Index>(band), static_cast<Eigen::Index>(fp));
  }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

 private:
  Eigen::MatrixXd m_;
  std::vector<std::string> labels_;
};

// The observation S: one channel per spectral band.
struct SpectralImage {
  Tensor4 data;
  BandLayout layout;
  Json meta = Json::object();

  std::size_t bands() const noexcept { return data.channels(); }
  std::size_t voxels() const noexcept { return data.voxels(); }
};

// Fluorophore abundances U (ground truth or estimate).
struct ConcentrationMap {
  Tensor4 data;
  std::vector<std::string> labels;
  Json meta = Json::object();

  std::size_t fluorophores() const noexcept { return data.channels(); }
  std::size_t voxels() const noexcept { return data.voxels(); }
};

struct ConditioningReport {
  std::vector<double> singular_values;  // descending, length F
  double kappa = 1.0;                   // +inf when rank deficient
  double amplification_bound = 1.0;     // 1 / sigma_F, +inf when sigma_F == 0
  bool rank_deficient = false;

  Json to_json() const;
};

// Serializes +/-inf and nan as the strings "inf", "-inf", "nan".
Json number_to_json(double v);
double number_from_json(const Json& j);

}  // namespace spmx
