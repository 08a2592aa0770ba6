#include "spmx/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spmx/error.hpp"

namespace spmx {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::MalformedSpectrum: return "MalformedSpectrum";
    case ErrorKind::NoOverlap: return "NoOverlap";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::InvalidPartition: return "InvalidPartition";
    case ErrorKind::DegenerateClustering: return "DegenerateClustering";
    case ErrorKind::ZeroPrediction: return "ZeroPrediction";
    case ErrorKind::DegenerateGT: return "DegenerateGT";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::TooSmall: return "TooSmall";
    case ErrorKind::TooFewPatches: return "TooFewPatches";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::HeaderMismatch: return "HeaderMismatch";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::TruncatedPayload: return "TruncatedPayload";
    case ErrorKind::UnsupportedDtype: return "UnsupportedDtype";
  }
  return "Unknown";
}

Tensor4::Tensor4(Shape shape, std::vector<double> data)
    : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size())
    fail(ErrorKind::ShapeMismatch, "tensor data length does not match its shape");
}

Tensor4 Tensor4::crop(std::size_t z0, std::size_t y0, std::size_t x0, std::size_t nz,
                      std::size_t ny, std::size_t nx) const {
  if (z0 + nz > shape_.z || y0 + ny > shape_.y || x0 + nx > shape_.x)
    fail(ErrorKind::ShapeMismatch, "crop box exceeds tensor bounds");
  Tensor4 out(Shape{shape_.channels, nz, ny, nx});
  for (std::size_t c = 0; c < shape_.channels; ++c)
    for (std::size_t z = 0; z < nz; ++z)
      for (std::size_t y = 0; y < ny; ++y)
        for (std::size_t x = 0; x < nx; ++x)
          out.at(c, z, y, x) = at(c, z0 + z, y0 + y, x0 + x);
  return out;
}

BandLayout::BandLayout(std::vector<Band> bands) : bands_(std::move(bands)) {
  if (bands_.empty()) fail(ErrorKind::InvalidArgument, "band layout needs at least one band");
  for (std::size_t i = 0; i < bands_.size(); ++i) {
    const Band& b = bands_[i];
    if (!std::isfinite(b.lo_nm) || !std::isfinite(b.hi_nm) || !(b.hi_nm > b.lo_nm))
      fail(ErrorKind::InvalidArgument, "band " + std::to_string(i) + " must satisfy hi > lo");
    if (i > 0 && b.lo_nm < bands_[i - 1].hi_nm)
      fail(ErrorKind::InvalidArgument,
           "bands must be sorted ascending and pairwise disjoint (band " + std::to_string(i) + ")");
  }
}

BandLayout BandLayout::uniform(double lo_nm, double hi_nm, std::size_t count) {
  if (count == 0 || !(hi_nm > lo_nm))
    fail(ErrorKind::InvalidArgument, "uniform layout needs count >= 1 and hi > lo");
  std::vector<Band> bands(count);
  const double width = (hi_nm - lo_nm) / static_cast<double>(count);
  for (std::size_t i = 0; i < count; ++i) {
    bands[i].lo_nm = lo_nm + width * static_cast<double>(i);
    bands[i].hi_nm = i + 1 == count ? hi_nm : lo_nm + width * static_cast<double>(i + 1);
  }
  return BandLayout(std::move(bands));
}

Json BandLayout::to_json() const {
  Json arr = Json::array();
  for (const Band& b : bands_) arr.push_back({b.lo_nm, b.hi_nm});
  return Json{{"bands", arr}};
}

BandLayout BandLayout::from_json(const Json& j) {
  if (!j.is_object() || !j.contains("bands") || !j["bands"].is_array())
    fail(ErrorKind::InvalidConfig, "band layout JSON must be {\"bands\": [[lo, hi], ...]}");
  std::vector<Band> bands;
  for (const Json& b : j["bands"]) {
    if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number())
      fail(ErrorKind::InvalidConfig, "each band must be a [lo, hi] pair of numbers");
    bands.push_back(Band{b[0].get<double>(), b[1].get<double>()});
  }
  try {
    return BandLayout(std::move(bands));
  } catch (const Error& e) {
    fail(ErrorKind::InvalidConfig, e.what());
  }
}

EmissionSpectrum::EmissionSpectrum(std::string name, std::vector<SpectrumSample> samples)
    : name_(std::move(name)), samples_(std::move(samples)) {
  if (samples_.size() < 2)
    fail(ErrorKind::MalformedSpectrum, "spectrum '" + name_ + "' needs at least two samples");
  bool any_positive = false;
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto& s = samples_[i];
    if (!std::isfinite(s.wavelength_nm) || !std::isfinite(s.intensity) || s.intensity < 0.0)
      fail(ErrorKind::MalformedSpectrum,
           "spectrum '" + name_ + "' has a non-finite or negative sample");
    if (i > 0 && !(s.wavelength_nm > samples_[i - 1].wavelength_nm))
      fail(ErrorKind::MalformedSpectrum,
           "spectrum '" + name_ + "' wavelengths are not strictly increasing");
    any_positive = any_positive || s.intensity > 0.0;
  }
  if (!any_positive)
    fail(ErrorKind::MalformedSpectrum, "spectrum '" + name_ + "' is identically zero");
}

double EmissionSpectrum::value_at(double w) const noexcept {
  if (samples_.empty() || w < samples_.front().wavelength_nm ||
      w > samples_.back().wavelength_nm)
    return 0.0;
  auto hi = std::upper_bound(samples_.begin(), samples_.end(), w,
                             [](double v, const SpectrumSample& s) { return v < s.wavelength_nm; });
  if (hi == samples_.end()) return samples_.back().intensity;
  auto lo = hi - 1;
  const double t = (w - lo->wavelength_nm) / (hi->wavelength_nm - lo->wavelength_nm);
  return lo->intensity + t * (hi->intensity - lo->intensity);
}

MixingMatrix::MixingMatrix(Eigen::MatrixXd m, std::vector<std::string> labels, double column_tol)
    : m_(std::move(m)), labels_(std::move(labels)) {
  if (m_.rows() < 1 || m_.cols() < 1)
    fail(ErrorKind::InvalidArgument, "mixing matrix needs L >= 1 and F >= 1");
  if (labels_.empty()) {
    for (Eigen::Index j = 0; j < m_.cols(); ++j) labels_.push_back("fp" + std::to_string(j));
  }
  if (labels_.size() != static_cast<std::size_t>(m_.cols()))
    fail(ErrorKind::ShapeMismatch, "mixing matrix label count differs from column count");
  for (Eigen::Index j = 0; j < m_.cols(); ++j) {
    double sum = 0.0;
    for (Eigen::Index l = 0; l < m_.rows(); ++l) {
      const double v = m_(l, j);
      if (!std::isfinite(v) || v < 0.0)
        fail(ErrorKind::InvalidArgument,
             "mixing matrix column '" + labels_[static_cast<std::size_t>(j)] +
                 "' has a negative or non-finite entry");
      sum += v;
    }
    if (std::abs(sum - 1.0) > column_tol)
      fail(ErrorKind::InvalidArgument, "mixing matrix column '" +
                                           labels_[static_cast<std::size_t>(j)] +
                                           "' is not l1-normalized");
  }
}

MixingMatrix MixingMatrix::normalized(Eigen::MatrixXd m, std::vector<std::string> labels) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double sum = m.col(j).sum();
    if (!(sum > 0.0))
      fail(ErrorKind::InvalidArgument, "cannot normalize a mixing column with zero sum");
    m.col(j) /= sum;
  }
  return MixingMatrix(std::move(m), std::move(labels));
}

Json number_to_json(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double number_from_json(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  fail(ErrorKind::InvalidConfig, "expected a number, \"inf\" or \"nan\"");
}

Json ConditioningReport::to_json() const {
  Json sv = Json::array();
  for (double s : singular_values) sv.push_back(s);
  return Json{{"singular_values", sv},
              {"kappa", number_to_json(kappa)},
              {"amplification_bound", number_to_json(amplification_bound)},
              {"rank_deficient", rank_deficient}};
}

}  // namespace spmx
