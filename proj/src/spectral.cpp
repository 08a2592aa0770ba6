#include "spmx/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "spmx/error.hpp"
#include "spmx/parallel.hpp"
#include "text_util.hpp"

namespace spmx {
namespace {

// Exact integral of the piecewise-linear spectrum over [lo, hi].
double integrate(const EmissionSpectrum& spec, double lo, double hi) {
  const auto& s = spec.samples();
  lo = std::max(lo, s.front().wavelength_nm);
  hi = std::min(hi, s.back().wavelength_nm);
  if (!(hi > lo)) return 0.0;
  double total = 0.0;
  double prev_w = lo;
  double prev_v = spec.value_at(lo);
  for (const auto& sample : s) {
    if (sample.wavelength_nm <= lo) continue;
    if (sample.wavelength_nm >= hi) break;
    total += 0.5 * (prev_v + sample.intensity) * (sample.wavelength_nm - prev_w);
    prev_w = sample.wavelength_nm;
    prev_v = sample.intensity;
  }
  total += 0.5 * (prev_v + spec.value_at(hi)) * (hi - prev_w);
  return total;
}

}  // namespace

Eigen::VectorXd discretize_spectrum(const EmissionSpectrum& spec, const BandLayout& layout) {
  if (spec.samples().size() < 2)
    fail(ErrorKind::MalformedSpectrum, "spectrum '" + spec.name() + "' has fewer than two samples");
  Eigen::VectorXd col(static_cast<Eigen::Index>(layout.size()));
  for (std::size_t l = 0; l < layout.size(); ++l) {
    const Band& b = layout[l];
    col[static_cast<Eigen::Index>(l)] = integrate(spec, b.lo_nm, b.hi_nm) / b.width();
  }
  const double sum = col.sum();
  if (!(sum > 0.0))
    fail(ErrorKind::NoOverlap,
         "spectrum '" + spec.name() + "' does not overlap any band of the layout");
  return col / sum;
}

MixingMatrix build_mixing_matrix(const std::vector<EmissionSpectrum>& specs,
                                 const BandLayout& layout) {
  if (specs.empty()) fail(ErrorKind::InvalidArgument, "need at least one emission spectrum");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(layout.size()),
                    static_cast<Eigen::Index>(specs.size()));
  std::vector<std::string> labels;
  for (std::size_t j = 0; j < specs.size(); ++j) {
    try {
      m.col(static_cast<Eigen::Index>(j)) = discretize_spectrum(specs[j], layout);
    } catch (const Error& e) {
      fail(e.kind(), "fluorophore '" + specs[j].name() + "': " + e.what());
    }
    labels.push_back(specs[j].name());
  }
  return MixingMatrix(std::move(m), std::move(labels));
}

EmissionSpectrum shift_spectrum(const EmissionSpectrum& spec, double delta_nm) {
  std::vector<SpectrumSample> samples = spec.samples();
  for (auto& s : samples) s.wavelength_nm += delta_nm;
  return EmissionSpectrum(spec.name(), std::move(samples));
}

double LogNormalShape::operator()(double w) const noexcept {
  const double x = (w - peak_nm) / width_nm;
  if (std::abs(skew) < 1e-9) return std::exp(-4.0 * std::log(2.0) * x * x);
  const double arg = 1.0 + 2.0 * skew * x;
  if (arg <= 0.0) return 0.0;
  const double t = std::log(arg) / skew;
  return std::exp(-std::log(2.0) * t * t);
}

EmissionSpectrum tabulate(const std::string& name, const LogNormalShape& shape, double step_nm) {
  if (!(step_nm > 0.0) || !(shape.width_nm > 0.0))
    fail(ErrorKind::InvalidArgument, "tabulation needs positive step and width");
  // Walk outwards from the peak until the profile is negligible.
  const double floor_value = 1e-6;
  double lo = shape.peak_nm;
  while (shape(lo - step_nm) > floor_value) lo -= step_nm;
  double hi = shape.peak_nm;
  while (shape(hi + step_nm) > floor_value) hi += step_nm;
  lo -= step_nm;
  hi += step_nm;
  std::vector<SpectrumSample> samples;
  const auto n = static_cast<std::size_t>(std::llround((hi - lo) / step_nm));
  samples.reserve(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    const double w = lo + step_nm * static_cast<double>(i);
    samples.push_back({w, shape(w)});
  }
  return EmissionSpectrum(name, std::move(samples));
}

LogNormalShape builtin_shape(const std::string& name) {
  static const std::map<std::string, LogNormalShape> kShapes = {
      {"mTurquoise", {474.0, 48.0, 0.35}},
      {"EGFP", {507.0, 38.0, 0.35}},
      {"EYFP", {527.0, 36.0, 0.35}},
      {"mOrange", {562.0, 40.0, 0.3}},
      {"mScarlet", {594.0, 42.0, 0.3}},
  };
  const auto it = kShapes.find(name);
  if (it == kShapes.end())
    fail(ErrorKind::InvalidConfig, "unknown built-in fluorophore '" + name + "'");
  return it->second;
}

EmissionSpectrum builtin_spectrum(const std::string& name) {
  return tabulate(name, builtin_shape(name));
}

EmissionSpectrum resolve_spectrum(const std::string& ref, const std::filesystem::path& spectra_dir,
                                  const std::filesystem::path& base_dir) {
  auto anchored = [&](std::filesystem::path p) {
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  std::filesystem::path file;
  if (ref.size() > 4 && ref.compare(ref.size() - 4, 4, ".csv") == 0) file = anchored(ref);
  else if (!spectra_dir.empty()) file = anchored(spectra_dir) / (ref + ".csv");
  if (file.empty()) return builtin_spectrum(ref);
  if (!std::filesystem::exists(file))
    fail(ErrorKind::InvalidConfig,
         "fluorophore '" + ref + "': spectrum file " + file.string() + " not found");
  try {
    return read_spectrum_csv(file, file.stem().string());
  } catch (const Error& e) {
    fail(ErrorKind::InvalidConfig, "fluorophore '" + ref + "': " + e.what());
  }
}

SpectralImage mix_forward(const ConcentrationMap& u, const MixingMatrix& m) {
  if (u.fluorophores() != m.fluorophores())
    fail(ErrorKind::ShapeMismatch, "mixing matrix has " + std::to_string(m.fluorophores()) +
                                       " columns but the concentration map has " +
                                       std::to_string(u.fluorophores()) + " channels");
  const std::size_t bands = m.bands();
  const std::size_t fps = m.fluorophores();
  Shape shape = u.data.shape();
  shape.channels = bands;
  SpectralImage out{Tensor4(shape), BandLayout{}, Json::object()};
  const Eigen::MatrixXd& mm = m.matrix();
  parallel_for(u.voxels(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      for (std::size_t l = 0; l < bands; ++l) {
        double acc = 0.0;
        for (std::size_t j = 0; j < fps; ++j)
          acc += mm(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(j)) * u.data(j, p);
        out.data(l, p) = acc;
      }
    }
  });
  return out;
}

ConditioningReport analyze_conditioning(const MixingMatrix& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m.matrix());
  const Eigen::VectorXd& sv = svd.singularValues();
  ConditioningReport report;
  report.singular_values.assign(m.fluorophores(), 0.0);
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    report.singular_values[static_cast<std::size_t>(i)] = sv[i];
  const double sigma_max = report.singular_values.front();
  const double sigma_min = report.singular_values.back();
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (!(sigma_min >= kSingularTolerance * sigma_max) || sigma_min == 0.0) {
    report.rank_deficient = true;
    report.kappa = inf;
  } else {
    report.kappa = sigma_max / sigma_min;
  }
  report.amplification_bound = sigma_min > 0.0 ? 1.0 / sigma_min : inf;
  return report;
}

EmissionSpectrum read_spectrum_csv(const std::filesystem::path& path, std::string name) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot open spectrum file " + path.string());
  if (name.empty()) name = path.stem().string();
  std::string line;
  if (!std::getline(in, line))
    fail(ErrorKind::MalformedSpectrum, "spectrum file " + path.string() + " is empty");
  const auto header = detail::split_csv_line(line);
  if (header.size() != 2 || header[0] != "wavelength_nm" || header[1] != "intensity")
    fail(ErrorKind::MalformedSpectrum,
         "spectrum file " + path.string() + " must start with header wavelength_nm,intensity");
  std::vector<SpectrumSample> samples;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    SpectrumSample s;
    if (cells.size() != 2 || !detail::parse_double(cells[0], s.wavelength_nm) ||
        !detail::parse_double(cells[1], s.intensity))
      fail(ErrorKind::MalformedSpectrum,
           "spectrum file " + path.string() + " row " + std::to_string(row) + " is malformed");
    samples.push_back(s);
  }
  return EmissionSpectrum(std::move(name), std::move(samples));
}

void write_spectrum_csv(const std::filesystem::path& path, const EmissionSpectrum& spec) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
  out << "wavelength_nm,intensity\n";
  for (const auto& s : spec.samples())
    out << detail::format_double(s.wavelength_nm) << ',' << detail::format_double(s.intensity)
        << '\n';
  if (!out) fail(ErrorKind::IoError, "write failed for " + path.string());
}

BandLayout read_layout_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot open band layout " + path.string());
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    fail(ErrorKind::InvalidConfig, "band layout " + path.string() + ": " + e.what());
  }
  return BandLayout::from_json(j);
}

void write_layout_json(const std::filesystem::path& path, const BandLayout& layout) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
  out << layout.to_json().dump(2) << '\n';
}

MixingCsv read_mixing_csv(const std::filesystem::path& path, bool renormalize,
                          double column_tol) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot open mixing matrix " + path.string());
  std::string line;
  if (!std::getline(in, line))
    fail(ErrorKind::InvalidConfig, "mixing matrix " + path.string() + " is empty");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 3 || header[0] != "band_lo_nm" || header[1] != "band_hi_nm")
    fail(ErrorKind::InvalidConfig, "mixing matrix " + path.string() +
                                       " must start with header band_lo_nm,band_hi_nm,<labels>");
  const std::vector<std::string> labels(header.begin() + 2, header.end());
  std::vector<Band> bands;
  std::vector<std::vector<double>> rows;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      fail(ErrorKind::InvalidConfig, "mixing matrix row " + std::to_string(row) +
                                         " has the wrong number of columns");
    std::vector<double> values(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (!detail::parse_double(cells[i], values[i]) || !std::isfinite(values[i]))
        fail(ErrorKind::InvalidConfig, "mixing matrix row " + std::to_string(row) +
                                           " has a non-numeric cell");
    bands.push_back({values[0], values[1]});
    rows.emplace_back(values.begin() + 2, values.end());
  }
  if (rows.empty()) fail(ErrorKind::InvalidConfig, "mixing matrix has no band rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(labels.size()));
  for (std::size_t l = 0; l < rows.size(); ++l)
    for (std::size_t j = 0; j < labels.size(); ++j)
      m(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(j)) = rows[l][j];
  try {
    BandLayout layout(std::move(bands));
    if (renormalize) return {MixingMatrix::normalized(std::move(m), labels), std::move(layout)};
    return {MixingMatrix(std::move(m), labels, column_tol), std::move(layout)};
  } catch (const Error& e) {
    fail(ErrorKind::InvalidConfig, "mixing matrix " + path.string() + ": " + e.what());
  }
}

void write_mixing_csv(const std::filesystem::path& path, const MixingMatrix& m,
                      const BandLayout& layout) {
  if (layout.size() != m.bands())
    fail(ErrorKind::ShapeMismatch, "band layout and mixing matrix disagree on L");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
  out << "band_lo_nm,band_hi_nm";
  for (const auto& label : m.labels()) out << ',' << label;
  out << '\n';
  for (std::size_t l = 0; l < m.bands(); ++l) {
    out << detail::format_double(layout[l].lo_nm) << ','
        << detail::format_double(layout[l].hi_nm);
    for (std::size_t j = 0; j < m.fluorophores(); ++j)
      out << ',' << detail::format_double(m(l, j));
    out << '\n';
  }
  if (!out) fail(ErrorKind::IoError, "write failed for " + path.string());
}

}  // namespace spmx
