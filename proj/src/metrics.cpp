#include "spmx/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "spmx/error.hpp"

namespace spmx {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_same(ChannelView a, ChannelView b) {
  if (a.values.size() != b.values.size() || a.z != b.z || a.y != b.y || a.x != b.x)
    fail(ErrorKind::ShapeMismatch, "metric inputs differ in shape");
  if (a.values.empty()) fail(ErrorKind::DegenerateInput, "metric inputs are empty");
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

std::vector<double> rescaled(ChannelView gt, ChannelView pred) {
  const double alpha = fit_global_scale(gt, pred);
  std::vector<double> out(pred.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * pred.values[i];
  return out;
}

double value_range(std::span<const double> v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo;
}

// Row-major plane with its dimensions.
struct Plane {
  std::size_t h = 0, w = 0;
  std::vector<double> v;
  double operator()(std::size_t r, std::size_t c) const { return v[r * w + c]; }
};

constexpr std::size_t kWindow = 11;
constexpr double kSigma = 1.5;
constexpr std::array<double, 5> kScaleWeights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

std::array<double, kWindow> gaussian_window() {
  std::array<double, kWindow> g{};
  double sum = 0.0;
  for (std::size_t i = 0; i < kWindow; ++i) {
    const double d = static_cast<double>(i) - static_cast<double>(kWindow / 2);
    g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += g[i];
  }
  for (double& x : g) x /= sum;
  return g;
}

// Separable "valid" Gaussian filter.
Plane filter(const Plane& in) {
  static const auto g = gaussian_window();
  Plane rows{in.h, in.w - kWindow + 1, {}};
  rows.v.assign(rows.h * rows.w, 0.0);
  for (std::size_t r = 0; r < rows.h; ++r)
    for (std::size_t c = 0; c < rows.w; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kWindow; ++k) acc += g[k] * in(r, c + k);
      rows.v[r * rows.w + c] = acc;
    }
  Plane out{in.h - kWindow + 1, rows.w, {}};
  out.v.assign(out.h * out.w, 0.0);
  for (std::size_t r = 0; r < out.h; ++r)
    for (std::size_t c = 0; c < out.w; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kWindow; ++k) acc += g[k] * rows(r + k, c);
      out.v[r * out.w + c] = acc;
    }
  return out;
}

Plane product(const Plane& a, const Plane& b) {
  Plane out{a.h, a.w, std::vector<double>(a.v.size())};
  for (std::size_t i = 0; i < a.v.size(); ++i) out.v[i] = a.v[i] * b.v[i];
  return out;
}

// 2x2 average pooling, zero padding of one on odd dimensions (padding counts
// towards the average).
Plane downsample(const Plane& in) {
  const std::size_t pad_h = in.h % 2, pad_w = in.w % 2;
  Plane out{(in.h + 2 * pad_h - 2) / 2 + 1, (in.w + 2 * pad_w - 2) / 2 + 1, {}};
  out.v.assign(out.h * out.w, 0.0);
  for (std::size_t r = 0; r < out.h; ++r)
    for (std::size_t c = 0; c < out.w; ++c) {
      double acc = 0.0;
      for (std::size_t dr = 0; dr < 2; ++dr)
        for (std::size_t dc = 0; dc < 2; ++dc) {
          const auto rr = static_cast<long>(2 * r + dr) - static_cast<long>(pad_h);
          const auto cc = static_cast<long>(2 * c + dc) - static_cast<long>(pad_w);
          if (rr >= 0 && cc >= 0 && rr < static_cast<long>(in.h) && cc < static_cast<long>(in.w))
            acc += in(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
        }
      out.v[r * out.w + c] = acc / 4.0;
    }
  return out;
}

struct SsimTerms {
  double ssim;
  double cs;
};

SsimTerms ssim_terms(const Plane& a, const Plane& b, double data_range) {
  const double c1 = std::pow(0.01 * data_range, 2);
  const double c2 = std::pow(0.03 * data_range, 2);
  const Plane mu1 = filter(a), mu2 = filter(b);
  const Plane aa = filter(product(a, a)), bb = filter(product(b, b)), ab = filter(product(a, b));
  double ssim_sum = 0.0, cs_sum = 0.0;
  for (std::size_t i = 0; i < mu1.v.size(); ++i) {
    const double m1 = mu1.v[i], m2 = mu2.v[i];
    const double s11 = aa.v[i] - m1 * m1;
    const double s22 = bb.v[i] - m2 * m2;
    const double s12 = ab.v[i] - m1 * m2;
    const double cs = (2.0 * s12 + c2) / (s11 + s22 + c2);
    cs_sum += cs;
    ssim_sum += (2.0 * m1 * m2 + c1) / (m1 * m1 + m2 * m2 + c1) * cs;
  }
  const auto n = static_cast<double>(mu1.v.size());
  return {ssim_sum / n, cs_sum / n};
}

double ms_ssim_plane(Plane a, Plane b, double data_range, int scales) {
  // The canonical weights are used as published (they sum to 1.0001); only a
  // truncated pyramid is renormalized.
  double weight_sum = 1.0;
  if (scales < static_cast<int>(kScaleWeights.size())) {
    weight_sum = 0.0;
    for (int i = 0; i < scales; ++i) weight_sum += kScaleWeights[static_cast<std::size_t>(i)];
  }
  double result = 1.0;
  for (int i = 0; i < scales; ++i) {
    const SsimTerms t = ssim_terms(a, b, data_range);
    const double w = kScaleWeights[static_cast<std::size_t>(i)] / weight_sum;
    if (i + 1 < scales) {
      result *= std::pow(std::max(t.cs, 0.0), w);
      a = downsample(a);
      b = downsample(b);
    } else {
      result *= std::pow(std::max(t.ssim, 0.0), w);
    }
  }
  return result;
}

}  // namespace

double fit_global_scale(ChannelView gt, ChannelView pred) {
  require_same(gt, pred);
  const double pp = dot(pred.values, pred.values);
  if (!(pp > 0.0)) fail(ErrorKind::ZeroPrediction, "prediction is identically zero");
  return dot(gt.values, pred.values) / pp;
}

double psnr_ri(ChannelView gt, ChannelView pred) {
  require_same(gt, pred);
  const double peak = value_range(gt.values);
  if (!(peak > 0.0)) fail(ErrorKind::DegenerateGT, "ground truth is constant");
  const std::vector<double> scaled = rescaled(gt, pred);
  double mse = 0.0;
  for (std::size_t i = 0; i < scaled.size(); ++i) {
    const double d = gt.values[i] - scaled[i];
    mse += d * d;
  }
  mse /= static_cast<double>(scaled.size());
  // Residuals at the rounding level of the alpha fit count as a perfect
  // prediction, so pred = c * gt scores +inf for every c > 0.
  double magnitude = 0.0;
  for (double v : gt.values) magnitude = std::max(magnitude, std::abs(v));
  const double floor = 16.0 * std::numeric_limits<double>::epsilon() * magnitude;
  if (mse <= floor * floor) return kInf;
  return 10.0 * std::log10(peak * peak / mse);
}

int ms_ssim_scales(std::size_t height, std::size_t width) {
  const std::size_t side = std::min(height, width);
  int scales = 0;
  while (scales < 5 && side > (kWindow - 1) * (std::size_t{1} << scales)) ++scales;
  return scales;
}

double ms_ssim_ri(ChannelView gt, ChannelView pred) {
  require_same(gt, pred);
  if (gt.y < 32 || gt.x < 32)
    fail(ErrorKind::TooSmall, "MS-SSIM needs at least 32x32 pixels per plane");
  const double range = value_range(gt.values);
  if (!(range > 0.0)) fail(ErrorKind::DegenerateGT, "ground truth is constant");
  const std::vector<double> scaled = rescaled(gt, pred);
  const int scales = ms_ssim_scales(gt.y, gt.x);
  const std::size_t plane = gt.y * gt.x;
  double total = 0.0;
  for (std::size_t z = 0; z < gt.z; ++z) {
    Plane a{gt.y, gt.x, std::vector<double>(gt.values.begin() + static_cast<long>(z * plane),
                                            gt.values.begin() + static_cast<long>((z + 1) * plane))};
    Plane b{gt.y, gt.x, std::vector<double>(scaled.begin() + static_cast<long>(z * plane),
                                            scaled.begin() + static_cast<long>((z + 1) * plane))};
    total += ms_ssim_plane(std::move(a), std::move(b), range, scales);
  }
  return total / static_cast<double>(gt.z);
}

double pearson(ChannelView a, ChannelView b) {
  require_same(a, b);
  const auto n = static_cast<double>(a.values.size());
  const double ma = std::accumulate(a.values.begin(), a.values.end(), 0.0) / n;
  const double mb = std::accumulate(b.values.begin(), b.values.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double da = a.values[i] - ma, db = b.values[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) fail(ErrorKind::DegenerateInput, "pearson input is constant");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double percentile(std::span<const double> values, double q) {
  if (values.empty()) fail(ErrorKind::DegenerateInput, "percentile of an empty set");
  std::vector<double> v(values.begin(), values.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  std::nth_element(v.begin(), v.begin() + static_cast<long>(lo), v.end());
  const double vlo = v[lo];
  if (hi == lo) return vlo;
  const double vhi = *std::min_element(v.begin() + static_cast<long>(lo) + 1, v.end());
  return vlo + (pos - static_cast<double>(lo)) * (vhi - vlo);
}

double snr(ChannelView x, const SnrOptions& opts) {
  const std::size_t py = x.y / opts.patch, px = x.x / opts.patch;
  const std::size_t patches = x.z * py * px;
  if (patches < opts.min_patches || patches == 0)
    fail(ErrorKind::TooFewPatches, "SNR needs at least " + std::to_string(opts.min_patches) +
                                       " background patches, image has " +
                                       std::to_string(patches));
  std::vector<std::pair<double, std::size_t>> stds;
  stds.reserve(patches);
  auto for_patch = [&](std::size_t index, auto&& fn) {
    const std::size_t z = index / (py * px);
    const std::size_t r0 = (index / px % py) * opts.patch;
    const std::size_t c0 = (index % px) * opts.patch;
    for (std::size_t r = r0; r < r0 + opts.patch; ++r)
      for (std::size_t c = c0; c < c0 + opts.patch; ++c) fn(x.values[(z * x.y + r) * x.x + c]);
  };
  for (std::size_t i = 0; i < patches; ++i) {
    double sum = 0.0, sq = 0.0;
    for_patch(i, [&](double v) { sum += v; });
    const double mean = sum / static_cast<double>(opts.patch * opts.patch);
    for_patch(i, [&](double v) { sq += (v - mean) * (v - mean); });
    stds.emplace_back(std::sqrt(sq / static_cast<double>(opts.patch * opts.patch)), i);
  }
  std::sort(stds.begin(), stds.end());
  const auto selected = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(opts.background_fraction * static_cast<double>(patches))));
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < selected; ++k)
    for_patch(stds[k].second, [&](double v) {
      sum += v;
      ++count;
    });
  const double mu = sum / static_cast<double>(count);
  double sq = 0.0;
  for (std::size_t k = 0; k < selected; ++k)
    for_patch(stds[k].second, [&](double v) { sq += (v - mu) * (v - mu); });
  const double sigma = std::sqrt(sq / static_cast<double>(count));
  const double p99 = percentile(x.values, 0.99);
  if (sigma == 0.0) return kInf;
  return (p99 - mu) / sigma;
}

double spectral_snr(const SpectralImage& s, const SnrOptions& opts) {
  std::vector<double> values;
  std::string last_error;
  for (std::size_t l = 0; l < s.bands(); ++l) {
    try {
      values.push_back(snr(ChannelView::of(s.data, l), opts));
    } catch (const Error& e) {
      last_error = e.what();
    }
  }
  if (values.empty())
    fail(ErrorKind::TooFewPatches, "spectral SNR undefined for every band: " + last_error);
  std::sort(values.begin(), values.end());
  return values[(values.size() - 1) / 2];
}

MetricReport evaluate(const ConcentrationMap& gt, const ConcentrationMap& pred,
                      const SnrOptions& opts) {
  if (!(gt.data.shape() == pred.data.shape()))
    fail(ErrorKind::ShapeMismatch, "ground truth and estimate differ in shape");
  MetricReport report;
  auto guarded = [](auto&& fn, std::string& error) {
    try {
      return fn();
    } catch (const Error& e) {
      if (!error.empty()) error += "; ";
      error += e.what();
      return kNaN;
    }
  };
  for (std::size_t j = 0; j < gt.fluorophores(); ++j) {
    ChannelMetrics cm;
    cm.channel = j < gt.labels.size() ? gt.labels[j] : "ch" + std::to_string(j);
    const auto g = ChannelView::of(gt.data, j);
    const auto p = ChannelView::of(pred.data, j);
    cm.psnr_ri = guarded([&] { return psnr_ri(g, p); }, cm.error);
    cm.ms_ssim_ri = guarded([&] { return ms_ssim_ri(g, p); }, cm.error);
    cm.pearson = guarded([&] { return pearson(g, p); }, cm.error);
    cm.snr = guarded([&] { return snr(p, opts); }, cm.error);
    report.per_channel.push_back(std::move(cm));
  }
  report.mean.channel = "mean";
  const auto n = static_cast<double>(report.per_channel.size());
  for (const auto& cm : report.per_channel) {
    report.mean.psnr_ri += cm.psnr_ri / n;
    report.mean.ms_ssim_ri += cm.ms_ssim_ri / n;
    report.mean.pearson += cm.pearson / n;
    report.mean.snr += cm.snr / n;
  }
  return report;
}

Json MetricReport::to_json() const {
  auto record = [](const ChannelMetrics& cm) {
    Json j{{"channel", cm.channel},
           {"psnr_ri", number_to_json(cm.psnr_ri)},
           {"ms_ssim_ri", number_to_json(cm.ms_ssim_ri)},
           {"pearson", number_to_json(cm.pearson)},
           {"snr", number_to_json(cm.snr)}};
    if (!cm.error.empty()) j["error"] = cm.error;
    return j;
  };
  Json channels = Json::array();
  for (const auto& cm : per_channel) channels.push_back(record(cm));
  Json j{{"per_channel", channels}, {"mean", record(mean)}};
  if (spectral_snr) j["spectral_snr"] = number_to_json(*spectral_snr);
  return j;
}

}  // namespace spmx
