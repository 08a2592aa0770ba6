#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spmx/types.hpp"

namespace spmx {

// One channel of an image: values in [z][y][x] order plus the spatial shape.
struct ChannelView {
  std::span<const double> values;
  std::size_t z = 1;
  std::size_t y = 1;
  std::size_t x = 1;

  static ChannelView of(const Tensor4& t, std::size_t channel) {
    const Shape& s = t.shape();
    return {t.channel(channel), s.z, s.y, s.x};
  }
  // 1-D view (z = y = 1), convenient for small vectors.
  static ChannelView flat(std::span<const double> v) { return {v, 1, 1, v.size()}; }
};

// argmin_a ||gt - a * pred||^2 = <gt, pred> / <pred, pred>.
double fit_global_scale(ChannelView gt, ChannelView pred);

// PSNR(gt, a * pred) with peak = max(gt) - min(gt); +inf when the MSE is 0.
double psnr_ri(ChannelView gt, ChannelView pred);

// Five-scale MS-SSIM (Gaussian window 11, sigma 1.5, K1 0.01, K2 0.03, data
// range = gt range) on (gt, a * pred). Smaller images drop coarse scales and
// renormalize the remaining weights; below 32x32 throws TooSmall. Volumes
// are scored slice by slice and averaged.
double ms_ssim_ri(ChannelView gt, ChannelView pred);

// Number of MS-SSIM scales usable for a plane of the given size.
int ms_ssim_scales(std::size_t height, std::size_t width);

double pearson(ChannelView a, ChannelView b);

struct SnrOptions {
  std::size_t patch = 16;
  double background_fraction = 0.02;
  std::size_t min_patches = 50;
};

// (P99(x) - mu_bg) / sigma_bg, with background statistics pooled over the
// non-overlapping patches whose standard deviation is in the lowest 2%.
double snr(ChannelView x, const SnrOptions& opts = {});

// Lower median over bands of the per-band snr; failing bands are skipped.
double spectral_snr(const SpectralImage& s, const SnrOptions& opts = {});

// The q-quantile (0..1) with linear interpolation between order statistics.
double percentile(std::span<const double> values, double q);

struct ChannelMetrics {
  std::string channel;
  double psnr_ri = 0.0;
  double ms_ssim_ri = 0.0;
  double pearson = 0.0;
  double snr = 0.0;
  std::string error;  // non-empty when a metric could not be evaluated
};

struct MetricReport {
  std::vector<ChannelMetrics> per_channel;
  ChannelMetrics mean;
  std::optional<double> spectral_snr;

  Json to_json() const;
};

// Evaluates every channel and the arithmetic channel mean. Metrics that
// cannot be computed for a channel become NaN with the reason recorded.
MetricReport evaluate(const ConcentrationMap& gt, const ConcentrationMap& pred,
                      const SnrOptions& opts = {});

}  // namespace spmx
