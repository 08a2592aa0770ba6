#include "spmx/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "spmx/error.hpp"
#include "spmx/parallel.hpp"
#include "spmx/random.hpp"
#include "spmx/spectral.hpp"

namespace spmx {

// --- configuration ----------------------------------------------------------

void AcquisitionConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) fail(ErrorKind::InvalidConfig, std::string("acquisition config: ") + what);
  };
  require(exposure_ms > 0.0 && std::isfinite(exposure_ms), "exposure_ms must be positive");
  require(photons_per_unit_per_ms > 0.0 && std::isfinite(photons_per_unit_per_ms),
          "photons_per_unit_per_ms must be positive");
  require(read_noise_sigma >= 0.0, "read_noise_sigma must be non-negative");
  require(offset >= 0.0, "offset must be non-negative");
  require(bit_depth == 8 || bit_depth == 12 || bit_depth == 16, "bit_depth must be 8, 12 or 16");
  require(std::ldexp(1.0, bit_depth) - 1.0 >= offset, "offset exceeds the bit-depth maximum");
}

Json AcquisitionConfig::to_json() const {
  return Json{{"exposure_ms", exposure_ms},
              {"photons_per_unit_per_ms", photons_per_unit_per_ms},
              {"read_noise_sigma", read_noise_sigma},
              {"offset", offset},
              {"quantize", quantize},
              {"bit_depth", bit_depth},
              {"noiseless", noiseless},
              {"rng_seed", rng_seed}};
}

AcquisitionConfig AcquisitionConfig::from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorKind::InvalidConfig, "acquisition config must be a JSON object");
  AcquisitionConfig a;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "exposure_ms") a.exposure_ms = value.get<double>();
      else if (key == "photons_per_unit_per_ms") a.photons_per_unit_per_ms = value.get<double>();
      else if (key == "read_noise_sigma") a.read_noise_sigma = value.get<double>();
      else if (key == "offset") a.offset = value.get<double>();
      else if (key == "quantize") a.quantize = value.get<bool>();
      else if (key == "bit_depth") a.bit_depth = value.get<int>();
      else if (key == "noiseless") a.noiseless = value.get<bool>();
      else if (key == "rng_seed") a.rng_seed = value.get<std::uint64_t>();
      else fail(ErrorKind::InvalidConfig, "acquisition config: unknown key '" + key + "'");
    }
  } catch (const Json::exception& e) {
    fail(ErrorKind::InvalidConfig, std::string("acquisition config: ") + e.what());
  }
  a.validate();
  return a;
}

std::string phantom_kind_name(PhantomKind kind) {
  switch (kind) {
    case PhantomKind::Blobs: return "blobs";
    case PhantomKind::Filaments: return "filaments";
    case PhantomKind::Rings: return "rings";
    case PhantomKind::Mixed: return "mixed";
  }
  return "unknown";
}

void PhantomSpec::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorKind::InvalidSpec, "phantom spec: " + what);
  };
  require(z >= 1, "z must be >= 1");
  require(y >= 8 && x >= 8, "y and x must be >= 8");
  require(z == 1 || z >= 8, "3D phantoms need z >= 8");
  require(fluorophores >= 1, "fluorophores must be >= 1");
  require(density >= 0.0 && std::isfinite(density), "density must be non-negative");
  require(size_px > 0.0 && std::isfinite(size_px), "size_px must be positive");
  require(intensity > 0.0 && std::isfinite(intensity), "intensity must be positive");
  require(colocalization >= 0.0 && colocalization <= 1.0, "colocalization must lie in [0, 1]");
  require(labels.empty() || labels.size() == fluorophores,
          "labels must be empty or have one name per fluorophore");
}

Json PhantomSpec::to_json() const {
  Json j{{"kind", phantom_kind_name(kind)},
         {"z", z},
         {"y", y},
         {"x", x},
         {"fluorophores", fluorophores},
         {"density", density},
         {"size_px", size_px},
         {"intensity", intensity},
         {"colocalization", colocalization},
         {"rng_seed", rng_seed}};
  if (!labels.empty()) j["labels"] = labels;
  return j;
}

PhantomSpec PhantomSpec::from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorKind::InvalidSpec, "phantom spec must be a JSON object");
  PhantomSpec p;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "kind") {
        const auto name = value.get<std::string>();
        if (name == "blobs") p.kind = PhantomKind::Blobs;
        else if (name == "filaments") p.kind = PhantomKind::Filaments;
        else if (name == "rings") p.kind = PhantomKind::Rings;
        else if (name == "mixed") p.kind = PhantomKind::Mixed;
        else fail(ErrorKind::InvalidSpec, "phantom spec: unknown kind '" + name + "'");
      } else if (key == "z") p.z = value.get<std::size_t>();
      else if (key == "y") p.y = value.get<std::size_t>();
      else if (key == "x") p.x = value.get<std::size_t>();
      else if (key == "fluorophores") p.fluorophores = value.get<std::size_t>();
      else if (key == "density") p.density = value.get<double>();
      else if (key == "size_px") p.size_px = value.get<double>();
      else if (key == "intensity") p.intensity = value.get<double>();
      else if (key == "colocalization") p.colocalization = value.get<double>();
      else if (key == "rng_seed") p.rng_seed = value.get<std::uint64_t>();
      else if (key == "labels") p.labels = value.get<std::vector<std::string>>();
      else fail(ErrorKind::InvalidSpec, "phantom spec: unknown key '" + key + "'");
    }
  } catch (const Json::exception& e) {
    fail(ErrorKind::InvalidSpec, std::string("phantom spec: ") + e.what());
  }
  p.validate();
  return p;
}

// --- phantom rendering --------------------------------------------------------

namespace {

struct Point3 {
  double z, y, x;
};

enum class Shape3 { Blob, Filament, Ring };

// One rasterizable object: a blob (single point), a filament (polyline) or a
// ring/shell (centre + radius). Profiles are truncated at three widths so
// every object has compact support.
struct Object {
  Shape3 shape = Shape3::Blob;
  std::vector<Point3> path;  // centre for blob/ring
  double width = 1.0;        // Gaussian sigma of the profile
  double radius = 0.0;       // rings only
  double amplitude = 1.0;
};

Object random_object(Shape3 shape, const PhantomSpec& spec, PhiloxStream& rng) {
  Object o;
  o.shape = shape;
  const bool volumetric = spec.z > 1;
  auto random_point = [&] {
    return Point3{volumetric ? rng.uniform() * static_cast<double>(spec.z - 1) : 0.0,
                  rng.uniform() * static_cast<double>(spec.y - 1),
                  rng.uniform() * static_cast<double>(spec.x - 1)};
  };
  o.amplitude = spec.intensity * (0.5 + 0.5 * rng.uniform());
  switch (shape) {
    case Shape3::Blob:
      o.path = {random_point()};
      o.width = spec.size_px * (0.6 + 0.8 * rng.uniform());
      break;
    case Shape3::Ring:
      o.path = {random_point()};
      o.radius = spec.size_px * (1.5 + 1.5 * rng.uniform());
      o.width = spec.size_px / 3.0;
      break;
    case Shape3::Filament: {
      o.width = spec.size_px * 0.5;
      Point3 p = random_point();
      double theta = 2.0 * std::numbers::pi * rng.uniform();
      double phi = volumetric ? (rng.uniform() - 0.5) * 0.5 : 0.0;
      const auto steps = static_cast<int>(std::lround(spec.size_px * 12.0 + 8.0));
      for (int i = 0; i < steps; ++i) {
        o.path.push_back(p);
        theta += 0.25 * rng.normal();
        if (volumetric) phi = std::clamp(phi + 0.1 * rng.normal(), -0.6, 0.6);
        p.x += std::cos(theta) * std::cos(phi);
        p.y += std::sin(theta) * std::cos(phi);
        p.z += std::sin(phi);
        if (p.x < 0 || p.y < 0 || p.x > static_cast<double>(spec.x - 1) ||
            p.y > static_cast<double>(spec.y - 1) || p.z < 0 ||
            p.z > static_cast<double>(spec.z - 1))
          break;
      }
      break;
    }
  }
  return o;
}

void render(const Object& o, std::span<double> plane, const PhantomSpec& spec, double amplitude) {
  const double reach = 3.0 * o.width + o.radius;
  double zmin = 1e300, zmax = -1e300, ymin = 1e300, ymax = -1e300, xmin = 1e300, xmax = -1e300;
  for (const auto& p : o.path) {
    zmin = std::min(zmin, p.z), zmax = std::max(zmax, p.z);
    ymin = std::min(ymin, p.y), ymax = std::max(ymax, p.y);
    xmin = std::min(xmin, p.x), xmax = std::max(xmax, p.x);
  }
  auto lo = [](double v, double r) { return static_cast<long>(std::max(0.0, std::floor(v - r))); };
  auto hi = [](double v, double r, std::size_t n) {
    return static_cast<long>(std::min(static_cast<double>(n - 1), std::ceil(v + r)));
  };
  const double zreach = spec.z > 1 ? reach : 0.0;
  const double cutoff = 3.0 * o.width;
  const double inv_two_var = 1.0 / (2.0 * o.width * o.width);
  for (long z = lo(zmin, zreach); z <= hi(zmax, zreach, spec.z); ++z)
    for (long y = lo(ymin, reach); y <= hi(ymax, reach, spec.y); ++y)
      for (long x = lo(xmin, reach); x <= hi(xmax, reach, spec.x); ++x) {
        double d2 = 1e300;
        for (const auto& p : o.path) {
          const double dz = static_cast<double>(z) - p.z;
          const double dy = static_cast<double>(y) - p.y;
          const double dx = static_cast<double>(x) - p.x;
          d2 = std::min(d2, dz * dz + dy * dy + dx * dx);
        }
        double d = std::sqrt(d2);
        if (o.shape == Shape3::Ring) d = std::abs(d - o.radius);
        if (d > cutoff) continue;
        const auto idx = (static_cast<std::size_t>(z) * spec.y + static_cast<std::size_t>(y)) *
                             spec.x +
                         static_cast<std::size_t>(x);
        plane[idx] += amplitude * std::exp(-d * d * inv_two_var);
      }
}

Shape3 pick_shape(PhantomKind kind, PhiloxStream& rng) {
  switch (kind) {
    case PhantomKind::Blobs: return Shape3::Blob;
    case PhantomKind::Filaments: return Shape3::Filament;
    case PhantomKind::Rings: return Shape3::Ring;
    case PhantomKind::Mixed: break;
  }
  const auto r = rng.below(3);
  return r == 0 ? Shape3::Blob : (r == 1 ? Shape3::Filament : Shape3::Ring);
}

}  // namespace

ConcentrationMap generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  const Shape shape{spec.fluorophores, spec.z, spec.y, spec.x};
  ConcentrationMap out{Tensor4(shape), spec.labels, Json{{"phantom", spec.to_json()}}};
  if (out.labels.empty())
    for (std::size_t j = 0; j < spec.fluorophores; ++j) out.labels.push_back("fp" + std::to_string(j));

  const auto count = static_cast<std::size_t>(
      std::llround(spec.density * static_cast<double>(shape.voxels()) / 1e4));
  const auto shared = static_cast<std::size_t>(
      std::llround(spec.colocalization * static_cast<double>(count)));
  std::vector<Object> previous;
  for (std::size_t j = 0; j < spec.fluorophores; ++j) {
    PhiloxStream rng(spec.rng_seed, j);
    std::vector<Object> objects;
    objects.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      if (j > 0 && i < shared && !previous.empty()) {
        // Colocalized: reuse the geometry of an object of the previous channel.
        Object o = previous[static_cast<std::size_t>(rng.below(previous.size()))];
        o.amplitude = spec.intensity * (0.5 + 0.5 * rng.uniform());
        objects.push_back(std::move(o));
      } else {
        objects.push_back(random_object(pick_shape(spec.kind, rng), spec, rng));
      }
    }
    auto plane = out.data.channel(j);
    for (const auto& o : objects) render(o, plane, spec, o.amplitude);
    previous = std::move(objects);
  }
  return out;
}

// --- acquisition ------------------------------------------------------------------

SpectralImage simulate_acquisition(const ConcentrationMap& u, const MixingMatrix& m,
                                   const AcquisitionConfig& acq,
                                   const std::optional<BandLayout>& layout) {
  acq.validate();
  if (layout && layout->size() != m.bands())
    fail(ErrorKind::ShapeMismatch, "band layout and mixing matrix disagree on L");
  SpectralImage expected = mix_forward(u, m);
  const double gain = acq.gain();
  const double max_value = std::ldexp(1.0, acq.bit_depth) - 1.0;
  const std::size_t voxels = u.voxels();
  const std::size_t bands = m.bands();
  SpectralImage out{Tensor4(expected.data.shape()), layout.value_or(BandLayout{}), Json::object()};
  parallel_for(bands * voxels, [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      const std::size_t l = idx / voxels;
      const std::size_t p = idx % voxels;
      const double lambda = std::max(expected.data(l, p) * gain, 0.0);
      double value;
      if (acq.noiseless) {
        value = lambda + acq.offset;
      } else {
        PhiloxStream rng(acq.rng_seed, static_cast<std::uint64_t>(idx));
        value = static_cast<double>(sample_poisson(lambda, rng));
        if (acq.read_noise_sigma > 0.0) value += acq.read_noise_sigma * rng.normal();
        value += acq.offset;
      }
      if (acq.quantize) value = std::clamp(std::round(value), 0.0, max_value);
      out.data(l, p) = value;
    }
  });
  out.meta = Json{{"acquisition", acq.to_json()}, {"gain", gain}, {"offset", acq.offset}};
  if (!u.meta.empty()) out.meta["source"] = u.meta;
  return out;
}

SpectralImage normalize_acquisition(const SpectralImage& s) {
  SpectralImage out = s;
  const double offset = s.meta.value("offset", 0.0);
  const double gain = s.meta.value("gain", 1.0);
  if (!(gain > 0.0)) fail(ErrorKind::InvalidArgument, "recorded gain must be positive");
  for (double& v : out.data.values()) v = (v - offset) / gain;
  out.meta["offset"] = 0.0;
  out.meta["gain"] = 1.0;
  out.meta["normalized_from"] = Json{{"offset", offset}, {"gain", gain}};
  return out;
}

// --- band rebinning ---------------------------------------------------------------

void validate_groups(const BandGroups& groups, std::size_t bands) {
  std::size_t next = 0;
  for (const auto& g : groups) {
    if (g.empty()) fail(ErrorKind::InvalidPartition, "band groups must be non-empty");
    for (std::size_t idx : g) {
      if (idx != next)
        fail(ErrorKind::InvalidPartition,
             "band groups must be contiguous, ordered and disjoint (expected band " +
                 std::to_string(next) + ")");
      ++next;
    }
  }
  if (next != bands)
    fail(ErrorKind::InvalidPartition, "band groups cover " + std::to_string(next) + " of " +
                                          std::to_string(bands) + " bands");
}

BandGroups even_groups(std::size_t bands, std::size_t count) {
  if (count == 0 || count > bands)
    fail(ErrorKind::InvalidPartition, "cannot split " + std::to_string(bands) + " bands into " +
                                          std::to_string(count) + " groups");
  BandGroups groups(count);
  std::size_t next = 0;
  for (std::size_t g = 0; g < count; ++g) {
    const std::size_t size = bands / count + (g < bands % count ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) groups[g].push_back(next++);
  }
  return groups;
}

SpectralImage rebin_bands(const SpectralImage& s, const BandGroups& groups) {
  validate_groups(groups, s.bands());
  Shape shape = s.data.shape();
  shape.channels = groups.size();
  SpectralImage out{Tensor4(shape), BandLayout{}, s.meta};
  if (s.layout.size() == s.bands()) out.layout = rebin_layout(s.layout, groups);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto dst = out.data.channel(g);
    for (std::size_t band : groups[g]) {
      const auto src = s.data.channel(band);
      for (std::size_t p = 0; p < dst.size(); ++p) dst[p] += src[p];
    }
  }
  return out;
}

MixingMatrix rebin_mixing(const MixingMatrix& m, const BandGroups& groups) {
  validate_groups(groups, m.bands());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(groups.size()),
                                              static_cast<Eigen::Index>(m.fluorophores()));
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (std::size_t band : groups[g])
      out.row(static_cast<Eigen::Index>(g)) += m.matrix().row(static_cast<Eigen::Index>(band));
  return MixingMatrix(std::move(out), m.labels());
}

BandLayout rebin_layout(const BandLayout& layout, const BandGroups& groups) {
  validate_groups(groups, layout.size());
  std::vector<Band> bands;
  for (const auto& g : groups) bands.push_back({layout[g.front()].lo_nm, layout[g.back()].hi_nm});
  return BandLayout(std::move(bands));
}

}  // namespace spmx
