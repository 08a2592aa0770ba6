#include "spmx/spmx.h"

#include <cstring>
#include <string>

#include "spmx/bench.hpp"
#include "spmx/error.hpp"
#include "spmx/io.hpp"
#include "spmx/metrics.hpp"
#include "spmx/parallel.hpp"
#include "spmx/simulator.hpp"
#include "spmx/solvers.hpp"
#include "spmx/spectral.hpp"

struct spmx_image {
  spmx::SpectralImage value;
};
struct spmx_cmap {
  spmx::ConcentrationMap value;
};
struct spmx_mixing {
  spmx::MixingMatrix matrix;
  spmx::BandLayout layout;
};

namespace {

thread_local std::string t_last_error;

spmx_status status_of(spmx::ErrorKind kind) {
  using spmx::ErrorKind;
  switch (kind) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::InvalidConfig:
    case ErrorKind::MalformedSpectrum:
    case ErrorKind::NoOverlap:
    case ErrorKind::InvalidSpec:
    case ErrorKind::InvalidPartition:
      return SPMX_ERR_CONFIG;
    case ErrorKind::IoError:
    case ErrorKind::HeaderMismatch:
    case ErrorKind::BadMagic:
    case ErrorKind::TruncatedPayload:
    case ErrorKind::UnsupportedDtype:
      return SPMX_ERR_IO;
    case ErrorKind::ShapeMismatch:
      return SPMX_ERR_SHAPE;
    case ErrorKind::DegenerateClustering:
    case ErrorKind::ZeroPrediction:
    case ErrorKind::DegenerateGT:
    case ErrorKind::DegenerateInput:
    case ErrorKind::TooSmall:
    case ErrorKind::TooFewPatches:
      return SPMX_ERR_DATA;
  }
  return SPMX_ERR_INTERNAL;
}

template <class F>
spmx_status guard(F&& fn) {
  try {
    fn();
    t_last_error.clear();
    return SPMX_OK;
  } catch (const spmx::Error& e) {
    t_last_error = std::string(spmx::to_string(e.kind())) + ": " + e.what();
    return status_of(e.kind());
  } catch (const spmx::Json::exception& e) {
    t_last_error = std::string("InvalidConfig: ") + e.what();
    return SPMX_ERR_CONFIG;
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return SPMX_ERR_INTERNAL;
  }
}

spmx::Json parse_or(const char* text, spmx::Json fallback) {
  if (text == nullptr) return fallback;
  try {
    return spmx::Json::parse(text);
  } catch (const spmx::Json::exception& e) {
    spmx::fail(spmx::ErrorKind::InvalidConfig, std::string("invalid JSON: ") + e.what());
  }
}

char* dup(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(const void* p, const char* what) {
  if (p == nullptr)
    spmx::fail(spmx::ErrorKind::InvalidArgument, std::string(what) + " must not be null");
}

void fill_dims(const spmx::Tensor4& t, size_t dims[4]) {
  const auto& s = t.shape();
  dims[0] = s.channels;
  dims[1] = s.z;
  dims[2] = s.y;
  dims[3] = s.x;
}

}  // namespace

extern "C" {

const char* spmx_version(void) { return "0.1.0"; }

const char* spmx_last_error(void) { return t_last_error.c_str(); }

const char* spmx_status_name(spmx_status status) {
  switch (status) {
    case SPMX_OK: return "ok";
    case SPMX_ERR_CONFIG: return "config error";
    case SPMX_ERR_IO: return "I/O error";
    case SPMX_ERR_SHAPE: return "shape mismatch";
    case SPMX_ERR_DATA: return "data error";
    case SPMX_ERR_INTERNAL: return "internal error";
  }
  return "unknown";
}

void spmx_string_free(char* s) { delete[] s; }

void spmx_set_threads(size_t n) { spmx::set_thread_count(n); }

spmx_status spmx_mixing_read_csv(const char* path, int renormalize, spmx_mixing** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    auto csv = spmx::read_mixing_csv(path, renormalize != 0);
    *out = new spmx_mixing{std::move(csv.matrix), std::move(csv.layout)};
  });
}

spmx_status spmx_mixing_write_csv(const spmx_mixing* m, const char* path) {
  return guard([&] {
    require(m, "mixing");
    require(path, "path");
    spmx::write_mixing_csv(path, m->matrix, m->layout);
  });
}

spmx_status spmx_mixing_build(const char* fluorophores_json, const char* spectra_dir,
                              const char* base_dir, const char* layout_json, spmx_mixing** out) {
  return guard([&] {
    require(fluorophores_json, "fluorophores_json");
    require(out, "out");
    const auto names = parse_or(fluorophores_json, {}).get<std::vector<std::string>>();
    if (names.empty()) spmx::fail(spmx::ErrorKind::InvalidConfig, "no fluorophores given");
    const spmx::BandLayout layout =
        layout_json ? spmx::BandLayout::from_json(parse_or(layout_json, {}))
                    : spmx::BandLayout::uniform(440.0, 696.0, 32);
    std::vector<spmx::EmissionSpectrum> spectra;
    for (const auto& name : names)
      spectra.push_back(spmx::resolve_spectrum(name, spectra_dir ? spectra_dir : "",
                                               base_dir ? base_dir : ""));
    try {
      *out = new spmx_mixing{spmx::build_mixing_matrix(spectra, layout), layout};
    } catch (const spmx::Error& e) {
      spmx::fail(spmx::ErrorKind::InvalidConfig, e.what());
    }
  });
}

size_t spmx_mixing_bands(const spmx_mixing* m) { return m ? m->matrix.bands() : 0; }

size_t spmx_mixing_fluorophores(const spmx_mixing* m) {
  return m ? m->matrix.fluorophores() : 0;
}

double spmx_mixing_get(const spmx_mixing* m, size_t band, size_t fluorophore) {
  return m->matrix(band, fluorophore);
}

spmx_status spmx_analyze(const spmx_mixing* m, char** report_json) {
  return guard([&] {
    require(m, "mixing");
    require(report_json, "report_json");
    *report_json = dup(spmx::analyze_conditioning(m->matrix).to_json().dump(2));
  });
}

void spmx_mixing_free(spmx_mixing* m) { delete m; }

spmx_status spmx_image_read(const char* path, spmx_image** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new spmx_image{spmx::read_spectral(path)};
  });
}

spmx_status spmx_image_write(const spmx_image* s, const char* path, const char* dtype) {
  return guard([&] {
    require(s, "image");
    require(path, "path");
    spmx::write_spectral(path, s->value, dtype ? dtype : "f32");
  });
}

void spmx_image_dims(const spmx_image* s, size_t dims[4]) { fill_dims(s->value.data, dims); }

const double* spmx_image_data(const spmx_image* s) { return s->value.data.values().data(); }

void spmx_image_free(spmx_image* s) { delete s; }

spmx_status spmx_cmap_read(const char* path, spmx_cmap** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new spmx_cmap{spmx::read_concentration(path)};
  });
}

spmx_status spmx_cmap_write(const spmx_cmap* u, const char* path) {
  return guard([&] {
    require(u, "map");
    require(path, "path");
    spmx::write_concentration(path, u->value);
  });
}

void spmx_cmap_dims(const spmx_cmap* u, size_t dims[4]) { fill_dims(u->value.data, dims); }

const double* spmx_cmap_data(const spmx_cmap* u) { return u->value.data.values().data(); }

void spmx_cmap_free(spmx_cmap* u) { delete u; }

spmx_status spmx_phantom(const char* phantom_json, spmx_cmap** out) {
  return guard([&] {
    require(out, "out");
    const auto spec = spmx::PhantomSpec::from_json(parse_or(phantom_json, spmx::Json::object()));
    *out = new spmx_cmap{spmx::generate_phantom(spec)};
  });
}

spmx_status spmx_simulate(const spmx_cmap* u, const spmx_mixing* m, const char* acquisition_json,
                          spmx_image** out) {
  return guard([&] {
    require(u, "map");
    require(m, "mixing");
    require(out, "out");
    const auto acq =
        spmx::AcquisitionConfig::from_json(parse_or(acquisition_json, spmx::Json::object()));
    *out = new spmx_image{spmx::simulate_acquisition(u->value, m->matrix, acq, m->layout)};
  });
}

spmx_status spmx_mix_forward(const spmx_cmap* u, const spmx_mixing* m, spmx_image** out) {
  return guard([&] {
    require(u, "map");
    require(m, "mixing");
    require(out, "out");
    auto s = spmx::mix_forward(u->value, m->matrix);
    s.layout = m->layout;
    *out = new spmx_image{std::move(s)};
  });
}

int spmx_method_valid(const char* method) {
  return method != nullptr && spmx::parse_method(method).has_value();
}

spmx_status spmx_unmix(const char* method, const spmx_image* s, const spmx_mixing* m,
                       const char* solver_json, spmx_cmap** out, char** meta_json) {
  return guard([&] {
    require(method, "method");
    require(s, "image");
    require(m, "mixing");
    require(out, "out");
    const auto which = spmx::parse_method(method);
    if (!which) spmx::fail(spmx::ErrorKind::InvalidArgument, std::string("unknown method '") +
                                                                  method + "'");
    const auto cfg = spmx::SolverConfig::from_json(parse_or(solver_json, spmx::Json::object()));
    auto result = spmx::unmix(*which, spmx::normalize_acquisition(s->value), m->matrix, cfg);
    result.estimate.meta = result.meta;
    if (meta_json) *meta_json = dup(result.meta.dump(2));
    *out = new spmx_cmap{std::move(result.estimate)};
  });
}

spmx_status spmx_evaluate(const spmx_cmap* gt, const spmx_cmap* est, const char* dataset,
                          const char* method, char** report_json, char** report_csv) {
  return guard([&] {
    require(gt, "ground truth");
    require(est, "estimate");
    const auto report = spmx::evaluate(gt->value, est->value);
    if (report_json) *report_json = dup(report.to_json().dump(2));
    if (report_csv)
      *report_csv = dup(spmx::format_report_csv(spmx::report_rows(
          report, dataset ? dataset : "", method ? method : "", "", "")));
  });
}

spmx_status spmx_bench(const char* spec_json, const char* base_dir, const char* out_dir,
                       char** summary_json) {
  return guard([&] {
    require(spec_json, "spec_json");
    require(out_dir, "out_dir");
    const auto spec = spmx::SweepSpec::from_json(parse_or(spec_json, {}), base_dir ? base_dir : "");
    const auto report = spmx::run_sweep(spec);
    spmx::write_bench_outputs(report, out_dir);
    if (summary_json)
      *summary_json = dup(spmx::summary_json(report, spmx::compare_methods(report)).dump(2));
  });
}

}  // extern "C"
