// spmx: command-line front end over the C API.
//
//   spmx simulate --spec sim.json --out DIR [--seed N]
//   spmx unmix SPECTRAL.spmx MIXING.csv --method NAME --out DIR [--spec solver.json] [--seed N]
//   spmx evaluate GT.spmx EST.spmx --out DIR
//   spmx analyze MIXING.csv [--renormalize] [--out report.json]
//   spmx bench --spec sweep.json --out DIR [--seed N]
//
// Exit codes: 0 success, 2 config/usage, 3 I/O, 4 shape/data.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spmx/spmx.h"

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitData = 4;

struct Failure {
  int code;
  std::string message;
};

bool g_verbose = false;

void log(const std::string& msg) {
  if (g_verbose) std::cerr << "spmx: " << msg << '\n';
}

int exit_code(spmx_status s) {
  switch (s) {
    case SPMX_OK: return 0;
    case SPMX_ERR_CONFIG: return kExitConfig;
    case SPMX_ERR_IO: return kExitIo;
    case SPMX_ERR_SHAPE:
    case SPMX_ERR_DATA: return kExitData;
    default: return 1;
  }
}

void check(spmx_status s) {
  if (s != SPMX_OK) throw Failure{exit_code(s), spmx_last_error()};
}

// Owns a string returned by the C API.
struct CString {
  char* p = nullptr;
  ~CString() { spmx_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
};
using Image = Handle<spmx_image, spmx_image_free>;
using Cmap = Handle<spmx_cmap, spmx_cmap_free>;
using Mixing = Handle<spmx_mixing, spmx_mixing_free>;

void read_mixing(const std::string& path, bool renormalize, Mixing& m) {
  const spmx_status s = spmx_mixing_read_csv(path.c_str(), renormalize ? 1 : 0, &m.p);
  if (s == SPMX_OK) return;
  std::string msg = spmx_last_error();
  if (msg.find("l1-normalized") != std::string::npos) msg += " (pass --renormalize to rescale)";
  throw Failure{exit_code(s), msg};
}

void require_file(const std::string& path) {
  if (!fs::is_regular_file(path)) throw Failure{kExitIo, "input file not found: " + path};
}

std::string read_file(const std::string& path) {
  require_file(path);
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (!in) throw Failure{kExitIo, "cannot read " + path};
  return ss.str();
}

Json read_json_file(const std::string& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw Failure{kExitConfig, path + ": invalid JSON: " + e.what()};
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Failure{kExitIo, "cannot write " + path.string()};
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Failure{kExitIo, "cannot create " + dir.string() + ": " + ec.message()};
}

struct Options {
  std::string spec;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string method;
  bool renormalize = false;
  std::vector<std::string> inputs;
};

// Simulation spec (a manifest written by a previous run is also accepted):
// {"phantom": {...}, "acquisition": {...}, "fluorophores": [...],
//  "spectra_dir": "...", "layout": {"bands": [[lo, hi], ...]}}
int cmd_simulate(const Options& o) {
  Json spec = read_json_file(o.spec);
  if (!spec.is_object()) throw Failure{kExitConfig, "simulation spec must be a JSON object"};
  for (const auto& [key, value] : spec.items()) {
    static const std::set<std::string> kKnown = {"phantom", "acquisition", "fluorophores",
                                                 "spectra_dir", "layout", "command",
                                                 "version", "seed", "outputs"};
    if (!kKnown.count(key)) throw Failure{kExitConfig, "simulation spec: unknown key '" + key + "'"};
  }
  if (!spec.contains("fluorophores"))
    throw Failure{kExitConfig, "simulation spec: 'fluorophores' is required"};
  Json phantom = spec.value("phantom", Json::object());
  Json acquisition = spec.value("acquisition", Json::object());
  if (!phantom.is_object() || !acquisition.is_object())
    throw Failure{kExitConfig, "simulation spec: 'phantom' and 'acquisition' must be objects"};
  // Channel count and labels follow the fluorophore list unless given.
  if (spec["fluorophores"].is_array()) {
    const auto& names = spec["fluorophores"];
    if (!phantom.contains("fluorophores")) phantom["fluorophores"] = names.size();
    if (!phantom.contains("labels") && phantom["fluorophores"] == names.size()) {
      Json labels = Json::array();
      for (const auto& n : names)
        labels.push_back(n.is_string() ? fs::path(n.get<std::string>()).stem().string() : "");
      phantom["labels"] = labels;
    }
  }
  if (o.seed) {
    phantom["rng_seed"] = *o.seed;
    acquisition["rng_seed"] = *o.seed;
  }
  const fs::path base = fs::absolute(fs::path(o.spec)).parent_path();
  std::string spectra_dir;
  if (spec.contains("spectra_dir")) {
    fs::path dir = spec["spectra_dir"].get<std::string>();
    spectra_dir = (dir.is_relative() ? base / dir : dir).lexically_normal().string();
  }

  Cmap gt;
  check(spmx_phantom(phantom.dump().c_str(), &gt.p));
  Mixing mixing;
  const std::string layout = spec.contains("layout") ? spec["layout"].dump() : "";
  check(spmx_mixing_build(spec["fluorophores"].dump().c_str(),
                          spectra_dir.empty() ? nullptr : spectra_dir.c_str(),
                          base.string().c_str(), layout.empty() ? nullptr : layout.c_str(),
                          &mixing.p));
  Image spectral;
  check(spmx_simulate(gt.p, mixing.p, acquisition.dump().c_str(), &spectral.p));
  log("simulated " + std::to_string(spmx_mixing_bands(mixing.p)) + " bands");

  const fs::path out(o.out);
  make_dir(out);
  check(spmx_cmap_write(gt.p, (out / "gt.spmx").string().c_str()));
  const bool quantized = acquisition.value("quantize", false);
  check(spmx_image_write(spectral.p, (out / "spectral.spmx").string().c_str(),
                         quantized ? "u16" : "f32"));
  check(spmx_mixing_write_csv(mixing.p, (out / "mixing.csv").string().c_str()));

  // The manifest is itself a valid simulation spec that reproduces this run.
  Json manifest = spec;
  manifest["command"] = "simulate";
  manifest["version"] = spmx_version();
  manifest["phantom"] = phantom;
  manifest["acquisition"] = acquisition;
  manifest["seed"] = {{"phantom", phantom.value("rng_seed", std::uint64_t{0})},
                      {"acquisition", acquisition.value("rng_seed", std::uint64_t{0})}};
  if (!spectra_dir.empty()) manifest["spectra_dir"] = spectra_dir;
  // Spectrum files are resolved against the spec's directory; pin them so the
  // manifest works from wherever it is written.
  for (auto& ref : manifest["fluorophores"]) {
    fs::path p = ref.get<std::string>();
    if (p.extension() == ".csv" && p.is_relative()) ref = (base / p).lexically_normal().string();
  }
  manifest["outputs"] = {"gt.spmx", "spectral.spmx", "mixing.csv"};
  write_file(out / "manifest.json", manifest.dump(2) + "\n");
  log("wrote " + out.string());
  return 0;
}

int cmd_unmix(const Options& o) {
  if (o.inputs.size() != 2)
    throw Failure{kExitConfig, "unmix expects SPECTRAL.spmx MIXING.csv"};
  if (!spmx_method_valid(o.method.c_str()))
    throw Failure{kExitConfig, "unknown method '" + o.method +
                                   "' (expected lu, nnlu, fclu, rlu, nmf-ri, hyu or lumos)"};
  for (const auto& p : o.inputs) require_file(p);
  Json solver = o.spec.empty() ? Json::object() : read_json_file(o.spec);
  if (o.seed) {
    if (!solver.is_object()) throw Failure{kExitConfig, "solver config must be a JSON object"};
    solver["rng_seed"] = *o.seed;
  }

  Image spectral;
  check(spmx_image_read(o.inputs[0].c_str(), &spectral.p));
  Mixing mixing;
  read_mixing(o.inputs[1], o.renormalize, mixing);
  if (o.method == "lumos" && spmx_mixing_bands(mixing.p) > 5)
    std::cerr << "spmx: warning: lumos is intended for low-band data (L <= 5); running with L = "
              << spmx_mixing_bands(mixing.p) << '\n';

  Cmap estimate;
  CString meta;
  check(spmx_unmix(o.method.c_str(), spectral.p, mixing.p, solver.dump().c_str(), &estimate.p,
                   &meta.p));
  log("solver meta: " + meta.str());
  const fs::path out(o.out);
  make_dir(out);
  check(spmx_cmap_write(estimate.p, (out / ("est_" + o.method + ".spmx")).string().c_str()));
  return 0;
}

int cmd_evaluate(const Options& o) {
  if (o.inputs.size() != 2) throw Failure{kExitConfig, "evaluate expects GT.spmx EST.spmx"};
  for (const auto& p : o.inputs) require_file(p);
  Cmap gt, est;
  check(spmx_cmap_read(o.inputs[0].c_str(), &gt.p));
  check(spmx_cmap_read(o.inputs[1].c_str(), &est.p));
  const std::string dataset = fs::path(o.inputs[0]).parent_path().filename().string();
  std::string method = fs::path(o.inputs[1]).stem().string();
  if (method.rfind("est_", 0) == 0) method = method.substr(4);
  CString json, csv;
  check(spmx_evaluate(gt.p, est.p, dataset.c_str(), method.c_str(), &json.p, &csv.p));
  const fs::path out(o.out);
  make_dir(out);
  write_file(out / "metrics.json", json.str() + "\n");
  write_file(out / "metrics.csv", csv.str());
  log("wrote " + (out / "metrics.json").string());
  return 0;
}

int cmd_analyze(const Options& o) {
  if (o.inputs.size() != 1) throw Failure{kExitConfig, "analyze expects MIXING.csv"};
  require_file(o.inputs[0]);
  Mixing mixing;
  read_mixing(o.inputs[0], o.renormalize, mixing);
  CString report;
  check(spmx_analyze(mixing.p, &report.p));
  std::cout << report.str() << '\n';
  if (!o.out.empty()) {
    const fs::path out(o.out);
    if (out.has_parent_path()) make_dir(out.parent_path());
    write_file(out, report.str() + "\n");
  }
  return 0;
}

int cmd_bench(const Options& o) {
  Json spec = read_json_file(o.spec);
  if (o.seed) {
    if (!spec.is_object()) throw Failure{kExitConfig, "sweep spec must be a JSON object"};
    for (const char* section : {"phantom", "acquisition", "solver"}) {
      if (!spec.contains(section)) spec[section] = Json::object();
      spec[section]["rng_seed"] = *o.seed;
    }
  }
  const fs::path base = fs::absolute(fs::path(o.spec)).parent_path();
  make_dir(o.out);
  log("running sweep from " + o.spec);
  CString summary;
  check(spmx_bench(spec.dump().c_str(), base.string().c_str(), o.out.c_str(), &summary.p));
  log("wrote tables to " + o.out);
  if (g_verbose) std::cerr << summary.str() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral unmixing simulator, solvers and benchmark harness"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  std::size_t threads = 0;
  std::uint64_t seed = 0;
  app.add_option("--threads", threads, "Worker threads (default: logical cores)");
  app.add_flag("--verbose", g_verbose, "Progress messages on standard error");

  auto add_seed = [&](CLI::App* sub) {
    return sub->add_option("--seed", seed, "Override every RNG seed in the config");
  };

  auto* simulate = app.add_subcommand("simulate", "Generate a phantom and a noisy acquisition");
  simulate->add_option("--spec", o.spec, "Simulation spec JSON")->required();
  simulate->add_option("--out", o.out, "Output directory")->required();
  auto* sim_seed = add_seed(simulate);

  auto* unmix = app.add_subcommand("unmix", "Unmix a spectral container");
  unmix->add_option("inputs", o.inputs, "SPECTRAL.spmx MIXING.csv")->expected(2);
  unmix->add_option("--method", o.method, "lu, nnlu, fclu, rlu, nmf-ri, hyu or lumos")->required();
  unmix->add_option("--spec", o.spec, "Solver config JSON");
  unmix->add_option("--out", o.out, "Output directory")->required();
  unmix->add_flag("--renormalize", o.renormalize, "Rescale mixing columns to unit sum");
  auto* unmix_seed = add_seed(unmix);

  auto* evaluate = app.add_subcommand("evaluate", "Score an estimate against ground truth");
  evaluate->add_option("inputs", o.inputs, "GT.spmx EST.spmx")->expected(2);
  evaluate->add_option("--out", o.out, "Output directory")->required();

  auto* analyze = app.add_subcommand("analyze", "Conditioning report for a mixing matrix");
  analyze->add_option("inputs", o.inputs, "MIXING.csv")->expected(1);
  analyze->add_flag("--renormalize", o.renormalize, "Rescale mixing columns to unit sum");
  analyze->add_option("--out", o.out, "Also write the report to this file");

  auto* bench = app.add_subcommand("bench", "Run a benchmark sweep");
  bench->add_option("--spec", o.spec, "Sweep spec JSON")->required();
  bench->add_option("--out", o.out, "Output directory")->required();
  auto* bench_seed = add_seed(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  for (auto* opt : {sim_seed, unmix_seed, bench_seed})
    if (opt->count() > 0) o.seed = seed;
  if (threads > 0) spmx_set_threads(threads);

  try {
    if (simulate->parsed()) return cmd_simulate(o);
    if (unmix->parsed()) return cmd_unmix(o);
    if (evaluate->parsed()) return cmd_evaluate(o);
    if (analyze->parsed()) return cmd_analyze(o);
    if (bench->parsed()) return cmd_bench(o);
  } catch (const Failure& f) {
    std::cerr << "spmx: error: " << f.message << '\n';
    return f.code;
  } catch (const Json::exception& e) {
    std::cerr << "spmx: error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
