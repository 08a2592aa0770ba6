#include "spmx/bench.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "spmx/error.hpp"
#include "spmx/parallel.hpp"
#include "spmx/spectral.hpp"
#include "text_util.hpp"

namespace spmx {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const char* const kMetricNames[] = {"psnr_ri", "ms_ssim_ri", "pearson", "snr"};

double metric_of(const ChannelMetrics& m, std::size_t k) {
  switch (k) {
    case 0: return m.psnr_ri;
    case 1: return m.ms_ssim_ri;
    case 2: return m.pearson;
    default: return m.snr;
  }
}

double& metric_ref(ChannelMetrics& m, std::size_t k) {
  switch (k) {
    case 0: return m.psnr_ri;
    case 1: return m.ms_ssim_ri;
    case 2: return m.pearson;
    default: return m.snr;
  }
}

const std::vector<std::string>& default_fluorophores() {
  static const std::vector<std::string> kNames = {"mTurquoise", "EGFP", "EYFP", "mScarlet",
                                                  "mOrange"};
  return kNames;
}

bool is_band_axis(SweepAxis a) {
  return a == SweepAxis::BandCountSameSnr || a == SweepAxis::BandCountSameBudget;
}

std::vector<std::string> effective_fluorophores(const SweepSpec& spec) {
  if (!spec.fluorophores.empty()) return spec.fluorophores;
  if (spec.axis == SweepAxis::OverlapDelta) return {"EGFP", "EGFP"};
  const auto& names = default_fluorophores();
  const std::size_t f = std::min(spec.phantom.fluorophores, names.size());
  return {names.begin(), names.begin() + static_cast<long>(f)};
}

std::size_t bands_at(const SweepSpec& spec, double value) {
  if (is_band_axis(spec.axis)) return static_cast<std::size_t>(value);
  return spec.band_count ? spec.band_count : spec.layout.size();
}

bool strictly(const std::vector<double>& v, bool increasing) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(increasing ? v[i] > v[i - 1] : v[i] < v[i - 1])) return false;
  }
  return true;
}

Json trend(const std::vector<double>& v) {
  Json values = Json::array();
  for (double x : v) values.push_back(number_to_json(x));
  return Json{{"values", values},
              {"strictly_increasing", strictly(v, true)},
              {"strictly_decreasing", strictly(v, false)}};
}

// Mean and sample standard deviation; identical values (including inf)
// give a zero spread, NaN inputs propagate.
std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {kNaN, kNaN};
  if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); }))
    return {v.front(), 0.0};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2 || !std::isfinite(mean)) return {mean, kNaN};
  double sq = 0.0;
  for (double x : v) sq += (x - mean) * (x - mean);
  return {mean, std::sqrt(sq / static_cast<double>(v.size() - 1))};
}

}  // namespace

std::string axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::Exposure: return "exposure";
    case SweepAxis::OverlapDelta: return "overlap_delta";
    case SweepAxis::BandCountSameSnr: return "band_count_same_snr";
    case SweepAxis::BandCountSameBudget: return "band_count_same_budget";
  }
  return "unknown";
}

SweepAxis parse_axis(const std::string& name) {
  for (auto a : {SweepAxis::Exposure, SweepAxis::OverlapDelta, SweepAxis::BandCountSameSnr,
                 SweepAxis::BandCountSameBudget})
    if (axis_name(a) == name) return a;
  fail(ErrorKind::InvalidConfig, "unknown sweep axis '" + name + "'");
}

void SweepSpec::validate() const {
  if (values.empty()) fail(ErrorKind::InvalidConfig, "sweep values must be non-empty");
  if (!strictly(values, true) && !strictly(values, false))
    fail(ErrorKind::InvalidConfig, "sweep values must be strictly monotone");
  if (replicates < 1) fail(ErrorKind::InvalidConfig, "replicates must be >= 1");
  if (solvers.empty()) fail(ErrorKind::InvalidConfig, "at least one solver is required");
  if (std::set<Method>(solvers.begin(), solvers.end()).size() != solvers.size())
    fail(ErrorKind::InvalidConfig, "solvers must be distinct");
  phantom.validate();
  acquisition.validate();
  solver.validate();
  if (layout.size() == 0) fail(ErrorKind::InvalidConfig, "band layout is empty");
  if (band_count > layout.size())
    fail(ErrorKind::InvalidConfig, "band_count exceeds the layout's band count");
  if (effective_fluorophores(*this).size() != phantom.fluorophores)
    fail(ErrorKind::InvalidConfig, "fluorophore list length differs from phantom.fluorophores");
  for (double v : values) {
    if (!std::isfinite(v)) fail(ErrorKind::InvalidConfig, "sweep values must be finite");
    if (axis == SweepAxis::Exposure && !(v > 0.0))
      fail(ErrorKind::InvalidConfig, "exposure values must be positive");
    if (is_band_axis(axis) &&
        (v < 1.0 || v != std::floor(v) || v > static_cast<double>(layout.size())))
      fail(ErrorKind::InvalidConfig, "band counts must be integers in [1, layout bands]");
  }
  if (std::find(solvers.begin(), solvers.end(), Method::LUMoS) != solvers.end())
    for (double v : values)
      if (bands_at(*this, v) > 5)
        fail(ErrorKind::InvalidConfig, "lumos is only evaluated for L <= 5 bands");
}

Json SweepSpec::to_json() const {
  Json solver_names = Json::array();
  for (auto m : solvers) solver_names.push_back(method_name(m));
  return Json{{"axis", axis_name(axis)},
              {"values", values},
              {"dataset", dataset},
              {"phantom", phantom.to_json()},
              {"fluorophores", effective_fluorophores(*this)},
              {"layout", layout.to_json()},
              {"band_count", band_count},
              {"solvers", solver_names},
              {"solver", solver.to_json()},
              {"acquisition", acquisition.to_json()},
              {"replicates", replicates}};
}

SweepSpec SweepSpec::from_json(const Json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) fail(ErrorKind::InvalidConfig, "sweep spec must be a JSON object");
  SweepSpec s;
  s.base_dir = base_dir;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "axis") s.axis = parse_axis(value.get<std::string>());
      else if (key == "values") s.values = value.get<std::vector<double>>();
      else if (key == "dataset") s.dataset = value.get<std::string>();
      else if (key == "phantom") s.phantom = PhantomSpec::from_json(value);
      else if (key == "fluorophores") s.fluorophores = value.get<std::vector<std::string>>();
      else if (key == "layout") s.layout = BandLayout::from_json(value);
      else if (key == "band_count") s.band_count = value.get<std::size_t>();
      else if (key == "solvers") {
        s.solvers.clear();
        for (const auto& name : value.get<std::vector<std::string>>()) {
          const auto m = parse_method(name);
          if (!m) fail(ErrorKind::InvalidConfig, "unknown solver '" + name + "'");
          s.solvers.push_back(*m);
        }
      } else if (key == "solver") s.solver = SolverConfig::from_json(value);
      else if (key == "acquisition") s.acquisition = AcquisitionConfig::from_json(value);
      else if (key == "replicates") s.replicates = value.get<int>();
      else fail(ErrorKind::InvalidConfig, "sweep spec: unknown key '" + key + "'");
    }
  } catch (const Json::exception& e) {
    fail(ErrorKind::InvalidConfig, std::string("sweep spec: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidConfig) throw;
    fail(ErrorKind::InvalidConfig, std::string("sweep spec: ") + e.what());
  }
  s.validate();
  return s;
}

SweepCondition build_condition(const SweepSpec& spec, double value) {
  const auto names = effective_fluorophores(spec);
  std::vector<EmissionSpectrum> spectra;
  for (const auto& name : names) spectra.push_back(resolve_spectrum(name, {}, spec.base_dir));
  std::vector<std::string> labels;
  for (const auto& s : spectra) labels.push_back(s.name());
  if (spec.axis == SweepAxis::OverlapDelta) {
    spectra.back() = shift_spectrum(spectra.back(), value);
    labels.back() += "_shift";
  }
  const MixingMatrix full = build_mixing_matrix(spectra, spec.layout);
  const MixingMatrix labelled(full.matrix(), labels);

  SweepCondition c{value, labelled, spec.layout, spec.acquisition};
  const std::size_t bands = bands_at(spec, value);
  if (bands != spec.layout.size()) {
    const BandGroups groups = even_groups(spec.layout.size(), bands);
    c.mixing = rebin_mixing(labelled, groups);
    c.layout = rebin_layout(spec.layout, groups);
  }
  switch (spec.axis) {
    case SweepAxis::Exposure: c.acquisition.exposure_ms = value; break;
    case SweepAxis::BandCountSameSnr:
      // Each of the L bands receives the photons a full-resolution band would.
      c.acquisition.photons_per_unit_per_ms *=
          static_cast<double>(bands) / static_cast<double>(spec.layout.size());
      break;
    default: break;
  }
  return c;
}

BenchReport run_sweep(const SweepSpec& spec) {
  spec.validate();
  BenchReport report;
  report.spec = spec;
  const std::size_t nv = spec.values.size();
  const auto nr = static_cast<std::size_t>(spec.replicates);
  const std::size_t ns = spec.solvers.size();

  std::vector<SweepCondition> conditions;
  for (double v : spec.values) {
    conditions.push_back(build_condition(spec, v));
    report.kappa.push_back(analyze_conditioning(conditions.back().mixing).kappa);
  }
  const auto labels = conditions.front().mixing.labels();

  // Phase 1: one phantom per replicate, one acquisition per (value, replicate).
  std::vector<ConcentrationMap> phantoms(nr);
  parallel_jobs(nr, [&](std::size_t r) {
    PhantomSpec p = spec.phantom;
    p.rng_seed += r;
    if (p.labels.empty()) p.labels = labels;
    phantoms[r] = generate_phantom(p);
  });
  std::vector<SpectralImage> images(nv * nr);
  std::vector<double> input_snr(nv * nr, kNaN);
  parallel_jobs(nv * nr, [&](std::size_t job) {
    const std::size_t v = job / nr, r = job % nr;
    AcquisitionConfig acq = conditions[v].acquisition;
    acq.rng_seed += r;
    const SpectralImage raw =
        simulate_acquisition(phantoms[r], conditions[v].mixing, acq, conditions[v].layout);
    try {
      input_snr[job] = spectral_snr(raw);
    } catch (const Error&) {
    }
    images[job] = normalize_acquisition(raw);
  });
  for (std::size_t v = 0; v < nv; ++v) {
    const auto [m, s] = mean_std({input_snr.begin() + static_cast<long>(v * nr),
                                  input_snr.begin() + static_cast<long>((v + 1) * nr)});
    report.input_snr.push_back(m);
    report.input_snr_std.push_back(s);
  }

  // Phase 2: independent (value, solver, replicate) cells, merged by key.
  report.cells.resize(nv * ns * nr);
  parallel_jobs(report.cells.size(), [&](std::size_t job) {
    const std::size_t v = job / (ns * nr), k = job / nr % ns, r = job % nr;
    CellResult& cell = report.cells[job];
    cell.value = spec.values[v];
    cell.method = spec.solvers[k];
    cell.replicate = static_cast<int>(r);
    SolverConfig cfg = spec.solver;
    cfg.rng_seed += r;
    try {
      UnmixResult res = unmix(cell.method, images[v * nr + r], conditions[v].mixing, cfg);
      cell.solver_meta = std::move(res.meta);
      cell.report = evaluate(phantoms[r], res.estimate);
    } catch (const Error& e) {
      cell.error = e.what();
      ChannelMetrics nan{"", kNaN, kNaN, kNaN, kNaN, cell.error};
      for (const auto& label : labels) {
        nan.channel = label;
        cell.report.per_channel.push_back(nan);
      }
      nan.channel = "mean";
      cell.report.mean = nan;
    }
  });

  for (std::size_t v = 0; v < nv; ++v)
    for (std::size_t k = 0; k < ns; ++k) {
      AggregateRow row;
      row.value = spec.values[v];
      row.method = method_name(spec.solvers[k]);
      const std::size_t channels = labels.size() + 1;
      for (std::size_t c = 0; c < channels; ++c) {
        ChannelMetrics mean, spread;
        mean.channel = spread.channel = c < labels.size() ? labels[c] : "mean";
        for (std::size_t m = 0; m < 4; ++m) {
          std::vector<double> samples;
          for (std::size_t r = 0; r < nr; ++r) {
            const auto& rep = report.cells[(v * ns + k) * nr + r].report;
            samples.push_back(metric_of(c < labels.size() ? rep.per_channel[c] : rep.mean, m));
          }
          std::tie(metric_ref(mean, m), metric_ref(spread, m)) = mean_std(samples);
        }
        row.mean.push_back(mean);
        row.std.push_back(spread);
      }
      for (std::size_t r = 0; r < nr; ++r) {
        const auto& cell = report.cells[(v * ns + k) * nr + r];
        if (!cell.error.empty())
          row.errors.push_back("replicate " + std::to_string(r) + ": " + cell.error);
        for (const auto& cm : cell.report.per_channel)
          if (cell.error.empty() && !cm.error.empty())
            row.errors.push_back("replicate " + std::to_string(r) + " " + cm.channel + ": " +
                                 cm.error);
      }
      report.rows.push_back(std::move(row));
    }
  return report;
}

Ranking compare_methods(const BenchReport& report) {
  Ranking ranking;
  std::map<double, std::vector<const AggregateRow*>> by_value;
  for (const auto& row : report.rows) {
    const bool errored = !row.errors.empty() || std::isnan(row.mean.back().psnr_ri);
    if (errored) {
      ranking.excluded.push_back(row.method + "@" + detail::format_double(row.value) + ": " +
                                 (row.errors.empty() ? "no valid metrics" : row.errors.front()));
      continue;
    }
    by_value[row.value].push_back(&row);
  }
  for (double value : report.spec.values) {
    const auto it = by_value.find(value);
    if (it == by_value.end()) continue;
    for (std::size_t m = 0; m < 4; ++m) {
      std::vector<std::pair<double, std::string>> scored;
      for (const auto* row : it->second) {
        const double score = metric_of(row->mean.back(), m);
        if (!std::isnan(score)) scored.emplace_back(score, row->method);
      }
      std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      for (std::size_t i = 0; i < scored.size(); ++i) {
        RankEntry e;
        e.value = value;
        e.metric = kMetricNames[m];
        e.method = scored[i].second;
        e.rank = static_cast<int>(i) + 1;
        e.best = i == 0;
        e.second = i == 1;
        e.score = scored[i].first;
        e.tied = (i > 0 && scored[i - 1].first == e.score) ||
                 (i + 1 < scored.size() && scored[i + 1].first == e.score);
        ranking.entries.push_back(std::move(e));
      }
    }
  }
  return ranking;
}

std::vector<ReportRow> table_rows(const BenchReport& report) {
  const std::string key = axis_name(report.spec.axis);
  std::vector<ReportRow> rows;
  for (std::size_t v = 0; v < report.spec.values.size(); ++v) {
    const std::string value = detail::format_double(report.spec.values[v]);
    ChannelMetrics input{"spectral", kNaN, kNaN, kNaN, report.input_snr[v], {}};
    rows.push_back({report.spec.dataset, "input", key, value, input});
    for (const auto& row : report.rows) {
      if (row.value != report.spec.values[v]) continue;
      for (const auto& cm : row.mean)
        rows.push_back({report.spec.dataset, row.method, key, value, cm});
    }
  }
  return rows;
}

Json table_json(const BenchReport& report) {
  auto stats = [](const ChannelMetrics& mean, const ChannelMetrics& spread) {
    Json j{{"channel", mean.channel}};
    for (std::size_t m = 0; m < 4; ++m)
      j[kMetricNames[m]] = Json{{"mean", number_to_json(metric_of(mean, m))},
                                {"std", number_to_json(metric_of(spread, m))}};
    return j;
  };
  Json rows = Json::array();
  for (std::size_t v = 0; v < report.spec.values.size(); ++v) {
    rows.push_back(Json{{"condition_value", number_to_json(report.spec.values[v])},
                        {"method", "input"},
                        {"kappa", number_to_json(report.kappa[v])},
                        {"spectral_snr", Json{{"mean", number_to_json(report.input_snr[v])},
                                              {"std", number_to_json(report.input_snr_std[v])}}}});
    for (const auto& row : report.rows) {
      if (row.value != report.spec.values[v]) continue;
      Json channels = Json::array();
      for (std::size_t c = 0; c < row.mean.size(); ++c)
        channels.push_back(stats(row.mean[c], row.std[c]));
      Json j{{"condition_value", number_to_json(row.value)},
             {"method", row.method},
             {"channels", channels}};
      if (!row.errors.empty()) j["errors"] = row.errors;
      rows.push_back(std::move(j));
    }
  }
  return Json{{"dataset", report.spec.dataset},
              {"condition_key", axis_name(report.spec.axis)},
              {"replicates", report.spec.replicates},
              {"spec", report.spec.to_json()},
              {"rows", rows}};
}

Json summary_json(const BenchReport& report, const Ranking& ranking) {
  Json methods = Json::object();
  for (auto method : report.spec.solvers) {
    const std::string name = method_name(method);
    Json metrics = Json::object();
    for (std::size_t m = 0; m < 4; ++m) {
      std::vector<double> series;
      for (const auto& row : report.rows)
        if (row.method == name) series.push_back(metric_of(row.mean.back(), m));
      metrics[kMetricNames[m]] = trend(series);
    }
    methods[name] = metrics;
  }
  Json ranks = Json::array();
  for (const auto& e : ranking.entries)
    ranks.push_back(Json{{"condition_value", number_to_json(e.value)},
                         {"metric", e.metric},
                         {"method", e.method},
                         {"rank", e.rank},
                         {"score", number_to_json(e.score)},
                         {"best", e.best},
                         {"second", e.second},
                         {"tied", e.tied}});
  return Json{{"axis", axis_name(report.spec.axis)},
              {"values", report.spec.values},
              {"input_spectral_snr", trend(report.input_snr)},
              {"kappa", trend(report.kappa)},
              {"monotonicity", methods},
              {"ranking", ranks},
              {"excluded", ranking.excluded}};
}

void write_bench_outputs(const BenchReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
  const std::string axis = axis_name(report.spec.axis);
  write_report_csv(dir / ("table_" + axis + ".csv"), table_rows(report));
  write_json(dir / ("table_" + axis + ".json"), table_json(report));
  write_json(dir / "summary.json", summary_json(report, compare_methods(report)));
}

}  // namespace spmx
