#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "spmx/io.hpp"
#include "spmx/metrics.hpp"
#include "spmx/simulator.hpp"
#include "spmx/solvers.hpp"

namespace spmx {

enum class SweepAxis { Exposure, OverlapDelta, BandCountSameSnr, BandCountSameBudget };

std::string axis_name(SweepAxis axis);
SweepAxis parse_axis(const std::string& name);

// A sweep over one experimental variable.
//   exposure                 values are exposure times in ms
//   overlap_delta            values are shifts in nm applied to the last fluorophore
//   band_count_same_snr      values are band counts; per-band expected photons fixed
//   band_count_same_budget   values are band counts; total expected photons fixed
// Fluorophores are built-in names or spectrum CSV paths (relative to
// base_dir). `band_count` > 0 rebins the layout before simulating for the
// exposure and overlap axes.
struct SweepSpec {
  SweepAxis axis = SweepAxis::Exposure;
  std::vector<double> values;
  std::string dataset = "phantom";
  PhantomSpec phantom;
  std::vector<std::string> fluorophores;
  BandLayout layout = BandLayout::uniform(440.0, 696.0, 32);
  std::size_t band_count = 0;
  std::vector<Method> solvers{Method::LU};
  SolverConfig solver;
  AcquisitionConfig acquisition;
  int replicates = 3;
  std::filesystem::path base_dir;

  void validate() const;
  Json to_json() const;
  static SweepSpec from_json(const Json& j, const std::filesystem::path& base_dir = {});
};

// Everything a cell needs: one (value, replicate) simulated acquisition.
struct SweepCondition {
  double value = 0.0;
  MixingMatrix mixing;
  BandLayout layout;
  AcquisitionConfig acquisition;
};

// Mixing matrix, layout and acquisition for one sweep value.
SweepCondition build_condition(const SweepSpec& spec, double value);

struct CellResult {
  double value = 0.0;
  Method method = Method::LU;
  int replicate = 0;
  MetricReport report;
  Json solver_meta = Json::object();
  std::string error;  // non-empty when the solver failed; metrics are NaN
};

// Replicate-aggregated metrics for one (value, method) pair.
struct AggregateRow {
  double value = 0.0;
  std::string method;
  std::vector<ChannelMetrics> mean;  // per channel, then the channel mean last
  std::vector<ChannelMetrics> std;
  std::vector<std::string> errors;
};

struct BenchReport {
  SweepSpec spec;
  std::vector<CellResult> cells;        // ordered by (value, method, replicate)
  std::vector<double> input_snr;        // spectral SNR of the acquisition, per value
  std::vector<double> input_snr_std;
  std::vector<double> kappa;            // condition number of M, per value
  std::vector<AggregateRow> rows;       // ordered by (value, method)
};

BenchReport run_sweep(const SweepSpec& spec);

struct RankEntry {
  double value = 0.0;
  std::string metric;
  std::string method;
  int rank = 0;
  bool best = false;
  bool second = false;
  bool tied = false;
  double score = 0.0;
};

struct Ranking {
  std::vector<RankEntry> entries;
  std::vector<std::string> excluded;  // "<method>@<value>: <reason>"
};

// Per value and metric, methods ordered by channel-mean score (higher is
// better), ties broken by method name. NaN cells are excluded.
Ranking compare_methods(const BenchReport& report);

// Table rows (report CSV schema): per value, an "input" row carrying the
// acquisition's spectral SNR, then per method the per-channel rows and "mean".
std::vector<ReportRow> table_rows(const BenchReport& report);
Json table_json(const BenchReport& report);
Json summary_json(const BenchReport& report, const Ranking& ranking);

// Writes table_<axis>.csv, table_<axis>.json and summary.json into dir.
void write_bench_outputs(const BenchReport& report, const std::filesystem::path& dir);

}  // namespace spmx
