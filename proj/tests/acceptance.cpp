// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails. Oracles are computed here independently of the solvers
// (normal equations, eigen-decompositions, grid enumeration).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "spmx/bench.hpp"
#include "spmx/metrics.hpp"
#include "spmx/parallel.hpp"
#include "spmx/random.hpp"
#include "spmx/simulator.hpp"
#include "spmx/solvers.hpp"
#include "spmx/spectral.hpp"

using namespace spmx;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  // Records a failed condition; the first few are kept in the detail line.
  void require(bool ok, const std::string& what) {
    if (ok) return;
    if (pass) detail << "failed: ";
    else detail << "; ";
    detail << what;
    pass = false;
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

SpectralImage single(const Eigen::VectorXd& s) { return test::image_from(s); }

Eigen::VectorXd first_voxel(const ConcentrationMap& u) { return test::voxel(u, 0); }

// Least-squares solution via the normal equations, independent of the SVD
// path used by the LU solver.
Eigen::VectorXd normal_equations(const Eigen::MatrixXd& m, const Eigen::VectorXd& s) {
  return (m.transpose() * m).ldlt().solve(m.transpose() * s);
}

double smallest_singular_value(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m.transpose() * m);
  return std::sqrt(std::max(0.0, eig.eigenvalues()(0)));
}

const AggregateRow* row_for(const BenchReport& r, double value, const std::string& method) {
  for (const auto& row : r.rows)
    if (row.value == value && row.method == method) return &row;
  return nullptr;
}

std::vector<double> lu_psnr(const BenchReport& r) {
  std::vector<double> out;
  for (double v : r.spec.values) {
    const auto* row = row_for(r, v, "lu");
    out.push_back(row ? row->mean.back().psnr_ri : std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

bool strictly_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) return false;
  return true;
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

std::string join(const std::vector<double>& v, int precision = 2) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(precision);
  for (std::size_t i = 0; i < v.size(); ++i) ss << (i ? "->" : "") << v[i];
  return ss.str();
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// ---------------------------------------------------------------------------

void round_trip(Outcome& o) {
  std::mt19937_64 rng(1001);
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t f = i % 2 ? 4 : 2;
    const std::size_t l = (i / 2) % 2 ? 32 : 5;
    const auto m = test::random_mixing(l, f, rng, 10.0);
    const auto u = test::random_map(f, 16, 16, rng);
    const auto est = unmix_lu(mix_forward(u, m), m).estimate;
    worst = std::max(worst, test::max_abs_diff(est.data, u.data));
  }
  const double secs = seconds_since(t0);
  o.require(worst < 1e-8, "max-abs error " + std::to_string(worst));
  o.require(secs < 5.0, "runtime " + std::to_string(secs) + " s");
  o.detail << (o.pass ? "" : " | ") << "100 instances, max-abs error " << worst << ", " << secs
           << " s";
}

void noise_bound(Outcome& o) {
  std::mt19937_64 rng(1002);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> sigma(0.01, 2.0);
  int held = 0;
  double tightest = std::numeric_limits<double>::infinity();
  for (int t = 0; t < 1000; ++t) {
    const std::size_t f = 2 + static_cast<std::size_t>(t % 3);
    const std::size_t l = t % 2 ? 32 : 8;
    const auto m = test::random_mixing(l, f, rng, 50.0);
    Eigen::VectorXd u(static_cast<Eigen::Index>(f));
    for (Eigen::Index j = 0; j < u.size(); ++j) u(j) = 5.0 * std::abs(noise(rng));
    const double s = sigma(rng);
    Eigen::VectorXd eps(static_cast<Eigen::Index>(l));
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = s * noise(rng);
    const Eigen::VectorXd est = first_voxel(unmix_lu(single(m.matrix() * u + eps), m).estimate);
    const double bound = eps.norm() / smallest_singular_value(m.matrix());
    const double err = (est - u).norm();
    if (err <= bound + 1e-9) ++held;
    tightest = std::min(tightest, bound - err);
  }
  o.require(held == 1000, std::to_string(held) + "/1000");
  o.detail << (o.pass ? "" : " | ") << held << "/1000 trials within bound, min slack "
           << tightest;
}

void constraints(Outcome& o) {
  SolverConfig cfg;
  cfg.nmf_iters = 200;
  std::mt19937_64 rng(1003);

  // Noisy acquisition of a 4-fluorophore phantom, offset removed.
  PhantomSpec p;
  p.fluorophores = 4;
  p.y = p.x = 64;
  p.rng_seed = 3;
  const auto u = generate_phantom(p);
  const auto m = test::random_mixing(32, 4, rng);
  AcquisitionConfig acq;
  acq.exposure_ms = 2.0;
  const auto s = normalize_acquisition(simulate_acquisition(u, m, acq));

  std::size_t negatives = 0;
  for (Method method : {Method::NNLU, Method::FCLU, Method::RLU, Method::NMF_RI}) {
    const auto est = unmix(method, s, m, cfg).estimate;
    for (double v : est.data.values()) negatives += !(v >= 0.0);
  }
  o.require(negatives == 0, std::to_string(negatives) + " negative outputs");

  const auto fclu = unmix_fclu(s, m, cfg).estimate;
  double sum_err = 0.0;
  for (std::size_t v = 0; v < s.voxels(); ++v) {
    double in = 0.0;
    for (std::size_t l = 0; l < s.bands(); ++l) in += std::abs(s.data(l, v));
    if (in == 0.0) continue;
    sum_err = std::max(sum_err, std::abs(test::voxel(fclu, v).sum() - 1.0));
  }
  o.require(sum_err <= 1e-9, "FCLU sum error " + std::to_string(sum_err));

  // NNLU against LU wherever LU is already feasible.
  auto pos = test::random_map(4, 32, 32, rng, 0.2, 5.0);
  auto noisy = mix_forward(pos, m);
  std::normal_distribution<double> eps(0.0, 0.05);
  for (double& v : noisy.data.values()) v += eps(rng);
  const auto lu = unmix_lu(noisy, m).estimate;
  const auto nn = unmix_nnlu(noisy, m, cfg).estimate;
  double nn_gap = 0.0;
  std::size_t compared = 0;
  for (std::size_t v = 0; v < noisy.voxels(); ++v) {
    const auto a = test::voxel(lu, v);
    if (a.minCoeff() < 0.0) continue;
    ++compared;
    nn_gap = std::max(nn_gap, (a - test::voxel(nn, v)).cwiseAbs().maxCoeff());
  }
  o.require(compared > 0 && nn_gap < 1e-6, "NNLU-LU gap " + std::to_string(nn_gap));

  // NNLU grid oracle: 2x2 with an active constraint, step 0.001.
  Eigen::MatrixXd m2(2, 2);
  m2 << 0.9, 0.8, 0.1, 0.2;
  const Eigen::Vector2d s2(0.95, 0.05);
  const auto nnu = first_voxel(unmix_nnlu(single(s2), MixingMatrix(m2), cfg).estimate);
  double best = std::numeric_limits<double>::infinity();
  Eigen::Vector2d arg;
  for (int a = 0; a <= 2000; ++a)
    for (int b = 0; b <= 2000; ++b) {
      const Eigen::Vector2d q(a * 0.001, b * 0.001);
      const double f = (s2 - m2 * q).squaredNorm();
      if (f < best) best = f, arg = q;
    }
  const double nn_grid = (nnu - arg).cwiseAbs().maxCoeff();
  o.require(nn_grid <= 0.001 + 1e-12, "NNLU grid distance " + std::to_string(nn_grid));

  // FCLU grid oracle on the 3-simplex, step 0.001.
  double fc_grid = 0.0;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int trial = 0; trial < 3; ++trial) {
    const auto m3 = test::random_mixing(6, 3, rng);
    Eigen::VectorXd s3(6);
    for (Eigen::Index i = 0; i < 6; ++i) s3(i) = uni(rng);
    s3 /= s3.sum();
    const auto fu = first_voxel(unmix_fclu(single(s3), m3, cfg).estimate);
    double b3 = std::numeric_limits<double>::infinity();
    Eigen::Vector3d a3;
    for (int a = 0; a <= 1000; ++a)
      for (int b = 0; a + b <= 1000; ++b) {
        const Eigen::Vector3d q(a * 0.001, b * 0.001, (1000 - a - b) * 0.001);
        const double f = (s3 - m3.matrix() * q).squaredNorm();
        if (f < b3) b3 = f, a3 = q;
      }
    fc_grid = std::max(fc_grid, (fu - a3).cwiseAbs().maxCoeff());
  }
  o.require(fc_grid <= 0.001 + 1e-9, "FCLU grid distance " + std::to_string(fc_grid));

  o.detail << (o.pass ? "" : " | ") << "negatives " << negatives << ", FCLU sum error "
           << sum_err << ", NNLU-LU gap " << nn_gap << " over " << compared
           << " voxels, grid distance NNLU " << nn_grid << " FCLU " << fc_grid;
}

void rlu_monotone(Outcome& o) {
  std::mt19937_64 rng(1004);
  std::uniform_real_distribution<double> uni(0.0, 10.0);
  int monotone = 0;
  double worst_rise = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t l = t % 2 ? 32 : 8;
    const std::size_t f = 2 + static_cast<std::size_t>(t % 3);
    const auto m = test::random_mixing(l, f, rng, 1e6);
    Eigen::VectorXd s(static_cast<Eigen::Index>(l));
    for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = uni(rng);
    std::vector<double> trace;
    richardson_lucy(m.matrix(), s, 100, &trace);
    bool ok = trace.size() == 101;
    for (std::size_t i = 1; i < trace.size(); ++i) {
      const double rise = trace[i] - trace[i - 1];
      worst_rise = std::max(worst_rise, rise);
      ok &= rise <= 1e-12 * (1.0 + trace[i - 1]);
    }
    monotone += ok;
  }
  o.require(monotone == 100, std::to_string(monotone) + "/100 monotone");
  o.detail << (o.pass ? "" : " | ") << monotone << "/100 instances non-increasing over 100 iterations, largest rise "
           << worst_rise;
}

void hyu_consistency(Outcome& o) {
  std::mt19937_64 rng(1005);
  SolverConfig cfg;
  const auto m = test::random_mixing(16, 4, rng);
  const std::vector<Eigen::Vector4d> shapes{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 0.6, 0.4},
                                            {0.2, 0.3, 0.1, 0.4}};
  std::uniform_real_distribution<double> scale(0.5, 50.0);
  const std::size_t n = 64 * 64;
  Eigen::MatrixXd pixels(16, n);
  std::vector<std::pair<std::size_t, double>> who(n);
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t k = (p / 7 + p % 13) % shapes.size();
    const double c = scale(rng);
    pixels.col(static_cast<Eigen::Index>(p)) = c * (m.matrix() * shapes[k]);
    who[p] = {k, c};
  }
  const auto hyu = unmix_hyu(test::image_from(pixels), m, cfg).estimate;
  // Population-wise LU: unmix each population's spectrum once, scale per pixel.
  std::vector<Eigen::VectorXd> per_pop;
  for (const auto& shape : shapes) per_pop.push_back(normal_equations(m.matrix(), m.matrix() * shape));
  double worst = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const Eigen::VectorXd oracle = who[p].second * per_pop[who[p].first];
    worst = std::max(worst, (test::voxel(hyu, p) - oracle).cwiseAbs().maxCoeff());
  }
  o.require(worst < 1e-6, "max deviation " + std::to_string(worst));
  o.detail << (o.pass ? "" : " | ") << "4 populations, " << n << " pixels, max deviation " << worst;
}

void conditioning_trend(Outcome& o) {
  const auto t0 = Clock::now();
  SweepSpec s;
  s.axis = SweepAxis::OverlapDelta;
  s.values = {2, 5, 10, 20, 50};
  s.replicates = 3;
  const auto r = run_sweep(s);
  const auto psnr = lu_psnr(r);
  const double secs = seconds_since(t0);
  o.require(strictly_decreasing(r.kappa), "kappa " + join(r.kappa));
  o.require(strictly_increasing(psnr), "LU psnr_ri " + join(psnr));
  o.require(secs < 120.0, "runtime " + std::to_string(secs) + " s");
  o.detail << (o.pass ? "" : " | ") << "kappa " << join(r.kappa, 1) << "; LU psnr_ri "
           << join(psnr) << " dB (reference 31.73->53.31); " << secs << " s";
}

void noise_trend(Outcome& o) {
  const auto t0 = Clock::now();
  SweepSpec s;
  s.axis = SweepAxis::Exposure;
  s.values = {2, 5, 10, 20};
  s.phantom.fluorophores = 4;
  const auto r = run_sweep(s);
  const auto psnr = lu_psnr(r);
  const double secs = seconds_since(t0);
  o.require(strictly_increasing(r.input_snr), "spectral SNR " + join(r.input_snr));
  o.require(strictly_increasing(psnr), "LU psnr_ri " + join(psnr));
  o.require(secs < 120.0, "runtime " + std::to_string(secs) + " s");
  o.detail << (o.pass ? "" : " | ") << "spectral SNR " << join(r.input_snr, 1) << "; LU psnr_ri "
           << join(psnr) << " dB (reference 23.96->35.91); " << secs << " s";
}

void band_count(Outcome& o) {
  // 2x3 toy: the feasible set is a line; enumerate it on a grid.
  Eigen::MatrixXd toy(2, 3);
  toy << 0.7, 0.4, 0.1, 0.3, 0.6, 0.9;
  const Eigen::Vector3d truth(1.0, 2.0, 0.5);
  const Eigen::VectorXd st = toy * truth;
  const auto ut = first_voxel(unmix_lu(single(st), MixingMatrix(toy)).estimate);
  const Eigen::Vector3d r0 = toy.row(0).transpose(), r1 = toy.row(1).transpose();
  const Eigen::Vector3d null = r0.cross(r1).normalized();
  double grid_min = std::numeric_limits<double>::infinity();
  for (int k = -4000; k <= 4000; ++k)
    grid_min = std::min(grid_min, (truth + (k / 1000.0) * null).norm());
  const bool feasible = (toy * ut - st).norm() < 1e-12;
  o.require(feasible, "toy residual");
  o.require(ut.norm() <= grid_min + 1e-12 && ut.norm() >= grid_min - 1e-3,
            "toy norm " + std::to_string(ut.norm()) + " vs grid " + std::to_string(grid_min));

  // L = 3, F = 4 from the reference layout: compare with M^T (M M^T)^-1 s.
  SweepSpec s;
  s.axis = SweepAxis::BandCountSameSnr;
  s.values = {3, 32};
  s.phantom.fluorophores = 4;
  s.replicates = 3;
  const auto m3 = build_condition(s, 3).mixing;
  const Eigen::MatrixXd& a = m3.matrix();
  const Eigen::Vector4d u4(0.3, 1.2, 0.7, 2.0);
  const Eigen::VectorXd s4 = a * u4;
  const Eigen::VectorXd min_norm = a.transpose() * (a * a.transpose()).ldlt().solve(s4);
  const auto lu = unmix_lu(single(s4), m3);
  const double gap = (first_voxel(lu.estimate) - min_norm).cwiseAbs().maxCoeff();
  o.require(gap < 1e-9, "L=3 min-norm gap " + std::to_string(gap));
  o.require(lu.meta.value("rank_deficient", false), "rank_deficient not flagged");

  const auto r = run_sweep(s);
  const auto psnr = lu_psnr(r);
  o.require(psnr.size() == 2 && psnr[0] < psnr[1], "LU psnr_ri 3 vs 32 bands " + join(psnr));
  o.detail << (o.pass ? "" : " | ") << "toy norm " << ut.norm() << " (grid min " << grid_min
           << "), L=3 min-norm gap " << gap << "; LU psnr_ri 3 bands " << psnr[0]
           << " dB < 32 bands " << psnr[1] << " dB (reference 23.69 vs 35.91)";
}

void metric_invariance(Outcome& o) {
  std::mt19937_64 rng(1009);
  std::uniform_real_distribution<double> scale(1e-3, 1e3), jitter(-5.0, 5.0);
  double psnr_dev = 0.0, ssim_dev = 0.0;
  const std::size_t n = 64;
  for (int trial = 0; trial < 20; ++trial) {
    PhantomSpec p;
    p.y = p.x = n;
    p.fluorophores = 1;
    p.rng_seed = 100 + static_cast<std::uint64_t>(trial);
    const auto gt = generate_phantom(p).data;
    std::vector<double> pred(gt.values().begin(), gt.values().end());
    for (double& v : pred) v = 3.0 * v + 0.05 * jitter(rng);
    const double c = scale(rng);
    std::vector<double> scaled(pred);
    for (double& v : scaled) v *= c;
    const ChannelView g{gt.values(), 1, n, n}, a{pred, 1, n, n}, b{scaled, 1, n, n};
    psnr_dev = std::max(psnr_dev, std::abs(psnr_ri(g, a) - psnr_ri(g, b)));
    ssim_dev = std::max(ssim_dev, std::abs(ms_ssim_ri(g, a) - ms_ssim_ri(g, b)));
  }
  // Invariance holds up to floating-point rounding of the rescaled input.
  o.require(psnr_dev < 1e-9, "psnr deviation " + std::to_string(psnr_dev));
  o.require(ssim_dev < 1e-12, "ms-ssim deviation " + std::to_string(ssim_dev));

  std::vector<double> x(1000), y(1000), z(1000);
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = g(rng), y[i] = x[i] + g(rng);
  for (std::size_t i = 0; i < y.size(); ++i) z[i] = 7.25 * y[i] - 40.0;
  const double r_dev = std::abs(pearson(ChannelView::flat(x), ChannelView::flat(y)) -
                                pearson(ChannelView::flat(x), ChannelView::flat(z)));
  o.require(r_dev < 1e-12, "pearson deviation " + std::to_string(r_dev));

  std::vector<double> img(128 * 128);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = g(rng) + ((i % 128) < 20 ? 30.0 : 0.0);
  const double base = snr({img, 1, 128, 128});
  for (double& v : img) v += 1000.0;
  const double snr_dev = std::abs(snr({img, 1, 128, 128}) / base - 1.0);
  o.require(snr_dev < 1e-9, "snr relative deviation " + std::to_string(snr_dev));

  double worst_ratio = 1.0;
  for (double lambda : {10.0, 42.0, 500.0, 5000.0}) {
    PhiloxStream stream(9, static_cast<std::uint64_t>(lambda));
    const int draws = 100000;
    double sum = 0.0, sq = 0.0;
    std::vector<double> d(draws);
    for (auto& v : d) v = static_cast<double>(sample_poisson(lambda, stream)), sum += v;
    const double mean = sum / draws;
    for (double v : d) sq += (v - mean) * (v - mean);
    const double ratio = sq / (draws - 1) / mean;
    if (std::abs(ratio - 1.0) > std::abs(worst_ratio - 1.0)) worst_ratio = ratio;
  }
  o.require(worst_ratio >= 0.95 && worst_ratio <= 1.05,
            "Poisson var/mean " + std::to_string(worst_ratio));
  o.detail << (o.pass ? "" : " | ") << "20 rescalings: psnr dev " << psnr_dev << ", ms-ssim dev "
           << ssim_dev << "; pearson dev " << r_dev << "; snr rel dev " << snr_dev
           << "; worst Poisson var/mean " << worst_ratio;
}

void determinism(Outcome& o) {
  SweepSpec s;
  s.axis = SweepAxis::Exposure;
  s.values = {2, 5, 10, 20};
  s.phantom.fluorophores = 4;
  s.solvers = {Method::LU, Method::NNLU, Method::FCLU, Method::RLU, Method::HyU};
  const auto dir = test::scratch_dir("acceptance_determinism");
  set_thread_count(1);
  write_bench_outputs(run_sweep(s), dir / "a");
  set_thread_count(4);
  write_bench_outputs(run_sweep(s), dir / "b");
  set_thread_count(0);
  const auto a = read_text(dir / "a" / "table_exposure.csv");
  const auto b = read_text(dir / "b" / "table_exposure.csv");
  o.require(!a.empty(), "empty table");
  o.require(a == b, "tables differ");
  o.detail << (o.pass ? "" : " | ") << "exposure sweep, 5 solvers, 3 replicates: " << a.size()
           << " bytes identical across reruns (1 and 4 threads)";
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria{
      {"round-trip exactness", round_trip},
      {"LU noise amplification bound", noise_bound},
      {"constraint satisfaction", constraints},
      {"RLU monotonicity", rlu_monotone},
      {"HyU consistency", hyu_consistency},
      {"conditioning trend", conditioning_trend},
      {"noise trend", noise_trend},
      {"band-count behavior", band_count},
      {"metric invariances", metric_invariance},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
