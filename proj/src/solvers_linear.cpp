#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <numeric>

#include "spmx/error.hpp"
#include "spmx/parallel.hpp"
#include "spmx/solvers.hpp"
#include "spmx/spectral.hpp"
#include "solver_util.hpp"

namespace spmx {

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cutoff = sv.size() > 0 ? kSingularTolerance * sv[0] : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > cutoff && sv[i] > 0.0) inv[i] = 1.0 / sv[i];
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Eigen::VectorXd project_simplex(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  std::vector<double> sorted(v.data(), v.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    cumulative += sorted[static_cast<std::size_t>(j)];
    const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (sorted[static_cast<std::size_t>(j)] - t > 0.0) theta = t;
  }
  Eigen::VectorXd out(n);
  for (Eigen::Index j = 0; j < n; ++j) out[j] = std::max(v[j] - theta, 0.0);
  return out;
}

AdmmSolver::AdmmSolver(const MixingMatrix& m, AdmmConstraint constraint, const SolverConfig& cfg)
    : m_(m.matrix()),
      gram_(m.matrix().transpose() * m.matrix()),
      pinv_(pseudo_inverse(m.matrix())),
      constraint_(constraint),
      rho_(cfg.admm_rho),
      tol_(cfg.admm_tol),
      max_iter_(cfg.admm_max_iter) {
  cfg.validate();
  const auto f = gram_.rows();
  factor_.compute(gram_ + rho_ * Eigen::MatrixXd::Identity(f, f));
}

Eigen::VectorXd AdmmSolver::solve(const Eigen::VectorXd& s, AdmmStats* stats) const {
  auto project = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    if (constraint_ == AdmmConstraint::Simplex) return project_simplex(v);
    return v.cwiseMax(0.0);
  };
  const Eigen::VectorXd b = m_.transpose() * s;
  // Warm start from the projected least-squares solution.
  Eigen::VectorXd z = project(pinv_ * s);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(z.size());
  Eigen::VectorXd x(z.size());
  Eigen::VectorXd z_prev(z.size());
  AdmmStats local;
  for (int it = 1; it <= max_iter_; ++it) {
    x = factor_.solve(b + rho_ * (z - w));
    z_prev = z;
    z = project(x + w);
    w += x - z;
    local.iterations = it;
    local.primal_residual = (x - z).norm();
    local.dual_residual = rho_ * (z - z_prev).norm();
    if (local.primal_residual < tol_ && local.dual_residual < tol_) {
      local.converged = true;
      break;
    }
  }
  Eigen::VectorXd refined = z;
  if (polish(s, refined)) {
    z = refined;
    local.polished = true;
  }
  if (stats) *stats = local;
  return z;
}

// Active-set refinement: fixes the zero pattern of the ADMM iterate, solves
// the equality-constrained least-squares problem on the free coordinates and
// keeps the result only if it satisfies the KKT conditions.
bool AdmmSolver::polish(const Eigen::VectorXd& s, Eigen::VectorXd& u) const {
  const Eigen::Index f = u.size();
  std::vector<Eigen::Index> free;
  for (Eigen::Index j = 0; j < f; ++j)
    if (u[j] > 0.0) free.push_back(j);
  if (free.empty()) return false;
  const auto nf = static_cast<Eigen::Index>(free.size());
  const bool simplex = constraint_ == AdmmConstraint::Simplex;
  const Eigen::Index dim = nf + (simplex ? 1 : 0);
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd rhs(dim);
  const Eigen::VectorXd b = m_.transpose() * s;
  for (Eigen::Index a = 0; a < nf; ++a) {
    for (Eigen::Index c = 0; c < nf; ++c) kkt(a, c) = gram_(free[a], free[c]);
    rhs[a] = b[free[a]];
  }
  if (simplex) {
    for (Eigen::Index a = 0; a < nf; ++a) kkt(a, nf) = kkt(nf, a) = 1.0;
    rhs[nf] = 1.0;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) return false;
  const Eigen::VectorXd sol = lu.solve(rhs);
  Eigen::VectorXd candidate = Eigen::VectorXd::Zero(f);
  for (Eigen::Index a = 0; a < nf; ++a) {
    if (!(sol[a] >= 0.0)) return false;
    candidate[free[a]] = sol[a];
  }
  const double nu = simplex ? sol[nf] : 0.0;
  const Eigen::VectorXd grad = gram_ * candidate - b;
  const double scale = std::max({1.0, b.cwiseAbs().maxCoeff(), std::abs(nu)});
  for (Eigen::Index j = 0; j < f; ++j) {
    if (candidate[j] > 0.0) continue;
    if (grad[j] + nu < -1e-9 * scale) return false;
  }
  if (simplex) {
    // Exact feasibility: absorb rounding into the sum.
    candidate = project_simplex(candidate);
  }
  u = candidate;
  return true;
}

namespace detail {

void require_bands(const SpectralImage& s, const MixingMatrix& m) {
  if (s.bands() != m.bands())
    fail(ErrorKind::ShapeMismatch, "spectral image has " + std::to_string(s.bands()) +
                                       " bands but the mixing matrix has " +
                                       std::to_string(m.bands()) + " rows");
}

ConcentrationMap make_estimate(const SpectralImage& s, const MixingMatrix& m) {
  Shape shape = s.data.shape();
  shape.channels = m.fluorophores();
  return ConcentrationMap{Tensor4(shape), m.labels(), Json::object()};
}

Eigen::VectorXd gather(const Tensor4& t, std::size_t p) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(t.channels()));
  for (std::size_t c = 0; c < t.channels(); ++c) v[static_cast<Eigen::Index>(c)] = t(c, p);
  return v;
}

void scatter(Tensor4& t, std::size_t p, const Eigen::VectorXd& v) {
  for (std::size_t c = 0; c < t.channels(); ++c) t(c, p) = v[static_cast<Eigen::Index>(c)];
}

}  // namespace detail

UnmixResult unmix_lu(const SpectralImage& s, const MixingMatrix& m) {
  detail::require_bands(s, m);
  const Eigen::MatrixXd pinv = pseudo_inverse(m.matrix());
  UnmixResult result{detail::make_estimate(s, m), Json{{"method", "lu"}}};
  const std::size_t bands = m.bands();
  const std::size_t fps = m.fluorophores();
  Tensor4& out = result.estimate.data;
  parallel_for(s.voxels(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p)
      for (std::size_t j = 0; j < fps; ++j) {
        double acc = 0.0;
        for (std::size_t l = 0; l < bands; ++l)
          acc += pinv(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l)) * s.data(l, p);
        out(j, p) = acc;
      }
  });
  result.meta["rank_deficient"] = analyze_conditioning(m).rank_deficient;
  return result;
}

namespace {

struct AdmmTally {
  std::atomic<std::size_t> converged{0};
  std::atomic<std::size_t> polished{0};
  std::atomic<std::size_t> unsettled{0};
  std::atomic<int> max_iterations{0};

  void add(const AdmmStats& st) {
    if (st.converged) ++converged;
    if (st.polished) ++polished;
    if (!st.converged && !st.polished) ++unsettled;
    int prev = max_iterations.load();
    while (prev < st.iterations && !max_iterations.compare_exchange_weak(prev, st.iterations)) {
    }
  }
};

}  // namespace

UnmixResult unmix_nnlu(const SpectralImage& s, const MixingMatrix& m, const SolverConfig& cfg) {
  detail::require_bands(s, m);
  const AdmmSolver solver(m, AdmmConstraint::NonNegative, cfg);
  UnmixResult result{detail::make_estimate(s, m), Json{{"method", "nnlu"}}};
  AdmmTally tally;
  parallel_for(s.voxels(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      AdmmStats st;
      const Eigen::VectorXd u = solver.solve(detail::gather(s.data, p), &st);
      detail::scatter(result.estimate.data, p, u);
      tally.add(st);
    }
  });
  result.meta["voxels"] = s.voxels();
  result.meta["voxels_converged"] = tally.converged.load();
  result.meta["voxels_polished"] = tally.polished.load();
  result.meta["max_iterations_used"] = tally.max_iterations.load();
  result.meta["converged"] = tally.unsettled.load() == 0;
  return result;
}

UnmixResult unmix_fclu(const SpectralImage& s, const MixingMatrix& m, const SolverConfig& cfg) {
  detail::require_bands(s, m);
  const AdmmSolver solver(m, AdmmConstraint::Simplex, cfg);
  UnmixResult result{detail::make_estimate(s, m), Json{{"method", "fclu"}}};
  AdmmTally tally;
  std::atomic<std::size_t> zero_voxels{0};
  parallel_for(s.voxels(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      Eigen::VectorXd v = detail::gather(s.data, p);
      const double norm = v.cwiseAbs().sum();
      if (norm == 0.0) {
        ++zero_voxels;
        continue;  // estimate already zero
      }
      AdmmStats st;
      const Eigen::VectorXd u = solver.solve(v / norm, &st);
      detail::scatter(result.estimate.data, p, u);
      tally.add(st);
    }
  });
  result.meta["voxels"] = s.voxels();
  result.meta["zero_voxels"] = zero_voxels.load();
  result.meta["voxels_converged"] = tally.converged.load();
  result.meta["voxels_polished"] = tally.polished.load();
  result.meta["max_iterations_used"] = tally.max_iterations.load();
  result.meta["converged"] = tally.unsettled.load() == 0;
  return result;
}

double kl_divergence(const Eigen::VectorXd& s, const Eigen::VectorXd& y) {
  double total = 0.0;
  for (Eigen::Index l = 0; l < s.size(); ++l) {
    const double yl = std::max(y[l], 1e-12);
    if (s[l] > 0.0) total += s[l] * std::log(s[l] / yl);
    total += yl - s[l];
  }
  return total;
}

Eigen::VectorXd richardson_lucy(const Eigen::MatrixXd& m, const Eigen::VectorXd& s_in, int iters,
                                std::vector<double>* trace) {
  const Eigen::VectorXd s = s_in.cwiseMax(0.0);
  const Eigen::Index f = m.cols();
  Eigen::VectorXd u = Eigen::VectorXd::Constant(f, s.sum() / static_cast<double>(f));
  Eigen::VectorXd y = m * u;
  if (trace) trace->push_back(kl_divergence(s, y));
  Eigen::VectorXd ratio(s.size());
  for (int it = 0; it < iters; ++it) {
    for (Eigen::Index l = 0; l < s.size(); ++l) ratio[l] = s[l] / std::max(y[l], 1e-12);
    u = u.cwiseProduct(m.transpose() * ratio);
    y = m * u;
    if (trace) trace->push_back(kl_divergence(s, y));
  }
  return u;
}

UnmixResult unmix_rlu(const SpectralImage& s, const MixingMatrix& m, const SolverConfig& cfg) {
  detail::require_bands(s, m);
  cfg.validate();
  UnmixResult result{detail::make_estimate(s, m),
                     Json{{"method", "rlu"}, {"iterations", cfg.rlu_iters}}};
  parallel_for(s.voxels(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p)
      detail::scatter(result.estimate.data, p,
                      richardson_lucy(m.matrix(), detail::gather(s.data, p), cfg.rlu_iters));
  });
  return result;
}

UnmixResult unmix(Method method, const SpectralImage& s, const MixingMatrix& m,
                  const SolverConfig& cfg) {
  switch (method) {
    case Method::LU: return unmix_lu(s, m);
    case Method::NNLU: return unmix_nnlu(s, m, cfg);
    case Method::FCLU: return unmix_fclu(s, m, cfg);
    case Method::RLU: return unmix_rlu(s, m, cfg);
    case Method::NMF_RI: {
      NmfResult r = unmix_nmf_ri(s, m, cfg);
      return UnmixResult{std::move(r.estimate), std::move(r.meta)};
    }
    case Method::HyU: return unmix_hyu(s, m, cfg);
    case Method::LUMoS: return unmix_lumos(s, m.fluorophores(), m, cfg);
  }
  fail(ErrorKind::InvalidArgument, "unknown unmixing method");
}

}  // namespace spmx
