#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spmx/types.hpp"

namespace spmx {

// Defaults are the usual baseline settings.
struct SolverConfig {
  double admm_rho = 1.0;
  double admm_tol = 1e-6;
  int admm_max_iter = 200;
  int rlu_iters = 100;
  int nmf_iters = 500;
  int hyu_harmonic = 1;
  int hyu_bins = 128;
  int lumos_restarts = 10;
  int lumos_max_iter = 200;
  std::uint64_t rng_seed = 0;

  void validate() const;
  Json to_json() const;
  // Exactly the field names above; unknown keys are rejected.
  static SolverConfig from_json(const Json& j);
};

enum class Method { LU, NNLU, FCLU, RLU, NMF_RI, HyU, LUMoS };

std::string method_name(Method m);
std::optional<Method> parse_method(std::string_view name);
const std::vector<Method>& all_methods();
// True for solvers whose outputs are guaranteed non-negative.
bool method_is_nonnegative(Method m);

// ---------------------------------------------------------------------------
// Single-voxel kernels. They operate on one spectrum and are the building
// blocks of the image-level solvers; exposed for testing and reuse.

// Truncated-SVD Moore-Penrose inverse (F x L); singular values below
// kSingularTolerance * sigma_max are treated as zero.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m);

// Euclidean projection onto {u >= 0, sum(u) = 1} (sort based).
Eigen::VectorXd project_simplex(const Eigen::VectorXd& v);

struct AdmmStats {
  int iterations = 0;
  bool converged = false;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  bool polished = false;
};

enum class AdmmConstraint { NonNegative, Simplex };

// ADMM for min 0.5*||s - M u||^2 subject to the constraint set. The linear
// system (M^T M + rho I) is factored once and shared across voxels.
class AdmmSolver {
 public:
  AdmmSolver(const MixingMatrix& m, AdmmConstraint constraint, const SolverConfig& cfg);

  // Returns the z iterate (feasible by construction).
  Eigen::VectorXd solve(const Eigen::VectorXd& s, AdmmStats* stats = nullptr) const;

 private:
  bool polish(const Eigen::VectorXd& s, Eigen::VectorXd& u) const;

  Eigen::MatrixXd m_;
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd pinv_;
  Eigen::LLT<Eigen::MatrixXd> factor_;
  AdmmConstraint constraint_;
  double rho_;
  double tol_;
  int max_iter_;
};

// Richardson-Lucy iterations on one voxel. `trace`, when given, receives
// KL(s || M u) before the first and after every iteration.
Eigen::VectorXd richardson_lucy(const Eigen::MatrixXd& m, const Eigen::VectorXd& s, int iters,
                                std::vector<double>* trace = nullptr);

// Generalized KL divergence sum(s log(s / y) - s + y) with y floored at 1e-12.
double kl_divergence(const Eigen::VectorXd& s, const Eigen::VectorXd& y);

// ---------------------------------------------------------------------------
// Image-level solvers.

struct UnmixResult {
  ConcentrationMap estimate;
  Json meta = Json::object();  // iterations, convergence flags, ...
};

UnmixResult unmix_lu(const SpectralImage& s, const MixingMatrix& m);
UnmixResult unmix_nnlu(const SpectralImage& s, const MixingMatrix& m, const SolverConfig& cfg);
UnmixResult unmix_fclu(const SpectralImage& s, const MixingMatrix& m, const SolverConfig& cfg);
UnmixResult unmix_rlu(const SpectralImage& s, const MixingMatrix& m, const SolverConfig& cfg);

struct NmfResult {
  ConcentrationMap estimate;
  MixingMatrix spectra;
  std::vector<double> objective;  // ||S - M U||_F^2 after each M update, before renormalization
  Json meta = Json::object();
};
NmfResult unmix_nmf_ri(const SpectralImage& s, const MixingMatrix& m_init,
                       const SolverConfig& cfg);

struct Phasor {
  std::vector<double> g;
  std::vector<double> s;
  std::vector<std::uint8_t> zero;  // 1 where the voxel spectrum has zero l1 norm
};
Phasor phasor_transform(const SpectralImage& s, int harmonic);

UnmixResult unmix_hyu(const SpectralImage& s, const MixingMatrix& m, const SolverConfig& cfg);

// `m` is only used to map the unordered clusters onto fluorophore channels.
UnmixResult unmix_lumos(const SpectralImage& s, std::size_t k, const MixingMatrix& m,
                        const SolverConfig& cfg);

// Dispatch by method; LUMoS uses k = F.
UnmixResult unmix(Method method, const SpectralImage& s, const MixingMatrix& m,
                  const SolverConfig& cfg);

}  // namespace spmx
