#include <algorithm>
#include <array>

#include "spmx/error.hpp"
#include "spmx/solvers.hpp"

namespace spmx {

void SolverConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) fail(ErrorKind::InvalidConfig, std::string("solver config: ") + what);
  };
  require(admm_rho > 0.0, "admm_rho must be positive");
  require(admm_tol > 0.0, "admm_tol must be positive");
  require(admm_max_iter >= 1, "admm_max_iter must be >= 1");
  require(rlu_iters >= 1, "rlu_iters must be >= 1");
  require(nmf_iters >= 1, "nmf_iters must be >= 1");
  require(hyu_harmonic >= 1, "hyu_harmonic must be >= 1");
  require(hyu_bins >= 1, "hyu_bins must be >= 1");
  require(lumos_restarts >= 1, "lumos_restarts must be >= 1");
  require(lumos_max_iter >= 1, "lumos_max_iter must be >= 1");
}

Json SolverConfig::to_json() const {
  return Json{{"admm_rho", admm_rho},         {"admm_tol", admm_tol},
              {"admm_max_iter", admm_max_iter}, {"rlu_iters", rlu_iters},
              {"nmf_iters", nmf_iters},       {"hyu_harmonic", hyu_harmonic},
              {"hyu_bins", hyu_bins},         {"lumos_restarts", lumos_restarts},
              {"lumos_max_iter", lumos_max_iter}, {"rng_seed", rng_seed}};
}

SolverConfig SolverConfig::from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorKind::InvalidConfig, "solver config must be a JSON object");
  SolverConfig cfg;
  for (const auto& [key, value] : j.items()) {
    auto real = [&](double& field) {
      if (!value.is_number())
        fail(ErrorKind::InvalidConfig, "solver config: '" + key + "' must be a number");
      field = value.get<double>();
    };
    auto integer = [&](int& field) {
      if (!value.is_number_integer())
        fail(ErrorKind::InvalidConfig, "solver config: '" + key + "' must be an integer");
      field = value.get<int>();
    };
    if (key == "admm_rho") real(cfg.admm_rho);
    else if (key == "admm_tol") real(cfg.admm_tol);
    else if (key == "admm_max_iter") integer(cfg.admm_max_iter);
    else if (key == "rlu_iters") integer(cfg.rlu_iters);
    else if (key == "nmf_iters") integer(cfg.nmf_iters);
    else if (key == "hyu_harmonic") integer(cfg.hyu_harmonic);
    else if (key == "hyu_bins") integer(cfg.hyu_bins);
    else if (key == "lumos_restarts") integer(cfg.lumos_restarts);
    else if (key == "lumos_max_iter") integer(cfg.lumos_max_iter);
    else if (key == "rng_seed") {
      if (!value.is_number_unsigned())
        fail(ErrorKind::InvalidConfig, "solver config: 'rng_seed' must be a non-negative integer");
      cfg.rng_seed = value.get<std::uint64_t>();
    } else {
      fail(ErrorKind::InvalidConfig, "solver config: unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

namespace {

constexpr std::array<std::pair<Method, std::string_view>, 7> kMethodNames{{
    {Method::LU, "lu"},
    {Method::NNLU, "nnlu"},
    {Method::FCLU, "fclu"},
    {Method::RLU, "rlu"},
    {Method::NMF_RI, "nmf-ri"},
    {Method::HyU, "hyu"},
    {Method::LUMoS, "lumos"},
}};

}  // namespace

std::string method_name(Method m) {
  for (const auto& [method, name] : kMethodNames)
    if (method == m) return std::string(name);
  return "unknown";
}

std::optional<Method> parse_method(std::string_view name) {
  for (const auto& [method, n] : kMethodNames)
    if (n == name) return method;
  return std::nullopt;
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> kAll = {Method::LU,     Method::NNLU, Method::FCLU,
                                           Method::RLU,    Method::NMF_RI, Method::HyU,
                                           Method::LUMoS};
  return kAll;
}

bool method_is_nonnegative(Method m) {
  return m == Method::NNLU || m == Method::FCLU || m == Method::RLU || m == Method::NMF_RI ||
         m == Method::LUMoS;
}

}  // namespace spmx
