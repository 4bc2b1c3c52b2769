#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "schoolmerge/market.hpp"
#include "schoolmerge/rng.hpp"

namespace schoolmerge {

// Identifying assumption imposed on the latent utilities:
//   wtt:        submitted lists are true top-|list| orders;
//   undom:      submitted lists are true orders of the listed schools only;
//   stability:  the observed matching has no blocking pairs;
//   stab_undom: undom and stability combined.
enum class Mode { wtt, undom, stability, stab_undom };

Mode mode_from_string(const std::string& name);
std::string mode_to_string(Mode mode);

// Everything the Gibbs sampler conditions on. X stacks pair covariates for
// student utilities (row t*S + s), W for school valuations (row s*T + t).
// `observed` is only consulted by the stability modes.
struct DesignData {
  std::int32_t T = 0, S = 0;
  Eigen::MatrixXd X;  // (T*S) x p
  Eigen::MatrixXd W;  // (S*T) x r
  std::vector<std::string> x_names, w_names;
  RankData ranks;
  Matching observed;
  std::vector<std::int32_t> capacity;
};

DesignData make_design(const Market& m, Eigen::MatrixXd X, Eigen::MatrixXd W,
                       std::vector<std::string> x_names,
                       std::vector<std::string> w_names,
                       const Matching& observed);

struct Bounds {
  double lo, hi;
};

struct LatentState {
  std::vector<double> U;  // T*S, row-major by student
  std::vector<double> V;  // S*T, row-major by school
  Eigen::VectorXd beta, gamma;
  std::int64_t clamp_u = 0, clamp_v = 0;  // infeasible-interval collapses

  double u(std::int32_t t, std::int32_t s, std::int32_t S) const {
    return U[static_cast<std::size_t>(t) * S + s];
  }
  double v(std::int32_t s, std::int32_t t, std::int32_t T) const {
    return V[static_cast<std::size_t>(s) * T + t];
  }
};

struct GibbsConfig {
  std::int32_t iterations = 20000;
  std::int32_t burn_in = 10000;
  std::int32_t thin = 1;
  // Freshest-value sweeps when true; when false every bound in an iteration
  // is computed from the previous iteration's latents.
  bool gauss_seidel = true;
  // Ridge added to the Gram matrices: epsilon = ridge_scale * trace / cols.
  double ridge_scale = 1e-8;
};

// Truncation interval for U_t(s) (resp. V_s(t)) implied by the mode's
// assumptions, given the current latent values. Intervals may be unbounded;
// an empty (lo > hi) interval signals data inconsistent with the mode and is
// the caller's job to clamp and count.
Bounds utility_bounds(const DesignData& d, const LatentState& state,
                      std::int32_t t, std::int32_t s, Mode mode);
Bounds valuation_bounds(const DesignData& d, const LatentState& state,
                        std::int32_t s, std::int32_t t, Mode mode);

// Zero latents and coefficients, then one deterministic projection pass that
// nudges each value inside its implied interval (lo+0.5 / hi-0.5 / midpoint).
LatentState init_latent_state(const DesignData& d, Mode mode);

// Factorizations reused across iterations.
struct GibbsWorkspace {
  Eigen::LLT<Eigen::MatrixXd> xtx;  // of X'X + eps_x I
  Eigen::LLT<Eigen::MatrixXd> wtw;  // of W'W + eps_w I

  static GibbsWorkspace build(const DesignData& d, double ridge_scale);
};

// One full sweep: U (students ascending, schools ascending within student),
// V (schools ascending, students ascending within school), then draws of
// beta | U and gamma | V from their conjugate normals.
void gibbs_iteration(const DesignData& d, Mode mode, const GibbsConfig& cfg,
                     const GibbsWorkspace& ws, LatentState& state, Rng& rng);

struct ParamSummary {
  std::string name;
  double mean, q025, q975;
};

struct PosteriorDraws {
  std::vector<std::string> names;  // beta names then gamma names
  Eigen::MatrixXd draws;           // retained draws x (p + r)
  LatentState final_state;
  std::int64_t clamp_u = 0, clamp_v = 0;

  std::vector<ParamSummary> summary() const;
  Eigen::VectorXd means() const;
};

PosteriorDraws run_gibbs(const DesignData& d, Mode mode,
                         const GibbsConfig& cfg, Stream seed);

// Drops every column that is linearly dependent on the columns before it
// (pivoted-QR rank test, relative tolerance rel_tol), keeping the earliest
// independent set. Returns the original indices of dropped columns in
// ascending order; `names`, when given, is kept in sync.
std::vector<std::int32_t> prune_collinear(Eigen::MatrixXd& X,
                                          std::vector<std::string>* names,
                                          double rel_tol = 1e-10);

struct RealizedOrders {
  Market market;       // base market with complete lists from the latents
  std::int64_t ties;   // latent value ties broken by index order
};

// Complete preference and priority orders implied by the latent state,
// highest value first.
RealizedOrders realize_complete_orders(const Market& base,
                                       const LatentState& state);

}  // namespace schoolmerge
