#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "schoolmerge/estimator.hpp"
#include "schoolmerge/market.hpp"
#include "schoolmerge/rng.hpp"

namespace schoolmerge {

// Synthetic society used by the Monte Carlo validation:
//   U_t(s) = delta_s - d_ts + 3 (a_t * abar_s) + eps_ts,  eps ~ N(0,1)
//   V_s(t) = a_t + eta_st,                                eta ~ N(0,1)
// with delta_s equally spaced on [0,2], d_ts ~ U(0,2), a_t ~ N(0,1). abar_s
// is each school's mean admitted grade, solved as a truthful warm-up
// fixed point and then frozen so it acts as a known covariate.
struct DgpConfig {
  std::int32_t n_schools = 6;
  double capacity_share = 0.95;  // total seats = floor(share * T)
  double cost = 0.10;            // application cost in utility units
  std::int32_t belief_boots = 50;
  std::int32_t warmup_rounds = 10;
  std::int32_t belief_bins = 10;  // grade deciles
};

inline constexpr double kTrueDelta = 1.0;
inline constexpr double kTrueDist = -1.0;
inline constexpr double kTrueInteraction = 3.0;
inline constexpr double kTrueGrade = 1.0;

struct DgpMarket {
  Market truthful;          // complete true orders
  Eigen::MatrixXd U0;       // T x S true utilities
  Eigen::MatrixXd V0;       // S x T true valuations
  Eigen::MatrixXd dist;     // T x S
  Eigen::VectorXd grade;    // a_t
  Eigen::VectorXd delta;    // per school
  Eigen::VectorXd abar;     // frozen peer quality
};

DgpMarket simulate_dgp_market(std::int32_t T, Stream seed,
                              const DgpConfig& cfg = {});

// Optimal-portfolio list: greedily add the school with the largest marginal
// expected utility while that margin covers the application cost; the kept
// set is submitted in true preference order. admit_prob[i] corresponds to
// utility[i]. Returns indices into the candidate arrays, best first.
std::vector<std::int32_t> build_portfolio(const std::vector<double>& utility,
                                          const std::vector<double>& admit_prob,
                                          double cost);

// Strategic submitted lists: admission beliefs come from `belief_boots`
// bootstrap worlds (noise redrawn, truthful deferred acceptance, per-school
// admission frequency by grade decile), then each student solves the
// portfolio problem above. Schools rank exactly their applicants by V0.
Market strategic_rols(const DgpMarket& dgp, double cost, Stream seed,
                      const DgpConfig& cfg = {});

// Share of students whose submitted list is a prefix of their true order.
// An empty submitted list is vacuously a prefix.
double wtt_share(const DgpMarket& dgp, const Market& submitted);

enum class McMode { benchmark, wtt, undom, stability, stab_undom };

McMode mc_mode_from_string(const std::string& name);
std::string mc_mode_to_string(McMode mode);

struct McScore {
  std::string mode;
  std::string parameter;
  double mse = 0;
  double bias = 0;
  double slope = 0;    // OLS slope of error on wtt share
  double slope_p = 1;
};

struct McResult {
  std::vector<std::string> parameters;  // delta, dist, grade_x_quality, grade
  std::vector<std::string> modes;
  std::vector<McScore> scores;          // mode-major, parameter-minor
  std::vector<double> wtt_shares;       // per replication
  // errors[mode](rep, param) = posterior mean - truth
  std::vector<Eigen::MatrixXd> errors;
};

// Replicated end-to-end validation: simulate, submit, match, estimate under
// each mode, score against the data-generating coefficients. `benchmark`
// estimates from complete true orders. Deterministic in the stream for any
// thread count.
McResult mc_study(std::int32_t T, std::int32_t reps,
                  const std::vector<McMode>& modes, const GibbsConfig& gibbs,
                  const DgpConfig& dgp, Stream seed, std::int32_t threads = 1);

// Design matrices for estimating on a DGP market: X = [delta, dist,
// grade * abar], W = [grade]; ranks and matching from `submitted` unless
// benchmark, which uses the complete truthful orders.
DesignData make_dgp_design(const DgpMarket& dgp, const Market& submitted,
                           const Matching& observed, bool benchmark);

}  // namespace schoolmerge
