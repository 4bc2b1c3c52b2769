#pragma once

#include <cstdint>
#include <vector>

#include "schoolmerge/market.hpp"
#include "schoolmerge/rng.hpp"

namespace schoolmerge {

// District blueprint: q*n students and n+k schools of capacity q each, so k
// is the district's excess-school count (k < 0 means a seat shortage).
// n >= 1 and n + k >= 1 are required.
struct DistrictSpec {
  std::int32_t n = 1;
  std::int32_t k = 0;
};

// Random society: one district per spec entry, every preference and priority
// list an independent uniform permutation of the whole society's other side
// (complete lists). Deterministic in the stream.
Market generate_random_escp(const std::vector<DistrictSpec>& specs,
                            std::int32_t q, Stream seed);

// Large-market approximation of the mean assigned rank in an underdemanded
// society of N student-groups and K excess schools, capacity q:
//   (N+K)/(qN) * log((N+K)/K) + 1.
// Requires N >= 1, q >= 1, K >= 1.
double approx_absolute_rank(std::int32_t N, std::int32_t K, std::int32_t q);

// Predicted mean-rank improvement district (n_i, k_i) enjoys when its market
// is merged into an (N, K) society; positive favors consolidation. k_i = 0
// and K < 1 are outside the approximation's domain and rejected.
double approx_gain(std::int32_t n_i, std::int32_t k_i, std::int32_t N,
                   std::int32_t K, std::int32_t q);

struct GainCell {
  std::int32_t district = 0;
  double mean = 0;       // empirical mean of gamma across reps
  double sd = 0;         // population sd across reps
  std::int32_t reps = 0;
  double approx = 0;     // NaN when outside the approximation's domain
};

struct GainExperimentResult {
  std::vector<GainCell> cells;  // one per district
  double consolidated_mean_rank = 0;  // averaged over reps
};

// Empirical counterpart: per replication, gamma_d = mean assigned rank under
// the district regime minus under consolidation (absolute scope, matched
// students of d only). Aggregates mean and sd per district.
GainExperimentResult gain_experiment(const std::vector<DistrictSpec>& specs,
                                     std::int32_t q, std::int32_t reps,
                                     Stream seed);

}  // namespace schoolmerge
