#include "schoolmerge/random_market.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "schoolmerge/errors.hpp"
#include "schoolmerge/matching.hpp"
#include "schoolmerge/stats.hpp"

namespace schoolmerge {

Market generate_random_escp(const std::vector<DistrictSpec>& specs,
                            std::int32_t q, Stream seed) {
  if (specs.empty()) throw ValidationError("generate_random_escp: no districts");
  if (q < 1) throw ValidationError("generate_random_escp: q must be >= 1");
  for (const auto& d : specs) {
    if (d.n < 1) throw ValidationError("generate_random_escp: district needs n >= 1");
    if (d.n + d.k < 1)
      throw ValidationError("generate_random_escp: district needs n + k >= 1 schools");
  }

  Market m;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto d = static_cast<std::int32_t>(i);
    m.district_labels.push_back("d" + std::to_string(i));
    for (std::int32_t j = 0; j < q * specs[i].n; ++j) {
      m.student_ids.push_back("t" + std::to_string(m.student_ids.size()));
      m.student_district.push_back(d);
    }
    for (std::int32_t j = 0; j < specs[i].n + specs[i].k; ++j) {
      m.school_ids.push_back("s" + std::to_string(m.school_ids.size()));
      m.school_district.push_back(d);
      m.capacity.push_back(q);
    }
  }

  const std::int32_t T = m.num_students(), S = m.num_schools();
  Rng pref_rng(seed.child("prefs"));
  Rng prio_rng(seed.child("priorities"));
  m.student_prefs.reserve(T);
  for (std::int32_t t = 0; t < T; ++t) m.student_prefs.push_back(pref_rng.permutation(S));
  m.school_priorities.reserve(S);
  for (std::int32_t s = 0; s < S; ++s) m.school_priorities.push_back(prio_rng.permutation(T));
  m.school_unacceptable.assign(S, {});
  m.complete_preferences = true;
  return m;
}

double approx_absolute_rank(std::int32_t N, std::int32_t K, std::int32_t q) {
  if (N < 1 || q < 1) throw ValidationError("approx_absolute_rank: N and q must be >= 1");
  if (K < 1)
    throw ValidationError("approx_absolute_rank: requires an underdemanded society (K >= 1)");
  const double nk = N + K;
  return nk / (q * static_cast<double>(N)) * std::log(nk / K) + 1.0;
}

double approx_gain(std::int32_t n_i, std::int32_t k_i, std::int32_t N,
                   std::int32_t K, std::int32_t q) {
  if (n_i < 1 || N < 1 || q < 1) throw ValidationError("approx_gain: n, N, q must be >= 1");
  if (k_i == 0)
    throw ValidationError("approx_gain: k = 0 is outside the approximation's domain");
  if (K < 1)
    throw ValidationError("approx_gain: requires an underdemanded society (K >= 1)");
  if (n_i + k_i < 1) throw ValidationError("approx_gain: district needs n + k >= 1");
  const double nk = N + K;
  const double society = std::log(nk / K) / N;
  if (k_i >= 1) {
    const double district = std::log((n_i + k_i) / static_cast<double>(k_i)) / n_i;
    return nk / q * (district - society);
  }
  // Seat-short district: the district-regime term uses the matched share.
  const double district = q * (n_i + k_i) /
                          (n_i * std::log(n_i / static_cast<double>(-k_i)));
  return nk / q * (district - society);
}

GainExperimentResult gain_experiment(const std::vector<DistrictSpec>& specs,
                                     std::int32_t q, std::int32_t reps,
                                     Stream seed) {
  if (reps < 1) throw ValidationError("gain_experiment: reps must be >= 1");
  const auto D = static_cast<std::int32_t>(specs.size());
  std::int64_t N = 0, K = 0;
  for (const auto& d : specs) {
    N += d.n;
    K += d.k;
  }

  std::vector<std::vector<double>> gamma(D);
  double cons_rank_sum = 0;
  for (std::int32_t r = 0; r < reps; ++r) {
    const Market m = generate_random_escp(specs, q, seed.child(r));
    const MatchingScheme scheme = compute_scheme(m);
    const RankStats cons_all = rank_statistics(m, scheme.consolidated, RankScope::absolute);
    cons_rank_sum += cons_all.mean_rank;
    for (std::int32_t d = 0; d < D; ++d) {
      const RankStats dist = rank_statistics(m, scheme.district[d], RankScope::absolute, d);
      const RankStats cons = rank_statistics(m, scheme.consolidated, RankScope::absolute, d);
      if (dist.matched > 0 && cons.matched > 0)
        gamma[d].push_back(dist.mean_rank - cons.mean_rank);
    }
  }

  GainExperimentResult out;
  out.consolidated_mean_rank = cons_rank_sum / reps;
  for (std::int32_t d = 0; d < D; ++d) {
    GainCell cell;
    cell.district = d;
    cell.reps = static_cast<std::int32_t>(gamma[d].size());
    cell.mean = mean_of(gamma[d]);
    cell.sd = std::sqrt(variance_of(gamma[d]));
    bool domain_ok = specs[d].k != 0 && K >= 1;
    cell.approx = domain_ok ? approx_gain(specs[d].n, specs[d].k,
                                          static_cast<std::int32_t>(N),
                                          static_cast<std::int32_t>(K), q)
                            : std::numeric_limits<double>::quiet_NaN();
    out.cells.push_back(cell);
  }
  return out;
}

}  // namespace schoolmerge
