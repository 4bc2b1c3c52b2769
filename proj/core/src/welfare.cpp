#include "schoolmerge/welfare.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "schoolmerge/errors.hpp"
#include "schoolmerge/stats.hpp"

namespace schoolmerge {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

CutoffProfile cutoffs(const Matching& mu, const Eigen::MatrixXd& V,
                      const std::vector<std::int32_t>& capacity) {
  CutoffProfile c;
  const std::int32_t S = mu.num_schools();
  c.cut.assign(static_cast<std::size_t>(S), -kInf);
  for (std::int32_t s = 0; s < S; ++s) {
    const auto& roster = mu.roster(s);
    if (static_cast<std::int32_t>(roster.size()) < capacity[s]) continue;
    double lo = kInf;
    for (auto t : roster) lo = std::min(lo, V(s, t));
    c.cut[s] = lo;
  }
  return c;
}

std::vector<std::int32_t> feasible_set(const Market& m, const RankData& ranks,
                                       std::int32_t t, const CutoffProfile& c,
                                       const Eigen::MatrixXd& V, bool home_only) {
  std::vector<std::int32_t> out;
  for (std::int32_t s = 0; s < m.num_schools(); ++s) {
    if (home_only && m.school_district[s] != m.student_district[t]) continue;
    if (ranks.priority_of(s, t) == RankData::kUnacceptable) continue;
    if (V(s, t) >= c.cut[s]) out.push_back(s);
  }
  return out;
}

std::vector<std::optional<double>> utility_gain(const Eigen::MatrixXd& U,
                                                const Matching& consolidated,
                                                const Matching& district) {
  const std::int32_t T = consolidated.num_students();
  std::vector<std::optional<double>> out(static_cast<std::size_t>(T));
  for (std::int32_t t = 0; t < T; ++t) {
    const std::int32_t sd = district.of_student(t);
    if (sd < 0) continue;  // no defined baseline
    const std::int32_t sc = consolidated.of_student(t);
    const double u_cons = sc >= 0 ? U(t, sc) : 0.0;  // outside option
    out[t] = u_cons - U(t, sd);
  }
  return out;
}

double km_equivalent(double du, double c1, double c2, double d_assigned) {
  const double derivative = std::fabs(c1 + 2.0 * c2 * d_assigned);
  if (derivative < 1e-12) return kNaN;
  return du / derivative;
}

namespace {

std::optional<double> best_utility(const Eigen::MatrixXd& U, std::int32_t t,
                                   const std::vector<std::int32_t>& schools) {
  if (schools.empty()) return std::nullopt;
  double best = -kInf;
  for (auto s : schools) best = std::max(best, U(t, s));
  return best;
}

std::optional<double> diff(std::optional<double> a, std::optional<double> b) {
  if (!a || !b) return std::nullopt;
  return *a - *b;
}

}  // namespace

std::vector<Decomposition> decompose(const Market& m, const Eigen::MatrixXd& U,
                                     const Eigen::MatrixXd& V,
                                     const Matching& district_union,
                                     const Matching& consolidated) {
  const std::int32_t T = m.num_students();
  const RankData ranks = RankData::from_market(m);
  const CutoffProfile c_cons = cutoffs(consolidated, V, m.capacity);
  const CutoffProfile c_dist = cutoffs(district_union, V, m.capacity);

  std::vector<Decomposition> out(static_cast<std::size_t>(T));
  for (std::int32_t t = 0; t < T; ++t) {
    const auto f_cons = feasible_set(m, ranks, t, c_cons, V, false);
    const auto f_cons_home = feasible_set(m, ranks, t, c_cons, V, true);
    const auto f_dist = feasible_set(m, ranks, t, c_dist, V, false);
    const auto f_dist_home = feasible_set(m, ranks, t, c_dist, V, true);

    const auto best_cons = best_utility(U, t, f_cons);
    const auto best_cons_home = best_utility(U, t, f_cons_home);
    const auto best_dist = best_utility(U, t, f_dist);
    const auto best_dist_home = best_utility(U, t, f_dist_home);

    Decomposition d;
    d.choice1 = diff(best_cons, best_cons_home);
    d.competition1 = diff(best_cons_home, best_dist_home);
    d.choice2 = diff(best_dist, best_dist_home);
    d.competition2 = diff(best_cons, best_dist);
    out[t] = d;
  }
  return out;
}

Market balance_capacities(const Market& m) {
  Market out = m;
  for (std::int32_t d = 0; d < m.num_districts(); ++d) {
    const auto students = m.district_students(d);
    const auto schools = m.district_schools(d);
    const auto n_students = static_cast<std::int64_t>(students.size());
    const auto n_schools = static_cast<std::int64_t>(schools.size());
    if (n_students < n_schools)
      throw ValidationError("balance_capacities: district '" +
                            m.district_labels[d] +
                            "' has fewer students than schools");
    std::int64_t q_total = 0;
    for (auto s : schools) q_total += m.capacity[s];
    if (q_total == n_students) continue;

    // Proportional targets, floors first, spare seats by largest remainder.
    std::vector<std::int64_t> seats(schools.size());
    std::vector<std::pair<double, std::size_t>> remainder;
    std::int64_t assigned = 0;
    for (std::size_t i = 0; i < schools.size(); ++i) {
      const double target =
          static_cast<double>(m.capacity[schools[i]]) * n_students / q_total;
      seats[i] = static_cast<std::int64_t>(std::floor(target));
      assigned += seats[i];
      remainder.emplace_back(target - std::floor(target), i);
    }
    std::stable_sort(remainder.begin(), remainder.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::int64_t extra = n_students - assigned; extra > 0; --extra)
      ++seats[remainder[static_cast<std::size_t>(n_students - assigned - extra)].second];

    // Every school keeps at least one seat; take from the largest.
    for (std::size_t i = 0; i < seats.size(); ++i) {
      while (seats[i] < 1) {
        auto donor = std::max_element(seats.begin(), seats.end()) - seats.begin();
        if (seats[static_cast<std::size_t>(donor)] <= 1)
          throw ValidationError("balance_capacities: cannot give every school a seat");
        --seats[static_cast<std::size_t>(donor)];
        ++seats[i];
      }
    }
    std::int64_t check = 0;
    for (auto v : seats) check += v;
    if (check != n_students)
      throw NumericalError("balance_capacities: rounding failed to balance");
    for (std::size_t i = 0; i < schools.size(); ++i)
      out.capacity[schools[i]] = static_cast<std::int32_t>(seats[i]);
  }
  return out;
}

std::vector<DistrictRow> district_table(
    const Market& m, const MatchingScheme& scheme,
    const std::vector<std::optional<double>>& gains) {
  const Matching dist_union = scheme.district_union();
  std::vector<DistrictRow> rows(static_cast<std::size_t>(m.num_districts()));
  for (std::int32_t d = 0; d < m.num_districts(); ++d) {
    rows[d].label = m.district_labels[d];
    for (auto s : m.district_schools(d)) rows[d].seats += m.capacity[s];
  }

  std::vector<std::vector<double>> defined(static_cast<std::size_t>(m.num_districts()));
  std::vector<std::int32_t> pro(static_cast<std::size_t>(m.num_districts()), 0);
  for (std::int32_t t = 0; t < m.num_students(); ++t) {
    auto& row = rows[static_cast<std::size_t>(m.student_district[t])];
    ++row.students;
    if (!dist_union.matched(t)) {
      ++row.unmatched;
      if (scheme.consolidated.matched(t))
        ++pro[static_cast<std::size_t>(m.student_district[t])];
      continue;
    }
    const double g = gains[static_cast<std::size_t>(t)].value_or(kNaN);
    if (std::isnan(g)) continue;  // defensive; matched students have gains
    defined[static_cast<std::size_t>(m.student_district[t])].push_back(g);
    if (g > 0) {
      ++row.winners;
      ++pro[static_cast<std::size_t>(m.student_district[t])];
    } else if (g < 0) {
      ++row.losers;
    } else {
      ++row.indifferent;
    }
  }

  DistrictRow total;
  total.label = "TOTAL";
  std::vector<double> all;
  std::int32_t total_pro = 0;
  for (std::int32_t d = 0; d < m.num_districts(); ++d) {
    auto& row = rows[static_cast<std::size_t>(d)];
    row.excess = row.seats - row.students;
    row.mean_gain = mean_of(defined[static_cast<std::size_t>(d)]);
    row.winners_share =
        row.students > 0
            ? static_cast<double>(pro[static_cast<std::size_t>(d)]) / row.students
            : kNaN;
    total.seats += row.seats;
    total.students += row.students;
    total.losers += row.losers;
    total.indifferent += row.indifferent;
    total.winners += row.winners;
    total.unmatched += row.unmatched;
    total_pro += pro[static_cast<std::size_t>(d)];
    all.insert(all.end(), defined[static_cast<std::size_t>(d)].begin(),
               defined[static_cast<std::size_t>(d)].end());
  }
  total.excess = total.seats - total.students;
  total.mean_gain = mean_of(all);
  total.winners_share =
      total.students > 0 ? static_cast<double>(total_pro) / total.students : kNaN;
  rows.push_back(total);
  return rows;
}

GainsSummary summarize_gains(const std::vector<std::optional<double>>& gains) {
  std::vector<double> v;
  for (const auto& g : gains)
    if (g) v.push_back(*g);
  GainsSummary s;
  s.n = static_cast<std::int64_t>(v.size());
  if (v.empty()) {
    s.mean = s.sd = s.min = s.median = s.max = kNaN;
    return s;
  }
  s.mean = mean_of(v);
  s.sd = std::sqrt(variance_of(v));
  s.min = *std::min_element(v.begin(), v.end());
  s.max = *std::max_element(v.begin(), v.end());
  s.median = median_of(v);
  return s;
}

}  // namespace schoolmerge
