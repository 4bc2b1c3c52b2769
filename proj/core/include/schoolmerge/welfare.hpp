#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "schoolmerge/market.hpp"

namespace schoolmerge {

// Per-school admission cutoffs implied by a matching: the lowest valuation
// among admitted students, or -infinity while seats remain vacant.
struct CutoffProfile {
  std::vector<double> cut;
};

// V is S x T, V(s,t) = school s's valuation of student t.
CutoffProfile cutoffs(const Matching& mu, const Eigen::MatrixXd& V,
                      const std::vector<std::int32_t>& capacity);

// Schools student t clears under the cutoff profile (V_s(t) >= cut_s,
// inclusive). Schools that explicitly ranked the student unacceptable never
// enter; `home_only` restricts to the student's own district.
std::vector<std::int32_t> feasible_set(const Market& m, const RankData& ranks,
                                       std::int32_t t, const CutoffProfile& c,
                                       const Eigen::MatrixXd& V,
                                       bool home_only = false);

// Consolidation gain per student: U(consolidated match) - U(district match),
// in utility units. U is T x S. Undefined (reported separately) when the
// student is unmatched in the district layer; a student matched there but
// unmatched under consolidation uses the outside option's utility 0.
std::vector<std::optional<double>> utility_gain(const Eigen::MatrixXd& U,
                                                const Matching& consolidated,
                                                const Matching& district);

// Kilometers of distance worth the utility change du, at the assigned
// school's distance d: du / |c1 + 2 c2 d| for a utility that is linear (c1)
// and quadratic (c2) in distance. A derivative smaller than 1e-12 in
// magnitude returns NaN rather than an unbounded equivalent.
double km_equivalent(double du, double c1, double c2, double d_assigned);

// Choice/competition split of the consolidation gain, evaluated at the
// consolidated-regime cutoffs (type I) and district-regime cutoffs (type
// II). For each student, where defined,
//   choice_i + competition_i = utility gain, and choice_i >= 0.
// A component is undefined when its feasible set is empty.
struct Decomposition {
  std::optional<double> choice1, competition1, choice2, competition2;
};

std::vector<Decomposition> decompose(const Market& m, const Eigen::MatrixXd& U,
                                     const Eigen::MatrixXd& V,
                                     const Matching& district_union,
                                     const Matching& consolidated);

// Rescales each district's capacities so seats equal students: proportional
// scaling, largest-remainder rounding, then a floor of one seat per school.
// Districts with fewer students than schools are infeasible. Idempotent on
// already-balanced districts.
Market balance_capacities(const Market& m);

struct DistrictRow {
  std::string label;
  std::int32_t seats = 0;
  std::int32_t students = 0;
  std::int32_t excess = 0;     // seats - students
  std::int32_t losers = 0;     // gain < 0
  std::int32_t indifferent = 0;
  std::int32_t winners = 0;    // gain > 0
  std::int32_t unmatched = 0;  // unmatched in the district layer
  double mean_gain = 0;        // over defined gains, NaN if none
  double winners_share = 0;    // (winners + unmatched-now-matched) / students
};

// Per-district welfare summary plus a totals row labelled "TOTAL". Students
// unmatched in the district layer count toward winners_share when the
// consolidated run matches them.
std::vector<DistrictRow> district_table(
    const Market& m, const MatchingScheme& scheme,
    const std::vector<std::optional<double>>& gains);

struct GainsSummary {
  double mean = 0, sd = 0, min = 0, median = 0, max = 0;
  std::int64_t n = 0;
};

GainsSummary summarize_gains(const std::vector<std::optional<double>>& gains);

}  // namespace schoolmerge
