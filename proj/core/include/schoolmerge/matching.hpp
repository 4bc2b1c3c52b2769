#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "schoolmerge/market.hpp"

namespace schoolmerge {

// Student-proposing deferred acceptance. Students propose down their lists;
// a school holds its best q_s acceptable applicants. Each (student, school)
// pair is proposed at most once, so the proposal count is bounded by T*S.
Matching sosm(const Market& m);

struct BlockingPair {
  enum class Reason { vacant_seat, justified_envy };
  std::int32_t student;
  std::int32_t school;
  Reason reason;
};

// Blocking pairs of mu. Empty result means stable. A pair can only block if
// the student ranks the school and the school ranks the student:
//   vacant-seat:    the student is unmatched and the school has a free seat;
//   justified-envy: the student prefers s to their match (or is unmatched)
//                   and s holds someone with lower priority.
std::vector<BlockingPair> is_stable(const Market& m, const Matching& mu);

// All stable matchings by exhaustive search with capacity and individual-
// rationality pruning. Guarded: refuses markets larger than 10 students or
// 6 schools.
std::vector<Matching> enumerate_stable(const Market& m);

// Per-district deferred acceptance next to the consolidated run.
MatchingScheme compute_scheme(const Market& m);

// Re-districts the market so that every student's consolidated match lies in
// their own district: each school forms a seed district together with its
// matched students, seeds are merged until every district has at least one
// student and at least one school. Requires every student matched in mu.
Market adversarial_partition(const Market& m, const Matching& consolidated);

// Students bucketed by how the consolidated outcome compares with the
// district outcome. A student unmatched in one layer ranks it below every
// listed school; winners prefer consolidated. The four buckets partition the
// student set.
struct WelfareClasses {
  std::vector<std::int32_t> winners;      // consolidated strictly better
  std::vector<std::int32_t> losers;       // district strictly better
  std::vector<std::int32_t> indifferent;  // same school both layers
  std::vector<std::int32_t> unmatched;    // unmatched in both layers
};

WelfareClasses classify_welfare(const Market& m, const MatchingScheme& scheme);

enum class RankScope { absolute, relative };

struct RankStats {
  double mean_rank = 0;               // over matched students in scope
  std::vector<std::int32_t> histogram;  // index = rank - 1
  std::int32_t matched = 0;
  std::int32_t unmatched = 0;
};

// Mean assigned rank and its distribution, matched students only. scope
// absolute uses positions in the full list; relative counts only schools of
// the student's own district. Restricting to one district considers only its
// students (the matching may still span the whole market).
RankStats rank_statistics(const Market& m, const Matching& mu, RankScope scope,
                          std::optional<std::int32_t> district = std::nullopt);

}  // namespace schoolmerge
