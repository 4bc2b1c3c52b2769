#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace schoolmerge {

// A school-choice market. Students and schools are dense indices; the string
// ids exist for I/O. Every entity belongs to exactly one district. Student
// preference lists and school priority lists may be partial; an entity left
// off a list is unranked. Schools may additionally declare students
// explicitly unacceptable, which is distinct from not ranking them: the
// estimator treats "ranked last" and "never seen" differently.
struct Market {
  std::vector<std::string> student_ids;
  std::vector<std::string> school_ids;
  std::vector<std::string> district_labels;

  std::vector<std::int32_t> student_district;  // per student, district index
  std::vector<std::int32_t> school_district;   // per school, district index
  std::vector<std::int32_t> capacity;          // per school, seats > 0

  // Ordered, most preferred first. Entries are school indices.
  std::vector<std::vector<std::int32_t>> student_prefs;
  // Ordered, highest priority first. Entries are student indices. Only
  // acceptable students appear here.
  std::vector<std::vector<std::int32_t>> school_priorities;
  // Students a school has explicitly deemed unacceptable (sorted).
  std::vector<std::vector<std::int32_t>> school_unacceptable;

  // True when every student ranks every school and every school ranks every
  // student. Kept explicit: downstream logic must not infer it.
  bool complete_preferences = false;

  std::int32_t num_students() const { return static_cast<std::int32_t>(student_ids.size()); }
  std::int32_t num_schools() const { return static_cast<std::int32_t>(school_ids.size()); }
  std::int32_t num_districts() const { return static_cast<std::int32_t>(district_labels.size()); }
  std::int64_t total_capacity() const;

  std::vector<std::int32_t> district_students(std::int32_t d) const;
  std::vector<std::int32_t> district_schools(std::int32_t d) const;
};

struct ValidationRecord {
  std::string entity;
  std::string rule;
  std::string message;
  bool warning = false;  // warnings do not make the market invalid
};

// Structural checks: district coverage (each district has at least one
// student and one school), positive capacities, index ranges, duplicate-free
// lists, no overlap between a school's priority list and its unacceptable
// set, and the completeness flag matching the lists. A negative total excess
// seat count (more students than seats society-wide) is reported as a
// warning, not an error. Empty result means no errors and no warnings.
std::vector<ValidationRecord> validate_market(const Market& m);

inline bool market_ok(const std::vector<ValidationRecord>& records) {
  for (const auto& r : records)
    if (!r.warning) return false;
  return true;
}

// Sub-market containing only district d's students and schools. Preference
// and priority lists are filtered, preserving relative order; capacities are
// unchanged. Indices are re-densified; ids carry over.
Market restrict_to_district(const Market& m, std::int32_t district);

// 1-based position of school s in student t's list; nullopt if unranked.
std::optional<std::int32_t> absolute_rank(const Market& m, std::int32_t t, std::int32_t s);
// Position of s among the schools of t's own district within t's list;
// nullopt if s is unranked or lies outside t's district.
std::optional<std::int32_t> relative_rank(const Market& m, std::int32_t t, std::int32_t s);

// Many-to-one assignment. The student->school map and the per-school rosters
// are kept coherent by construction; all mutation goes through assign /
// unassign. Unmatched students map to -1.
class Matching {
 public:
  Matching() = default;
  Matching(std::int32_t num_students, std::int32_t num_schools);

  void assign(std::int32_t t, std::int32_t s);
  void unassign(std::int32_t t);

  std::int32_t of_student(std::int32_t t) const { return mu_[t]; }
  bool matched(std::int32_t t) const { return mu_[t] >= 0; }
  const std::vector<std::int32_t>& roster(std::int32_t s) const { return rosters_[s]; }

  std::int32_t num_students() const { return static_cast<std::int32_t>(mu_.size()); }
  std::int32_t num_schools() const { return static_cast<std::int32_t>(rosters_.size()); }
  std::int32_t num_matched() const;

  bool operator==(const Matching& other) const { return mu_ == other.mu_; }

 private:
  std::vector<std::int32_t> mu_;
  std::vector<std::vector<std::int32_t>> rosters_;
};

// District-regime outcome next to the consolidated one. district[d] is the
// matching of the sub-problem restricted to district d, expressed on the
// parent market's indices (students outside d are unmatched in that layer).
struct MatchingScheme {
  std::vector<Matching> district;
  Matching consolidated;

  // Union of the per-district layers: one market-wide matching describing
  // the district regime.
  Matching district_union() const;
};

// Observed rank data in dense form, the estimator's native input.
// rk(t,s):  0 = student did not rank s, else 1-based list position.
// pr(s,t):  0 = school never ranked t, kUnacceptable = explicitly
//           unacceptable (infinite rank), else 1-based priority.
struct RankData {
  static constexpr std::int32_t kUnacceptable = -1;

  std::int32_t T = 0, S = 0;
  std::vector<std::int32_t> rk;  // T*S, row-major by student
  std::vector<std::int32_t> pr;  // S*T, row-major by school
  std::vector<std::int32_t> list_len;    // per student
  std::vector<std::int32_t> ranked_len;  // per school, finite-ranked count
  std::vector<std::vector<std::int32_t>> rol;     // per student, by rank
  std::vector<std::vector<std::int32_t>> ranked;  // per school, by priority
  std::vector<std::vector<std::int32_t>> unacceptable;  // per school

  std::int32_t rank_of(std::int32_t t, std::int32_t s) const { return rk[static_cast<std::size_t>(t) * S + s]; }
  std::int32_t priority_of(std::int32_t s, std::int32_t t) const { return pr[static_cast<std::size_t>(s) * T + t]; }
  // True if the school has any explicitly-unacceptable student, i.e. the
  // highest assigned priority value is infinite.
  bool has_infinite_tail(std::int32_t s) const { return !unacceptable[s].empty(); }

  static RankData from_market(const Market& m);
};

}  // namespace schoolmerge
