#include "schoolmerge/matching.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>

#include "schoolmerge/errors.hpp"

namespace schoolmerge {

namespace {

constexpr std::int32_t kNoPriority = std::numeric_limits<std::int32_t>::max();

// prio(s,t) = 1-based priority, kNoPriority when the school does not hold t
// acceptable (unranked or explicitly unacceptable).
std::vector<std::int32_t> priority_table(const Market& m) {
  const std::int32_t T = m.num_students(), S = m.num_schools();
  std::vector<std::int32_t> prio(static_cast<std::size_t>(S) * T, kNoPriority);
  for (std::int32_t s = 0; s < S; ++s) {
    const auto& list = m.school_priorities[s];
    for (std::size_t i = 0; i < list.size(); ++i)
      prio[static_cast<std::size_t>(s) * T + list[i]] = static_cast<std::int32_t>(i + 1);
  }
  return prio;
}

}  // namespace

Matching sosm(const Market& m) {
  const std::int32_t T = m.num_students(), S = m.num_schools();
  const auto prio = priority_table(m);

  Matching mu(T, S);
  std::vector<std::int32_t> next(T, 0);
  std::vector<std::vector<std::int32_t>> held(S);
  std::vector<std::int32_t> free_students(T);
  for (std::int32_t t = 0; t < T; ++t) free_students[t] = T - 1 - t;

  const std::int64_t proposal_cap = static_cast<std::int64_t>(T) * S;
  std::int64_t proposals = 0;

  while (!free_students.empty()) {
    const std::int32_t t = free_students.back();
    free_students.pop_back();
    const auto& prefs = m.student_prefs[t];
    if (next[t] >= static_cast<std::int32_t>(prefs.size())) continue;  // exhausted
    const std::int32_t s = prefs[next[t]++];
    if (++proposals > proposal_cap)
      throw NumericalError("sosm: proposal count exceeded |T|*|S|");

    const std::int32_t p = prio[static_cast<std::size_t>(s) * T + t];
    if (p == kNoPriority) {
      free_students.push_back(t);
      continue;
    }
    auto& roster = held[s];
    if (static_cast<std::int32_t>(roster.size()) < m.capacity[s]) {
      roster.push_back(t);
      continue;
    }
    // Full: compare against the currently worst held student.
    std::size_t worst = 0;
    for (std::size_t i = 1; i < roster.size(); ++i)
      if (prio[static_cast<std::size_t>(s) * T + roster[i]] >
          prio[static_cast<std::size_t>(s) * T + roster[worst]])
        worst = i;
    if (p < prio[static_cast<std::size_t>(s) * T + roster[worst]]) {
      free_students.push_back(roster[worst]);
      roster[worst] = t;
    } else {
      free_students.push_back(t);
    }
  }

  for (std::int32_t s = 0; s < S; ++s)
    for (auto t : held[s]) mu.assign(t, s);
  return mu;
}

namespace {

// Shared by is_stable and enumerate_stable; early_exit stops at the first
// blocking pair. A student matched to a school missing from their own list
// is treated as ranking it below every listed school.
bool collect_blocking(const Market& m, const Matching& mu,
                      const std::vector<std::int32_t>& prio, bool early_exit,
                      std::vector<BlockingPair>* out) {
  const std::int32_t T = m.num_students();
  bool found = false;
  for (std::int32_t t = 0; t < T; ++t) {
    const std::int32_t match = mu.of_student(t);
    for (auto s : m.student_prefs[t]) {
      if (s == match) break;  // everything below the match is worse
      const std::int32_t p = prio[static_cast<std::size_t>(s) * T + t];
      if (p == kNoPriority) continue;  // school never ranked t
      if (match < 0 &&
          static_cast<std::int32_t>(mu.roster(s).size()) < m.capacity[s]) {
        found = true;
        if (early_exit) return true;
        out->push_back({t, s, BlockingPair::Reason::vacant_seat});
        continue;
      }
      for (auto held : mu.roster(s)) {
        if (p < prio[static_cast<std::size_t>(s) * T + held]) {
          found = true;
          if (early_exit) return true;
          out->push_back({t, s, BlockingPair::Reason::justified_envy});
          break;
        }
      }
    }
  }
  return found;
}

}  // namespace

std::vector<BlockingPair> is_stable(const Market& m, const Matching& mu) {
  std::vector<BlockingPair> out;
  collect_blocking(m, mu, priority_table(m), false, &out);
  return out;
}

namespace {

void enumerate_rec(const Market& m, const std::vector<std::int32_t>& prio,
                   std::int32_t t, Matching& current,
                   std::vector<std::int32_t>& load,
                   std::vector<Matching>& out) {
  const std::int32_t T = m.num_students();
  if (t == T) {
    if (!collect_blocking(m, current, prio, true, nullptr)) out.push_back(current);
    return;
  }
  // Option: leave t unmatched.
  enumerate_rec(m, prio, t + 1, current, load, out);
  for (auto s : m.student_prefs[t]) {
    if (prio[static_cast<std::size_t>(s) * T + t] == kNoPriority) continue;
    if (load[s] >= m.capacity[s]) continue;
    ++load[s];
    current.assign(t, s);
    enumerate_rec(m, prio, t + 1, current, load, out);
    current.unassign(t);
    --load[s];
  }
}

}  // namespace

std::vector<Matching> enumerate_stable(const Market& m) {
  if (m.num_students() > 10 || m.num_schools() > 6)
    throw ValidationError("enumerate_stable: market too large (limit 10 students, 6 schools)");
  const auto prio = priority_table(m);
  Matching current(m.num_students(), m.num_schools());
  std::vector<std::int32_t> load(m.num_schools(), 0);
  std::vector<Matching> out;
  enumerate_rec(m, prio, 0, current, load, out);
  return out;
}

MatchingScheme compute_scheme(const Market& m) {
  MatchingScheme scheme;
  scheme.consolidated = sosm(m);
  scheme.district.reserve(m.num_districts());
  for (std::int32_t d = 0; d < m.num_districts(); ++d) {
    const Market sub = restrict_to_district(m, d);
    const Matching local = sosm(sub);
    const auto students = m.district_students(d);
    const auto schools = m.district_schools(d);
    Matching layer(m.num_students(), m.num_schools());
    for (std::int32_t i = 0; i < local.num_students(); ++i)
      if (local.matched(i)) layer.assign(students[i], schools[local.of_student(i)]);
    scheme.district.push_back(std::move(layer));
  }
  return scheme;
}

Market adversarial_partition(const Market& m, const Matching& consolidated) {
  const std::int32_t T = m.num_students(), S = m.num_schools();
  for (std::int32_t t = 0; t < T; ++t)
    if (!consolidated.matched(t))
      throw ValidationError("adversarial_partition: requires every student matched");
  if (T == 0 || S == 0)
    throw ValidationError("adversarial_partition: empty market");

  // One seed group per school; schools with no students join the first
  // populated group so every district keeps at least one student.
  std::vector<std::int32_t> group(S);
  std::int32_t first_populated = -1;
  for (std::int32_t s = 0; s < S; ++s)
    if (!consolidated.roster(s).empty()) {
      first_populated = s;
      break;
    }
  for (std::int32_t s = 0; s < S; ++s)
    group[s] = consolidated.roster(s).empty() ? first_populated : s;

  // Densify group ids in ascending school order.
  std::vector<std::int32_t> dense(S, -1);
  std::int32_t next_id = 0;
  for (std::int32_t s = 0; s < S; ++s)
    if (dense[group[s]] < 0) dense[group[s]] = next_id++;

  Market out = m;
  out.district_labels.clear();
  for (std::int32_t i = 0; i < next_id; ++i)
    out.district_labels.push_back("p" + std::to_string(i));
  for (std::int32_t s = 0; s < S; ++s) out.school_district[s] = dense[group[s]];
  for (std::int32_t t = 0; t < T; ++t)
    out.student_district[t] = dense[group[consolidated.of_student(t)]];
  return out;
}

namespace {

// List position of the assignment, with "unmatched" one step below the end
// of the list. Lower is better.
std::int32_t extended_rank(const Market& m, std::int32_t t, std::int32_t s) {
  if (s < 0) return static_cast<std::int32_t>(m.student_prefs[t].size()) + 1;
  const auto r = absolute_rank(m, t, s);
  return r ? *r : static_cast<std::int32_t>(m.student_prefs[t].size()) + 1;
}

}  // namespace

WelfareClasses classify_welfare(const Market& m, const MatchingScheme& scheme) {
  const Matching districts = scheme.district_union();
  WelfareClasses c;
  for (std::int32_t t = 0; t < m.num_students(); ++t) {
    const std::int32_t sd = districts.of_student(t);
    const std::int32_t sc = scheme.consolidated.of_student(t);
    if (sd < 0 && sc < 0) {
      c.unmatched.push_back(t);
    } else if (sd == sc) {
      c.indifferent.push_back(t);
    } else {
      const std::int32_t rd = extended_rank(m, t, sd);
      const std::int32_t rc = extended_rank(m, t, sc);
      if (rc < rd)
        c.winners.push_back(t);
      else if (rd < rc)
        c.losers.push_back(t);
      else
        c.indifferent.push_back(t);  // distinct schools, equal rank: cannot
                                     // happen with strict lists
    }
  }
  return c;
}

RankStats rank_statistics(const Market& m, const Matching& mu, RankScope scope,
                          std::optional<std::int32_t> district) {
  RankStats st;
  double sum = 0;
  for (std::int32_t t = 0; t < m.num_students(); ++t) {
    if (district && m.student_district[t] != *district) continue;
    const std::int32_t s = mu.of_student(t);
    if (s < 0) {
      ++st.unmatched;
      continue;
    }
    std::optional<std::int32_t> r = scope == RankScope::absolute
                                        ? absolute_rank(m, t, s)
                                        : relative_rank(m, t, s);
    if (!r) {
      // Matched to a school outside the scope (e.g. out-of-district match
      // under relative scope): not rankable, tallied with the unmatched.
      ++st.unmatched;
      continue;
    }
    ++st.matched;
    sum += *r;
    if (static_cast<std::size_t>(*r) > st.histogram.size())
      st.histogram.resize(static_cast<std::size_t>(*r), 0);
    ++st.histogram[static_cast<std::size_t>(*r) - 1];
  }
  st.mean_rank = st.matched > 0 ? sum / st.matched
                                : std::numeric_limits<double>::quiet_NaN();
  return st;
}

}  // namespace schoolmerge
