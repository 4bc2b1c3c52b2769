#include "schoolmerge/market.hpp"

#include <algorithm>
#include <unordered_set>

#include "schoolmerge/errors.hpp"

namespace schoolmerge {

std::int64_t Market::total_capacity() const {
  std::int64_t q = 0;
  for (auto c : capacity) q += c;
  return q;
}

std::vector<std::int32_t> Market::district_students(std::int32_t d) const {
  std::vector<std::int32_t> out;
  for (std::int32_t t = 0; t < num_students(); ++t)
    if (student_district[t] == d) out.push_back(t);
  return out;
}

std::vector<std::int32_t> Market::district_schools(std::int32_t d) const {
  std::vector<std::int32_t> out;
  for (std::int32_t s = 0; s < num_schools(); ++s)
    if (school_district[s] == d) out.push_back(s);
  return out;
}

namespace {

void check_list(const std::vector<std::int32_t>& list, std::int32_t limit,
                const std::string& entity, const char* what,
                std::vector<ValidationRecord>& out) {
  std::unordered_set<std::int32_t> seen;
  for (auto v : list) {
    if (v < 0 || v >= limit) {
      out.push_back({entity, "index-range",
                     std::string(what) + " entry out of range", false});
    } else if (!seen.insert(v).second) {
      out.push_back({entity, "duplicate-entry",
                     std::string(what) + " contains a duplicate", false});
    }
  }
}

}  // namespace

std::vector<ValidationRecord> validate_market(const Market& m) {
  std::vector<ValidationRecord> out;
  const std::int32_t T = m.num_students();
  const std::int32_t S = m.num_schools();
  const std::int32_t D = m.num_districts();

  if (m.student_district.size() != static_cast<std::size_t>(T) ||
      m.school_district.size() != static_cast<std::size_t>(S) ||
      m.capacity.size() != static_cast<std::size_t>(S) ||
      m.student_prefs.size() != static_cast<std::size_t>(T) ||
      m.school_priorities.size() != static_cast<std::size_t>(S) ||
      m.school_unacceptable.size() != static_cast<std::size_t>(S)) {
    out.push_back({"market", "shape", "field sizes do not agree", false});
    return out;
  }

  std::vector<int> d_students(D, 0), d_schools(D, 0);
  for (std::int32_t t = 0; t < T; ++t) {
    const auto d = m.student_district[t];
    if (d < 0 || d >= D) {
      out.push_back({m.student_ids[t], "district-unknown", "student district index invalid", false});
    } else {
      ++d_students[d];
    }
  }
  for (std::int32_t s = 0; s < S; ++s) {
    const auto d = m.school_district[s];
    if (d < 0 || d >= D) {
      out.push_back({m.school_ids[s], "district-unknown", "school district index invalid", false});
    } else {
      ++d_schools[d];
    }
    if (m.capacity[s] <= 0) {
      out.push_back({m.school_ids[s], "capacity-positive", "capacity must be >= 1", false});
    }
  }
  for (std::int32_t d = 0; d < D; ++d) {
    if (d_students[d] == 0)
      out.push_back({m.district_labels[d], "district-empty", "district has no students", false});
    if (d_schools[d] == 0)
      out.push_back({m.district_labels[d], "district-empty", "district has no schools", false});
  }

  {
    std::unordered_set<std::string> ids;
    for (const auto& id : m.student_ids)
      if (!ids.insert(id).second)
        out.push_back({id, "duplicate-id", "student id repeated", false});
    ids.clear();
    for (const auto& id : m.school_ids)
      if (!ids.insert(id).second)
        out.push_back({id, "duplicate-id", "school id repeated", false});
  }

  bool all_complete = true;
  for (std::int32_t t = 0; t < T; ++t) {
    check_list(m.student_prefs[t], S, m.student_ids[t], "preference list", out);
    if (static_cast<std::int32_t>(m.student_prefs[t].size()) != S) all_complete = false;
  }
  for (std::int32_t s = 0; s < S; ++s) {
    check_list(m.school_priorities[s], T, m.school_ids[s], "priority list", out);
    check_list(m.school_unacceptable[s], T, m.school_ids[s], "unacceptable list", out);
    std::unordered_set<std::int32_t> ranked(m.school_priorities[s].begin(),
                                            m.school_priorities[s].end());
    for (auto t : m.school_unacceptable[s]) {
      if (ranked.count(t)) {
        out.push_back({m.school_ids[s], "priority-conflict",
                       "student both ranked and unacceptable", false});
      }
    }
    if (static_cast<std::int32_t>(m.school_priorities[s].size()) != T) all_complete = false;
  }
  if (m.complete_preferences && !all_complete) {
    out.push_back({"market", "completeness-flag",
                   "complete_preferences set but some list is partial", false});
  }

  const std::int64_t students = T;
  if (m.total_capacity() < students) {
    out.push_back({"market", "excess-seats",
                   "total capacity below student count (overdemanded society)",
                   true});
  }
  return out;
}

Market restrict_to_district(const Market& m, std::int32_t district) {
  if (district < 0 || district >= m.num_districts())
    throw ValidationError("restrict_to_district: no such district");

  Market r;
  r.district_labels = {m.district_labels[district]};
  std::vector<std::int32_t> t_map(m.num_students(), -1), s_map(m.num_schools(), -1);
  for (std::int32_t t = 0; t < m.num_students(); ++t) {
    if (m.student_district[t] != district) continue;
    t_map[t] = static_cast<std::int32_t>(r.student_ids.size());
    r.student_ids.push_back(m.student_ids[t]);
    r.student_district.push_back(0);
  }
  for (std::int32_t s = 0; s < m.num_schools(); ++s) {
    if (m.school_district[s] != district) continue;
    s_map[s] = static_cast<std::int32_t>(r.school_ids.size());
    r.school_ids.push_back(m.school_ids[s]);
    r.school_district.push_back(0);
    r.capacity.push_back(m.capacity[s]);
  }
  for (std::int32_t t = 0; t < m.num_students(); ++t) {
    if (t_map[t] < 0) continue;
    std::vector<std::int32_t> prefs;
    for (auto s : m.student_prefs[t])
      if (s_map[s] >= 0) prefs.push_back(s_map[s]);
    r.student_prefs.push_back(std::move(prefs));
  }
  for (std::int32_t s = 0; s < m.num_schools(); ++s) {
    if (s_map[s] < 0) continue;
    std::vector<std::int32_t> prio, unac;
    for (auto t : m.school_priorities[s])
      if (t_map[t] >= 0) prio.push_back(t_map[t]);
    for (auto t : m.school_unacceptable[s])
      if (t_map[t] >= 0) unac.push_back(t_map[t]);
    std::sort(unac.begin(), unac.end());
    r.school_priorities.push_back(std::move(prio));
    r.school_unacceptable.push_back(std::move(unac));
  }
  bool complete = true;
  for (const auto& p : r.student_prefs)
    if (static_cast<std::int32_t>(p.size()) != r.num_schools()) complete = false;
  for (const auto& p : r.school_priorities)
    if (static_cast<std::int32_t>(p.size()) != r.num_students()) complete = false;
  r.complete_preferences = complete;
  return r;
}

std::optional<std::int32_t> absolute_rank(const Market& m, std::int32_t t, std::int32_t s) {
  const auto& prefs = m.student_prefs[t];
  for (std::size_t i = 0; i < prefs.size(); ++i)
    if (prefs[i] == s) return static_cast<std::int32_t>(i + 1);
  return std::nullopt;
}

std::optional<std::int32_t> relative_rank(const Market& m, std::int32_t t, std::int32_t s) {
  if (m.school_district[s] != m.student_district[t]) return std::nullopt;
  std::int32_t pos = 0;
  for (auto s2 : m.student_prefs[t]) {
    if (m.school_district[s2] == m.student_district[t]) ++pos;
    if (s2 == s) return pos;
  }
  return std::nullopt;
}

Matching::Matching(std::int32_t num_students, std::int32_t num_schools)
    : mu_(num_students, -1), rosters_(num_schools) {}

void Matching::assign(std::int32_t t, std::int32_t s) {
  unassign(t);
  mu_[t] = s;
  rosters_[s].push_back(t);
}

void Matching::unassign(std::int32_t t) {
  const auto s = mu_[t];
  if (s < 0) return;
  auto& r = rosters_[s];
  r.erase(std::find(r.begin(), r.end(), t));
  mu_[t] = -1;
}

std::int32_t Matching::num_matched() const {
  std::int32_t n = 0;
  for (auto s : mu_)
    if (s >= 0) ++n;
  return n;
}

Matching MatchingScheme::district_union() const {
  if (district.empty()) return consolidated;  // degenerate, keeps shape
  Matching u(district[0].num_students(), district[0].num_schools());
  for (const auto& layer : district) {
    for (std::int32_t t = 0; t < layer.num_students(); ++t)
      if (layer.matched(t)) u.assign(t, layer.of_student(t));
  }
  return u;
}

RankData RankData::from_market(const Market& m) {
  RankData d;
  d.T = m.num_students();
  d.S = m.num_schools();
  d.rk.assign(static_cast<std::size_t>(d.T) * d.S, 0);
  d.pr.assign(static_cast<std::size_t>(d.S) * d.T, 0);
  d.list_len.resize(d.T);
  d.ranked_len.resize(d.S);
  d.rol = m.student_prefs;
  d.ranked = m.school_priorities;
  d.unacceptable = m.school_unacceptable;
  for (std::int32_t t = 0; t < d.T; ++t) {
    d.list_len[t] = static_cast<std::int32_t>(m.student_prefs[t].size());
    for (std::size_t i = 0; i < m.student_prefs[t].size(); ++i)
      d.rk[static_cast<std::size_t>(t) * d.S + m.student_prefs[t][i]] =
          static_cast<std::int32_t>(i + 1);
  }
  for (std::int32_t s = 0; s < d.S; ++s) {
    d.ranked_len[s] = static_cast<std::int32_t>(m.school_priorities[s].size());
    for (std::size_t i = 0; i < m.school_priorities[s].size(); ++i)
      d.pr[static_cast<std::size_t>(s) * d.T + m.school_priorities[s][i]] =
          static_cast<std::int32_t>(i + 1);
    for (auto t : m.school_unacceptable[s])
      d.pr[static_cast<std::size_t>(s) * d.T + t] = kUnacceptable;
  }
  return d;
}

}  // namespace schoolmerge
