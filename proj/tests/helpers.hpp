#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "schoolmerge/market.hpp"
#include "schoolmerge/rng.hpp"

namespace schoolmerge::testing {

// Three students, three schools, unit capacities, two districts. The
// district regime assigns everyone inside their home district; the merged
// run reshuffles the first district and leaves t3 in place.
inline Market example1() {
  Market m;
  m.student_ids = {"t1", "t2", "t3"};
  m.school_ids = {"s1", "s2", "s3"};
  m.district_labels = {"A", "B"};
  m.student_district = {0, 0, 1};
  m.school_district = {0, 0, 1};
  m.capacity = {1, 1, 1};
  m.student_prefs = {{1, 0, 2},   // t1: s2 > s1 > s3
                     {0, 1, 2},   // t2: s1 > s2 > s3
                     {0, 2, 1}};  // t3: s1 > s3 > s2
  m.school_priorities = {{0, 2, 1},   // s1: t1 > t3 > t2
                         {1, 0, 2},   // s2: t2 > t1 > t3
                         {2, 0, 1}};  // s3: t3 > t1 > t2
  m.school_unacceptable = {{}, {}, {}};
  m.complete_preferences = true;
  return m;
}

// Fresh empty directory under the build tree.
inline std::string temp_dir(const std::string& name) {
  const auto dir = std::filesystem::current_path() / "test_tmp" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

// Random market with partial lists: up to max_t students and max_s schools
// in one or two districts, capacities up to max_q, each student ranking a
// nonempty random subset, schools ranking a random subset of students and
// declaring a few others unacceptable. When `complete` is set, every list is
// a full permutation instead.
inline Market random_market(Rng& rng, std::int32_t max_t, std::int32_t max_s,
                            std::int32_t max_q, bool complete) {
  Market m;
  const auto T = static_cast<std::int32_t>(1 + rng.below(static_cast<std::uint64_t>(max_t)));
  const auto S = static_cast<std::int32_t>(1 + rng.below(static_cast<std::uint64_t>(max_s)));
  const auto D = std::min<std::int32_t>({2, T, S});
  for (std::int32_t d = 0; d < D; ++d) m.district_labels.push_back(std::string(1, static_cast<char>('A' + d)));
  for (std::int32_t t = 0; t < T; ++t) {
    m.student_ids.push_back("t" + std::to_string(t));
    m.student_district.push_back(t < D ? t : static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(D))));
  }
  for (std::int32_t s = 0; s < S; ++s) {
    m.school_ids.push_back("s" + std::to_string(s));
    m.school_district.push_back(s < D ? s : static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(D))));
    m.capacity.push_back(static_cast<std::int32_t>(1 + rng.below(static_cast<std::uint64_t>(max_q))));
  }
  m.student_prefs.resize(static_cast<std::size_t>(T));
  for (std::int32_t t = 0; t < T; ++t) {
    auto perm = rng.permutation(S);
    const auto len = complete ? S : static_cast<std::int32_t>(1 + rng.below(static_cast<std::uint64_t>(S)));
    perm.resize(static_cast<std::size_t>(len));
    m.student_prefs[static_cast<std::size_t>(t)] = std::move(perm);
  }
  m.school_priorities.resize(static_cast<std::size_t>(S));
  m.school_unacceptable.resize(static_cast<std::size_t>(S));
  for (std::int32_t s = 0; s < S; ++s) {
    auto perm = rng.permutation(T);
    auto len = complete ? T : static_cast<std::int32_t>(1 + rng.below(static_cast<std::uint64_t>(T)));
    std::vector<std::int32_t> ranked(perm.begin(), perm.begin() + len);
    m.school_priorities[static_cast<std::size_t>(s)] = std::move(ranked);
    if (!complete && len < T && rng.below(2) == 0) {
      // a slice of the leftovers becomes explicitly unacceptable
      std::vector<std::int32_t> bad(perm.begin() + len, perm.end());
      bad.resize(static_cast<std::size_t>(rng.below(bad.size() + 1)));
      std::sort(bad.begin(), bad.end());
      m.school_unacceptable[static_cast<std::size_t>(s)] = std::move(bad);
    }
  }
  m.complete_preferences = complete;
  return m;
}

}  // namespace schoolmerge::testing
