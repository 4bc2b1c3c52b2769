#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "schoolmerge/csv.hpp"
#include "schoolmerge/errors.hpp"
#include "schoolmerge/market.hpp"

#include "helpers.hpp"

using namespace schoolmerge;
namespace st = schoolmerge::testing;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool has_rule(const std::vector<ValidationRecord>& rs, const std::string& rule) {
  for (const auto& r : rs)
    if (r.rule == rule) return true;
  return false;
}

}  // namespace

TEST_CASE("the worked three-student market validates cleanly") {
  const Market m = st::example1();
  const auto records = validate_market(m);
  CHECK(records.empty());
  CHECK(market_ok(records));
  CHECK(m.total_capacity() == 3);
  CHECK(m.district_students(0) == std::vector<std::int32_t>{0, 1});
  CHECK(m.district_schools(1) == std::vector<std::int32_t>{2});
}

TEST_CASE("structural violations are reported") {
  SUBCASE("nonpositive capacity") {
    Market m = st::example1();
    m.capacity[1] = 0;
    CHECK_FALSE(market_ok(validate_market(m)));
  }
  SUBCASE("preference index out of range") {
    Market m = st::example1();
    m.student_prefs[0].push_back(9);
    CHECK_FALSE(market_ok(validate_market(m)));
  }
  SUBCASE("duplicate list entry") {
    Market m = st::example1();
    m.school_priorities[0] = {0, 0, 1};
    CHECK_FALSE(market_ok(validate_market(m)));
  }
  SUBCASE("student both ranked and unacceptable") {
    Market m = st::example1();
    m.school_unacceptable[0] = {2};  // but s1 ranks t3
    CHECK_FALSE(market_ok(validate_market(m)));
  }
  SUBCASE("completeness flag contradicts a partial list") {
    Market m = st::example1();
    m.student_prefs[2] = {0};
    CHECK(has_rule(validate_market(m), "completeness-flag"));
  }
  SUBCASE("district with schools but no students") {
    Market m = st::example1();
    m.student_district[2] = 0;
    CHECK_FALSE(market_ok(validate_market(m)));
  }
}

TEST_CASE("society-wide seat shortage is only a warning") {
  Market m = st::example1();
  m.capacity = {1, 1, 1};
  // four students, three seats
  m.student_ids.push_back("t4");
  m.student_district.push_back(0);
  m.student_prefs.push_back({0, 1, 2});
  for (auto& prio : m.school_priorities) prio.push_back(3);
  const auto records = validate_market(m);
  CHECK(market_ok(records));
  REQUIRE_FALSE(records.empty());
  CHECK(has_rule(records, "excess-seats"));
  CHECK(records.front().warning);
}

TEST_CASE("district restriction keeps order and capacities") {
  const Market m = st::example1();
  const Market a = restrict_to_district(m, 0);
  CHECK(a.num_students() == 2);
  CHECK(a.num_schools() == 2);
  CHECK(a.capacity == std::vector<std::int32_t>{1, 1});
  // t1 ranked s2 > s1 > s3; inside district A that collapses to s2 > s1
  CHECK(a.student_prefs[0] == std::vector<std::int32_t>{1, 0});
  CHECK(a.student_prefs[1] == std::vector<std::int32_t>{0, 1});
  // s1 ranked t1 > t3 > t2; t3 is outside the district
  CHECK(a.school_priorities[0] == std::vector<std::int32_t>{0, 1});
  CHECK(a.complete_preferences);
  CHECK(market_ok(validate_market(a)));

  const Market b = restrict_to_district(m, 1);
  CHECK(b.num_students() == 1);
  CHECK(b.num_schools() == 1);
  CHECK(b.student_prefs[0] == std::vector<std::int32_t>{0});
}

TEST_CASE("absolute and relative ranks") {
  const Market m = st::example1();
  CHECK(absolute_rank(m, 0, 1) == 1);  // t1's top choice is s2
  CHECK(absolute_rank(m, 0, 0) == 2);
  CHECK(absolute_rank(m, 0, 2) == 3);
  CHECK(relative_rank(m, 0, 1) == 1);
  CHECK(relative_rank(m, 0, 0) == 2);
  // s3 is outside t1's district
  CHECK_FALSE(relative_rank(m, 0, 2).has_value());

  Market partial = st::example1();
  partial.student_prefs[0] = {1};
  partial.complete_preferences = false;
  CHECK_FALSE(absolute_rank(partial, 0, 0).has_value());
}

TEST_CASE("matching bookkeeping stays coherent") {
  Matching mu(3, 2);
  CHECK(mu.num_matched() == 0);
  mu.assign(0, 1);
  mu.assign(2, 1);
  CHECK(mu.matched(0));
  CHECK_FALSE(mu.matched(1));
  CHECK(mu.of_student(2) == 1);
  CHECK(mu.roster(1) == std::vector<std::int32_t>{0, 2});
  CHECK(mu.num_matched() == 2);
  mu.unassign(0);
  CHECK_FALSE(mu.matched(0));
  CHECK(mu.roster(1) == std::vector<std::int32_t>{2});

  Matching same(3, 2);
  same.assign(2, 1);
  CHECK(mu == same);
}

TEST_CASE("scheme union merges the district layers") {
  const Market m = st::example1();
  MatchingScheme sch;
  sch.district.resize(2, Matching(3, 3));
  sch.district[0].assign(0, 1);
  sch.district[0].assign(1, 0);
  sch.district[1].assign(2, 2);
  sch.consolidated = Matching(3, 3);
  const Matching all = sch.district_union();
  CHECK(all.of_student(0) == 1);
  CHECK(all.of_student(1) == 0);
  CHECK(all.of_student(2) == 2);
}

TEST_CASE("rank data encodes gaps, infinities and lists") {
  Market m = st::example1();
  m.student_prefs[0] = {1};          // t1 ranks only s2
  m.school_priorities[0] = {0};      // s1 ranks only t1
  m.school_unacceptable[0] = {2};    // and rejects t3 outright
  m.complete_preferences = false;
  const RankData rd = RankData::from_market(m);
  CHECK(rd.rank_of(0, 1) == 1);
  CHECK(rd.rank_of(0, 0) == 0);  // unranked
  CHECK(rd.priority_of(0, 0) == 1);
  CHECK(rd.priority_of(0, 1) == 0);                       // never applied
  CHECK(rd.priority_of(0, 2) == RankData::kUnacceptable);  // rejected
  CHECK(rd.list_len[0] == 1);
  CHECK(rd.ranked_len[0] == 1);
  CHECK(rd.has_infinite_tail(0));
  CHECK_FALSE(rd.has_infinite_tail(1));
  CHECK(rd.rol[0] == std::vector<std::int32_t>{1});
  CHECK(rd.unacceptable[0] == std::vector<std::int32_t>{2});
}

TEST_CASE("dataset round-trips through csv byte for byte") {
  const std::string dir1 = st::temp_dir("market_rt1");
  const std::string dir2 = st::temp_dir("market_rt2");

  Dataset ds;
  ds.market = st::example1();
  ds.market.school_unacceptable[2] = {1};
  // remove t2 from s3's ranked list so the unacceptable flag is consistent
  ds.market.school_priorities[2] = {2, 0};
  ds.market.complete_preferences = false;
  ds.student_cols = {"grade"};
  ds.student_vals.resize(3, 1);
  ds.student_vals << 1.25, -0.5, 3.75;
  ds.pair_cols = {"dist"};
  ds.pair_vals = {Eigen::MatrixXd::Constant(3, 3, 2.0)};
  ds.pair_vals[0](1, 2) = 0.125;

  save_dataset(dir1, ds);
  const Dataset back = load_dataset(dir1);
  CHECK(back.market.student_ids == ds.market.student_ids);
  CHECK(back.market.student_prefs == ds.market.student_prefs);
  CHECK(back.market.school_priorities == ds.market.school_priorities);
  CHECK(back.market.school_unacceptable == ds.market.school_unacceptable);
  CHECK(back.market.capacity == ds.market.capacity);
  CHECK(back.market.complete_preferences == ds.market.complete_preferences);
  CHECK(back.student_cols == ds.student_cols);
  CHECK(back.student_vals(2, 0) == 3.75);
  REQUIRE(back.pair("dist") != nullptr);
  CHECK((*back.pair("dist"))(1, 2) == 0.125);
  CHECK(back.pair("nope") == nullptr);

  save_dataset(dir2, back);
  for (const char* f : {"students.csv", "schools.csv", "rols.csv",
                        "priorities.csv", "pairs.csv"})
    CHECK(slurp(dir1 + "/" + std::string(f)) == slurp(dir2 + "/" + std::string(f)));
}

TEST_CASE("matching io with unmatched sentinel") {
  const std::string dir = st::temp_dir("market_mu");
  const Market m = st::example1();
  Matching mu(3, 3);
  mu.assign(0, 1);
  mu.assign(2, 2);
  write_matching(dir + "/matching.csv", m, mu);
  const std::string text = slurp(dir + "/matching.csv");
  CHECK(text.find("t2,UNMATCHED") != std::string::npos);
  const Matching back = read_matching(dir + "/matching.csv", m);
  CHECK(back == mu);
}

TEST_CASE("malformed csv inputs are rejected") {
  const std::string dir = st::temp_dir("market_bad");
  {
    std::ofstream out(dir + "/students.csv");
    out << "id,district\nt1,A\n";
  }
  {
    std::ofstream out(dir + "/schools.csv");
    out << "id,district,capacity\ns1,A,1\n";
  }
  {
    std::ofstream out(dir + "/rols.csv");
    out << "student_id,rank,school_id\nt1,2,s1\n";  // rank gap: no rank 1
  }
  {
    std::ofstream out(dir + "/priorities.csv");
    out << "school_id,priority,student_id,acceptable\ns1,1,t1,1\n";
  }
  CHECK_THROWS_AS(load_dataset(dir), ValidationError);
  CHECK_THROWS_AS(load_dataset(dir + "/missing"), IoError);
}
