#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "schoolmerge/errors.hpp"
#include "schoolmerge/estimator.hpp"
#include "schoolmerge/matching.hpp"

#include "helpers.hpp"

using namespace schoolmerge;
namespace st = schoolmerge::testing;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Reference bounds, written straight off the market's lists instead of the
// dense RankData the estimator uses. Any disagreement with utility_bounds /
// valuation_bounds is a bug on one side or the other.
namespace ref {

struct Iv {
  double lo = -kInf, hi = kInf;
};

int pos_in(const std::vector<std::int32_t>& v, std::int32_t x) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] == x) return static_cast<int>(i);
  return -1;
}

bool banned(const Market& m, std::int32_t s, std::int32_t t) {
  const auto& u = m.school_unacceptable[s];
  return std::find(u.begin(), u.end(), t) != u.end();
}

Iv u_wtt(const Market& m, const LatentState& st, std::int32_t t, std::int32_t s) {
  const auto& list = m.student_prefs[t];
  const std::int32_t S = m.num_schools();
  const int p = pos_in(list, s);
  Iv iv;
  if (p < 0) {
    for (auto x : list) iv.hi = std::min(iv.hi, st.u(t, x, S));
    return iv;
  }
  for (int i = 0; i < p; ++i) iv.hi = std::min(iv.hi, st.u(t, list[i], S));
  if (p + 1 < static_cast<int>(list.size())) {
    for (std::size_t i = static_cast<std::size_t>(p) + 1; i < list.size(); ++i)
      iv.lo = std::max(iv.lo, st.u(t, list[i], S));
  } else {
    for (std::int32_t x = 0; x < S; ++x)
      if (pos_in(list, x) < 0) iv.lo = std::max(iv.lo, st.u(t, x, S));
  }
  return iv;
}

Iv u_undom(const Market& m, const LatentState& st, std::int32_t t, std::int32_t s) {
  const auto& list = m.student_prefs[t];
  const std::int32_t S = m.num_schools();
  const int p = pos_in(list, s);
  Iv iv;
  if (p < 0) return iv;
  for (int i = 0; i < p; ++i) iv.hi = std::min(iv.hi, st.u(t, list[i], S));
  for (std::size_t i = static_cast<std::size_t>(p) + 1; i < list.size(); ++i)
    iv.lo = std::max(iv.lo, st.u(t, list[i], S));
  return iv;
}

Iv v_list(const Market& m, const LatentState& st, std::int32_t s, std::int32_t t) {
  const std::int32_t T = m.num_students();
  const auto& ranked = m.school_priorities[s];
  Iv iv;
  if (banned(m, s, t)) {
    for (auto x : ranked) iv.hi = std::min(iv.hi, st.v(s, x, T));
    return iv;
  }
  const int p = pos_in(ranked, t);
  if (p < 0) return iv;
  for (int i = 0; i < p; ++i) iv.hi = std::min(iv.hi, st.v(s, ranked[i], T));
  const bool last_no_tail = p + 1 == static_cast<int>(ranked.size()) &&
                            m.school_unacceptable[s].empty();
  if (!last_no_tail) {
    for (std::size_t i = static_cast<std::size_t>(p) + 1; i < ranked.size(); ++i)
      iv.lo = std::max(iv.lo, st.v(s, ranked[i], T));
    for (auto x : m.school_unacceptable[s]) iv.lo = std::max(iv.lo, st.v(s, x, T));
  }
  return iv;
}

bool full(const Market& m, const Matching& mu, std::int32_t s) {
  return static_cast<std::int32_t>(mu.roster(s).size()) >= m.capacity[s];
}

double roster_min(const Market& m, const Matching& mu, const LatentState& st,
                  std::int32_t s) {
  double mn = kInf;
  for (auto x : mu.roster(s)) mn = std::min(mn, st.v(s, x, m.num_students()));
  return mn;
}

bool feasible(const Market& m, const Matching& mu, const LatentState& st,
              std::int32_t t, std::int32_t s) {
  if (banned(m, s, t)) return false;
  if (!full(m, mu, s)) return true;
  return st.v(s, t, m.num_students()) > roster_min(m, mu, st, s);
}

bool poacher(const Market& m, const Matching& mu, const LatentState& st,
             std::int32_t s, std::int32_t t) {
  if (banned(m, s, t)) return false;
  const auto match = mu.of_student(t);
  if (match < 0) return true;
  return st.u(t, s, m.num_schools()) > st.u(t, match, m.num_schools());
}

Iv u_stab(const Market& m, const Matching& mu, const LatentState& st,
          std::int32_t t, std::int32_t s) {
  const std::int32_t S = m.num_schools();
  Iv iv;
  const auto match = mu.of_student(t);
  if (match >= 0 && match != s && feasible(m, mu, st, t, s))
    iv.hi = st.u(t, match, S);
  if (match == s)
    for (std::int32_t x = 0; x < S; ++x)
      if (x != s && feasible(m, mu, st, t, x)) iv.lo = std::max(iv.lo, st.u(t, x, S));
  return iv;
}

Iv v_stab(const Market& m, const Matching& mu, const LatentState& st,
          std::int32_t s, std::int32_t t) {
  const std::int32_t T = m.num_students();
  Iv iv;
  if (!full(m, mu, s)) return iv;
  if (mu.of_student(t) == s) {
    for (std::int32_t x = 0; x < T; ++x)
      if (mu.of_student(x) != s && poacher(m, mu, st, s, x))
        iv.lo = std::max(iv.lo, st.v(s, x, T));
  } else if (poacher(m, mu, st, s, t)) {
    for (auto x : mu.roster(s)) iv.hi = std::min(iv.hi, st.v(s, x, T));
  }
  return iv;
}

Iv meet(Iv a, Iv b) { return Iv{std::max(a.lo, b.lo), std::min(a.hi, b.hi)}; }

Iv u_bounds(const Market& m, const Matching& mu, const LatentState& st,
            std::int32_t t, std::int32_t s, Mode mode) {
  switch (mode) {
    case Mode::wtt: return u_wtt(m, st, t, s);
    case Mode::undom: return u_undom(m, st, t, s);
    case Mode::stability: return u_stab(m, mu, st, t, s);
    case Mode::stab_undom: return meet(u_undom(m, st, t, s), u_stab(m, mu, st, t, s));
  }
  return {};
}

Iv v_bounds(const Market& m, const Matching& mu, const LatentState& st,
            std::int32_t s, std::int32_t t, Mode mode) {
  switch (mode) {
    case Mode::wtt:
    case Mode::undom: return v_list(m, st, s, t);
    case Mode::stability: return v_stab(m, mu, st, s, t);
    case Mode::stab_undom: return meet(v_list(m, st, s, t), v_stab(m, mu, st, s, t));
  }
  return {};
}

}  // namespace ref

// Four students, four schools, one of everything: complete and partial lists,
// a singleton list, an unranked school, never-seen and explicitly-rejected
// students, a school with spare capacity.
Market bounds_fixture() {
  Market m;
  m.student_ids = {"t0", "t1", "t2", "t3"};
  m.school_ids = {"s0", "s1", "s2", "s3"};
  m.district_labels = {"Z"};
  m.student_district = {0, 0, 0, 0};
  m.school_district = {0, 0, 0, 0};
  m.capacity = {1, 1, 2, 1};
  m.student_prefs = {{1, 0, 2}, {0, 1, 2, 3}, {2}, {3, 2}};
  m.school_priorities = {{1, 0}, {0, 1, 3}, {2, 3, 0, 1}, {3}};
  m.school_unacceptable = {{2}, {}, {}, {0, 1, 2}};
  m.complete_preferences = false;
  return m;
}

LatentState random_state(Rng& rng, std::int32_t T, std::int32_t S) {
  LatentState st;
  st.U.resize(static_cast<std::size_t>(T) * S);
  st.V.resize(static_cast<std::size_t>(S) * T);
  for (auto& u : st.U) u = rng.normal();
  for (auto& v : st.V) v = rng.normal();
  return st;
}

DesignData trivial_design(const Market& m, const Matching& mu, Rng& rng) {
  const Eigen::Index n = static_cast<Eigen::Index>(m.num_students()) * m.num_schools();
  Eigen::MatrixXd X(n, 1), W(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = rng.normal();
    W(i, 0) = rng.normal();
  }
  return make_design(m, X, W, {"x"}, {"w"}, mu);
}

// Schools rank (a subset of) their applicants and nobody else, the pattern
// deferred acceptance data actually has.
Market applicant_market(Rng& rng) {
  Market m = st::random_market(rng, 8, 4, 2, false);
  const std::int32_t T = m.num_students(), S = m.num_schools();
  for (std::int32_t s = 0; s < S; ++s) {
    std::vector<std::int32_t> applicants;
    for (std::int32_t t = 0; t < T; ++t) {
      const auto& l = m.student_prefs[t];
      if (std::find(l.begin(), l.end(), s) != l.end()) applicants.push_back(t);
    }
    rng.shuffle(applicants);
    std::vector<std::int32_t> kept, rejected;
    for (auto t : applicants) {
      if (applicants.size() > 1 && rng.below(8) == 0)
        rejected.push_back(t);
      else
        kept.push_back(t);
    }
    std::sort(rejected.begin(), rejected.end());
    m.school_priorities[s] = std::move(kept);
    m.school_unacceptable[s] = std::move(rejected);
  }
  bool complete = true;
  for (const auto& p : m.student_prefs)
    if (static_cast<std::int32_t>(p.size()) != S) complete = false;
  for (std::int32_t s = 0; s < S; ++s)
    if (static_cast<std::int32_t>(m.school_priorities[s].size()) != T) complete = false;
  m.complete_preferences = complete;
  return m;
}

void check_submitted_lists_respected(const Market& m, const LatentState& state,
                                     bool lists_are_top) {
  const std::int32_t S = m.num_schools(), T = m.num_students();
  for (std::int32_t t = 0; t < T; ++t) {
    const auto& list = m.student_prefs[t];
    for (std::size_t i = 1; i < list.size(); ++i)
      CHECK(state.u(t, list[i - 1], S) > state.u(t, list[i], S));
    if (!lists_are_top) continue;
    double min_listed = kInf, max_unlisted = -kInf;
    for (auto s : list) min_listed = std::min(min_listed, state.u(t, s, S));
    for (std::int32_t s = 0; s < S; ++s)
      if (ref::pos_in(list, s) < 0) max_unlisted = std::max(max_unlisted, state.u(t, s, S));
    if (std::isfinite(max_unlisted)) CHECK(min_listed > max_unlisted);
  }
  for (std::int32_t s = 0; s < S; ++s) {
    const auto& ranked = m.school_priorities[s];
    for (std::size_t i = 1; i < ranked.size(); ++i)
      CHECK(state.v(s, ranked[i - 1], T) > state.v(s, ranked[i], T));
    double min_ranked = kInf;
    for (auto t : ranked) min_ranked = std::min(min_ranked, state.v(s, t, T));
    for (auto t : m.school_unacceptable[s]) CHECK(state.v(s, t, T) < min_ranked);
  }
}

}  // namespace

TEST_CASE("mode names round-trip") {
  for (Mode mode : {Mode::wtt, Mode::undom, Mode::stability, Mode::stab_undom})
    CHECK(mode_from_string(mode_to_string(mode)) == mode);
  CHECK_THROWS_AS(mode_from_string("psychic"), ValidationError);
}

TEST_CASE("truncation intervals match a list-based reference") {
  const Market m = bounds_fixture();
  REQUIRE(market_ok(validate_market(m)));
  const Matching mu = sosm(m);
  REQUIRE(mu.of_student(0) == 1);
  REQUIRE(mu.of_student(1) == 0);
  REQUIRE(mu.of_student(2) == 2);
  REQUIRE(mu.of_student(3) == 3);

  // second matching: t3 unmatched, s2 full, s1 vacant
  Matching mu2 = mu;
  mu2.unassign(3);
  mu2.unassign(0);
  mu2.assign(0, 2);

  Rng rng(Stream{4242}.child("bounds"));
  Eigen::MatrixXd X(16, 0), W(16, 0);
  for (const Matching* om : {&mu, static_cast<const Matching*>(&mu2)}) {
    const DesignData d = make_design(m, X, W, {}, {}, *om);
    for (int rep = 0; rep < 40; ++rep) {
      const LatentState state = random_state(rng, 4, 4);
      for (Mode mode : {Mode::wtt, Mode::undom, Mode::stability, Mode::stab_undom}) {
        for (std::int32_t t = 0; t < 4; ++t)
          for (std::int32_t s = 0; s < 4; ++s) {
            const Bounds got = utility_bounds(d, state, t, s, mode);
            const ref::Iv want = ref::u_bounds(m, *om, state, t, s, mode);
            CHECK(got.lo == want.lo);
            CHECK(got.hi == want.hi);
            const Bounds gv = valuation_bounds(d, state, s, t, mode);
            const ref::Iv wv = ref::v_bounds(m, *om, state, s, t, mode);
            CHECK(gv.lo == wv.lo);
            CHECK(gv.hi == wv.hi);
          }
      }
    }
  }
}

TEST_CASE("list modes draw latents that reproduce the lists") {
  Rng rng(Stream{808}.child("lists"));
  GibbsConfig cfg;
  cfg.iterations = 60;
  cfg.burn_in = 30;
  for (int rep = 0; rep < 8; ++rep) {
    const Market m = st::random_market(rng, 8, 4, 2, rep % 4 == 0);
    const Matching mu = sosm(m);
    const DesignData d = trivial_design(m, mu, rng);

    const PosteriorDraws wtt = run_gibbs(d, Mode::wtt, cfg, Stream{900}.child(rep));
    CHECK(wtt.clamp_u == 0);
    CHECK(wtt.clamp_v == 0);
    check_submitted_lists_respected(m, wtt.final_state, true);

    const PosteriorDraws und = run_gibbs(d, Mode::undom, cfg, Stream{901}.child(rep));
    CHECK(und.clamp_u == 0);
    CHECK(und.clamp_v == 0);
    check_submitted_lists_respected(m, und.final_state, false);
  }
}

TEST_CASE("stability modes leave no unexplained blocking pairs") {
  Rng rng(Stream{77}.child("stab"));
  GibbsConfig cfg;
  cfg.iterations = 80;
  cfg.burn_in = 40;
  int audited = 0;
  for (int rep = 0; rep < 8; ++rep) {
    const Market m = applicant_market(rng);
    REQUIRE(market_ok(validate_market(m)));
    const Matching mu = sosm(m);
    const DesignData d = trivial_design(m, mu, rng);
    const RankData rd = RankData::from_market(m);
    for (Mode mode : {Mode::stability, Mode::stab_undom}) {
      const PosteriorDraws out = run_gibbs(d, mode, cfg, Stream{902}.child(rep));
      CHECK(out.clamp_u == 0);
      CHECK(out.clamp_v == 0);
      const RealizedOrders realized = realize_complete_orders(m, out.final_state);
      CHECK(market_ok(validate_market(realized.market)));
      for (const auto& b : is_stable(realized.market, mu)) {
        // the one configuration the constraints cannot see: a student the
        // school never ranked, unmatched, eyeing a school with spare seats
        const bool carved =
            !mu.matched(b.student) &&
            static_cast<std::int32_t>(mu.roster(b.school).size()) < m.capacity[b.school] &&
            rd.priority_of(b.school, b.student) == 0;
        CHECK(carved);
        ++audited;
      }
      if (mode == Mode::stab_undom)
        check_submitted_lists_respected(m, out.final_state, false);
    }
  }
  (void)audited;  // pairs in the carve-out are fine, any count included
}

TEST_CASE("posterior mean recovers the generating coefficients") {
  Rng rng(Stream{314}.child("recovery"));
  const std::int32_t T = 40, S = 4;
  Market m;
  m.district_labels = {"Z"};
  for (std::int32_t t = 0; t < T; ++t) {
    m.student_ids.push_back("t" + std::to_string(t));
    m.student_district.push_back(0);
  }
  for (std::int32_t s = 0; s < S; ++s) {
    m.school_ids.push_back("s" + std::to_string(s));
    m.school_district.push_back(0);
    m.capacity.push_back(1);
  }
  const Eigen::Index n = static_cast<Eigen::Index>(T) * S;
  Eigen::MatrixXd X(n, 1), W(n, 1);
  std::vector<double> U(static_cast<std::size_t>(n)), V(static_cast<std::size_t>(n));
  for (std::int32_t t = 0; t < T; ++t)
    for (std::int32_t s = 0; s < S; ++s) {
      const auto i = static_cast<std::size_t>(t) * S + s;
      X(static_cast<Eigen::Index>(i), 0) = rng.normal();
      U[i] = 2.0 * X(static_cast<Eigen::Index>(i), 0) + rng.normal();
    }
  for (std::int32_t s = 0; s < S; ++s)
    for (std::int32_t t = 0; t < T; ++t) {
      const auto i = static_cast<std::size_t>(s) * T + t;
      W(static_cast<Eigen::Index>(i), 0) = rng.normal();
      V[i] = 1.5 * W(static_cast<Eigen::Index>(i), 0) + rng.normal();
    }
  m.student_prefs.resize(static_cast<std::size_t>(T));
  for (std::int32_t t = 0; t < T; ++t) {
    std::vector<std::int32_t> idx(static_cast<std::size_t>(S));
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::int32_t a, std::int32_t b) {
      return U[static_cast<std::size_t>(t) * S + a] > U[static_cast<std::size_t>(t) * S + b];
    });
    m.student_prefs[static_cast<std::size_t>(t)] = std::move(idx);
  }
  m.school_priorities.resize(static_cast<std::size_t>(S));
  m.school_unacceptable.resize(static_cast<std::size_t>(S));
  for (std::int32_t s = 0; s < S; ++s) {
    std::vector<std::int32_t> idx(static_cast<std::size_t>(T));
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::int32_t a, std::int32_t b) {
      return V[static_cast<std::size_t>(s) * T + a] > V[static_cast<std::size_t>(s) * T + b];
    });
    m.school_priorities[static_cast<std::size_t>(s)] = std::move(idx);
  }
  m.complete_preferences = true;
  REQUIRE(market_ok(validate_market(m)));

  const DesignData d = make_design(m, X, W, {"x"}, {"w"}, sosm(m));
  GibbsConfig cfg;
  cfg.iterations = 2500;
  cfg.burn_in = 1000;
  for (Mode mode : {Mode::wtt, Mode::undom}) {
    const PosteriorDraws out = run_gibbs(d, mode, cfg, Stream{11}.child(mode_to_string(mode)));
    CHECK(out.clamp_u == 0);
    CHECK(out.clamp_v == 0);
    const Eigen::VectorXd mean = out.means();
    REQUIRE(mean.size() == 2);
    CHECK(mean[0] == doctest::Approx(2.0).epsilon(0.2));
    CHECK(mean[1] == doctest::Approx(1.5).epsilon(0.25));
    const auto summ = out.summary();
    REQUIRE(summ.size() == 2);
    CHECK(summ[0].name == "x");
    CHECK(summ[1].name == "w");
    CHECK(summ[0].q025 < summ[0].mean);
    CHECK(summ[0].mean < summ[0].q975);
    CHECK(summ[0].mean == doctest::Approx(mean[0]).epsilon(1e-12));
  }
}

TEST_CASE("chains are reproducible and seed-sensitive") {
  Rng rng(Stream{5}.child("det"));
  const Market m = applicant_market(rng);
  const Matching mu = sosm(m);
  const DesignData d = trivial_design(m, mu, rng);
  GibbsConfig cfg;
  cfg.iterations = 40;
  cfg.burn_in = 10;

  const PosteriorDraws a = run_gibbs(d, Mode::stab_undom, cfg, Stream{20});
  const PosteriorDraws b = run_gibbs(d, Mode::stab_undom, cfg, Stream{20});
  CHECK((a.draws - b.draws).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.final_state.U == b.final_state.U);
  CHECK(a.final_state.V == b.final_state.V);

  const PosteriorDraws c = run_gibbs(d, Mode::stab_undom, cfg, Stream{21});
  CHECK((a.draws - c.draws).cwiseAbs().maxCoeff() > 0.0);

  cfg.gauss_seidel = false;
  const PosteriorDraws f1 = run_gibbs(d, Mode::undom, cfg, Stream{22});
  const PosteriorDraws f2 = run_gibbs(d, Mode::undom, cfg, Stream{22});
  CHECK((f1.draws - f2.draws).cwiseAbs().maxCoeff() == 0.0);
  for (double u : f1.final_state.U) CHECK(std::isfinite(u));
}

TEST_CASE("retained draw bookkeeping honours burn-in and thinning") {
  Rng rng(Stream{6}.child("thin"));
  const Market m = st::random_market(rng, 4, 3, 1, true);
  const DesignData d = trivial_design(m, sosm(m), rng);
  GibbsConfig cfg;
  cfg.iterations = 10;
  cfg.burn_in = 4;
  cfg.thin = 3;
  const PosteriorDraws out = run_gibbs(d, Mode::undom, cfg, Stream{30});
  CHECK(out.draws.rows() == 2);  // iterations 4 and 7
  CHECK(out.draws.cols() == 2);
  CHECK(out.names == std::vector<std::string>{"x", "w"});

  cfg.burn_in = 10;
  CHECK_THROWS_AS(run_gibbs(d, Mode::undom, cfg, Stream{31}), ValidationError);
  cfg.burn_in = 4;
  cfg.thin = 0;
  CHECK_THROWS_AS(run_gibbs(d, Mode::undom, cfg, Stream{32}), ValidationError);
}

TEST_CASE("design construction rejects shape mismatches") {
  const Market m = bounds_fixture();
  const Matching mu = sosm(m);
  Eigen::MatrixXd good(16, 1), bad(15, 1);
  good.setZero();
  bad.setZero();
  CHECK_THROWS_AS(make_design(m, bad, good, {"x"}, {"w"}, mu), ValidationError);
  CHECK_THROWS_AS(make_design(m, good, bad, {"x"}, {"w"}, mu), ValidationError);
  CHECK_THROWS_AS(make_design(m, good, good, {"x", "extra"}, {"w"}, mu), ValidationError);
  CHECK_THROWS_AS(make_design(m, good, good, {"x"}, {"w"}, Matching(3, 4)), ValidationError);
}

TEST_CASE("collinear columns are pruned from the back") {
  Eigen::MatrixXd base = Eigen::MatrixXd::Random(30, 2);

  SUBCASE("exact duplicate") {
    Eigen::MatrixXd X(30, 3);
    X.col(0) = base.col(0);
    X.col(1) = base.col(1);
    X.col(2) = base.col(0);
    std::vector<std::string> names{"a", "b", "a_again"};
    const auto dropped = prune_collinear(X, &names);
    CHECK(dropped == std::vector<std::int32_t>{2});
    CHECK(names == std::vector<std::string>{"a", "b"});
    CHECK(X.cols() == 2);
  }

  SUBCASE("sum of two columns") {
    Eigen::MatrixXd X(30, 3);
    X.col(0) = base.col(0);
    X.col(1) = base.col(1);
    X.col(2) = base.col(0) + base.col(1);
    const auto dropped = prune_collinear(X, nullptr);
    CHECK(dropped == std::vector<std::int32_t>{2});
    CHECK(X.cols() == 2);
  }

  SUBCASE("triple copy keeps only the first") {
    Eigen::MatrixXd X(30, 3);
    X.col(0) = base.col(0);
    X.col(1) = base.col(0);
    X.col(2) = base.col(0);
    const auto dropped = prune_collinear(X, nullptr);
    CHECK(dropped == std::vector<std::int32_t>{1, 2});
    CHECK(X.cols() == 1);
  }

  SUBCASE("zero column") {
    Eigen::MatrixXd X(30, 2);
    X.col(0) = base.col(0);
    X.col(1).setZero();
    std::vector<std::string> names{"a", "zero"};
    const auto dropped = prune_collinear(X, &names);
    CHECK(dropped == std::vector<std::int32_t>{1});
    CHECK(names == std::vector<std::string>{"a"});
  }

  SUBCASE("independent columns untouched") {
    Eigen::MatrixXd X = base;
    const auto dropped = prune_collinear(X, nullptr);
    CHECK(dropped.empty());
    CHECK(X.cols() == 2);
  }
}

TEST_CASE("latent values induce complete orders, rejections kept") {
  Market base = bounds_fixture();
  LatentState state;
  state.U = {0.5, 2.0, -1.0, 0.0,   // t0: s1 > s0 > s3 > s2
             1.0, 1.0, 3.0, -2.0,   // t1: s2 > s0 = s1 (tie) > s3
             0.0, 1.0, 2.0, 3.0,    // t2: s3 > s2 > s1 > s0
             4.0, 3.0, 2.0, 1.0};   // t3: s0 > s1 > s2 > s3
  state.V = {1.0, 2.0, 3.0, 4.0,    // s0: t3 > t2 > t1 > t0, but t2 is banned
             5.0, 5.0, 5.0, 5.0,    // s1: four-way tie, index order
             0.0, -1.0, -2.0, -3.0, // s2: t0 > t1 > t2 > t3
             9.0, 8.0, 7.0, 6.0};   // s3: t0..t2 banned, only t3 kept

  const RealizedOrders out = realize_complete_orders(base, state);
  CHECK(out.ties == 1 + 3);
  CHECK(out.market.student_prefs[0] == std::vector<std::int32_t>{1, 0, 3, 2});
  CHECK(out.market.student_prefs[1] == std::vector<std::int32_t>{2, 0, 1, 3});
  CHECK(out.market.school_priorities[0] == std::vector<std::int32_t>{3, 1, 0});
  CHECK(out.market.school_priorities[1] == std::vector<std::int32_t>{0, 1, 2, 3});
  CHECK(out.market.school_priorities[3] == std::vector<std::int32_t>{3});
  CHECK(out.market.school_unacceptable == base.school_unacceptable);
  CHECK_FALSE(out.market.complete_preferences);

  // with no rejections anywhere the realized market is complete
  Market open = base;
  open.school_unacceptable = {{}, {}, {}, {}};
  open.school_priorities = {{1, 0, 2, 3}, {0, 1, 3, 2}, {2, 3, 0, 1}, {3, 0, 1, 2}};
  const RealizedOrders full = realize_complete_orders(open, state);
  CHECK(full.market.complete_preferences);
  CHECK(full.market.school_priorities[0] == std::vector<std::int32_t>{3, 2, 1, 0});

  state.U.resize(3);
  CHECK_THROWS_AS(realize_complete_orders(base, state), ValidationError);
}
