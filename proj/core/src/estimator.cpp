#include "schoolmerge/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "schoolmerge/errors.hpp"
#include "schoolmerge/stats.hpp"

namespace schoolmerge {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Mode mode_from_string(const std::string& name) {
  if (name == "wtt") return Mode::wtt;
  if (name == "undom") return Mode::undom;
  if (name == "stability") return Mode::stability;
  if (name == "stab_undom") return Mode::stab_undom;
  throw ValidationError("unknown estimation mode: " + name);
}

std::string mode_to_string(Mode mode) {
  switch (mode) {
    case Mode::wtt: return "wtt";
    case Mode::undom: return "undom";
    case Mode::stability: return "stability";
    case Mode::stab_undom: return "stab_undom";
  }
  throw ValidationError("unknown estimation mode");
}

DesignData make_design(const Market& m, Eigen::MatrixXd X, Eigen::MatrixXd W,
                       std::vector<std::string> x_names,
                       std::vector<std::string> w_names,
                       const Matching& observed) {
  DesignData d;
  d.T = m.num_students();
  d.S = m.num_schools();
  if (X.rows() != static_cast<Eigen::Index>(d.T) * d.S)
    throw ValidationError("make_design: X must have T*S rows");
  if (W.rows() != static_cast<Eigen::Index>(d.T) * d.S)
    throw ValidationError("make_design: W must have S*T rows");
  if (x_names.size() != static_cast<std::size_t>(X.cols()) ||
      w_names.size() != static_cast<std::size_t>(W.cols()))
    throw ValidationError("make_design: column name count mismatch");
  if (observed.num_students() != d.T || observed.num_schools() != d.S)
    throw ValidationError("make_design: matching shape mismatch");
  d.X = std::move(X);
  d.W = std::move(W);
  d.x_names = std::move(x_names);
  d.w_names = std::move(w_names);
  d.ranks = RankData::from_market(m);
  d.observed = observed;
  d.capacity = m.capacity;
  return d;
}

namespace {

// ---- list-based bounds on the student side ----

double min_better_ranked(const DesignData& d, const LatentState& st,
                         std::int32_t t, std::int32_t rk) {
  double lo = kInf;
  const auto& rol = d.ranks.rol[t];
  for (std::int32_t i = 0; i < rk - 1; ++i)
    lo = std::min(lo, st.u(t, rol[i], d.S));
  return lo;
}

double max_worse_ranked(const DesignData& d, const LatentState& st,
                        std::int32_t t, std::int32_t rk) {
  double hi = -kInf;
  const auto& rol = d.ranks.rol[t];
  for (std::size_t i = static_cast<std::size_t>(rk); i < rol.size(); ++i)
    hi = std::max(hi, st.u(t, rol[i], d.S));
  return hi;
}

Bounds wtt_u_bounds(const DesignData& d, const LatentState& st, std::int32_t t,
                    std::int32_t s) {
  const std::int32_t rk = d.ranks.rank_of(t, s);
  const std::int32_t L = d.ranks.list_len[t];
  Bounds b{-kInf, kInf};
  if (rk == 0) {
    // Unranked school: worse than everything the student did rank.
    double hi = kInf;
    for (auto s2 : d.ranks.rol[t]) hi = std::min(hi, st.u(t, s2, d.S));
    b.hi = hi;
    return b;
  }
  if (rk > 1) b.hi = min_better_ranked(d, st, t, rk);
  if (rk < L) {
    b.lo = max_worse_ranked(d, st, t, rk);
  } else if (L < d.S) {
    // Last listed school still beats every unranked one.
    double lo = -kInf;
    for (std::int32_t s2 = 0; s2 < d.S; ++s2)
      if (d.ranks.rank_of(t, s2) == 0) lo = std::max(lo, st.u(t, s2, d.S));
    b.lo = lo;
  }
  return b;
}

Bounds undom_u_bounds(const DesignData& d, const LatentState& st,
                      std::int32_t t, std::int32_t s) {
  const std::int32_t rk = d.ranks.rank_of(t, s);
  const std::int32_t L = d.ranks.list_len[t];
  Bounds b{-kInf, kInf};
  if (rk == 0) return b;  // nothing learned about unranked schools
  if (rk > 1) b.hi = min_better_ranked(d, st, t, rk);
  if (rk < L) b.lo = max_worse_ranked(d, st, t, rk);
  return b;
}

// ---- list-based bounds on the school side (same under wtt and undom) ----

Bounds list_v_bounds(const DesignData& d, const LatentState& st,
                     std::int32_t s, std::int32_t t) {
  const std::int32_t pr = d.ranks.priority_of(s, t);
  Bounds b{-kInf, kInf};
  if (pr == 0) return b;  // school never saw this student

  const auto& ranked = d.ranks.ranked[s];
  if (pr == RankData::kUnacceptable) {
    // Worse than every finite-ranked applicant; no lower bound (it sits at
    // the list's infinite tail).
    double hi = kInf;
    for (auto t2 : ranked) hi = std::min(hi, st.v(s, t2, d.T));
    b.hi = hi;
    return b;
  }
  if (pr > 1) {
    double hi = kInf;
    for (std::int32_t i = 0; i < pr - 1; ++i) hi = std::min(hi, st.v(s, ranked[i], d.T));
    b.hi = hi;
  }
  const bool at_list_end =
      pr == d.ranks.ranked_len[s] && !d.ranks.has_infinite_tail(s);
  if (!at_list_end) {
    double lo = -kInf;
    for (std::size_t i = static_cast<std::size_t>(pr); i < ranked.size(); ++i)
      lo = std::max(lo, st.v(s, ranked[i], d.T));
    for (auto t2 : d.ranks.unacceptable[s]) lo = std::max(lo, st.v(s, t2, d.T));
    b.lo = lo;
  }
  return b;
}

// ---- stability bounds around the observed matching ----

bool school_full(const DesignData& d, std::int32_t s) {
  return static_cast<std::int32_t>(d.observed.roster(s).size()) >= d.capacity[s];
}

double roster_min_v(const DesignData& d, const LatentState& st, std::int32_t s) {
  double lo = kInf;
  for (auto t2 : d.observed.roster(s)) lo = std::min(lo, st.v(s, t2, d.T));
  return lo;
}

// Schools student t could enter: t is not unacceptable there, and the school
// either has a free seat or currently holds someone it values less.
bool in_feasible_set(const DesignData& d, const LatentState& st, std::int32_t t,
                     std::int32_t s) {
  if (d.ranks.priority_of(s, t) == RankData::kUnacceptable) return false;
  if (!school_full(d, s)) return true;
  return st.v(s, t, d.T) > roster_min_v(d, st, s);
}

Bounds stab_u_bounds(const DesignData& d, const LatentState& st, std::int32_t t,
                     std::int32_t s) {
  Bounds b{-kInf, kInf};
  const std::int32_t match = d.observed.of_student(t);
  if (match >= 0 && match != s && in_feasible_set(d, st, t, s)) {
    // t could have moved to s but stayed: s is no better than the match.
    b.hi = st.u(t, match, d.S);
  }
  if (match == s) {
    double lo = -kInf;
    for (std::int32_t s2 = 0; s2 < d.S; ++s2) {
      if (s2 == s) continue;
      if (in_feasible_set(d, st, t, s2)) lo = std::max(lo, st.u(t, s2, d.S));
    }
    b.lo = lo;
  }
  return b;
}

// Students who would accept a seat at s and whom s might take: everyone not
// explicitly unacceptable (applicant or not) that prefers s to their current
// assignment, or has none. Leaving non-applicants out would let their
// unconstrained valuations poach seats the matching says they never got.
bool in_poacher_set(const DesignData& d, const LatentState& st, std::int32_t s,
                    std::int32_t t) {
  if (d.ranks.priority_of(s, t) == RankData::kUnacceptable) return false;
  const std::int32_t match = d.observed.of_student(t);
  if (match < 0) return true;
  return st.u(t, s, d.S) > st.u(t, match, d.S);
}

Bounds stab_v_bounds(const DesignData& d, const LatentState& st, std::int32_t s,
                     std::int32_t t) {
  Bounds b{-kInf, kInf};
  if (!school_full(d, s)) return b;  // a vacant seat constrains the students
  const auto& roster = d.observed.roster(s);
  const bool holds_t = d.observed.of_student(t) == s;
  if (!holds_t) {
    if (in_poacher_set(d, st, s, t)) {
      // s kept its roster over t: t is below the weakest admitted student.
      double hi = kInf;
      for (auto t2 : roster) hi = std::min(hi, st.v(s, t2, d.T));
      b.hi = hi;
    }
  } else {
    // s kept t over every would-be poacher.
    double lo = -kInf;
    for (std::int32_t t2 = 0; t2 < d.T; ++t2) {
      if (d.observed.of_student(t2) == s) continue;
      if (in_poacher_set(d, st, s, t2)) lo = std::max(lo, st.v(s, t2, d.T));
    }
    b.lo = lo;
  }
  return b;
}

Bounds intersect(Bounds a, Bounds b) {
  return Bounds{std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
}

}  // namespace

Bounds utility_bounds(const DesignData& d, const LatentState& state,
                      std::int32_t t, std::int32_t s, Mode mode) {
  switch (mode) {
    case Mode::wtt: return wtt_u_bounds(d, state, t, s);
    case Mode::undom: return undom_u_bounds(d, state, t, s);
    case Mode::stability: return stab_u_bounds(d, state, t, s);
    case Mode::stab_undom:
      return intersect(undom_u_bounds(d, state, t, s), stab_u_bounds(d, state, t, s));
  }
  throw ValidationError("utility_bounds: bad mode");
}

Bounds valuation_bounds(const DesignData& d, const LatentState& state,
                        std::int32_t s, std::int32_t t, Mode mode) {
  switch (mode) {
    case Mode::wtt:
    case Mode::undom: return list_v_bounds(d, state, s, t);
    case Mode::stability: return stab_v_bounds(d, state, s, t);
    case Mode::stab_undom:
      return intersect(list_v_bounds(d, state, s, t), stab_v_bounds(d, state, s, t));
  }
  throw ValidationError("valuation_bounds: bad mode");
}

namespace {

double projected(double v, const Bounds& b) {
  const bool lo_f = std::isfinite(b.lo), hi_f = std::isfinite(b.hi);
  if (lo_f && hi_f) return 0.5 * (b.lo + b.hi);
  if (lo_f) return std::max(v, b.lo + 0.5);
  if (hi_f) return std::min(v, b.hi - 0.5);
  return v;
}

}  // namespace

LatentState init_latent_state(const DesignData& d, Mode mode) {
  LatentState st;
  st.U.assign(static_cast<std::size_t>(d.T) * d.S, 0.0);
  st.V.assign(static_cast<std::size_t>(d.S) * d.T, 0.0);
  st.beta = Eigen::VectorXd::Zero(d.X.cols());
  st.gamma = Eigen::VectorXd::Zero(d.W.cols());
  for (std::int32_t t = 0; t < d.T; ++t)
    for (std::int32_t s = 0; s < d.S; ++s) {
      const auto idx = static_cast<std::size_t>(t) * d.S + s;
      st.U[idx] = projected(st.U[idx], utility_bounds(d, st, t, s, mode));
    }
  for (std::int32_t s = 0; s < d.S; ++s)
    for (std::int32_t t = 0; t < d.T; ++t) {
      const auto idx = static_cast<std::size_t>(s) * d.T + t;
      st.V[idx] = projected(st.V[idx], valuation_bounds(d, st, s, t, mode));
    }
  return st;
}

GibbsWorkspace GibbsWorkspace::build(const DesignData& d, double ridge_scale) {
  GibbsWorkspace ws;
  auto factor = [&](const Eigen::MatrixXd& M) {
    Eigen::MatrixXd gram = M.transpose() * M;
    const auto p = gram.rows();
    if (p > 0) {
      const double eps = ridge_scale * gram.trace() / static_cast<double>(p);
      gram.diagonal().array() += eps;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (p > 0 && llt.info() != Eigen::Success)
      throw NumericalError("gibbs: Gram matrix not positive definite despite ridge");
    return llt;
  };
  ws.xtx = factor(d.X);
  ws.wtw = factor(d.W);
  return ws;
}

namespace {

Eigen::VectorXd draw_coefficients(const Eigen::LLT<Eigen::MatrixXd>& llt,
                                  const Eigen::MatrixXd& M,
                                  const Eigen::Map<const Eigen::VectorXd>& y,
                                  Rng& rng) {
  const Eigen::Index p = M.cols();
  if (p == 0) return Eigen::VectorXd();
  const Eigen::VectorXd mean = llt.solve(M.transpose() * y);
  Eigen::VectorXd z(p);
  for (Eigen::Index i = 0; i < p; ++i) z[i] = rng.normal();
  // cov = (L L')^-1, so mean + L'^-1 z has exactly that covariance.
  return mean + llt.matrixU().solve(z);
}

void draw_latent(double& slot, double mean, const Bounds& b,
                 std::int64_t& clamps, Rng& rng) {
  if (b.lo > b.hi) {
    ++clamps;
    slot = 0.5 * (b.lo + b.hi);
    return;
  }
  slot = sample_truncated_normal(rng, mean, b.lo, b.hi);
}

}  // namespace

void gibbs_iteration(const DesignData& d, Mode mode, const GibbsConfig& cfg,
                     const GibbsWorkspace& ws, LatentState& state, Rng& rng) {
  // In the non-Gauss-Seidel variant every bound this iteration is computed
  // against a frozen copy of the previous iteration's latents.
  const LatentState snapshot = cfg.gauss_seidel ? LatentState{} : state;
  const LatentState& ref = cfg.gauss_seidel ? state : snapshot;

  Eigen::VectorXd mu_u = Eigen::VectorXd::Zero(d.X.rows());
  if (d.X.cols() > 0) mu_u = d.X * state.beta;
  for (std::int32_t t = 0; t < d.T; ++t)
    for (std::int32_t s = 0; s < d.S; ++s) {
      const auto idx = static_cast<std::size_t>(t) * d.S + s;
      const Bounds b = utility_bounds(d, ref, t, s, mode);
      draw_latent(state.U[idx], mu_u[static_cast<Eigen::Index>(idx)], b,
                  state.clamp_u, rng);
    }

  Eigen::VectorXd mu_v = Eigen::VectorXd::Zero(d.W.rows());
  if (d.W.cols() > 0) mu_v = d.W * state.gamma;
  for (std::int32_t s = 0; s < d.S; ++s)
    for (std::int32_t t = 0; t < d.T; ++t) {
      const auto idx = static_cast<std::size_t>(s) * d.T + t;
      const Bounds b = valuation_bounds(d, ref, s, t, mode);
      draw_latent(state.V[idx], mu_v[static_cast<Eigen::Index>(idx)], b,
                  state.clamp_v, rng);
    }

  state.beta = draw_coefficients(
      ws.xtx, d.X, Eigen::Map<const Eigen::VectorXd>(state.U.data(), d.X.rows()), rng);
  state.gamma = draw_coefficients(
      ws.wtw, d.W, Eigen::Map<const Eigen::VectorXd>(state.V.data(), d.W.rows()), rng);
}

std::vector<ParamSummary> PosteriorDraws::summary() const {
  std::vector<ParamSummary> out;
  for (Eigen::Index j = 0; j < draws.cols(); ++j) {
    std::vector<double> col(draws.rows());
    for (Eigen::Index i = 0; i < draws.rows(); ++i) col[i] = draws(i, j);
    out.push_back({names[static_cast<std::size_t>(j)], mean_of(col),
                   quantile_of(col, 0.025), quantile_of(col, 0.975)});
  }
  return out;
}

Eigen::VectorXd PosteriorDraws::means() const {
  if (draws.rows() == 0) return Eigen::VectorXd::Zero(draws.cols());
  return draws.colwise().mean();
}

PosteriorDraws run_gibbs(const DesignData& d, Mode mode, const GibbsConfig& cfg,
                         Stream seed) {
  if (cfg.iterations <= 0 || cfg.burn_in < 0 || cfg.burn_in >= cfg.iterations)
    throw ValidationError("run_gibbs: need 0 <= burn_in < iterations");
  if (cfg.thin < 1) throw ValidationError("run_gibbs: thin must be >= 1");

  const GibbsWorkspace ws = GibbsWorkspace::build(d, cfg.ridge_scale);
  LatentState state = init_latent_state(d, mode);
  Rng rng(seed.child("chain"));

  const Eigen::Index p = d.X.cols(), r = d.W.cols();
  const std::int32_t retained =
      (cfg.iterations - cfg.burn_in + cfg.thin - 1) / cfg.thin;

  PosteriorDraws out;
  out.names = d.x_names;
  out.names.insert(out.names.end(), d.w_names.begin(), d.w_names.end());
  out.draws.resize(retained, p + r);

  std::int32_t row = 0;
  for (std::int32_t it = 0; it < cfg.iterations; ++it) {
    gibbs_iteration(d, mode, cfg, ws, state, rng);
    if (it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0) {
      out.draws.block(row, 0, 1, p) = state.beta.transpose();
      out.draws.block(row, p, 1, r) = state.gamma.transpose();
      ++row;
    }
  }
  out.clamp_u = state.clamp_u;
  out.clamp_v = state.clamp_v;
  out.final_state = std::move(state);
  return out;
}

std::vector<std::int32_t> prune_collinear(Eigen::MatrixXd& X,
                                          std::vector<std::string>* names,
                                          double rel_tol) {
  std::vector<std::int32_t> dropped;
  const Eigen::Index p = X.cols();
  if (p == 0) return dropped;

  // Keep the earliest linearly independent set: a column is dropped when it
  // adds no rank on top of the kept columns before it, so a redundant column
  // never evicts one the caller listed first.
  std::vector<Eigen::Index> kept;
  Eigen::MatrixXd sub(X.rows(), 0);
  for (Eigen::Index j = 0; j < p; ++j) {
    Eigen::MatrixXd trial(X.rows(), static_cast<Eigen::Index>(kept.size()) + 1);
    if (!kept.empty()) trial.leftCols(static_cast<Eigen::Index>(kept.size())) = sub;
    trial.col(static_cast<Eigen::Index>(kept.size())) = X.col(j);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(trial);
    qr.setThreshold(rel_tol);
    if (qr.rank() == trial.cols()) {
      kept.push_back(j);
      sub = std::move(trial);
    } else {
      dropped.push_back(static_cast<std::int32_t>(j));
    }
  }
  if (dropped.empty()) return dropped;

  X = std::move(sub);
  if (names) {
    std::vector<std::string> kept_names;
    kept_names.reserve(kept.size());
    for (const auto j : kept) kept_names.push_back((*names)[static_cast<std::size_t>(j)]);
    *names = std::move(kept_names);
  }
  return dropped;
}

RealizedOrders realize_complete_orders(const Market& base,
                                       const LatentState& state) {
  const std::int32_t T = base.num_students(), S = base.num_schools();
  if (state.U.size() != static_cast<std::size_t>(T) * S ||
      state.V.size() != static_cast<std::size_t>(S) * T)
    throw ValidationError("realize_complete_orders: latent shape mismatch");

  RealizedOrders out{base, 0};
  auto order_desc = [&out](const double* values, std::int32_t n) {
    std::vector<std::int32_t> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::int32_t a, std::int32_t b) {
      return values[a] > values[b];
    });
    for (std::size_t i = 1; i < idx.size(); ++i)
      if (values[idx[i - 1]] == values[idx[i]]) ++out.ties;
    return idx;
  };

  for (std::int32_t t = 0; t < T; ++t)
    out.market.student_prefs[t] =
        order_desc(state.U.data() + static_cast<std::size_t>(t) * S, S);
  // Students a school explicitly rejected stay rejected: the data says they
  // sit below the school's outside option, which no valuation draw can undo.
  bool complete = true;
  for (std::int32_t s = 0; s < S; ++s) {
    const auto full =
        order_desc(state.V.data() + static_cast<std::size_t>(s) * T, T);
    std::vector<bool> banned(static_cast<std::size_t>(T), false);
    for (auto t : base.school_unacceptable[s]) banned[static_cast<std::size_t>(t)] = true;
    auto& prio = out.market.school_priorities[s];
    prio.clear();
    for (auto t : full)
      if (!banned[static_cast<std::size_t>(t)]) prio.push_back(t);
    if (!base.school_unacceptable[s].empty()) complete = false;
  }
  out.market.complete_preferences = complete;
  return out;
}

}  // namespace schoolmerge
