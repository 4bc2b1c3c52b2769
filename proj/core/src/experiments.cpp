#include "schoolmerge/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <thread>

#include "schoolmerge/errors.hpp"
#include "schoolmerge/matching.hpp"
#include "schoolmerge/stats.hpp"

namespace schoolmerge {

namespace {

std::vector<std::int32_t> order_desc(const Eigen::VectorXd& values) {
  std::vector<std::int32_t> idx(static_cast<std::size_t>(values.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::int32_t a, std::int32_t b) { return values[a] > values[b]; });
  return idx;
}

// Complete-preference market over the given utilities and valuations.
Market truthful_market(const Market& skeleton, const Eigen::MatrixXd& U,
                       const Eigen::MatrixXd& V) {
  Market m = skeleton;
  const std::int32_t T = m.num_students(), S = m.num_schools();
  for (std::int32_t t = 0; t < T; ++t) m.student_prefs[t] = order_desc(U.row(t));
  for (std::int32_t s = 0; s < S; ++s) {
    m.school_priorities[s] = order_desc(V.row(s));
    m.school_unacceptable[s].clear();
  }
  m.complete_preferences = true;
  (void)T;
  return m;
}

Eigen::MatrixXd utilities(const Eigen::VectorXd& delta, const Eigen::MatrixXd& dist,
                          const Eigen::VectorXd& grade, const Eigen::VectorXd& abar,
                          const Eigen::MatrixXd& eps) {
  const auto T = grade.size(), S = delta.size();
  Eigen::MatrixXd U(T, S);
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index s = 0; s < S; ++s)
      U(t, s) = kTrueDelta * delta[s] + kTrueDist * dist(t, s) +
                kTrueInteraction * grade[t] * abar[s] + eps(t, s);
  return U;
}

}  // namespace

DgpMarket simulate_dgp_market(std::int32_t T, Stream seed, const DgpConfig& cfg) {
  const std::int32_t S = cfg.n_schools;
  if (T < 1 || S < 2) throw ValidationError("simulate_dgp_market: need T >= 1, schools >= 2");
  const auto total_seats = static_cast<std::int32_t>(std::floor(cfg.capacity_share * T));
  if (total_seats < S)
    throw ValidationError("simulate_dgp_market: fewer seats than schools");

  DgpMarket out;
  Market& m = out.truthful;
  m.district_labels = {"0"};
  for (std::int32_t t = 0; t < T; ++t) {
    m.student_ids.push_back("t" + std::to_string(t));
    m.student_district.push_back(0);
  }
  const std::int32_t base = total_seats / S, rem = total_seats % S;
  for (std::int32_t s = 0; s < S; ++s) {
    m.school_ids.push_back("s" + std::to_string(s));
    m.school_district.push_back(0);
    m.capacity.push_back(base + (s < rem ? 1 : 0));
  }
  m.student_prefs.resize(T);
  m.school_priorities.resize(S);
  m.school_unacceptable.resize(S);

  out.delta.resize(S);
  for (std::int32_t s = 0; s < S; ++s)
    out.delta[s] = S > 1 ? 2.0 * s / (S - 1.0) : 1.0;

  Rng grade_rng(seed.child("grade"));
  out.grade.resize(T);
  for (std::int32_t t = 0; t < T; ++t) out.grade[t] = grade_rng.normal();

  Rng dist_rng(seed.child("dist"));
  out.dist.resize(T, S);
  for (std::int32_t t = 0; t < T; ++t)
    for (std::int32_t s = 0; s < S; ++s) out.dist(t, s) = dist_rng.uniform(0.0, 2.0);

  Rng eps_rng(seed.child("eps"));
  Eigen::MatrixXd eps(T, S);
  for (std::int32_t t = 0; t < T; ++t)
    for (std::int32_t s = 0; s < S; ++s) eps(t, s) = eps_rng.normal();

  Rng eta_rng(seed.child("eta"));
  out.V0.resize(S, T);
  for (std::int32_t s = 0; s < S; ++s)
    for (std::int32_t t = 0; t < T; ++t) out.V0(s, t) = out.grade[t] + eta_rng.normal();

  // Peer quality: iterate truthful matching -> mean admitted grade until the
  // map is (numerically) stationary, then freeze.
  out.abar = Eigen::VectorXd::Zero(S);
  for (std::int32_t round = 0; round < cfg.warmup_rounds; ++round) {
    out.U0 = utilities(out.delta, out.dist, out.grade, out.abar, eps);
    const Market warm = truthful_market(m, out.U0, out.V0);
    const Matching mu = sosm(warm);
    Eigen::VectorXd next = Eigen::VectorXd::Zero(S);
    for (std::int32_t s = 0; s < S; ++s) {
      const auto& roster = mu.roster(s);
      if (roster.empty()) continue;
      double sum = 0;
      for (auto t : roster) sum += out.grade[t];
      next[s] = sum / static_cast<double>(roster.size());
    }
    const double shift = (next - out.abar).cwiseAbs().maxCoeff();
    out.abar = next;
    if (shift < 1e-12) break;
  }
  out.U0 = utilities(out.delta, out.dist, out.grade, out.abar, eps);
  out.truthful = truthful_market(m, out.U0, out.V0);
  return out;
}

std::vector<std::int32_t> build_portfolio(const std::vector<double>& utility,
                                          const std::vector<double>& admit_prob,
                                          double cost) {
  if (utility.size() != admit_prob.size())
    throw ValidationError("build_portfolio: size mismatch");
  const auto n = static_cast<std::int32_t>(utility.size());

  std::vector<std::int32_t> by_pref(static_cast<std::size_t>(n));
  std::iota(by_pref.begin(), by_pref.end(), 0);
  std::stable_sort(by_pref.begin(), by_pref.end(), [&](std::int32_t a, std::int32_t b) {
    return utility[a] > utility[b];
  });

  std::vector<bool> kept(static_cast<std::size_t>(n), false);
  // Expected utility of applying to the kept set; outside option is 0.
  auto eu_with = [&](std::int32_t extra) {
    double eu = 0, reach = 1;
    for (auto c : by_pref) {
      if (!kept[c] && c != extra) continue;
      eu += reach * admit_prob[c] * utility[c];
      reach *= 1.0 - admit_prob[c];
    }
    return eu;
  };

  double current = 0;
  for (std::int32_t added = 0; added < n; ++added) {
    double best_gain = -std::numeric_limits<double>::infinity();
    std::int32_t best = -1;
    for (auto c : by_pref) {
      if (kept[c]) continue;
      const double gain = eu_with(c) - current;
      if (gain > best_gain) {
        best_gain = gain;
        best = c;
      }
    }
    if (best < 0 || best_gain < cost) break;
    kept[best] = true;
    current += best_gain;
  }

  std::vector<std::int32_t> out;
  for (auto c : by_pref)
    if (kept[c]) out.push_back(c);
  return out;
}

Market strategic_rols(const DgpMarket& dgp, double cost, Stream seed,
                      const DgpConfig& cfg) {
  const std::int32_t T = dgp.truthful.num_students();
  const std::int32_t S = dgp.truthful.num_schools();
  const std::int32_t boots = cfg.belief_boots;
  const std::int32_t bins = std::min<std::int32_t>(cfg.belief_bins, T);

  // Grade bins: equal-count bands of the grade distribution.
  std::vector<std::int32_t> by_grade(static_cast<std::size_t>(T));
  std::iota(by_grade.begin(), by_grade.end(), 0);
  std::stable_sort(by_grade.begin(), by_grade.end(), [&](std::int32_t a, std::int32_t b) {
    return dgp.grade[a] < dgp.grade[b];
  });
  std::vector<std::int32_t> bin_of(static_cast<std::size_t>(T));
  std::vector<double> bin_count(static_cast<std::size_t>(bins), 0);
  for (std::int32_t i = 0; i < T; ++i) {
    const auto b = static_cast<std::int32_t>(
        static_cast<std::int64_t>(i) * bins / T);
    bin_of[by_grade[i]] = b;
    bin_count[b] += 1;
  }

  // Admission frequencies by (school, grade bin) over bootstrap worlds with
  // fresh taste and valuation noise, truthful behavior throughout.
  Eigen::MatrixXd admitted = Eigen::MatrixXd::Zero(S, bins);
  for (std::int32_t b = 0; b < boots; ++b) {
    const Stream bs = seed.child("boot").child(b);
    Rng eps_rng(bs.child("eps"));
    Eigen::MatrixXd eps(T, S);
    for (std::int32_t t = 0; t < T; ++t)
      for (std::int32_t s = 0; s < S; ++s) eps(t, s) = eps_rng.normal();
    Rng eta_rng(bs.child("eta"));
    Eigen::MatrixXd V(S, T);
    for (std::int32_t s = 0; s < S; ++s)
      for (std::int32_t t = 0; t < T; ++t) V(s, t) = dgp.grade[t] + eta_rng.normal();

    const Eigen::MatrixXd U = [&] {
      Eigen::MatrixXd out(T, S);
      for (std::int32_t t = 0; t < T; ++t)
        for (std::int32_t s = 0; s < S; ++s)
          out(t, s) = kTrueDelta * dgp.delta[s] + kTrueDist * dgp.dist(t, s) +
                      kTrueInteraction * dgp.grade[t] * dgp.abar[s] + eps(t, s);
      return out;
    }();
    const Market world = truthful_market(dgp.truthful, U, V);
    const Matching mu = sosm(world);
    for (std::int32_t s = 0; s < S; ++s) {
      double cutoff = -std::numeric_limits<double>::infinity();
      if (static_cast<std::int32_t>(mu.roster(s).size()) >= world.capacity[s]) {
        cutoff = std::numeric_limits<double>::infinity();
        for (auto t : mu.roster(s)) cutoff = std::min(cutoff, V(s, t));
      }
      for (std::int32_t t = 0; t < T; ++t)
        if (V(s, t) >= cutoff) admitted(s, bin_of[t]) += 1;
    }
  }

  Market submitted = dgp.truthful;
  for (std::int32_t t = 0; t < T; ++t) {
    std::vector<double> u(static_cast<std::size_t>(S)), p(static_cast<std::size_t>(S));
    for (std::int32_t s = 0; s < S; ++s) {
      u[s] = dgp.U0(t, s);
      p[s] = admitted(s, bin_of[t]) / (bin_count[bin_of[t]] * boots);
    }
    submitted.student_prefs[t] = build_portfolio(u, p, cost);
  }

  // Schools rank exactly their applicants, by true valuation.
  std::vector<std::vector<std::int32_t>> applicants(static_cast<std::size_t>(S));
  for (std::int32_t t = 0; t < T; ++t)
    for (auto s : submitted.student_prefs[t]) applicants[s].push_back(t);
  for (std::int32_t s = 0; s < S; ++s) {
    auto& list = applicants[s];
    std::stable_sort(list.begin(), list.end(), [&](std::int32_t a, std::int32_t b) {
      return dgp.V0(s, a) > dgp.V0(s, b);
    });
    submitted.school_priorities[s] = list;
    submitted.school_unacceptable[s].clear();
  }
  submitted.complete_preferences = false;
  return submitted;
}

double wtt_share(const DgpMarket& dgp, const Market& submitted) {
  const std::int32_t T = dgp.truthful.num_students();
  std::int32_t truthful = 0;
  for (std::int32_t t = 0; t < T; ++t) {
    const auto& sub = submitted.student_prefs[t];
    const auto& full = dgp.truthful.student_prefs[t];
    truthful += std::equal(sub.begin(), sub.end(), full.begin()) ? 1 : 0;
  }
  return static_cast<double>(truthful) / T;
}

McMode mc_mode_from_string(const std::string& name) {
  if (name == "benchmark") return McMode::benchmark;
  if (name == "wtt") return McMode::wtt;
  if (name == "undom") return McMode::undom;
  if (name == "stability") return McMode::stability;
  if (name == "stab_undom") return McMode::stab_undom;
  throw ValidationError("unknown mc mode: " + name);
}

std::string mc_mode_to_string(McMode mode) {
  switch (mode) {
    case McMode::benchmark: return "benchmark";
    case McMode::wtt: return "wtt";
    case McMode::undom: return "undom";
    case McMode::stability: return "stability";
    case McMode::stab_undom: return "stab_undom";
  }
  throw ValidationError("unknown mc mode");
}

DesignData make_dgp_design(const DgpMarket& dgp, const Market& submitted,
                           const Matching& observed, bool benchmark) {
  const std::int32_t T = dgp.truthful.num_students();
  const std::int32_t S = dgp.truthful.num_schools();
  Eigen::MatrixXd X(static_cast<Eigen::Index>(T) * S, 3);
  Eigen::MatrixXd W(static_cast<Eigen::Index>(T) * S, 1);
  for (std::int32_t t = 0; t < T; ++t)
    for (std::int32_t s = 0; s < S; ++s) {
      const Eigen::Index row = static_cast<Eigen::Index>(t) * S + s;
      X(row, 0) = dgp.delta[s];
      X(row, 1) = dgp.dist(t, s);
      X(row, 2) = dgp.grade[t] * dgp.abar[s];
    }
  for (std::int32_t s = 0; s < S; ++s)
    for (std::int32_t t = 0; t < T; ++t)
      W(static_cast<Eigen::Index>(s) * T + t, 0) = dgp.grade[t];

  const Market& rank_source = benchmark ? dgp.truthful : submitted;
  return make_design(rank_source, std::move(X), std::move(W),
                     {"delta", "dist", "grade_x_quality"}, {"grade"}, observed);
}

McResult mc_study(std::int32_t T, std::int32_t reps,
                  const std::vector<McMode>& modes, const GibbsConfig& gibbs,
                  const DgpConfig& dgp_cfg, Stream seed, std::int32_t threads) {
  if (reps < 1) throw ValidationError("mc_study: reps must be >= 1");
  if (modes.empty()) throw ValidationError("mc_study: no modes requested");

  McResult res;
  res.parameters = {"delta", "dist", "grade_x_quality", "grade"};
  const std::vector<double> truth = {kTrueDelta, kTrueDist, kTrueInteraction, kTrueGrade};
  for (auto m : modes) res.modes.push_back(mc_mode_to_string(m));
  res.wtt_shares.assign(static_cast<std::size_t>(reps), 0.0);
  res.errors.resize(modes.size());
  for (auto& e : res.errors) e = Eigen::MatrixXd::Zero(reps, 4);

  std::atomic<std::int32_t> next_rep{0};
  std::exception_ptr first_error = nullptr;
  std::mutex error_mutex;

  auto worker = [&]() {
    for (;;) {
      const std::int32_t r = next_rep.fetch_add(1);
      if (r >= reps) return;
      try {
        const Stream rep_stream = seed.child(static_cast<std::uint64_t>(r));
        const DgpMarket world = simulate_dgp_market(T, rep_stream.child("market"), dgp_cfg);
        const Market submitted =
            strategic_rols(world, dgp_cfg.cost, rep_stream.child("strategy"), dgp_cfg);
        const Matching observed = sosm(submitted);
        const Matching truthful_mu = sosm(world.truthful);
        res.wtt_shares[static_cast<std::size_t>(r)] = wtt_share(world, submitted);

        for (std::size_t mi = 0; mi < modes.size(); ++mi) {
          const McMode mc_mode = modes[mi];
          const bool benchmark = mc_mode == McMode::benchmark;
          const Matching& mu = benchmark ? truthful_mu : observed;
          const DesignData design = make_dgp_design(world, submitted, mu, benchmark);
          const Mode est_mode =
              benchmark ? Mode::undom : mode_from_string(mc_mode_to_string(mc_mode));
          const PosteriorDraws draws =
              run_gibbs(design, est_mode, gibbs,
                        rep_stream.child(mc_mode_to_string(mc_mode)));
          const Eigen::VectorXd means = draws.means();
          for (int pidx = 0; pidx < 4; ++pidx)
            res.errors[mi](r, pidx) = means[pidx] - truth[static_cast<std::size_t>(pidx)];
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  const std::int32_t n_threads = std::max<std::int32_t>(1, std::min(threads, reps));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::int32_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  for (std::size_t mi = 0; mi < modes.size(); ++mi) {
    for (int pidx = 0; pidx < 4; ++pidx) {
      std::vector<double> err(static_cast<std::size_t>(reps));
      for (std::int32_t r = 0; r < reps; ++r) err[r] = res.errors[mi](r, pidx);
      McScore score;
      score.mode = res.modes[mi];
      score.parameter = res.parameters[static_cast<std::size_t>(pidx)];
      score.bias = mean_of(err);
      double mse = 0;
      for (double e : err) mse += e * e;
      score.mse = mse / reps;
      const OlsFit fit = ols_slope(res.wtt_shares, err);
      score.slope = fit.slope;
      score.slope_p = fit.p_value;
      res.scores.push_back(score);
    }
  }
  return res;
}

}  // namespace schoolmerge
