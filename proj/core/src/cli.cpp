#include "schoolmerge/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "schoolmerge/config.hpp"
#include "schoolmerge/csv.hpp"
#include "schoolmerge/errors.hpp"
#include "schoolmerge/estimator.hpp"
#include "schoolmerge/experiments.hpp"
#include "schoolmerge/matching.hpp"
#include "schoolmerge/random_market.hpp"
#include "schoolmerge/version.hpp"
#include "schoolmerge/welfare.hpp"

namespace fs = std::filesystem;

namespace schoolmerge {

std::uint64_t fnv1a64(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

// Collects digests and timing for one command run.
class ManifestBuilder {
 public:
  ManifestBuilder(std::string command, const std::string& config_path)
      : start_(std::chrono::steady_clock::now()) {
    m_.command = std::move(command);
    m_.tool_version = kVersion;
    if (!config_path.empty()) m_.config_digest = file_digest_hex(config_path);
  }

  void seed(std::uint64_t s) { m_.seed = s; }

  void input(const std::string& path) {
    if (fs::exists(path)) m_.input_digests[path] = file_digest_hex(path);
  }

  void input_dataset(const std::string& dir) {
    for (const char* f : {"students.csv", "schools.csv", "rols.csv",
                          "priorities.csv", "pairs.csv"})
      input(dir + "/" + f);
  }

  void output(const std::string& dir, const std::string& name) {
    m_.output_digests[name] = file_digest_hex(dir + "/" + name);
  }

  void write(const std::string& dir) {
    m_.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
            .count();
    write_manifest(dir, m_);
  }

 private:
  RunManifest m_;
  std::chrono::steady_clock::time_point start_;
};

template <typename T>
T cfg_get(const nlohmann::json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError("config key '" + key + "' has the wrong type");
  }
}

template <typename T>
T cfg_require(const nlohmann::json& j, const std::string& key) {
  if (!j.contains(key)) throw ValidationError("config is missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError("config key '" + key + "' has the wrong type");
  }
}

std::uint64_t resolve_seed(const GlobalOptions& g, const nlohmann::json& cfg) {
  if (g.seed_given) return g.seed;
  if (cfg.contains("seed")) return cfg_require<std::uint64_t>(cfg, "seed");
  return g.seed;
}

nlohmann::json need_config(const GlobalOptions& g, const char* command) {
  if (g.config_path.empty())
    throw ValidationError(std::string(command) + " requires --config");
  return load_config(g.config_path);
}

std::string need_out(const GlobalOptions& g, const char* command) {
  if (g.out_dir.empty())
    throw ValidationError(std::string(command) + " requires --out");
  fs::create_directories(g.out_dir);
  return g.out_dir;
}

Dataset load_checked(const std::string& dir) {
  Dataset ds = load_dataset(dir);
  const auto records = validate_market(ds.market);
  std::string problems;
  for (const auto& r : records) {
    if (r.warning) {
      std::cout << "[warn] " << r.entity << ": " << r.message << "\n";
    } else {
      problems += (problems.empty() ? "" : "; ") + r.entity + ": " + r.message;
    }
  }
  if (!problems.empty()) throw ValidationError("invalid market: " + problems);
  return ds;
}

GibbsConfig gibbs_from_config(const nlohmann::json& cfg) {
  GibbsConfig gc;
  gc.iterations = cfg_get(cfg, "iterations", gc.iterations);
  gc.burn_in = cfg_get(cfg, "burn_in", gc.burn_in);
  gc.thin = cfg_get(cfg, "thin", gc.thin);
  gc.gauss_seidel = cfg_get(cfg, "gauss_seidel", gc.gauss_seidel);
  gc.ridge_scale = cfg_get(cfg, "ridge_scale", gc.ridge_scale);
  return gc;
}

DgpConfig dgp_from_config(const nlohmann::json& cfg) {
  DgpConfig dc;
  dc.n_schools = cfg_get(cfg, "n_schools", dc.n_schools);
  dc.capacity_share = cfg_get(cfg, "capacity_share", dc.capacity_share);
  dc.cost = cfg_get(cfg, "cost", dc.cost);
  dc.belief_boots = cfg_get(cfg, "belief_boots", dc.belief_boots);
  dc.warmup_rounds = cfg_get(cfg, "warmup_rounds", dc.warmup_rounds);
  dc.belief_bins = cfg_get(cfg, "belief_bins", dc.belief_bins);
  return dc;
}

nlohmann::json summary_block(const GainsSummary& s) {
  return {{"mean", s.mean},   {"sd", s.sd},   {"min", s.min},
          {"median", s.median}, {"max", s.max}, {"n", s.n}};
}

// Posterior means by parameter name from a posterior.csv.
double posterior_mean(const CsvTable& tab, const std::string& param) {
  const auto name_col = tab.column("parameter");
  const auto mean_col = tab.column("mean");
  if (name_col < 0 || mean_col < 0)
    throw ValidationError("posterior file needs parameter and mean columns");
  for (const auto& row : tab.rows)
    if (row[static_cast<std::size_t>(name_col)] == param)
      return std::stod(row[static_cast<std::size_t>(mean_col)]);
  throw ValidationError("posterior file has no parameter '" + param + "'");
}

std::string matched_label(const Market& m, const Matching& mu, std::int32_t t) {
  return mu.matched(t) ? m.school_ids[mu.of_student(t)] : "UNMATCHED";
}

}  // namespace

std::string file_digest_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  return hex64(fnv1a64(bytes.data(), bytes.size()));
}

void write_manifest(const std::string& dir, const RunManifest& m) {
  nlohmann::json j{{"command", m.command},
                   {"tool_version", m.tool_version},
                   {"seed", m.seed},
                   {"config_digest", m.config_digest},
                   {"input_digests", m.input_digests},
                   {"output_digests", m.output_digests},
                   {"wall_time_s", m.wall_time_s}};
  auto out = open_out(fs::path(dir) / "manifest.json");
  out << j.dump(2) << "\n";
}

void cmd_generate(const GlobalOptions& g) {
  ManifestBuilder manifest("generate", g.config_path);
  const nlohmann::json cfg = need_config(g, "generate");
  const std::string out = need_out(g, "generate");
  const std::uint64_t seed = resolve_seed(g, cfg);
  manifest.seed(seed);
  const Stream root{seed};

  const std::string mode = cfg_get<std::string>(cfg, "mode", "uniform");
  Dataset ds;
  if (mode == "uniform") {
    std::vector<DistrictSpec> specs;
    if (!cfg.contains("districts") || !cfg.at("districts").is_array() ||
        cfg.at("districts").empty())
      throw ValidationError("uniform spec needs a non-empty 'districts' array");
    for (const auto& d : cfg.at("districts")) {
      DistrictSpec s;
      s.n = cfg_require<std::int32_t>(d, "n");
      s.k = cfg_get<std::int32_t>(d, "k", 0);
      specs.push_back(s);
    }
    const auto q = cfg_get<std::int32_t>(cfg, "q", 1);
    ds.market = generate_random_escp(specs, q, root.child("generate"));
  } else if (mode == "dgp") {
    const auto T = cfg_require<std::int32_t>(cfg, "T");
    const DgpConfig dc = dgp_from_config(cfg);
    const DgpMarket world = simulate_dgp_market(T, root.child("market"), dc);
    const bool truthful = cfg_get(cfg, "truthful", false);
    ds.market = truthful
                    ? world.truthful
                    : strategic_rols(world, dc.cost, root.child("strategy"), dc);
    const auto S = ds.market.num_schools();
    ds.student_cols = {"grade"};
    ds.student_vals = world.grade;
    ds.school_cols = {"delta", "abar"};
    ds.school_vals.resize(S, 2);
    ds.school_vals.col(0) = world.delta;
    ds.school_vals.col(1) = world.abar;
    ds.pair_cols = {"dist", "grade_x_quality"};
    ds.pair_vals = {world.dist,
                    Eigen::MatrixXd(world.grade * world.abar.transpose())};
    std::cout << "wtt share: " << format_double(wtt_share(world, ds.market))
              << "\n";
  } else {
    throw ValidationError("unknown generate mode '" + mode + "'");
  }

  const auto records = validate_market(ds.market);
  for (const auto& r : records)
    if (r.warning) std::cout << "[warn] " << r.entity << ": " << r.message << "\n";
  if (!market_ok(records))
    throw ValidationError("generated market failed validation: " +
                          records.front().message);

  save_dataset(out, ds);
  std::cout << "students: " << ds.market.num_students()
            << "  schools: " << ds.market.num_schools()
            << "  seats: " << ds.market.total_capacity() << "\n";

  manifest.output(out, "students.csv");
  manifest.output(out, "schools.csv");
  manifest.output(out, "rols.csv");
  manifest.output(out, "priorities.csv");
  if (!ds.pair_cols.empty()) manifest.output(out, "pairs.csv");
  manifest.write(out);
}

void cmd_match(const GlobalOptions& g, const std::string& market_dir,
               bool scheme) {
  ManifestBuilder manifest("match", g.config_path);
  const std::string out = need_out(g, "match");
  manifest.seed(g.seed);
  manifest.input_dataset(market_dir);
  const Dataset ds = load_checked(market_dir);
  const Market& m = ds.market;

  std::int64_t blocking = 0;
  if (scheme) {
    const MatchingScheme sch = compute_scheme(m);
    write_matching(out + "/matching.csv", m, sch.consolidated);
    write_scheme(out + "/scheme.csv", m, sch);
    manifest.output(out, "matching.csv");
    manifest.output(out, "scheme.csv");
    blocking += static_cast<std::int64_t>(is_stable(m, sch.consolidated).size());
    for (std::int32_t d = 0; d < m.num_districts(); ++d) {
      const Market md = restrict_to_district(m, d);
      const auto ts = m.district_students(d);
      const auto ss = m.district_schools(d);
      std::vector<std::int32_t> local_school(m.num_schools(), -1);
      for (std::int32_t i = 0; i < static_cast<std::int32_t>(ss.size()); ++i)
        local_school[ss[i]] = i;
      Matching mu_d(md.num_students(), md.num_schools());
      for (std::int32_t i = 0; i < static_cast<std::int32_t>(ts.size()); ++i) {
        const auto s = sch.district[d].of_student(ts[i]);
        if (s >= 0) mu_d.assign(i, local_school[s]);
      }
      blocking += static_cast<std::int64_t>(is_stable(md, mu_d).size());
    }
  } else {
    const Matching mu = sosm(m);
    write_matching(out + "/matching.csv", m, mu);
    manifest.output(out, "matching.csv");
    blocking = static_cast<std::int64_t>(is_stable(m, mu).size());
  }
  std::cout << "blocking pairs: " << blocking << "\n";
  if (blocking != 0)
    throw NumericalError("deferred acceptance produced a blocked matching");
  manifest.write(out);
}

void cmd_estimate(const GlobalOptions& g) {
  ManifestBuilder manifest("estimate", g.config_path);
  const nlohmann::json cfg = need_config(g, "estimate");
  const std::string out = need_out(g, "estimate");
  const std::uint64_t seed = resolve_seed(g, cfg);
  manifest.seed(seed);

  const auto market_dir = cfg_require<std::string>(cfg, "market");
  const auto matching_path = cfg_require<std::string>(cfg, "matching");
  const Mode mode = mode_from_string(cfg_require<std::string>(cfg, "mode"));
  const auto x_cols = cfg_require<std::vector<std::string>>(cfg, "x");
  const auto w_cols = cfg_require<std::vector<std::string>>(cfg, "w");
  const GibbsConfig gc = gibbs_from_config(cfg);
  const double collinearity_tol = cfg_get(cfg, "collinearity_tol", 1e-10);

  manifest.input_dataset(market_dir);
  manifest.input(matching_path);
  const Dataset ds = load_checked(market_dir);
  const Matching observed = read_matching(matching_path, ds.market);

  DesignData design = build_design(ds, x_cols, w_cols, observed);
  const auto x_before = design.x_names;
  const auto w_before = design.w_names;
  const auto drop_x = prune_collinear(design.X, &design.x_names, collinearity_tol);
  const auto drop_w = prune_collinear(design.W, &design.w_names, collinearity_tol);
  for (const auto i : drop_x)
    std::cout << "[warn] dropping collinear utility column " << x_before[i] << "\n";
  for (const auto i : drop_w)
    std::cout << "[warn] dropping collinear valuation column " << w_before[i] << "\n";

  const PosteriorDraws post =
      run_gibbs(design, mode, gc, Stream{seed}.child("estimate"));

  {
    auto f = open_out(fs::path(out) / "posterior.csv");
    f << "parameter,mean,q2.5,q97.5\n";
    for (const auto& s : post.summary())
      f << s.name << ',' << format_double(s.mean) << ','
        << format_double(s.q025) << ',' << format_double(s.q975) << "\n";
  }

  const auto T = ds.market.num_students();
  const auto S = ds.market.num_schools();
  Eigen::MatrixXd U(T, S), V(S, T);
  for (std::int32_t t = 0; t < T; ++t)
    for (std::int32_t s = 0; s < S; ++s) {
      U(t, s) = post.final_state.u(t, s, S);
      V(s, t) = post.final_state.v(s, t, T);
    }
  write_latents(out, ds.market, U, V);

  // On the full orders implied by the final draw, the observed matching
  // should block only through pairs the model never constrains: an unmatched
  // student plus a school with a vacancy that did not rank them.
  const RealizedOrders realized =
      realize_complete_orders(ds.market, post.final_state);
  const RankData orig = RankData::from_market(ds.market);
  std::int64_t carved = 0, outside = 0;
  for (const auto& bp : is_stable(realized.market, observed)) {
    const bool vacancy =
        static_cast<std::int32_t>(observed.roster(bp.school).size()) <
        ds.market.capacity[bp.school];
    if (!observed.matched(bp.student) && vacancy &&
        orig.priority_of(bp.school, bp.student) == 0)
      ++carved;
    else
      ++outside;
  }

  nlohmann::json diag{{"mode", mode_to_string(mode)},
                      {"iterations", gc.iterations},
                      {"burn_in", gc.burn_in},
                      {"thin", gc.thin},
                      {"retained_draws", post.draws.rows()},
                      {"clamped_u_intervals", post.clamp_u},
                      {"clamped_v_intervals", post.clamp_v},
                      {"latent_ties", realized.ties},
                      {"blocking_pairs_unmodeled", carved},
                      {"blocking_pairs", outside},
                      {"dropped_x", nlohmann::json::array()},
                      {"dropped_w", nlohmann::json::array()}};
  for (const auto i : drop_x) diag["dropped_x"].push_back(x_before[i]);
  for (const auto i : drop_w) diag["dropped_w"].push_back(w_before[i]);
  {
    auto f = open_out(fs::path(out) / "diagnostics.json");
    f << diag.dump(2) << "\n";
  }

  for (const auto& s : post.summary()) {
    char line[160];
    std::snprintf(line, sizeof line, "%-20s %10.4f  [%.4f, %.4f]\n",
                  s.name.c_str(), s.mean, s.q025, s.q975);
    std::cout << line;
  }

  manifest.output(out, "posterior.csv");
  manifest.output(out, "latent_u.csv");
  manifest.output(out, "latent_v.csv");
  manifest.output(out, "diagnostics.json");
  manifest.write(out);
}

void cmd_welfare(const GlobalOptions& g, bool balanced_flag) {
  ManifestBuilder manifest("welfare", g.config_path);
  const nlohmann::json cfg = need_config(g, "welfare");
  const std::string out = need_out(g, "welfare");
  manifest.seed(g.seed);

  const auto market_dir = cfg_require<std::string>(cfg, "market");
  const auto latents_dir = cfg_require<std::string>(cfg, "latents");
  const bool balanced = balanced_flag || cfg_get(cfg, "balanced", false);

  manifest.input_dataset(market_dir);
  manifest.input(latents_dir + "/latent_u.csv");
  manifest.input(latents_dir + "/latent_v.csv");
  const Dataset ds = load_checked(market_dir);
  const auto [U, V] = read_latents(latents_dir, ds.market);

  const Market base = balanced ? balance_capacities(ds.market) : ds.market;
  LatentState state;
  state.U.resize(static_cast<std::size_t>(U.size()));
  state.V.resize(static_cast<std::size_t>(V.size()));
  const auto T = base.num_students();
  const auto S = base.num_schools();
  for (std::int32_t t = 0; t < T; ++t)
    for (std::int32_t s = 0; s < S; ++s) {
      state.U[static_cast<std::size_t>(t) * S + s] = U(t, s);
      state.V[static_cast<std::size_t>(s) * T + t] = V(s, t);
    }
  const RealizedOrders realized = realize_complete_orders(base, state);
  const MatchingScheme scheme = compute_scheme(realized.market);
  const Matching district = scheme.district_union();

  const auto gains = utility_gain(U, scheme.consolidated, district);
  const auto parts = decompose(realized.market, U, V, district, scheme.consolidated);

  for (std::int32_t t = 0; t < T; ++t) {
    if (!gains[t]) continue;
    const auto check = [&](const std::optional<double>& ch,
                           const std::optional<double>& co) {
      if (ch && co && std::abs(*ch + *co - *gains[t]) > 1e-9)
        throw NumericalError(
            "choice/competition split fails to add up for student " +
            base.student_ids[t]);
    };
    check(parts[t].choice1, parts[t].competition1);
    check(parts[t].choice2, parts[t].competition2);
  }

  // Distance-equivalent gains, when a distance column and the utility's
  // distance coefficients are available.
  const auto dist_col = cfg_get<std::string>(cfg, "dist_col", "dist");
  const Eigen::MatrixXd* dist = ds.pair(dist_col);
  double c1 = 0, c2 = 0;
  bool have_coef = false;
  if (cfg.contains("posterior")) {
    const auto path = cfg_require<std::string>(cfg, "posterior");
    manifest.input(path);
    const CsvTable tab = read_csv(path);
    c1 = posterior_mean(tab, cfg_get<std::string>(cfg, "dist_param", "dist"));
    const auto sq = cfg_get<std::string>(cfg, "dist_sq_param", "");
    if (!sq.empty()) c2 = posterior_mean(tab, sq);
    have_coef = true;
  } else if (cfg.contains("dist_coef")) {
    c1 = cfg_require<double>(cfg, "dist_coef");
    c2 = cfg_get(cfg, "dist_sq_coef", 0.0);
    have_coef = true;
  }
  std::vector<std::optional<double>> km(static_cast<std::size_t>(T));
  if (dist != nullptr && have_coef) {
    for (std::int32_t t = 0; t < T; ++t) {
      if (!gains[t]) continue;
      const double d_assigned = (*dist)(t, district.of_student(t));
      const double eq = km_equivalent(*gains[t], c1, c2, d_assigned);
      if (!std::isnan(eq)) km[static_cast<std::size_t>(t)] = eq;
    }
  }

  const auto cell = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
  };
  {
    auto f = open_out(fs::path(out) / "gains.csv");
    f << "student_id,district,district_school,consolidated_school,gain,km,"
         "choice1,competition1,choice2,competition2\n";
    for (std::int32_t t = 0; t < T; ++t) {
      f << base.student_ids[t] << ','
        << base.district_labels[base.student_district[t]] << ','
        << matched_label(base, district, t) << ','
        << matched_label(base, scheme.consolidated, t) << ',' << cell(gains[t])
        << ',' << cell(km[static_cast<std::size_t>(t)]) << ','
        << cell(parts[t].choice1) << ',' << cell(parts[t].competition1) << ','
        << cell(parts[t].choice2) << ',' << cell(parts[t].competition2) << "\n";
    }
  }

  const auto table = district_table(realized.market, scheme, gains);
  {
    auto f = open_out(fs::path(out) / "districts.csv");
    f << "district,seats,students,excess,losers,indifferent,winners,unmatched,"
         "mean_gain,winners_share\n";
    for (const auto& row : table)
      f << row.label << ',' << row.seats << ',' << row.students << ','
        << row.excess << ',' << row.losers << ',' << row.indifferent << ','
        << row.winners << ',' << row.unmatched << ','
        << format_double(row.mean_gain) << ','
        << format_double(row.winners_share) << "\n";
  }

  const auto pick = [&](auto member) {
    std::vector<std::optional<double>> v(parts.size());
    for (std::size_t i = 0; i < parts.size(); ++i) v[i] = parts[i].*member;
    return v;
  };
  nlohmann::json summary{
      {"balanced", balanced},
      {"students", T},
      {"seats", base.total_capacity()},
      {"latent_ties", realized.ties},
      {"total_gains",
       {{"utility", summary_block(summarize_gains(gains))},
        {"km", summary_block(summarize_gains(km))}}},
      {"decomposition",
       {{"choice1", summary_block(summarize_gains(pick(&Decomposition::choice1)))},
        {"competition1",
         summary_block(summarize_gains(pick(&Decomposition::competition1)))},
        {"choice2", summary_block(summarize_gains(pick(&Decomposition::choice2)))},
        {"competition2",
         summary_block(summarize_gains(pick(&Decomposition::competition2)))}}}};
  {
    auto f = open_out(fs::path(out) / "summary.json");
    f << summary.dump(2) << "\n";
  }

  const GainsSummary gs = summarize_gains(gains);
  std::cout << "gain mean " << format_double(gs.mean) << "  median "
            << format_double(gs.median) << "  n " << gs.n << "\n";

  manifest.output(out, "gains.csv");
  manifest.output(out, "districts.csv");
  manifest.output(out, "summary.json");
  manifest.write(out);
}

void cmd_mc(const GlobalOptions& g) {
  ManifestBuilder manifest("mc", g.config_path);
  const nlohmann::json cfg = need_config(g, "mc");
  const std::string out = need_out(g, "mc");
  const std::uint64_t seed = resolve_seed(g, cfg);
  manifest.seed(seed);

  const auto T = cfg_require<std::int32_t>(cfg, "T");
  const auto reps = cfg_require<std::int32_t>(cfg, "reps");
  std::vector<McMode> modes;
  for (const auto& name : cfg_get<std::vector<std::string>>(
           cfg, "modes",
           {"benchmark", "wtt", "undom", "stability", "stab_undom"}))
    modes.push_back(mc_mode_from_string(name));
  const GibbsConfig gc = gibbs_from_config(cfg);
  const DgpConfig dc = dgp_from_config(cfg);

  const McResult res =
      mc_study(T, reps, modes, gc, dc, Stream{seed}.child("mc"), g.threads);

  {
    auto f = open_out(fs::path(out) / "mc_scores.csv");
    f << "mode,parameter,mse,bias\n";
    for (const auto& s : res.scores)
      f << s.mode << ',' << s.parameter << ',' << format_double(s.mse) << ','
        << format_double(s.bias) << "\n";
  }
  {
    auto f = open_out(fs::path(out) / "mc_slopes.csv");
    f << "mode,parameter,slope,slope_p\n";
    for (const auto& s : res.scores)
      f << s.mode << ',' << s.parameter << ',' << format_double(s.slope) << ','
        << format_double(s.slope_p) << "\n";
  }
  {
    auto f = open_out(fs::path(out) / "mc_wtt.csv");
    f << "replication,wtt_share";
    for (const auto& mode : res.modes)
      for (const auto& p : res.parameters) f << ",err_" << mode << '_' << p;
    f << "\n";
    for (std::int32_t r = 0; r < reps; ++r) {
      f << r << ',' << format_double(res.wtt_shares[static_cast<std::size_t>(r)]);
      for (std::size_t mi = 0; mi < res.modes.size(); ++mi)
        for (std::size_t pi = 0; pi < res.parameters.size(); ++pi)
          f << ',' << format_double(res.errors[mi](r, static_cast<Eigen::Index>(pi)));
      f << "\n";
    }
  }

  for (const auto& s : res.scores) {
    char line[160];
    std::snprintf(line, sizeof line, "%-12s %-18s mse %8.4f  bias %8.4f\n",
                  s.mode.c_str(), s.parameter.c_str(), s.mse, s.bias);
    std::cout << line;
  }

  // Optional gate: complete-order estimation should not lose to any
  // rank-data mode on any coefficient by more than the slack factor.
  if (cfg_get(cfg, "assert_ordering", false)) {
    const double slack = cfg_get(cfg, "ordering_slack", 1.2);
    const auto mse_of = [&](const std::string& mode, const std::string& param) {
      for (const auto& s : res.scores)
        if (s.mode == mode && s.parameter == param) return s.mse;
      throw ValidationError("ordering check needs mode '" + mode + "'");
    };
    for (const auto& p : res.parameters)
      for (const auto& mode : res.modes) {
        if (mode == "benchmark") continue;
        const double bench = mse_of("benchmark", p);
        const double other = mse_of(mode, p);
        if (bench > slack * other)
          throw NumericalError("benchmark mse " + format_double(bench) +
                               " exceeds " + mode + " mse " +
                               format_double(other) + " on " + p);
      }
    std::cout << "ordering check passed\n";
  }

  manifest.output(out, "mc_scores.csv");
  manifest.output(out, "mc_slopes.csv");
  manifest.output(out, "mc_wtt.csv");
  manifest.write(out);
}

void cmd_report(const GlobalOptions& g, const std::string& run_dir) {
  if (!fs::is_directory(run_dir))
    throw IoError("report: not a directory: " + run_dir);
  const std::string out = g.out_dir.empty() ? run_dir : g.out_dir;
  fs::create_directories(out);
  ManifestBuilder manifest("report", g.config_path);
  manifest.seed(g.seed);

  nlohmann::json rep;
  rep["run_dir"] = run_dir;
  rep["artifacts"] = nlohmann::json::array();
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(run_dir))
    if (e.is_regular_file()) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  for (const auto& name : names) {
    const auto path = run_dir + "/" + name;
    rep["artifacts"].push_back({{"file", name},
                                {"bytes", fs::file_size(path)},
                                {"digest", file_digest_hex(path)}});
  }

  const auto embed_json = [&](const char* name, const char* key) {
    const auto path = run_dir + "/" + std::string(name);
    if (!fs::exists(path)) return;
    std::ifstream in(path);
    try {
      rep[key] = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception&) {
      rep[key] = nullptr;
    }
  };
  const auto embed_csv = [&](const char* name, const char* key) {
    const auto path = run_dir + "/" + std::string(name);
    if (!fs::exists(path)) return;
    const CsvTable tab = read_csv(path);
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : tab.rows) {
      nlohmann::json obj;
      for (std::size_t i = 0; i < tab.header.size(); ++i) obj[tab.header[i]] = row[i];
      rows.push_back(obj);
    }
    rep[key] = rows;
  };

  embed_json("manifest.json", "manifest");
  embed_json("diagnostics.json", "diagnostics");
  embed_json("summary.json", "welfare_summary");
  embed_csv("posterior.csv", "posterior");
  embed_csv("mc_scores.csv", "mc_scores");
  embed_csv("districts.csv", "districts");

  if (fs::exists(run_dir + "/matching.csv")) {
    const CsvTable tab = read_csv(run_dir + "/matching.csv");
    const auto col = tab.column("school_id");
    std::int64_t matched = 0;
    for (const auto& row : tab.rows)
      if (col >= 0 && row[static_cast<std::size_t>(col)] != "UNMATCHED") ++matched;
    rep["matching"] = {{"students", tab.rows.size()}, {"matched", matched}};
  }

  {
    auto f = open_out(fs::path(out) / "report.json");
    f << rep.dump(2) << "\n";
  }
  std::cout << "report.json: " << rep["artifacts"].size() << " artifacts from "
            << run_dir << "\n";

  // The producing command's manifest stays authoritative when reporting in
  // place; a separate --out gets its own.
  if (out != run_dir) {
    manifest.output(out, "report.json");
    manifest.write(out);
  }
}

namespace {

void error_json(const std::string& cls, const std::string& message) {
  std::cerr << nlohmann::json{{"error", cls}, {"message", message}}.dump()
            << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"school-market consolidation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  GlobalOptions g;
  std::string market_dir, run_dir;
  bool scheme = false, balanced = false;

  const auto add_globals = [&](CLI::App* c) {
    c->add_option("--seed", g.seed, "root RNG seed")->envname("SCHOOLMERGE_SEED");
    c->add_option("--out", g.out_dir, "output directory")
        ->envname("SCHOOLMERGE_OUT");
    c->add_option("--threads", g.threads, "worker threads")
        ->envname("SCHOOLMERGE_THREADS");
    c->add_option("--config", g.config_path, "config file (.toml or .json)")
        ->envname("SCHOOLMERGE_CONFIG");
  };

  CLI::App* c_gen =
      app.add_subcommand("generate", "write a synthetic market to --out");
  add_globals(c_gen);
  CLI::App* c_match =
      app.add_subcommand("match", "deferred acceptance over a market directory");
  add_globals(c_match);
  c_match->add_option("market", market_dir, "market directory")->required();
  c_match->add_flag("--scheme", scheme, "also emit per-district layers");
  CLI::App* c_est =
      app.add_subcommand("estimate", "Gibbs preference estimation from rank data");
  add_globals(c_est);
  CLI::App* c_wel =
      app.add_subcommand("welfare", "consolidation gains from latent utilities");
  add_globals(c_wel);
  c_wel->add_flag("--balanced", balanced,
                  "rescale seats to match students per district first");
  CLI::App* c_mc = app.add_subcommand("mc", "replicated estimator validation");
  add_globals(c_mc);
  CLI::App* c_rep =
      app.add_subcommand("report", "aggregate run artifacts into report.json");
  add_globals(c_rep);
  c_rep->add_option("run", run_dir, "run directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    error_json("validation", e.what());
    return 1;
  }

  CLI::App* sub = app.get_subcommands().at(0);
  g.seed_given = sub->count("--seed") > 0;
  if (g.threads < 1) {
    error_json("validation", "--threads must be at least 1");
    return 1;
  }

  try {
    if (sub == c_gen) cmd_generate(g);
    else if (sub == c_match) cmd_match(g, market_dir, scheme);
    else if (sub == c_est) cmd_estimate(g);
    else if (sub == c_wel) cmd_welfare(g, balanced);
    else if (sub == c_mc) cmd_mc(g);
    else cmd_report(g, run_dir);
  } catch (const ValidationError& e) {
    error_json("validation", e.what());
    return 1;
  } catch (const NumericalError& e) {
    error_json("numerical", e.what());
    return 2;
  } catch (const IoError& e) {
    error_json("io", e.what());
    return 3;
  } catch (const nlohmann::json::exception& e) {
    error_json("validation", e.what());
    return 1;
  } catch (const fs::filesystem_error& e) {
    error_json("io", e.what());
    return 3;
  } catch (const std::exception& e) {
    error_json("internal", e.what());
    return 2;
  }
  return 0;
}

}  // namespace schoolmerge
