#include "schoolmerge/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "schoolmerge/errors.hpp"

namespace schoolmerge {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(field);
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(field);
  return out;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

double parse_double(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("not a number in " + context + ": '" + s + "'");
  }
}

std::int64_t parse_int(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    const std::int64_t v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("not an integer in " + context + ": '" + s + "'");
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);  // LF endings everywhere
  if (!f) throw IoError("cannot open for writing: " + path);
  return f;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::int32_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<std::int32_t>(i);
  return -1;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && f.peek() == EOF) break;
    auto fields = split_csv_line(line);
    if (first) {
      table.header = std::move(fields);
      first = false;
    } else {
      if (fields.size() != table.header.size())
        throw ValidationError(path + ": row with " + std::to_string(fields.size()) +
                              " fields, expected " + std::to_string(table.header.size()));
      table.rows.push_back(std::move(fields));
    }
  }
  if (first) throw ValidationError(path + ": empty file");
  return table;
}

const Eigen::MatrixXd* Dataset::pair(const std::string& name) const {
  for (std::size_t i = 0; i < pair_cols.size(); ++i)
    if (pair_cols[i] == name) return &pair_vals[i];
  return nullptr;
}

namespace {

struct IdIndex {
  std::unordered_map<std::string, std::int32_t> map;

  std::int32_t at(const std::string& id, const std::string& context) const {
    auto it = map.find(id);
    if (it == map.end()) throw ValidationError("unknown id in " + context + ": " + id);
    return it->second;
  }
};

IdIndex index_of(const std::vector<std::string>& ids) {
  IdIndex idx;
  for (std::size_t i = 0; i < ids.size(); ++i)
    idx.map.emplace(ids[i], static_cast<std::int32_t>(i));
  return idx;
}

}  // namespace

Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  Dataset ds;
  Market& m = ds.market;

  std::unordered_map<std::string, std::int32_t> districts;
  auto district_id = [&](const std::string& label) {
    auto it = districts.find(label);
    if (it != districts.end()) return it->second;
    const auto id = static_cast<std::int32_t>(m.district_labels.size());
    m.district_labels.push_back(label);
    districts.emplace(label, id);
    return id;
  };

  const CsvTable students = read_csv(dir + "/students.csv");
  {
    const auto id_col = students.column("id"), d_col = students.column("district");
    if (id_col < 0 || d_col < 0)
      throw ValidationError("students.csv needs id and district columns");
    for (std::size_t j = 0; j < students.header.size(); ++j)
      if (static_cast<std::int32_t>(j) != id_col && static_cast<std::int32_t>(j) != d_col)
        ds.student_cols.push_back(students.header[j]);
    ds.student_vals.resize(static_cast<Eigen::Index>(students.rows.size()),
                           static_cast<Eigen::Index>(ds.student_cols.size()));
    for (std::size_t i = 0; i < students.rows.size(); ++i) {
      const auto& row = students.rows[i];
      m.student_ids.push_back(row[static_cast<std::size_t>(id_col)]);
      m.student_district.push_back(district_id(row[static_cast<std::size_t>(d_col)]));
      Eigen::Index c = 0;
      for (std::size_t j = 0; j < row.size(); ++j)
        if (static_cast<std::int32_t>(j) != id_col && static_cast<std::int32_t>(j) != d_col)
          ds.student_vals(static_cast<Eigen::Index>(i), c++) =
              parse_double(row[j], "students.csv");
    }
  }

  const CsvTable schools = read_csv(dir + "/schools.csv");
  {
    const auto id_col = schools.column("id"), d_col = schools.column("district");
    const auto q_col = schools.column("capacity");
    if (id_col < 0 || d_col < 0 || q_col < 0)
      throw ValidationError("schools.csv needs id, district and capacity columns");
    for (std::size_t j = 0; j < schools.header.size(); ++j)
      if (static_cast<std::int32_t>(j) != id_col &&
          static_cast<std::int32_t>(j) != d_col && static_cast<std::int32_t>(j) != q_col)
        ds.school_cols.push_back(schools.header[j]);
    ds.school_vals.resize(static_cast<Eigen::Index>(schools.rows.size()),
                          static_cast<Eigen::Index>(ds.school_cols.size()));
    for (std::size_t i = 0; i < schools.rows.size(); ++i) {
      const auto& row = schools.rows[i];
      m.school_ids.push_back(row[static_cast<std::size_t>(id_col)]);
      m.school_district.push_back(district_id(row[static_cast<std::size_t>(d_col)]));
      m.capacity.push_back(static_cast<std::int32_t>(
          parse_int(row[static_cast<std::size_t>(q_col)], "schools.csv")));
      Eigen::Index c = 0;
      for (std::size_t j = 0; j < row.size(); ++j)
        if (static_cast<std::int32_t>(j) != id_col &&
            static_cast<std::int32_t>(j) != d_col && static_cast<std::int32_t>(j) != q_col)
          ds.school_vals(static_cast<Eigen::Index>(i), c++) =
              parse_double(row[j], "schools.csv");
    }
  }

  const auto T = m.num_students(), S = m.num_schools();
  const IdIndex t_idx = index_of(m.student_ids), s_idx = index_of(m.school_ids);
  m.student_prefs.assign(static_cast<std::size_t>(T), {});
  m.school_priorities.assign(static_cast<std::size_t>(S), {});
  m.school_unacceptable.assign(static_cast<std::size_t>(S), {});

  {
    const CsvTable rols = read_csv(dir + "/rols.csv");
    const auto t_col = rols.column("student_id"), r_col = rols.column("rank"),
               s_col = rols.column("school_id");
    if (t_col < 0 || r_col < 0 || s_col < 0)
      throw ValidationError("rols.csv needs student_id, rank, school_id");
    std::vector<std::vector<std::pair<std::int64_t, std::int32_t>>> lists(
        static_cast<std::size_t>(T));
    for (const auto& row : rols.rows) {
      const auto t = t_idx.at(row[static_cast<std::size_t>(t_col)], "rols.csv");
      const auto s = s_idx.at(row[static_cast<std::size_t>(s_col)], "rols.csv");
      lists[static_cast<std::size_t>(t)].emplace_back(
          parse_int(row[static_cast<std::size_t>(r_col)], "rols.csv"), s);
    }
    for (std::int32_t t = 0; t < T; ++t) {
      auto& list = lists[static_cast<std::size_t>(t)];
      std::sort(list.begin(), list.end());
      for (std::size_t i = 0; i < list.size(); ++i) {
        if (list[i].first != static_cast<std::int64_t>(i + 1))
          throw ValidationError("rols.csv: ranks for student " + m.student_ids[t] +
                                " are not 1..L without gaps");
        m.student_prefs[static_cast<std::size_t>(t)].push_back(list[i].second);
      }
    }
  }

  {
    const CsvTable prio = read_csv(dir + "/priorities.csv");
    const auto s_col = prio.column("school_id"), p_col = prio.column("priority"),
               t_col = prio.column("student_id"), a_col = prio.column("acceptable");
    if (s_col < 0 || p_col < 0 || t_col < 0 || a_col < 0)
      throw ValidationError("priorities.csv needs school_id, priority, student_id, acceptable");
    std::vector<std::vector<std::pair<std::int64_t, std::int32_t>>> lists(
        static_cast<std::size_t>(S));
    for (const auto& row : prio.rows) {
      const auto s = s_idx.at(row[static_cast<std::size_t>(s_col)], "priorities.csv");
      const auto t = t_idx.at(row[static_cast<std::size_t>(t_col)], "priorities.csv");
      const auto acceptable = parse_int(row[static_cast<std::size_t>(a_col)], "priorities.csv");
      const auto& p_field = row[static_cast<std::size_t>(p_col)];
      if (acceptable == 0) {
        if (!p_field.empty())
          throw ValidationError("priorities.csv: unacceptable rows must leave priority empty");
        m.school_unacceptable[static_cast<std::size_t>(s)].push_back(t);
      } else {
        lists[static_cast<std::size_t>(s)].emplace_back(
            parse_int(p_field, "priorities.csv"), t);
      }
    }
    for (std::int32_t s = 0; s < S; ++s) {
      auto& list = lists[static_cast<std::size_t>(s)];
      std::sort(list.begin(), list.end());
      for (std::size_t i = 0; i < list.size(); ++i) {
        if (list[i].first != static_cast<std::int64_t>(i + 1))
          throw ValidationError("priorities.csv: priorities for school " + m.school_ids[s] +
                                " are not 1..L without gaps");
        m.school_priorities[static_cast<std::size_t>(s)].push_back(list[i].second);
      }
      std::sort(m.school_unacceptable[static_cast<std::size_t>(s)].begin(),
                m.school_unacceptable[static_cast<std::size_t>(s)].end());
    }
  }

  if (fs::exists(dir + "/pairs.csv")) {
    const CsvTable pairs = read_csv(dir + "/pairs.csv");
    const auto t_col = pairs.column("student_id"), s_col = pairs.column("school_id");
    if (t_col < 0 || s_col < 0)
      throw ValidationError("pairs.csv needs student_id and school_id");
    for (std::size_t j = 0; j < pairs.header.size(); ++j)
      if (static_cast<std::int32_t>(j) != t_col && static_cast<std::int32_t>(j) != s_col)
        ds.pair_cols.push_back(pairs.header[j]);
    ds.pair_vals.assign(ds.pair_cols.size(),
                        Eigen::MatrixXd::Constant(T, S, std::numeric_limits<double>::quiet_NaN()));
    for (const auto& row : pairs.rows) {
      const auto t = t_idx.at(row[static_cast<std::size_t>(t_col)], "pairs.csv");
      const auto s = s_idx.at(row[static_cast<std::size_t>(s_col)], "pairs.csv");
      std::size_t c = 0;
      for (std::size_t j = 0; j < row.size(); ++j)
        if (static_cast<std::int32_t>(j) != t_col && static_cast<std::int32_t>(j) != s_col)
          ds.pair_vals[c++](t, s) = parse_double(row[j], "pairs.csv");
    }
    for (std::size_t c = 0; c < ds.pair_cols.size(); ++c)
      if (ds.pair_vals[c].hasNaN())
        throw ValidationError("pairs.csv: column " + ds.pair_cols[c] +
                              " does not cover every student-school pair");
  }

  bool complete = true;
  for (const auto& p : m.student_prefs)
    if (static_cast<std::int32_t>(p.size()) != S) complete = false;
  for (const auto& p : m.school_priorities)
    if (static_cast<std::int32_t>(p.size()) != T) complete = false;
  m.complete_preferences = complete;
  return ds;
}

void save_dataset(const std::string& dir, const Dataset& ds) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const Market& m = ds.market;

  {
    auto f = open_out(dir + "/students.csv");
    f << "id,district";
    for (const auto& c : ds.student_cols) f << ',' << csv_escape(c);
    f << '\n';
    for (std::int32_t t = 0; t < m.num_students(); ++t) {
      f << csv_escape(m.student_ids[t]) << ','
        << csv_escape(m.district_labels[m.student_district[t]]);
      for (Eigen::Index c = 0; c < ds.student_vals.cols(); ++c)
        f << ',' << format_double(ds.student_vals(t, c));
      f << '\n';
    }
  }
  {
    auto f = open_out(dir + "/schools.csv");
    f << "id,district,capacity";
    for (const auto& c : ds.school_cols) f << ',' << csv_escape(c);
    f << '\n';
    for (std::int32_t s = 0; s < m.num_schools(); ++s) {
      f << csv_escape(m.school_ids[s]) << ','
        << csv_escape(m.district_labels[m.school_district[s]]) << ',' << m.capacity[s];
      for (Eigen::Index c = 0; c < ds.school_vals.cols(); ++c)
        f << ',' << format_double(ds.school_vals(s, c));
      f << '\n';
    }
  }
  {
    auto f = open_out(dir + "/rols.csv");
    f << "student_id,rank,school_id\n";
    for (std::int32_t t = 0; t < m.num_students(); ++t)
      for (std::size_t i = 0; i < m.student_prefs[t].size(); ++i)
        f << csv_escape(m.student_ids[t]) << ',' << (i + 1) << ','
          << csv_escape(m.school_ids[m.student_prefs[t][i]]) << '\n';
  }
  {
    auto f = open_out(dir + "/priorities.csv");
    f << "school_id,priority,student_id,acceptable\n";
    for (std::int32_t s = 0; s < m.num_schools(); ++s) {
      for (std::size_t i = 0; i < m.school_priorities[s].size(); ++i)
        f << csv_escape(m.school_ids[s]) << ',' << (i + 1) << ','
          << csv_escape(m.student_ids[m.school_priorities[s][i]]) << ",1\n";
      for (auto t : m.school_unacceptable[s])
        f << csv_escape(m.school_ids[s]) << ",," << csv_escape(m.student_ids[t]) << ",0\n";
    }
  }
  if (!ds.pair_cols.empty()) {
    auto f = open_out(dir + "/pairs.csv");
    f << "student_id,school_id";
    for (const auto& c : ds.pair_cols) f << ',' << csv_escape(c);
    f << '\n';
    for (std::int32_t t = 0; t < m.num_students(); ++t)
      for (std::int32_t s = 0; s < m.num_schools(); ++s) {
        f << csv_escape(m.student_ids[t]) << ',' << csv_escape(m.school_ids[s]);
        for (const auto& mat : ds.pair_vals) f << ',' << format_double(mat(t, s));
        f << '\n';
      }
  }
}

Matching read_matching(const std::string& path, const Market& m) {
  const CsvTable table = read_csv(path);
  const auto t_col = table.column("student_id"), s_col = table.column("school_id");
  if (t_col < 0 || s_col < 0)
    throw ValidationError("matching.csv needs student_id and school_id");
  if (table.column("layer") >= 0)
    throw ValidationError("matching.csv has a layer column; pass a single layer");
  const IdIndex t_idx = index_of(m.student_ids), s_idx = index_of(m.school_ids);
  Matching mu(m.num_students(), m.num_schools());
  for (const auto& row : table.rows) {
    const auto t = t_idx.at(row[static_cast<std::size_t>(t_col)], path);
    const auto& school = row[static_cast<std::size_t>(s_col)];
    if (school == "UNMATCHED") continue;
    mu.assign(t, s_idx.at(school, path));
  }
  return mu;
}

void write_matching(const std::string& path, const Market& m, const Matching& mu) {
  auto f = open_out(path);
  f << "student_id,school_id\n";
  for (std::int32_t t = 0; t < m.num_students(); ++t) {
    const auto s = mu.of_student(t);
    f << csv_escape(m.student_ids[t]) << ','
      << (s >= 0 ? csv_escape(m.school_ids[s]) : std::string("UNMATCHED")) << '\n';
  }
}

void write_scheme(const std::string& path, const Market& m,
                  const MatchingScheme& scheme) {
  auto f = open_out(path);
  f << "student_id,school_id,layer\n";
  for (std::int32_t d = 0; d < m.num_districts(); ++d) {
    const std::string layer = "district:" + m.district_labels[d];
    for (auto t : m.district_students(d)) {
      const auto s = scheme.district[d].of_student(t);
      f << csv_escape(m.student_ids[t]) << ','
        << (s >= 0 ? csv_escape(m.school_ids[s]) : std::string("UNMATCHED")) << ','
        << csv_escape(layer) << '\n';
    }
  }
  for (std::int32_t t = 0; t < m.num_students(); ++t) {
    const auto s = scheme.consolidated.of_student(t);
    f << csv_escape(m.student_ids[t]) << ','
      << (s >= 0 ? csv_escape(m.school_ids[s]) : std::string("UNMATCHED"))
      << ",consolidated\n";
  }
}

void write_latents(const std::string& dir, const Market& m,
                   const Eigen::MatrixXd& U, const Eigen::MatrixXd& V) {
  {
    auto f = open_out(dir + "/latent_u.csv");
    f << "student_id,school_id,u\n";
    for (std::int32_t t = 0; t < m.num_students(); ++t)
      for (std::int32_t s = 0; s < m.num_schools(); ++s)
        f << csv_escape(m.student_ids[t]) << ',' << csv_escape(m.school_ids[s]) << ','
          << format_double(U(t, s)) << '\n';
  }
  {
    auto f = open_out(dir + "/latent_v.csv");
    f << "school_id,student_id,v\n";
    for (std::int32_t s = 0; s < m.num_schools(); ++s)
      for (std::int32_t t = 0; t < m.num_students(); ++t)
        f << csv_escape(m.school_ids[s]) << ',' << csv_escape(m.student_ids[t]) << ','
          << format_double(V(s, t)) << '\n';
  }
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> read_latents(const std::string& dir,
                                                         const Market& m) {
  const IdIndex t_idx = index_of(m.student_ids), s_idx = index_of(m.school_ids);
  const auto T = m.num_students(), S = m.num_schools();
  Eigen::MatrixXd U = Eigen::MatrixXd::Constant(T, S, std::numeric_limits<double>::quiet_NaN());
  Eigen::MatrixXd V = Eigen::MatrixXd::Constant(S, T, std::numeric_limits<double>::quiet_NaN());
  {
    const CsvTable table = read_csv(dir + "/latent_u.csv");
    const auto t_col = table.column("student_id"), s_col = table.column("school_id"),
               u_col = table.column("u");
    if (t_col < 0 || s_col < 0 || u_col < 0)
      throw ValidationError("latent_u.csv needs student_id, school_id, u");
    for (const auto& row : table.rows)
      U(t_idx.at(row[static_cast<std::size_t>(t_col)], "latent_u.csv"),
        s_idx.at(row[static_cast<std::size_t>(s_col)], "latent_u.csv")) =
          parse_double(row[static_cast<std::size_t>(u_col)], "latent_u.csv");
  }
  {
    const CsvTable table = read_csv(dir + "/latent_v.csv");
    const auto s_col = table.column("school_id"), t_col = table.column("student_id"),
               v_col = table.column("v");
    if (s_col < 0 || t_col < 0 || v_col < 0)
      throw ValidationError("latent_v.csv needs school_id, student_id, v");
    for (const auto& row : table.rows)
      V(s_idx.at(row[static_cast<std::size_t>(s_col)], "latent_v.csv"),
        t_idx.at(row[static_cast<std::size_t>(t_col)], "latent_v.csv")) =
          parse_double(row[static_cast<std::size_t>(v_col)], "latent_v.csv");
  }
  if (U.hasNaN() || V.hasNaN())
    throw ValidationError("latent files do not cover every pair");
  return {std::move(U), std::move(V)};
}

DesignData build_design(const Dataset& ds, const std::vector<std::string>& x_cols,
                        const std::vector<std::string>& w_cols,
                        const Matching& observed) {
  const Market& m = ds.market;
  const auto T = m.num_students(), S = m.num_schools();

  auto student_col = [&](const std::string& name) -> std::int32_t {
    for (std::size_t i = 0; i < ds.student_cols.size(); ++i)
      if (ds.student_cols[i] == name) return static_cast<std::int32_t>(i);
    return -1;
  };
  auto school_col = [&](const std::string& name) -> std::int32_t {
    for (std::size_t i = 0; i < ds.school_cols.size(); ++i)
      if (ds.school_cols[i] == name) return static_cast<std::int32_t>(i);
    return -1;
  };

  Eigen::MatrixXd X(static_cast<Eigen::Index>(T) * S, static_cast<Eigen::Index>(x_cols.size()));
  for (std::size_t j = 0; j < x_cols.size(); ++j) {
    const auto& name = x_cols[j];
    const Eigen::MatrixXd* pv = ds.pair(name);
    const auto sc = school_col(name), tc = student_col(name);
    if (!pv && sc < 0 && tc < 0)
      throw ValidationError("design column not found for X: " + name);
    for (std::int32_t t = 0; t < T; ++t)
      for (std::int32_t s = 0; s < S; ++s) {
        double v;
        if (pv)
          v = (*pv)(t, s);
        else if (sc >= 0)
          v = ds.school_vals(s, sc);
        else
          v = ds.student_vals(t, tc);
        X(static_cast<Eigen::Index>(t) * S + s, static_cast<Eigen::Index>(j)) = v;
      }
  }
  Eigen::MatrixXd W(static_cast<Eigen::Index>(T) * S, static_cast<Eigen::Index>(w_cols.size()));
  for (std::size_t j = 0; j < w_cols.size(); ++j) {
    const auto& name = w_cols[j];
    const Eigen::MatrixXd* pv = ds.pair(name);
    const auto tc = student_col(name), sc = school_col(name);
    if (!pv && tc < 0 && sc < 0)
      throw ValidationError("design column not found for W: " + name);
    for (std::int32_t s = 0; s < S; ++s)
      for (std::int32_t t = 0; t < T; ++t) {
        double v;
        if (pv)
          v = (*pv)(t, s);
        else if (tc >= 0)
          v = ds.student_vals(t, tc);
        else
          v = ds.school_vals(s, sc);
        W(static_cast<Eigen::Index>(s) * T + t, static_cast<Eigen::Index>(j)) = v;
      }
  }
  return make_design(m, std::move(X), std::move(W), x_cols, w_cols, observed);
}

}  // namespace schoolmerge
