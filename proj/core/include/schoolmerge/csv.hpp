#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "schoolmerge/estimator.hpp"
#include "schoolmerge/market.hpp"

namespace schoolmerge {

// On-disk market bundle: students.csv (id, district, covariates...),
// schools.csv (id, district, capacity, covariates...), rols.csv
// (student_id, rank, school_id), priorities.csv (school_id, priority,
// student_id, acceptable) and optional pairs.csv (student_id, school_id,
// covariates...). acceptable = 0 rows carry an empty priority field and mean
// the school explicitly rejects the student.
struct Dataset {
  Market market;
  std::vector<std::string> student_cols;
  Eigen::MatrixXd student_vals;  // T x |student_cols|
  std::vector<std::string> school_cols;
  Eigen::MatrixXd school_vals;   // S x |school_cols|
  std::vector<std::string> pair_cols;
  std::vector<Eigen::MatrixXd> pair_vals;  // each T x S

  // Pair covariate by name; returns nullptr when absent.
  const Eigen::MatrixXd* pair(const std::string& name) const;
};

Dataset load_dataset(const std::string& dir);
void save_dataset(const std::string& dir, const Dataset& ds);

// matching.csv: student_id, school_id with UNMATCHED as the empty sentinel.
Matching read_matching(const std::string& path, const Market& m);
void write_matching(const std::string& path, const Market& m, const Matching& mu);
// Adds a layer column: one block per district layer, then the consolidated
// rows (layer values "district:<label>" and "consolidated").
void write_scheme(const std::string& path, const Market& m,
                  const MatchingScheme& scheme);

// latent_u.csv (student_id, school_id, u) and latent_v.csv (school_id,
// student_id, v), one row per pair.
void write_latents(const std::string& dir, const Market& m,
                   const Eigen::MatrixXd& U, const Eigen::MatrixXd& V);
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> read_latents(const std::string& dir,
                                                         const Market& m);

// Design matrices from named covariate columns. X columns resolve pair,
// then school, then student tables; W columns resolve pair, then student,
// then school.
DesignData build_design(const Dataset& ds, const std::vector<std::string>& x_cols,
                        const std::vector<std::string>& w_cols,
                        const Matching& observed);

// Round-trip-exact decimal rendering used by every CSV writer.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::int32_t column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::string& path);

}  // namespace schoolmerge
