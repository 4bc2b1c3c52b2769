#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "schoolmerge/rng.hpp"

namespace schoolmerge {

// Options shared by every subcommand. `seed` on the command line (or via
// SCHOOLMERGE_SEED) overrides a seed in the config file.
struct GlobalOptions {
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out_dir;
  int threads = 1;
  std::string config_path;
};

// One manifest.json per output directory: enough to audit a run and to
// verify byte-identical reproduction of its CSV artifacts.
struct RunManifest {
  std::string command;
  std::string tool_version;
  std::uint64_t seed = 0;
  std::string config_digest;  // empty when the command takes no config
  nlohmann::json input_digests = nlohmann::json::object();
  nlohmann::json output_digests = nlohmann::json::object();
  double wall_time_s = 0;
};

void write_manifest(const std::string& dir, const RunManifest& m);

// FNV-1a over raw bytes; digests are rendered as 16 lowercase hex digits.
std::uint64_t fnv1a64(const void* data, std::size_t n);
std::string file_digest_hex(const std::string& path);

void cmd_generate(const GlobalOptions& g);
void cmd_match(const GlobalOptions& g, const std::string& market_dir, bool scheme);
void cmd_estimate(const GlobalOptions& g);
void cmd_welfare(const GlobalOptions& g, bool balanced);
void cmd_mc(const GlobalOptions& g);
void cmd_report(const GlobalOptions& g, const std::string& run_dir);

// Parses argv-style tokens (program name excluded), dispatches, and maps
// errors to exit codes: 0 success, 1 validation, 2 numerical, 3 I/O. Failures
// print one JSON object {"error": class, "message": text} on stderr.
int run_cli(const std::vector<std::string>& args);

}  // namespace schoolmerge
