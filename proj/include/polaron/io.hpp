#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "polaron/diagnostics.hpp"
#include "polaron/gibbs.hpp"
#include "polaron/pekar.hpp"
#include "polaron/sde.hpp"

namespace polaron::io {

using nlohmann::json;
namespace fs = std::filesystem;

inline constexpr const char* kToolName = "polaronlab";
inline constexpr const char* kToolVersion = "0.1.0";

// Doubles are written with 17 significant digits so that parsing the text
// reproduces the original bits.
std::string g17(double x);
double parse_double(const std::string& token);

// FNV-1a over the raw file bytes, rendered as 16 hex digits. Used for
// manifest chaining, not for security.
std::uint64_t fnv1a(const void* data, std::size_t n);
std::string file_hash(const fs::path& path);

// Minimal CSV layer: first line is the header, fields are comma separated,
// all payload cells are numeric.
void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    int column(const std::string& name) const;  // throws ConfigError if absent
};
CsvTable read_csv(const fs::path& path);

void write_json(const fs::path& path, const json& j);
json read_json(const fs::path& path);  // throws MissingInputError / ConfigError

// --- manifests -------------------------------------------------------------

// Every subcommand writes <out>/manifest.json after its data files:
//   { tool, version, subcommand, seed, params, inputs: {path: hash},
//     outputs: {file: hash} }
// Input hashes let a downstream manifest be audited against the upstream
// files it consumed. No timestamps: a rerun with the same seed is
// byte-identical.
void write_manifest(const fs::path& dir, const std::string& subcommand, std::uint64_t seed,
                    const json& params, const std::map<std::string, std::string>& input_hashes,
                    const std::vector<std::string>& output_files);
json read_manifest(const fs::path& dir);

// --- solver ----------------------------------------------------------------

// solution.csv: r, psi, phi, b, laplace_log_psi ; solution.json: grid spec,
// energy split, multiplier, residual, iteration count, fitted tail.
void write_solution(const fs::path& dir, const PekarSolution& sol);
PekarSolution read_solution(const fs::path& dir);

// --- sampler ---------------------------------------------------------------

// energies.csv: chain, sweep, H, acc_pcn, acc_local (burn-in included).
// increments.csv: chain, lag, dx, dy, dz; the endpoint displacement
// omega(T) - omega(-T) is stored as the lag = 2T rows.
// occupation.csv: chain, frame, node, t, x, y, z (thinned occupation points;
// t is the node time, so readers can window around the path center).
void write_chains(const fs::path& dir, const ChainOutput& out);

// Occupation points pooled over chains and frames, with their node times.
struct OccupationSample {
    std::vector<Eigen::Vector3d> pts;
    std::vector<double> t;

    // points with |t| <= half_width (all points when half_width <= 0)
    std::vector<Eigen::Vector3d> window(double half_width) const;
};
OccupationSample read_occupation(const fs::path& file);

struct StoredIncrements {
    // lag -> one vector of increments per chain (or per path for diffusion
    // output, which stores ids in the same column).
    std::map<double, std::vector<std::vector<Eigen::Vector3d>>> by_lag;
};
StoredIncrements read_increments(const fs::path& file);

// g_estimate.json (nodes, integrand means, standard errors, per-chain
// integrals, g_hat, se) plus the lattice block it was computed on.
void write_g_estimate(const fs::path& dir, const PathLattice& lat, const ThermoResult& res,
                      const json& extra = json::object());
json read_g_estimate(const fs::path& dir);

// --- diffusion ---------------------------------------------------------------

// trajectories.csv: path_id, k, t, x, y, z (k = stored step index). Large
// runs cap the number of stored paths; increments.csv mirrors the sampler
// format with the path id in the first column.
void write_trajectories(const fs::path& dir, const TrajectorySample& traj, int max_paths = 200);
void write_sde_increments(const fs::path& dir, const TrajectorySample& traj,
                          const std::vector<double>& lags);

// --- report ------------------------------------------------------------------

// report.json holds the full ComparisonReport; report.csv flattens the g,
// sigma^2, distance and MSD tables into (table, eps, lag, value, se, extra)
// rows.
void write_report(const fs::path& dir, const ComparisonReport& rep, std::uint64_t seed);
json report_to_json(const ComparisonReport& rep);

}  // namespace polaron::io
