#include "polaron/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "polaron/errors.hpp"

namespace polaron::io {

std::string g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

double parse_double(const std::string& token) {
    const char* s = token.c_str();
    char* end = nullptr;
    const double v = std::strtod(s, &end);
    if (end == s || *end != '\0')
        throw ConfigError("not a number: '" + token + "'");
    return v;
}

std::uint64_t fnv1a(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 14695981039346656037ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::string file_hash(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string bytes = ss.str();
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(bytes.data(), bytes.size())));
    return buf;
}

namespace {

std::ofstream open_out(const fs::path& path) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary); // binary: no CRLF translation anywhere
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

std::vector<double> to_vec(const ArrayXd& a) { return {a.data(), a.data() + a.size()}; }

} // namespace

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream out = open_out(path);
    for (std::size_t c = 0; c < header.size(); ++c)
        out << (c ? "," : "") << header[c];
    out << '\n';
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw Error("csv row width mismatch in " + path.string());
        for (std::size_t c = 0; c < row.size(); ++c)
            out << (c ? "," : "") << g17(row[c]);
        out << '\n';
    }
    if (!out) throw Error("short write to " + path.string());
}

int CsvTable::column(const std::string& name) const {
    for (std::size_t c = 0; c < header.size(); ++c)
        if (header[c] == name) return static_cast<int>(c);
    throw ConfigError("csv is missing column '" + name + "'");
}

CsvTable read_csv(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError("cannot open " + path.string());
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty csv: " + path.string());
    std::stringstream hs(line);
    for (std::string cell; std::getline(hs, cell, ',');) t.header.push_back(cell);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        row.reserve(t.header.size());
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) row.push_back(parse_double(cell));
        if (row.size() != t.header.size())
            throw ConfigError("ragged csv row in " + path.string());
        t.rows.push_back(std::move(row));
    }
    return t;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out = open_out(path);
    out << j.dump(2) << '\n';
    if (!out) throw Error("short write to " + path.string());
}

json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

// --- manifests -------------------------------------------------------------

void write_manifest(const fs::path& dir, const std::string& subcommand, std::uint64_t seed,
                    const json& params, const std::map<std::string, std::string>& input_hashes,
                    const std::vector<std::string>& output_files) {
    json j;
    j["tool"] = kToolName;
    j["version"] = kToolVersion;
    j["subcommand"] = subcommand;
    j["seed"] = seed;
    j["params"] = params;
    j["inputs"] = json::object();
    for (const auto& [path, hash] : input_hashes) j["inputs"][path] = hash;
    j["outputs"] = json::object();
    for (const auto& name : output_files) j["outputs"][name] = file_hash(dir / name);
    write_json(dir / "manifest.json", j);
}

json read_manifest(const fs::path& dir) { return read_json(dir / "manifest.json"); }

// --- solver ----------------------------------------------------------------

namespace {

json grid_to_json(const RadialGrid& g) {
    json j;
    j["spacing"] = g.is_uniform() ? "uniform" : "geometric";
    j["r_max"] = g.r_max();
    j["n_points"] = g.n_points();
    if (!g.is_uniform()) j["r_min"] = g.nodes()[0];
    return j;
}

GridPtr grid_from_json(const json& j) {
    const std::string spacing = j.at("spacing");
    const double r_max = j.at("r_max");
    const int n = j.at("n_points");
    if (spacing == "uniform")
        return std::make_shared<const RadialGrid>(RadialGrid::uniform(r_max, n));
    if (spacing == "geometric")
        return std::make_shared<const RadialGrid>(
            RadialGrid::geometric(r_max, n, j.at("r_min").get<double>()));
    throw ConfigError("unknown grid spacing '" + spacing + "'");
}

} // namespace

void write_solution(const fs::path& dir, const PekarSolution& sol) {
    const RadialGrid& grid = sol.psi.grid();
    const ArrayXd phi = hartree_potential(sol.psi, false).values();
    const ArrayXd b = drift_field(sol.psi).values();
    const ArrayXd lap = laplace_log_psi(sol.psi).values();

    std::vector<std::vector<double>> rows;
    rows.reserve(grid.n_points());
    for (int i = 0; i < grid.n_points(); ++i)
        rows.push_back({grid.nodes()[i], sol.psi.values()[i], phi[i], b[i], lap[i]});
    write_csv(dir / "solution.csv", {"r", "psi", "phi", "b", "laplace_log_psi"}, rows);

    json j;
    j["grid"] = grid_to_json(grid);
    j["C"] = sol.C;
    j["K"] = sol.K;
    j["g"] = sol.g;
    j["mu"] = sol.mu;
    j["residual"] = sol.residual;
    j["iterations"] = sol.iterations;
    if (sol.psi.as_radial().tail()) {
        const auto& t = *sol.psi.as_radial().tail();
        j["tail"] = {{"A", t.A}, {"kappa", t.kappa}};
    } else {
        j["tail"] = nullptr;
    }
    write_json(dir / "solution.json", j);
}

PekarSolution read_solution(const fs::path& dir) {
    const json j = read_json(dir / "solution.json");
    const CsvTable t = read_csv(dir / "solution.csv");
    GridPtr grid = grid_from_json(j.at("grid"));
    if (static_cast<int>(t.rows.size()) != grid->n_points())
        throw ConfigError("solution.csv row count disagrees with the stored grid header");
    const int cr = t.column("r");
    const int cp = t.column("psi");
    ArrayXd values(grid->n_points());
    for (int i = 0; i < grid->n_points(); ++i) {
        if (t.rows[i][cr] != grid->nodes()[i])
            throw ConfigError("solution.csv nodes disagree with the stored grid header");
        values[i] = t.rows[i][cp];
    }
    std::optional<ExponentialTail> tail;
    if (!j.at("tail").is_null())
        tail = ExponentialTail{j["tail"].at("A").get<double>(), j["tail"].at("kappa").get<double>()};
    PekarSolution sol{WaveFunction::from_stored(std::move(grid), std::move(values), tail),
                      j.at("C").get<double>(),        j.at("K").get<double>(),
                      j.at("g").get<double>(),        j.at("mu").get<double>(),
                      j.at("residual").get<double>(), j.at("iterations").get<int>()};
    return sol;
}

// --- sampler ---------------------------------------------------------------

void write_chains(const fs::path& dir, const ChainOutput& out) {
    std::vector<std::vector<double>> energy_rows;
    for (std::size_t c = 0; c < out.chains.size(); ++c) {
        const ChainTrace& tr = out.chains[c];
        for (Eigen::Index s = 0; s < tr.energy.size(); ++s)
            energy_rows.push_back({static_cast<double>(c), static_cast<double>(s), tr.energy[s],
                                   tr.acc_pcn[s], tr.acc_local[s]});
    }
    write_csv(dir / "energies.csv", {"chain", "sweep", "H", "acc_pcn", "acc_local"}, energy_rows);

    const double two_t = 2.0 * out.lattice.T;
    std::vector<std::vector<double>> inc_rows;
    for (std::size_t c = 0; c < out.chains.size(); ++c) {
        const ChainTrace& tr = out.chains[c];
        for (const auto& [lag, vecs] : tr.increments)
            for (const auto& v : vecs)
                inc_rows.push_back({static_cast<double>(c), lag, v.x(), v.y(), v.z()});
        // endpoint displacement = the lag 2T increment; skip if already recorded
        if (!tr.increments.count(two_t))
            for (const auto& v : tr.endpoints)
                inc_rows.push_back({static_cast<double>(c), two_t, v.x(), v.y(), v.z()});
    }
    write_csv(dir / "increments.csv", {"chain", "lag", "dx", "dy", "dz"}, inc_rows);

    std::vector<std::vector<double>> occ_rows;
    for (std::size_t c = 0; c < out.chains.size(); ++c) {
        const auto& tr = out.chains[c];
        for (std::size_t f = 0; f < tr.occupation_frames.size(); ++f)
            for (std::size_t k = 0; k < tr.occupation_frames[f].size(); ++k) {
                const int node = tr.occupation_nodes[k];
                const auto& pt = tr.occupation_frames[f][k];
                occ_rows.push_back({static_cast<double>(c), static_cast<double>(f),
                                    static_cast<double>(node), out.lattice.time_of(node), pt.x(),
                                    pt.y(), pt.z()});
            }
    }
    write_csv(dir / "occupation.csv", {"chain", "frame", "node", "t", "x", "y", "z"}, occ_rows);
}

std::vector<Eigen::Vector3d> OccupationSample::window(double half_width) const {
    if (half_width <= 0) return pts;
    std::vector<Eigen::Vector3d> out;
    for (std::size_t i = 0; i < pts.size(); ++i)
        if (std::abs(t[i]) <= half_width) out.push_back(pts[i]);
    return out;
}

OccupationSample read_occupation(const fs::path& file) {
    const CsvTable tab = read_csv(file);
    const int ct = tab.column("t");
    const int cx = tab.column("x");
    const int cy = tab.column("y");
    const int cz = tab.column("z");
    OccupationSample out;
    out.pts.reserve(tab.rows.size());
    out.t.reserve(tab.rows.size());
    for (const auto& row : tab.rows) {
        out.pts.emplace_back(row[cx], row[cy], row[cz]);
        out.t.push_back(row[ct]);
    }
    return out;
}

StoredIncrements read_increments(const fs::path& file) {
    const CsvTable t = read_csv(file);
    const int cc = t.column(t.header[0] == "path_id" ? "path_id" : "chain");
    const int cl = t.column("lag");
    const int cx = t.column("dx");
    const int cy = t.column("dy");
    const int cz = t.column("dz");
    std::map<double, std::map<long long, std::vector<Eigen::Vector3d>>> grouped;
    for (const auto& row : t.rows)
        grouped[row[cl]][static_cast<long long>(row[cc])].emplace_back(row[cx], row[cy], row[cz]);
    StoredIncrements out;
    for (auto& [lag, chains] : grouped) {
        auto& dst = out.by_lag[lag];
        for (auto& [id, vecs] : chains) dst.push_back(std::move(vecs));
    }
    return out;
}

void write_g_estimate(const fs::path& dir, const PathLattice& lat, const ThermoResult& res,
                      const json& extra) {
    json j;
    j["lattice"] = {{"eps", lat.eps},
                    {"T", lat.T},
                    {"n_steps", lat.n_steps},
                    {"eta", lat.eta},
                    {"kernel", lat.kernel == Kernel::polaron ? "polaron" : "mean_field"}};
    j["kappa_nodes"] = to_vec(res.kappa_nodes);
    j["weights"] = to_vec(res.weights);
    j["integrand"] = to_vec(res.integrand);
    j["integrand_se"] = to_vec(res.integrand_se);
    j["per_chain"] = to_vec(res.per_chain);
    j["g_hat"] = res.g_hat;
    j["se"] = res.se;
    for (const auto& [key, val] : extra.items()) j[key] = val;
    write_json(dir / "g_estimate.json", j);
}

json read_g_estimate(const fs::path& dir) { return read_json(dir / "g_estimate.json"); }

// --- diffusion ---------------------------------------------------------------

void write_trajectories(const fs::path& dir, const TrajectorySample& traj, int max_paths) {
    const int n_store = static_cast<int>(std::min<std::size_t>(traj.paths.size(),
                                                               static_cast<std::size_t>(max_paths)));
    std::vector<std::vector<double>> rows;
    for (int p = 0; p < n_store; ++p) {
        const Matrix3Xd& x = traj.paths[p];
        for (Eigen::Index k = 0; k < x.cols(); ++k)
            rows.push_back({static_cast<double>(p), static_cast<double>(k),
                            static_cast<double>(k) * traj.dt_store, x(0, k), x(1, k), x(2, k)});
    }
    write_csv(dir / "trajectories.csv", {"path_id", "k", "t", "x", "y", "z"}, rows);
}

void write_sde_increments(const fs::path& dir, const TrajectorySample& traj,
                          const std::vector<double>& lags) {
    std::vector<std::vector<double>> rows;
    for (std::size_t p = 0; p < traj.paths.size(); ++p) {
        TrajectorySample one{traj.dt_fine, traj.dt_store, {traj.paths[p]}, traj.source};
        for (const IncrementSample& s : increments(one, lags))
            for (const auto& v : s.vecs)
                rows.push_back({static_cast<double>(p), s.lag, v.x(), v.y(), v.z()});
    }
    write_csv(dir / "increments.csv", {"path_id", "lag", "dx", "dy", "dz"}, rows);
}

// --- report ------------------------------------------------------------------

json report_to_json(const ComparisonReport& rep) {
    json j;
    j["g0"] = rep.g0;
    j["C"] = rep.C;
    j["K"] = rep.K;
    j["g_table"] = json::array();
    for (const auto& r : rep.g_table)
        j["g_table"].push_back({{"eps", r.eps}, {"g_hat", r.g_hat}, {"se", r.se}, {"gap", r.gap}});
    j["sigma_table"] = json::array();
    for (const auto& r : rep.sigma_table)
        j["sigma_table"].push_back({{"eps", r.eps}, {"sigma2", r.sigma2}, {"se", r.se}});
    j["distance_table"] = json::array();
    for (const auto& r : rep.distance_table)
        j["distance_table"].push_back({{"eps", r.eps},
                                       {"lag", r.lag},
                                       {"energy_distance", r.energy_distance},
                                       {"se", r.se},
                                       {"p_value", r.p_value}});
    j["msd_table"] = json::array();
    for (const auto& r : rep.msd_table)
        j["msd_table"].push_back(
            {{"source", r.source}, {"lag", r.lag}, {"msd", r.msd}, {"se", r.se}});
    j["localization"] = {{"polaron", rep.loc_polaron}, {"brownian", rep.loc_brownian}};
    j["flags"] = {{"g_gap_decreasing", rep.flags.g_gap_decreasing},
                  {"sigma_in_unit_interval", rep.flags.sigma_in_unit_interval},
                  {"distance_decreasing", rep.flags.distance_decreasing},
                  {"localization_separated", rep.flags.localization_separated}};
    return j;
}

void write_report(const fs::path& dir, const ComparisonReport& rep, std::uint64_t seed) {
    json j = report_to_json(rep);
    j["seed"] = seed;
    write_json(dir / "report.json", j);

    std::ofstream out = open_out(dir / "report.csv");
    out << "table,eps,lag,value,se,extra\n";
    auto row = [&](const std::string& table, double eps, double lag, double value, double se,
                   double extra) {
        out << table << ',' << g17(eps) << ',' << g17(lag) << ',' << g17(value) << ',' << g17(se)
            << ',' << g17(extra) << '\n';
    };
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& r : rep.g_table) row("g", r.eps, nan, r.g_hat, r.se, r.gap);
    for (const auto& r : rep.sigma_table) row("sigma2", r.eps, nan, r.sigma2, r.se, nan);
    for (const auto& r : rep.distance_table)
        row("distance", r.eps, r.lag, r.energy_distance, r.se, r.p_value);
    for (const auto& r : rep.msd_table) row("msd_" + r.source, nan, r.lag, r.msd, r.se, nan);
    row("localization_polaron", nan, nan, rep.loc_polaron, nan, nan);
    row("localization_brownian", nan, nan, rep.loc_brownian, nan, nan);
    if (!out) throw Error("short write to " + (dir / "report.csv").string());
}

} // namespace polaron::io
