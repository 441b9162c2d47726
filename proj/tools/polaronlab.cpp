// polaronlab: solve the Pekar problem, sample lattice path measures, estimate
// the coupling integral, run the psi-diffusion, and compare the ensembles.
//
// Subcommands write their data files plus a manifest.json carrying the
// resolved parameters, the seed, and content hashes of every input/output
// file, so a full pipeline can be audited by chaining hashes. Reruns with the
// same config and seed are byte-identical.

#include <algorithm>
#include <cstdio>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "polaron/errors.hpp"
#include "polaron/io.hpp"
#include "polaron/rng.hpp"

namespace {

using namespace polaron;
using polaron::io::json;
namespace fs = std::filesystem;

json default_config() {
    return json{
        {"solver",
         {{"spacing", "uniform"},
          {"r_max", 20.0},
          {"n_points", 2000},
          {"r_min", 1e-4},
          {"init", "gaussian"},
          {"damping", 0.7},
          {"tol", 1e-11},
          {"max_iter", 300}}},
        {"lattice",
         {{"eps", 1.0},
          {"T", 4.0},
          {"n_steps", 128},
          {"eta", 0.1},
          {"kappa", 1.0},
          {"kernel", "polaron"}}},
        {"sampler",
         {{"pcn_beta", 0.25},
          {"local_width", 1.0},
          {"n_sweeps", 20000},
          {"burn_in", 2000},
          {"thinning", 10},
          {"n_chains", 4},
          {"lags", {0.5, 1.0, 2.0, 3.0}},
          {"occupation_points", 64}}},
        {"thermo", {{"n_kappa_nodes", 8}, {"double_horizon", false}}},
        {"diffusion",
         {{"solver_dir", ""},
          {"gaussian_lambda", nullptr},
          {"dt", 1e-3},
          {"n_steps", 1000},
          {"n_paths", 1000},
          {"store_stride", 10},
          {"drift_clamp", 50.0},
          {"init", "stationary"},
          {"zero_drift", false},
          {"lags", {0.1, 0.5, 1.0}},
          {"max_stored_paths", 200}}},
        {"compare",
         {{"solver_dir", ""},
          {"pekar_dir", ""},
          {"polaron_dirs", json::array()},
          {"g_dirs", json::array()},
          {"brownian_dir", ""},
          {"lags", {1.0, 2.0, 3.0}},
          {"n_permutations", 999},
          {"max_points", 1000},
          {"loc_window", 0.25}}},
    };
}

void deep_merge(json& base, const json& over) {
    if (!base.is_object() || !over.is_object()) {
        base = over;
        return;
    }
    for (const auto& [key, val] : over.items()) {
        if (base.contains(key) && base[key].is_object() && val.is_object())
            deep_merge(base[key], val);
        else
            base[key] = val;
    }
}

void apply_set(json& cfg, const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("--set expects key=value, got '" + kv + "'");
    const std::string path = kv.substr(0, eq);
    const std::string raw = kv.substr(eq + 1);
    json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
    if (value.is_discarded()) value = raw; // unquoted strings pass through

    json* node = &cfg;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot - start);
        if (key.empty()) throw ConfigError("--set key has an empty segment: '" + path + "'");
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

const json& block(const json& cfg, const char* name) {
    if (!cfg.contains(name) || !cfg.at(name).is_object())
        throw ConfigError(std::string("config block '") + name + "' is missing");
    return cfg.at(name);
}

template <class T>
T jget(const json& j, const char* key, const char* where) {
    if (!j.contains(key))
        throw ConfigError(std::string(where) + "." + key + " is not set");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string(where) + "." + key + ": " + e.what());
    }
}

GridPtr grid_from(const json& s) {
    const auto spacing = jget<std::string>(s, "spacing", "solver");
    const double r_max = jget<double>(s, "r_max", "solver");
    const int n = jget<int>(s, "n_points", "solver");
    if (spacing == "uniform")
        return std::make_shared<const RadialGrid>(RadialGrid::uniform(r_max, n));
    if (spacing == "geometric")
        return std::make_shared<const RadialGrid>(
            RadialGrid::geometric(r_max, n, jget<double>(s, "r_min", "solver")));
    throw ConfigError("solver.spacing must be 'uniform' or 'geometric'");
}

PathLattice lattice_from(const json& cfg) {
    const json& l = block(cfg, "lattice");
    const auto kernel_name = jget<std::string>(l, "kernel", "lattice");
    Kernel kernel;
    if (kernel_name == "polaron")
        kernel = Kernel::polaron;
    else if (kernel_name == "mean_field")
        kernel = Kernel::mean_field;
    else
        throw ConfigError("lattice.kernel must be 'polaron' or 'mean_field'");
    return PathLattice(jget<double>(l, "T", "lattice"), jget<int>(l, "n_steps", "lattice"),
                       jget<double>(l, "eps", "lattice"), jget<double>(l, "eta", "lattice"),
                       kernel, jget<double>(l, "kappa", "lattice"));
}

SamplerConfig sampler_from(const json& cfg, std::uint64_t seed, int threads) {
    const json& s = block(cfg, "sampler");
    SamplerConfig c;
    c.pcn_beta = jget<double>(s, "pcn_beta", "sampler");
    c.local_width = jget<double>(s, "local_width", "sampler");
    c.n_sweeps = jget<int>(s, "n_sweeps", "sampler");
    c.burn_in = jget<int>(s, "burn_in", "sampler");
    c.thinning = jget<int>(s, "thinning", "sampler");
    c.n_chains = jget<int>(s, "n_chains", "sampler");
    c.lags = jget<std::vector<double>>(s, "lags", "sampler");
    c.occupation_points = jget<int>(s, "occupation_points", "sampler");
    c.seed = seed;
    c.threads = threads;
    return c;
}

DiffusionConfig diffusion_from(const json& d, std::uint64_t seed, int threads) {
    DiffusionConfig c;
    c.dt = jget<double>(d, "dt", "diffusion");
    c.n_steps = jget<int>(d, "n_steps", "diffusion");
    c.n_paths = jget<int>(d, "n_paths", "diffusion");
    c.store_stride = jget<int>(d, "store_stride", "diffusion");
    c.drift_clamp = jget<double>(d, "drift_clamp", "diffusion");
    const auto init = jget<std::string>(d, "init", "diffusion");
    if (init == "stationary")
        c.init = DiffusionConfig::Init::stationary;
    else if (init == "origin")
        c.init = DiffusionConfig::Init::origin;
    else
        throw ConfigError("diffusion.init must be 'stationary' or 'origin'");
    c.zero_drift = jget<bool>(d, "zero_drift", "diffusion");
    c.seed = seed;
    c.threads = threads;
    return c;
}

struct Common {
    std::string config_path;
    std::string out;
    std::uint64_t seed = 1;
    int threads = 0; // 0 = auto
    std::vector<std::string> sets;
    bool seed_given = false;
    bool threads_given = false;
    bool out_given = false;
};

// Resolution order: defaults < config file < --set < dedicated flags.
json resolve(const Common& c, const char* subcommand,
             std::map<std::string, std::string>* input_hashes) {
    json cfg = default_config();
    if (!c.config_path.empty()) {
        deep_merge(cfg, io::read_json(c.config_path));
        (*input_hashes)[c.config_path] = io::file_hash(c.config_path);
    }
    for (const auto& kv : c.sets) apply_set(cfg, kv);
    if (c.seed_given || !cfg.contains("seed")) cfg["seed"] = c.seed;
    if (c.threads_given || !cfg.contains("threads")) cfg["threads"] = c.threads;
    if (c.out_given || !cfg.contains("out"))
        cfg["out"] = c.out_given ? c.out : std::string("out/") + subcommand;
    if (cfg["threads"].get<int>() <= 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        cfg["threads"] = static_cast<int>(std::min(8u, hw ? hw : 1u));
    }
    return cfg;
}

// --- subcommands -------------------------------------------------------------

int cmd_solve_pekar(const json& cfg, const std::map<std::string, std::string>& inputs) {
    const fs::path out = cfg.at("out").get<std::string>();
    const json& s = block(cfg, "solver");
    PekarOptions opts;
    const auto init = jget<std::string>(s, "init", "solver");
    if (init == "gaussian")
        opts.init = PekarInit::gaussian;
    else if (init == "exponential")
        opts.init = PekarInit::exponential;
    else
        throw ConfigError("solver.init must be 'gaussian' or 'exponential'");
    opts.damping = jget<double>(s, "damping", "solver");
    opts.tol = jget<double>(s, "tol", "solver");
    opts.max_iter = jget<int>(s, "max_iter", "solver");

    const PekarSolution sol = solve_pekar(grid_from(s), opts);
    io::write_solution(out, sol);
    io::write_manifest(out, "solve-pekar", cfg.at("seed").get<std::uint64_t>(), cfg, inputs,
                       {"solution.csv", "solution.json"});
    std::printf("g=%.8f C=%.8f K=%.8f virial=%.2e iterations=%d\n", sol.g, sol.C, sol.K,
                std::abs(sol.C - 2.0 * sol.K) / sol.C, sol.iterations);
    return 0;
}

int cmd_sample_polaron(const json& cfg, const std::map<std::string, std::string>& inputs) {
    const fs::path out = cfg.at("out").get<std::string>();
    const PathLattice lat = lattice_from(cfg);
    const SamplerConfig sc =
        sampler_from(cfg, cfg.at("seed").get<std::uint64_t>(), cfg.at("threads").get<int>());
    const ChainOutput run = sample_polaron(lat, sc);
    io::write_chains(out, run);
    io::write_manifest(out, "sample-polaron", sc.seed, cfg, inputs,
                       {"energies.csv", "increments.csv", "occupation.csv"});
    double mean_h = 0, acc_p = 0, acc_l = 0;
    for (const auto& ch : run.chains) {
        mean_h += ch.energy.tail(sc.n_sweeps).mean() / run.chains.size();
        acc_p += ch.accept_pcn / run.chains.size();
        acc_l += ch.accept_local / run.chains.size();
    }
    std::printf("chains=%d mean_H=%.6f acc_pcn=%.3f acc_local=%.3f\n", sc.n_chains, mean_h, acc_p,
                acc_l);
    return 0;
}

int cmd_estimate_g(const json& cfg, const std::map<std::string, std::string>& inputs) {
    const fs::path out = cfg.at("out").get<std::string>();
    const PathLattice lat = lattice_from(cfg);
    const SamplerConfig sc =
        sampler_from(cfg, cfg.at("seed").get<std::uint64_t>(), cfg.at("threads").get<int>());
    const json& th = block(cfg, "thermo");
    const int nodes = jget<int>(th, "n_kappa_nodes", "thermo");

    const ThermoResult res = thermo_integrate(lat, sc, nodes);
    json extra = json::object();
    if (jget<bool>(th, "double_horizon", "thermo")) {
        PathLattice lat2(2.0 * lat.T, 2 * lat.n_steps, lat.eps, lat.eta, lat.kernel, lat.kappa);
        SamplerConfig sc2 = sc;
        sc2.seed = splitmix64(sc.seed ^ 0x517cc1b727220a95ULL);
        const ThermoResult res2 = thermo_integrate(lat2, sc2, nodes);
        // one-parameter 1/T fit: g(T) = g_inf + c/T  =>  g_inf = 2 g(2T) - g(T)
        extra["horizon_2T"] = {{"T", lat2.T}, {"g_hat", res2.g_hat}, {"se", res2.se}};
        extra["richardson"] = {{"g_hat", 2.0 * res2.g_hat - res.g_hat},
                               {"se", std::sqrt(4.0 * res2.se * res2.se + res.se * res.se)}};
    }
    io::write_g_estimate(out, lat, res, extra);
    io::write_manifest(out, "estimate-g", sc.seed, cfg, inputs, {"g_estimate.json"});
    std::printf("g_hat=%.6f se=%.2e (eps=%g, T=%g)\n", res.g_hat, res.se, lat.eps, lat.T);
    return 0;
}

int cmd_simulate_pekar(const json& cfg, const std::map<std::string, std::string>& inputs_in) {
    auto inputs = inputs_in;
    const fs::path out = cfg.at("out").get<std::string>();
    const json& d = block(cfg, "diffusion");

    WaveFunction psi = [&]() {
        if (d.contains("gaussian_lambda") && d.at("gaussian_lambda").is_number()) {
            const double lambda = d.at("gaussian_lambda").get<double>();
            return gaussian_state(
                std::make_shared<const RadialGrid>(RadialGrid::uniform(20.0, 2000)), lambda);
        }
        const auto dir = jget<std::string>(d, "solver_dir", "diffusion");
        if (dir.empty())
            throw MissingInputError("diffusion.solver_dir not set (and no gaussian_lambda)");
        inputs[dir + "/solution.csv"] = io::file_hash(fs::path(dir) / "solution.csv");
        inputs[dir + "/solution.json"] = io::file_hash(fs::path(dir) / "solution.json");
        return io::read_solution(dir).psi;
    }();

    const DiffusionConfig dc =
        diffusion_from(d, cfg.at("seed").get<std::uint64_t>(), cfg.at("threads").get<int>());
    const TrajectorySample traj = simulate_pekar(psi, dc);
    io::write_trajectories(out, traj, jget<int>(d, "max_stored_paths", "diffusion"));
    io::write_sde_increments(out, traj, jget<std::vector<double>>(d, "lags", "diffusion"));
    io::write_manifest(out, "simulate-pekar", dc.seed, cfg, inputs,
                       {"trajectories.csv", "increments.csv"});
    std::printf("paths=%d horizon=%g stored_dt=%g\n", dc.n_paths, dc.dt * dc.n_steps,
                traj.dt_store);
    return 0;
}

// Pooled vectors for one recorded lag (1e-9 tolerance on the key).
const std::vector<std::vector<Vector3d>>& find_lag(const io::StoredIncrements& inc, double lag,
                                                   const std::string& what) {
    for (const auto& [key, chains] : inc.by_lag)
        if (std::abs(key - lag) <= 1e-9 * std::max(1.0, std::abs(lag))) return chains;
    throw MissingInputError(what + ": no increments recorded at lag " + io::g17(lag));
}

std::vector<Vector3d> pool(const std::vector<std::vector<Vector3d>>& chains) {
    std::vector<Vector3d> all;
    for (const auto& c : chains) all.insert(all.end(), c.begin(), c.end());
    return all;
}

int cmd_compare(const json& cfg, const std::map<std::string, std::string>& inputs_in) {
    auto inputs = inputs_in;
    const fs::path out = cfg.at("out").get<std::string>();
    const json& c = block(cfg, "compare");
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    const int n_perm = jget<int>(c, "n_permutations", "compare");
    const auto max_points = static_cast<std::size_t>(jget<int>(c, "max_points", "compare"));
    const auto lags = jget<std::vector<double>>(c, "lags", "compare");

    auto track = [&](const fs::path& p) {
        inputs[p.string()] = io::file_hash(p);
        return p;
    };

    // solver reference
    const auto solver_dir = jget<std::string>(c, "solver_dir", "compare");
    if (solver_dir.empty()) throw MissingInputError("compare.solver_dir not set");
    track(fs::path(solver_dir) / "solution.csv");
    track(fs::path(solver_dir) / "solution.json");
    const PekarSolution sol = io::read_solution(solver_dir);

    // diffusion increments
    const auto pekar_dir = jget<std::string>(c, "pekar_dir", "compare");
    if (pekar_dir.empty()) throw MissingInputError("compare.pekar_dir not set");
    const io::StoredIncrements pek =
        io::read_increments(track(fs::path(pekar_dir) / "increments.csv"));

    // lattice runs, ordered by decreasing eps below
    struct Run {
        double eps = 0, T = 0, eta = 0;
        io::StoredIncrements inc;
        fs::path dir;
    };
    std::vector<Run> runs;
    for (const auto& dir_j : c.at("polaron_dirs")) {
        Run r;
        r.dir = dir_j.get<std::string>();
        const json man = io::read_manifest(r.dir);
        track(r.dir / "manifest.json");
        const json& lat = man.at("params").at("lattice");
        r.eps = lat.at("eps").get<double>();
        r.T = lat.at("T").get<double>();
        r.eta = lat.at("eta").get<double>();
        r.inc = io::read_increments(track(r.dir / "increments.csv"));
        runs.push_back(std::move(r));
    }
    if (runs.empty()) throw MissingInputError("compare.polaron_dirs is empty");
    std::sort(runs.begin(), runs.end(), [](const Run& a, const Run& b) { return a.eps > b.eps; });

    // g table
    std::vector<GRow> g_table;
    for (const auto& dir_j : c.at("g_dirs")) {
        const fs::path dir = dir_j.get<std::string>();
        track(dir / "g_estimate.json");
        const json g = io::read_g_estimate(dir);
        g_table.push_back({g.at("lattice").at("eps").get<double>(), g.at("g_hat").get<double>(),
                           g.at("se").get<double>(), 0.0});
    }
    std::sort(g_table.begin(), g_table.end(),
              [](const GRow& a, const GRow& b) { return a.eps > b.eps; });

    // sigma^2 from the stored endpoint rows (lag = 2T)
    std::vector<SigmaRow> sigma_table;
    for (const auto& r : runs) {
        const auto& chains = find_lag(r.inc, 2.0 * r.T, r.dir.string());
        std::vector<double> per_chain;
        for (const auto& vecs : chains) {
            if (vecs.size() < 2) continue;
            double s2 = 0;
            for (int k = 0; k < 3; ++k) {
                double m = 0, q = 0;
                for (const auto& v : vecs) m += v[k];
                m /= static_cast<double>(vecs.size());
                for (const auto& v : vecs) q += (v[k] - m) * (v[k] - m);
                s2 += q / (static_cast<double>(vecs.size()) - 1.0) / (2.0 * r.T) / 3.0;
            }
            per_chain.push_back(s2);
        }
        if (per_chain.size() < 2)
            throw InsufficientSamplesError("compare: need >= 2 chains for sigma^2 at eps=" +
                                           io::g17(r.eps));
        const double m = mean_of(per_chain);
        const double se =
            std::sqrt(variance_of(per_chain) / static_cast<double>(per_chain.size()));
        sigma_table.push_back({r.eps, m, se});
    }

    // distance-to-diffusion table and MSD curves
    std::vector<DistanceRow> distance_table;
    std::vector<MsdRow> msd_table;
    for (const auto& r : runs) {
        for (double lag : lags) {
            const auto& pol_chains = find_lag(r.inc, lag, r.dir.string());
            const auto pek_pool = pool(find_lag(pek, lag, pekar_dir));
            IncrementSample a{lag, pool(pol_chains), "polaron"};
            IncrementSample b{lag, pek_pool, "pekar"};
            const TwoSampleResult t = two_sample_distance(a, b, n_perm, max_points,
                                                          splitmix64(seed ^ (std::uint64_t)(lag * 8192) ^
                                                                     (std::uint64_t)(r.eps * 65536)));
            // spread of per-chain distances to the same diffusion sample
            std::vector<double> per_chain;
            for (const auto& ch : pol_chains) {
                IncrementSample ac{lag, ch, "polaron"};
                per_chain.push_back(two_sample_distance(ac, b, 0, max_points, seed).energy_distance);
            }
            const double se =
                per_chain.size() > 1
                    ? std::sqrt(variance_of(per_chain) / static_cast<double>(per_chain.size()))
                    : 0.0;
            distance_table.push_back({r.eps, lag, t.energy_distance, se, t.p_energy});
        }
        std::vector<IncrementSample> pol_samples;
        for (const auto& [lag, chains] : r.inc.by_lag)
            pol_samples.push_back({lag, pool(chains), "polaron_eps=" + io::g17(r.eps)});
        for (const MsdPoint& p : msd_curve(pol_samples))
            msd_table.push_back({"polaron_eps=" + io::g17(r.eps), p.lag, p.msd, p.se});
    }
    std::vector<IncrementSample> pek_samples;
    for (const auto& [lag, chains] : pek.by_lag) pek_samples.push_back({lag, pool(chains), "pekar"});
    for (const MsdPoint& p : msd_curve(pek_samples)) msd_table.push_back({"pekar", p.lag, p.msd, p.se});

    // localization: the smallest-eps run's occupation inside a fixed window
    // around the path center (the stationary local cloud) against the
    // full-horizon Brownian occupation (the mass-escape control), both under
    // the run's own regularized Coulomb kernel.
    const Run& finest = runs.back();
    const double loc_window = jget<double>(c, "loc_window", "compare");
    const auto pol_occ = io::read_occupation(track(finest.dir / "occupation.csv"));
    const auto brownian_dir = jget<std::string>(c, "brownian_dir", "compare");
    if (brownian_dir.empty()) throw MissingInputError("compare.brownian_dir not set");
    const auto bro_occ = io::read_occupation(track(fs::path(brownian_dir) / "occupation.csv"));
    const LocalizationKernel V = LocalizationKernel::coulomb(finest.eta);
    const double loc_pol = localization_functional(pol_occ.window(loc_window), V, 10000, seed);
    const double loc_bro = localization_functional(bro_occ.pts, V, 10000, seed);

    const ComparisonReport rep = assemble_report(sol.g, sol.C, sol.K, std::move(g_table),
                                                 std::move(sigma_table), std::move(distance_table),
                                                 std::move(msd_table), loc_pol, loc_bro);
    io::write_report(out, rep, seed);
    io::write_manifest(out, "compare", seed, cfg, inputs, {"report.json", "report.csv"});

    std::printf("flag g_gap_decreasing=%d\n", rep.flags.g_gap_decreasing ? 1 : 0);
    std::printf("flag sigma_in_unit_interval=%d\n", rep.flags.sigma_in_unit_interval ? 1 : 0);
    std::printf("flag distance_decreasing=%d\n", rep.flags.distance_decreasing ? 1 : 0);
    std::printf("flag localization_separated=%d\n", rep.flags.localization_separated ? 1 : 0);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"polaron path-measure laboratory"};
    app.require_subcommand(1);

    Common common;
    std::string chosen;
    const std::vector<std::string> names = {"solve-pekar", "sample-polaron", "estimate-g",
                                            "simulate-pekar", "compare"};
    const std::vector<std::string> descriptions = {
        "solve the variational ground-state problem",
        "run the lattice path sampler",
        "thermodynamic-integration estimate of the coupling integral",
        "simulate the psi-ground-state diffusion",
        "cross-ensemble comparison report",
    };
    for (std::size_t i = 0; i < names.size(); ++i) {
        CLI::App* sub = app.add_subcommand(names[i], descriptions[i]);
        sub->add_option("--config", common.config_path, "JSON config file");
        sub->add_option("--seed", common.seed, "root RNG seed")
            ->each([&](const std::string&) { common.seed_given = true; });
        sub->add_option("--threads", common.threads, "worker thread cap")
            ->each([&](const std::string&) { common.threads_given = true; });
        sub->add_option("--out", common.out, "output directory")
            ->each([&](const std::string&) { common.out_given = true; });
        sub->add_option("--set", common.sets, "override a config key, e.g. lattice.eps=0.5");
        sub->callback([&chosen, name = names[i]]() { chosen = name; });
    }

    CLI11_PARSE(app, argc, argv);

    try {
        std::map<std::string, std::string> inputs;
        const json cfg = resolve(common, chosen.c_str(), &inputs);
        if (chosen == "solve-pekar") return cmd_solve_pekar(cfg, inputs);
        if (chosen == "sample-polaron") return cmd_sample_polaron(cfg, inputs);
        if (chosen == "estimate-g") return cmd_estimate_g(cfg, inputs);
        if (chosen == "simulate-pekar") return cmd_simulate_pekar(cfg, inputs);
        if (chosen == "compare") return cmd_compare(cfg, inputs);
        std::fprintf(stderr, "error: no subcommand selected\n");
        return 1;
    } catch (const MissingInputError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const NoConvergenceError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
