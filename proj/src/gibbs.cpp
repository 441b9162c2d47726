#include "polaron/gibbs.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "polaron/rng.hpp"

namespace polaron {

PairTable::PairTable(const PathLattice& lat) {
    const int n = lat.n_nodes();
    c2.setZero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) c2(i, j) = 2.0 * lat.pair_coefficient(i, j);
}

double PairTable::energy(const PathLattice& lat, const Matrix3Xd& x) const {
    const int n = static_cast<int>(x.cols());
    double h = 0;
    for (int j = 1; j < n; ++j)
        for (int i = 0; i < j; ++i) h += c2(i, j) * lat.v_eta(x.col(i) - x.col(j));
    return h;
}

double PairTable::delta(const PathLattice& lat, const Matrix3Xd& x, int i,
                        const Vector3d& x_new) const {
    const int n = static_cast<int>(x.cols());
    double dh = 0;
    const auto col = c2.col(i);
    for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        dh += col[j] * (lat.v_eta(x_new - x.col(j)) - lat.v_eta(x.col(i) - x.col(j)));
    }
    return dh;
}

bool pcn_sweep(PathState& path, const PathLattice& lat, double beta, std::mt19937_64& rng,
               const PairTable* table) {
    if (!(beta > 0) || beta > 1) throw ConfigError("pcn_sweep: beta must be in (0, 1]");
    const int N = lat.n_steps;
    std::normal_distribution<double> gauss(0.0, std::sqrt(lat.dt()));
    const double keep = std::sqrt(1.0 - beta * beta);

    Matrix3Xd inc(3, N);
    for (int k = 0; k < N; ++k) {
        const Vector3d cur = path.x.col(k + 1) - path.x.col(k);
        for (int c = 0; c < 3; ++c) inc(c, k) = keep * cur[c] + beta * gauss(rng);
    }
    PathState cand;
    rebuild_from_increments(lat, inc, cand);
    cand.energy = table ? table->energy(lat, cand.x) : interaction_energy(cand, lat);

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double log_u = std::log(unif(rng));
    if (log_u < lat.kappa * (cand.energy - path.energy)) {
        path = std::move(cand);
        return true;
    }
    return false;
}

double local_sweep(PathState& path, const PathLattice& lat, std::mt19937_64& rng,
                   const PairTable* table) {
    const int N = lat.n_steps;
    const int pin = lat.pinned_node();
    const double dt = lat.dt();
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    int accepted = 0;
    for (int i = 0; i <= N; ++i) {
        if (i == pin) continue;
        Vector3d mean;
        double sd;
        if (i == 0) {
            mean = path.x.col(1);
            sd = std::sqrt(dt);
        } else if (i == N) {
            mean = path.x.col(N - 1);
            sd = std::sqrt(dt);
        } else {
            mean = 0.5 * (path.x.col(i - 1) + path.x.col(i + 1));
            sd = std::sqrt(0.5 * dt);
        }
        Vector3d prop;
        for (int c = 0; c < 3; ++c) prop[c] = mean[c] + sd * gauss(rng);

        const double dh = table ? table->delta(lat, path.x, i, prop)
                                : delta_energy(path, lat, i, prop);
        if (std::log(unif(rng)) < lat.kappa * dh) {
            path.x.col(i) = prop;
            path.energy += dh;
            ++accepted;
        }
    }
    return static_cast<double>(accepted) / N;
}

void SamplerConfig::validate(const PathLattice& lat) const {
    lat.validate();
    if (!(pcn_beta > 0) || pcn_beta > 1) throw ConfigError("sampler: pcn_beta must be in (0, 1]");
    if (!(local_width > 0)) throw ConfigError("sampler: local_width must be positive");
    if (n_sweeps < 1) throw ConfigError("sampler: n_sweeps must be positive");
    if (burn_in < 0) throw ConfigError("sampler: burn_in must be nonnegative");
    if (thinning < 1) throw ConfigError("sampler: thinning must be positive");
    if (n_chains < 1) throw ConfigError("sampler: n_chains must be positive");
    if (occupation_points < 1) throw ConfigError("sampler: occupation_points must be positive");
    if (threads < 1) throw ConfigError("sampler: threads must be positive");
    for (double lag : lags) {
        const long L = std::lround(lag / lat.dt());
        if (L < 1 || L > lat.n_steps || std::abs(L * lat.dt() - lag) > 1e-9 * std::max(1.0, lag))
            throw ConfigError("sampler: each lag must be a multiple of dt within [dt, 2T]");
    }
}

namespace {

void run_chain(const PathLattice& lat, const SamplerConfig& cfg, const PairTable& table,
               int chain_id, ChainTrace& out) {
    auto rng = derive_stream(cfg.seed, static_cast<std::uint64_t>(chain_id));
    PathState path = prior_path(lat, rng);

    const int total = cfg.burn_in + cfg.n_sweeps;
    out.energy.resize(total);
    out.acc_pcn.resize(total);
    out.acc_local.resize(total);

    std::vector<long> lag_steps;
    for (double lag : cfg.lags) lag_steps.push_back(std::lround(lag / lat.dt()));

    // Occupation nodes: a whole-path stride plus a dense block around the
    // pinned node (whose own position is a gauge fixture, so it is skipped).
    // The dense block is what windowed localization estimates feed on.
    const int occ_stride = std::max(1, lat.n_nodes() / cfg.occupation_points);
    const int pin = lat.pinned_node();
    const int halo = std::max(2, cfg.occupation_points / 4);
    out.occupation_nodes.clear();
    for (int i = 0; i < lat.n_nodes(); ++i) {
        if (i == pin) continue;
        if (i % occ_stride == 0 || std::abs(i - pin) <= halo) out.occupation_nodes.push_back(i);
    }

    for (int s = 0; s < total; ++s) {
        const bool acc_p = pcn_sweep(path, lat, cfg.pcn_beta, rng, &table);
        const double acc_l = local_sweep(path, lat, rng, &table);
        if ((s & 1023) == 1023) path.energy = table.energy(lat, path.x); // refresh cache
#ifndef NDEBUG
        {
            const double full = table.energy(lat, path.x);
            if (std::abs(full - path.energy) > 1e-8 * std::max(1.0, std::abs(full)))
                throw Error("sampler: cached energy drifted from full recomputation");
            path.energy = full;
        }
#endif
        out.energy[s] = path.energy;
        out.acc_pcn[s] = acc_p ? 1.0 : 0.0;
        out.acc_local[s] = acc_l;

        if (s < cfg.burn_in || (s - cfg.burn_in) % cfg.thinning != 0) continue;
        out.endpoints.push_back(path.endpoint_displacement());
        for (size_t li = 0; li < lag_steps.size(); ++li) {
            auto& bucket = out.increments[cfg.lags[li]];
            const long L = lag_steps[li];
            for (long i = 0; i + L <= lat.n_steps; i += L)
                bucket.push_back(path.x.col(i + L) - path.x.col(i));
        }
        std::vector<Vector3d> frame;
        frame.reserve(out.occupation_nodes.size());
        for (int i : out.occupation_nodes) frame.push_back(path.x.col(i));
        out.occupation_frames.push_back(std::move(frame));
    }
    out.accept_pcn = out.acc_pcn.tail(cfg.n_sweeps).mean();
    out.accept_local = out.acc_local.tail(cfg.n_sweeps).mean();
}

} // namespace

ChainOutput sample_polaron(const PathLattice& lat, const SamplerConfig& cfg) {
    cfg.validate(lat);
    const PairTable table(lat);
    ChainOutput out{lat, cfg, std::vector<ChainTrace>(cfg.n_chains)};

    const int workers = std::min(cfg.threads, cfg.n_chains);
    if (workers <= 1) {
        for (int c = 0; c < cfg.n_chains; ++c) run_chain(lat, cfg, table, c, out.chains[c]);
        return out;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const int c = next.fetch_add(1);
                if (c >= cfg.n_chains) return;
                run_chain(lat, cfg, table, c, out.chains[c]);
            }
        });
    }
    for (auto& t : pool) t.join();
    return out;
}

void gauss_legendre_01(int n, ArrayXd& nodes, ArrayXd& weights) {
    if (n < 1) throw ConfigError("gauss_legendre_01: need at least one node");
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double b = k / std::sqrt(4.0 * k * k - 1.0);
        J(k, k - 1) = J(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    nodes.resize(n);
    weights.resize(n);
    for (int k = 0; k < n; ++k) {
        nodes[k] = 0.5 * (es.eigenvalues()[k] + 1.0);
        const double v0 = es.eigenvectors()(0, k);
        weights[k] = v0 * v0; // 2 v0^2 on [-1,1], halved by the affine map
    }
}

ThermoResult thermo_integrate(const PathLattice& lat, const SamplerConfig& cfg,
                              int n_kappa_nodes) {
    ThermoResult res;
    gauss_legendre_01(n_kappa_nodes, res.kappa_nodes, res.weights);
    res.integrand.resize(n_kappa_nodes);
    res.integrand_se.resize(n_kappa_nodes);
    res.per_chain = ArrayXd::Zero(cfg.n_chains);

    Eigen::MatrixXd chain_means(cfg.n_chains, n_kappa_nodes);
    for (int k = 0; k < n_kappa_nodes; ++k) {
        PathLattice lk = lat;
        lk.kappa = res.kappa_nodes[k];
        SamplerConfig ck = cfg;
        ck.lags.clear();
        ck.occupation_points = 1;
        ck.seed = splitmix64(cfg.seed ^ (0x9E3779B97F4A7C15ULL + k));
        const ChainOutput run = sample_polaron(lk, ck);
        for (int c = 0; c < cfg.n_chains; ++c)
            chain_means(c, k) = run.chains[c].energy.tail(cfg.n_sweeps).mean() / (2.0 * lat.T);
        ArrayXd col = chain_means.col(k).array();
        res.integrand[k] = mean_of(col);
        res.integrand_se[k] =
            cfg.n_chains > 1 ? std::sqrt(variance_of(col) / cfg.n_chains) : 0.0;
    }
    for (int c = 0; c < cfg.n_chains; ++c)
        res.per_chain[c] = (chain_means.row(c).array() * res.weights.transpose()).sum();
    res.g_hat = mean_of(res.per_chain);
    res.se = cfg.n_chains > 1 ? std::sqrt(variance_of(res.per_chain) / cfg.n_chains) : 0.0;
    return res;
}

CltEstimate clt_variance(const ChainOutput& out) {
    const int C = static_cast<int>(out.chains.size());
    if (C < 2) throw InsufficientSamplesError("clt_variance: needs at least two chains");
    const double scale = 2.0 * out.lattice.T;

    CltEstimate est;
    ArrayXd per_chain(C);
    Eigen::Vector3d coord_acc{0, 0, 0};
    for (int c = 0; c < C; ++c) {
        const auto& eps = out.chains[c].endpoints;
        if (eps.size() < 2)
            throw InsufficientSamplesError("clt_variance: chain has fewer than two samples");
        Eigen::Vector3d m = Eigen::Vector3d::Zero(), s2 = Eigen::Vector3d::Zero();
        for (const auto& v : eps) m += v;
        m /= static_cast<double>(eps.size());
        for (const auto& v : eps) s2 += (v - m).cwiseAbs2();
        s2 /= (static_cast<double>(eps.size()) - 1.0) * scale;
        per_chain[c] = s2.mean();
        coord_acc += s2;
    }
    est.sigma2 = mean_of(per_chain);
    est.se = std::sqrt(variance_of(per_chain) / C);
    est.per_coord = coord_acc / C;
    return est;
}

double mean_of(const ArrayXd& x) { return x.mean(); }

double variance_of(const ArrayXd& x) {
    const auto n = x.size();
    if (n < 2) throw InsufficientSamplesError("variance_of: needs at least two values");
    const double m = x.mean();
    return (x - m).square().sum() / static_cast<double>(n - 1);
}

double mean_of(const std::vector<double>& x) {
    return mean_of(ArrayXd(Eigen::Map<const ArrayXd>(x.data(), static_cast<Eigen::Index>(x.size()))));
}

double variance_of(const std::vector<double>& x) {
    return variance_of(
        ArrayXd(Eigen::Map<const ArrayXd>(x.data(), static_cast<Eigen::Index>(x.size()))));
}

double batch_means_se(const ArrayXd& x, int n_batches) {
    const auto n = x.size();
    if (n < 2 * n_batches) n_batches = std::max(2, static_cast<int>(n / 2));
    const auto m = n / n_batches;
    ArrayXd means(n_batches);
    for (int b = 0; b < n_batches; ++b) means[b] = x.segment(b * m, m).mean();
    return std::sqrt(variance_of(means) / n_batches);
}

double geweke_z(const ArrayXd& trace) {
    const auto n = trace.size();
    if (n < 40) throw InsufficientSamplesError("geweke_z: trace too short");
    const auto na = std::max<Eigen::Index>(10, n / 10);
    const auto nb = n / 2;
    const ArrayXd a = trace.head(na);
    const ArrayXd b = trace.tail(nb);
    const double sea = batch_means_se(a, 10);
    const double seb = batch_means_se(b, 20);
    return (a.mean() - b.mean()) / std::sqrt(sea * sea + seb * seb);
}

} // namespace polaron
