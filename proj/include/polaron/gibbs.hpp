#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "polaron/lattice.hpp"

namespace polaron {

using Eigen::ArrayXd;

// Cached pair coefficients 2 * pair_coefficient(i, j); the sweeps use it to
// avoid re-evaluating the exponential kernel.
struct PairTable {
    explicit PairTable(const PathLattice& lat);
    Eigen::MatrixXd c2;
    double energy(const PathLattice& lat, const Matrix3Xd& x) const;
    double delta(const PathLattice& lat, const Matrix3Xd& x, int i, const Vector3d& x_new) const;
};

// Global preconditioned Crank-Nicolson move in increment coordinates:
// inc' = sqrt(1 - beta^2) inc + beta xi, xi iid N(0, dt I), rebuilt from the
// pinned node and accepted with min(1, exp(kappa dH)). Preserves the kappa = 0
// prior exactly (acceptance = 1). Returns whether the proposal was accepted.
bool pcn_sweep(PathState& path, const PathLattice& lat, double beta, std::mt19937_64& rng,
               const PairTable* table = nullptr);

// One systematic scan of single-site Gaussian-bridge moves (resample x_i from
// its prior conditional given the neighbors, Metropolis-corrected with
// exp(kappa dH)). Returns the acceptance rate of the scan.
double local_sweep(PathState& path, const PathLattice& lat, std::mt19937_64& rng,
                   const PairTable* table = nullptr);

struct SamplerConfig {
    double pcn_beta = 0.25;
    double local_width = 1.0; // reserved; the bridge proposal is parameter-free
    int n_sweeps = 20000;     // post-burn-in sweeps
    int burn_in = 2000;
    int thinning = 10;        // record observables every `thinning`-th sweep
    int n_chains = 4;
    std::vector<double> lags{0.5, 1.0, 2.0, 3.0, 5.0}; // increment lags (time units)
    int occupation_points = 64; // positions kept per recorded sweep
    std::uint64_t seed = 1;
    int threads = 1;

    void validate(const PathLattice& lat) const;
};

struct ChainTrace {
    ArrayXd energy;     // H after every sweep, burn-in included
    ArrayXd acc_pcn;    // per-sweep acceptance indicator
    ArrayXd acc_local;  // per-sweep local acceptance rate
    double accept_pcn = 0;   // post-burn-in means
    double accept_local = 0;
    std::vector<Vector3d> endpoints; // omega(T) - omega(-T), thinned
    std::map<double, std::vector<Vector3d>> increments; // lag -> nonoverlapping increments
    std::vector<int> occupation_nodes; // node ids recorded per frame (pin excluded)
    std::vector<std::vector<Vector3d>> occupation_frames; // aligned with occupation_nodes
};

struct ChainOutput {
    PathLattice lattice;
    SamplerConfig config;
    std::vector<ChainTrace> chains;
};

// Run n_chains independent chains (streams derived from (seed, chain id)),
// alternating one pCN and one local sweep per sweep index.
ChainOutput sample_polaron(const PathLattice& lat, const SamplerConfig& cfg);

// Gauss-Legendre nodes/weights on [0, 1].
void gauss_legendre_01(int n, ArrayXd& nodes, ArrayXd& weights);

// Thermodynamic integration of the coupling:
//   g_hat = 1/(2T) int_0^1 E_kappa[H] dkappa,
// quadrature over kappa nodes, one sampler run per node, errors from the
// between-chain spread of the per-chain integral estimates.
struct ThermoResult {
    ArrayXd kappa_nodes;
    ArrayXd weights;
    ArrayXd integrand;      // per-node mean of H/(2T)
    ArrayXd integrand_se;   // between-chain standard error
    ArrayXd per_chain;      // per-chain integral estimates I_c
    double g_hat = 0;
    double se = 0;
};
ThermoResult thermo_integrate(const PathLattice& lat, const SamplerConfig& cfg,
                              int n_kappa_nodes = 8);

// Variance estimate of one coordinate of (omega(T) - omega(-T)) / sqrt(2T),
// averaged over the three coordinates; standard error from the between-chain
// spread. Requires at least two chains.
struct CltEstimate {
    double sigma2 = 0;
    double se = 0;
    Eigen::Vector3d per_coord{0, 0, 0};
};
CltEstimate clt_variance(const ChainOutput& out);

// --- small chain statistics -------------------------------------------------

double mean_of(const ArrayXd& x);
double variance_of(const ArrayXd& x); // unbiased
double mean_of(const std::vector<double>& x);
double variance_of(const std::vector<double>& x);
double batch_means_se(const ArrayXd& x, int n_batches = 20);

// Geweke split diagnostic: z-score between the first 10% and last 50% of the
// trace with batch-means standard errors. |z| < 1.96 passes at 5%.
double geweke_z(const ArrayXd& trace);

} // namespace polaron
