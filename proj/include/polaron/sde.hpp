#pragma once

#include "polaron/diagnostics.hpp"
#include "polaron/pekar.hpp"

namespace polaron {

// Radial fields of a wave function packaged for pathwise evaluation:
// b(r) = (log psi)', L(r) = (log psi)'' + (2/r)(log psi)'. Below the first
// mesh node the drift closes linearly through the origin and L freezes at its
// first-node value (the continuum limit is 3 (log psi)''(0)); beyond r_max the
// exponential tail gives b = -kappa - 1/r and L = -2 kappa / r - 1/r^2.
class PsiFields {
  public:
    PsiFields(const WaveFunction& psi, double drift_clamp = 50.0);

    double log_psi(double r) const;
    double drift(double r) const; // clamped at +/- drift_clamp
    double laplace_log(double r) const;
    Vector3d drift_vec(const Vector3d& x) const;

    double r_first() const { return r_first_; }
    double r_max() const { return r_max_; }

  private:
    RadialFunction log_psi_, b_, lap_;
    std::optional<ExponentialTail> tail_;
    double r_first_ = 0, r_max_ = 0, clamp_ = 50.0;
    double b_first_ = 0, lap_first_ = 0;
};

struct DiffusionConfig {
    double dt = 1e-3;
    int n_steps = 1000;
    int n_paths = 1000;
    int store_stride = 1; // keep every k-th point; must divide n_steps
    double drift_clamp = 50.0;
    enum class Init { stationary, origin } init = Init::stationary;
    bool zero_drift = false; // Brownian override, used for controls
    std::uint64_t seed = 1;
    int threads = 1;

    void validate() const;
};

struct TrajectorySample {
    double dt_fine = 0;  // integration step
    double dt_store = 0; // spacing of stored points
    std::vector<Matrix3Xd> paths;
    std::string source;
};

// Radius from the inverse CDF of 4 pi r^2 psi^2, direction uniform on the
// sphere.
Vector3d sample_stationary_start(const WaveFunction& psi, std::mt19937_64& rng);

// Euler-Maruyama for dX = b(|X|) X/|X| dt + dW with per-path streams derived
// from (seed, path id).
TrajectorySample simulate_pekar(const WaveFunction& psi, const DiffusionConfig& cfg);

// One path at full resolution (n_steps + 1 columns).
Matrix3Xd simulate_path(const PsiFields& fields, bool zero_drift, const Vector3d& x0,
                        int n_steps, double dt, std::mt19937_64& rng);

// Pathwise log-density of the psi-diffusion against Brownian motion over the
// path's time span (left-point discretization):
//   G = log psi(X_end) - log psi(X_0)
//       - 1/2 sum_k [ (lap log psi)(X_k) + |grad log psi|^2(X_k) ] dt.
// exp(G) has Brownian expectation 1 when X_0 ~ psi^2.
double girsanov_log_density(const Matrix3Xd& path, const PsiFields& fields, double dt);
double girsanov_log_density(const Matrix3Xd& path, const WaveFunction& psi, double dt);

// Non-overlapping increments at the requested lags (time units). Lags must be
// multiples of dt_store; lag 0 yields all-zero vectors; lags beyond the path
// span raise LagTooLongError.
std::vector<IncrementSample> increments(const TrajectorySample& traj,
                                        const std::vector<double>& lags);

} // namespace polaron
