#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>

#include "polaron/errors.hpp"

namespace polaron {

using Eigen::Matrix3Xd;
using Eigen::Vector3d;

enum class Kernel { polaron, mean_field };

// Time lattice t_i = -T + i dt, i = 0..N, dt = 2T/N, with trapezoid weights
// and the pair-interaction kernel of the Gibbs density exp(kappa * H):
//   polaron:    H = (eps/2) sum_{i != j} w_i w_j exp(-eps |t_i - t_j|) V_eta(x_i - x_j)
//   mean_field: H = 1/(2T)  sum_{i != j} w_i w_j               V_eta(x_i - x_j)
// with V_eta(x) = (eta^2 + |x|^2)^{-1/2}. The diagonal i = j is excluded.
struct PathLattice {
    double T = 1;
    int n_steps = 2; // N, even so the center node sits at t = 0
    double eps = 1;
    double eta = 0.1;
    Kernel kernel = Kernel::polaron;
    double kappa = 1; // coupling multiplier in [0, 1]; only the sweeps read it

    PathLattice() = default;
    PathLattice(double T_, int n_steps_, double eps_, double eta_, Kernel kernel_,
                double kappa_);

    int n_nodes() const { return n_steps + 1; }
    int pinned_node() const { return n_steps / 2; }
    double dt() const { return 2.0 * T / n_steps; }
    double time_of(int i) const { return -T + dt() * i; }
    double trapezoid_weight(int i) const { return (i == 0 || i == n_steps) ? 0.5 * dt() : dt(); }

    // prefactor of V_eta(x_i - x_j) in H for an ordered pair i != j
    double pair_coefficient(int i, int j) const;

    double v_eta(const Vector3d& diff) const;

    void validate() const;
};

// Path configuration on the lattice: positions x_0..x_N with the center node
// pinned at the origin, plus the cached interaction energy.
struct PathState {
    Matrix3Xd x;      // 3 x (N+1)
    double energy = 0;

    Vector3d endpoint_displacement() const { return x.col(x.cols() - 1) - x.col(0); }
};

// H by direct double sum over ordered pairs; the reference implementation the
// sweeps are checked against. eta = 0 is allowed as long as all pairwise
// distances are nonzero (SingularPairError otherwise).
double interaction_energy(const PathState& path, const PathLattice& lat);

// Energy change from moving node i to x_new, via the O(N) row update.
double delta_energy(const PathState& path, const PathLattice& lat, int i, const Vector3d& x_new);

// Fresh prior draw: iid N(0, dt I) increments accumulated from the pinned node.
PathState prior_path(const PathLattice& lat, std::mt19937_64& rng);

// Rebuild positions from increments inc_k = x_{k+1} - x_k, re-pinning the
// center node at the origin.
void rebuild_from_increments(const PathLattice& lat, const Matrix3Xd& increments, PathState& out);

} // namespace polaron
