#include "polaron/lattice.hpp"

#include <cmath>

namespace polaron {

PathLattice::PathLattice(double T_, int n_steps_, double eps_, double eta_, Kernel kernel_,
                         double kappa_)
    : T(T_), n_steps(n_steps_), eps(eps_), eta(eta_), kernel(kernel_), kappa(kappa_) {
    validate();
}

void PathLattice::validate() const {
    if (!(T > 0) || !std::isfinite(T)) throw ConfigError("lattice: T must be positive");
    if (n_steps < 2 || n_steps % 2 != 0)
        throw ConfigError("lattice: n_steps must be even and at least 2");
    if (!(eps > 0)) throw ConfigError("lattice: eps must be positive");
    if (eta < 0) throw ConfigError("lattice: eta must be nonnegative");
    if (kappa < 0 || kappa > 1) throw ConfigError("lattice: kappa must lie in [0, 1]");
}

double PathLattice::pair_coefficient(int i, int j) const {
    const double w = trapezoid_weight(i) * trapezoid_weight(j);
    if (kernel == Kernel::polaron)
        return 0.5 * eps * w * std::exp(-eps * std::abs(time_of(i) - time_of(j)));
    return w / (2.0 * T); // time-averaged kernel, per ordered pair
}

double PathLattice::v_eta(const Vector3d& diff) const {
    const double d2 = eta * eta + diff.squaredNorm();
    if (d2 <= 0)
        throw SingularPairError("v_eta: coincident pair with eta = 0");
    return 1.0 / std::sqrt(d2);
}

double interaction_energy(const PathState& path, const PathLattice& lat) {
    const int n = lat.n_nodes();
    if (path.x.cols() != n) throw ConfigError("interaction_energy: path/lattice size mismatch");
    double h = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            h += 2.0 * lat.pair_coefficient(i, j) * lat.v_eta(path.x.col(i) - path.x.col(j));
    return h;
}

double delta_energy(const PathState& path, const PathLattice& lat, int i,
                    const Vector3d& x_new) {
    const int n = lat.n_nodes();
    if (i < 0 || i >= n) throw ConfigError("delta_energy: node index out of range");
    if (i == lat.pinned_node()) throw PinnedNodeError("delta_energy: node is pinned");
    double dh = 0;
    for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double c = 2.0 * lat.pair_coefficient(i, j);
        dh += c * (lat.v_eta(x_new - path.x.col(j)) - lat.v_eta(path.x.col(i) - path.x.col(j)));
    }
    return dh;
}

PathState prior_path(const PathLattice& lat, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, std::sqrt(lat.dt()));
    Matrix3Xd inc(3, lat.n_steps);
    for (int k = 0; k < lat.n_steps; ++k)
        for (int c = 0; c < 3; ++c) inc(c, k) = gauss(rng);
    PathState out;
    rebuild_from_increments(lat, inc, out);
    out.energy = interaction_energy(out, lat);
    return out;
}

void rebuild_from_increments(const PathLattice& lat, const Matrix3Xd& increments,
                             PathState& out) {
    const int n = lat.n_nodes();
    if (increments.cols() != lat.n_steps)
        throw ConfigError("rebuild_from_increments: expected one increment per step");
    const int pin = lat.pinned_node();
    out.x.resize(3, n);
    out.x.col(pin).setZero();
    for (int i = pin + 1; i < n; ++i) out.x.col(i) = out.x.col(i - 1) + increments.col(i - 1);
    for (int i = pin - 1; i >= 0; --i) out.x.col(i) = out.x.col(i + 1) - increments.col(i);
}

} // namespace polaron
