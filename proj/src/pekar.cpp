#include "polaron/pekar.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <vector>

namespace polaron {

WaveFunction normalize(const RadialFunction& f) {
    const ArrayXd& v = f.values();
    if (!v.isFinite().all()) throw NonFiniteError("normalize: non-finite input values");
    ArrayXd a = v.abs();
    const double nrm2 = f.grid().shell_integral(a * a);
    if (nrm2 <= 0) throw AllZeroError("normalize: input is identically zero");
    RadialFunction out(f.grid_ptr(), a / std::sqrt(nrm2));
    try {
        out.attach_tail(fit_exponential_tail(out));
    } catch (const InsufficientSamplesError&) {
        // no usable far field; extrapolation falls back to the last node value
    }
    return WaveFunction(std::move(out));
}

WaveFunction normalize(GridPtr grid, ArrayXd values) {
    return normalize(RadialFunction(std::move(grid), std::move(values)));
}

WaveFunction WaveFunction::from_stored(GridPtr grid, ArrayXd values,
                                       std::optional<ExponentialTail> tail) {
    if (!values.isFinite().all())
        throw NonFiniteError("WaveFunction::from_stored: non-finite values");
    if ((values < 0).any())
        throw NonPositivePsiError("WaveFunction::from_stored: negative values");
    RadialFunction f(std::move(grid), std::move(values));
    const double nrm2 = f.grid().shell_integral(f.values().square());
    if (std::abs(nrm2 - 1.0) > 1e-8)
        throw ConfigError("WaveFunction::from_stored: values are not normalized");
    if (tail) f.attach_tail(*tail);
    return WaveFunction(std::move(f));
}

WaveFunction gaussian_state(GridPtr grid, double lambda) {
    ArrayXd v = (-0.5 * lambda * grid->nodes().square()).exp();
    return normalize(std::move(grid), std::move(v));
}

RadialFunction hartree_potential(const WaveFunction& psi, bool verify) {
    const RadialGrid& grid = psi.grid();
    const ArrayXd rho = psi.values().square();
    const ArrayXd q = 4.0 * M_PI * grid.cumulative_moment(rho, 2);
    const ArrayXd t = 4.0 * M_PI * grid.cumulative_moment(rho, 1);
    const double t_tot = t[t.size() - 1];
    ArrayXd phi = q / grid.nodes() + (t_tot - t);

    if (verify) {
        const int m = grid.n_points() / 2;
        const double rm = grid.nodes()[m];
        double direct = 0;
        for (int j = 0; j < grid.n_points(); ++j)
            direct += grid.weights()[j] * rho[j] / std::max(rm, grid.nodes()[j]);
        if (std::abs(phi[m] - direct) > 1e-4 * std::abs(direct))
            throw GridTooCoarseError("hartree_potential: shell integrals disagree with the "
                                     "two-shell reference kernel");
    }
    return RadialFunction(psi.grid_ptr(), std::move(phi));
}

EnergyBreakdown energy(const WaveFunction& psi) {
    const RadialGrid& grid = psi.grid();
    const ArrayXd phi = hartree_potential(psi, false).values();
    const ArrayXd dpsi = grid.derivative(psi.values());
    EnergyBreakdown e;
    e.C = grid.shell_integral(psi.values().square() * phi);
    e.K = 0.5 * grid.shell_integral(dpsi.square());
    e.g = e.C - e.K;
    return e;
}

namespace {

// solve tridiagonal (sub, diag, sup) x = rhs in place
void thomas_solve(std::vector<double>& sub, std::vector<double>& diag, std::vector<double>& sup,
                  ArrayXd& rhs) {
    const int n = static_cast<int>(diag.size());
    for (int i = 1; i < n; ++i) {
        const double m = sub[i] / diag[i - 1];
        diag[i] -= m * sup[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for (int i = n - 2; i >= 0; --i) rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
}

struct Tridiag {
    // rows i: sub[i] * x_{i-1} + diag[i] * x_i + sup[i] * x_{i+1}
    std::vector<double> sub, diag, sup;
    ArrayXd apply(const ArrayXd& x) const {
        const int n = static_cast<int>(diag.size());
        ArrayXd y(n);
        for (int i = 0; i < n; ++i) {
            double v = diag[i] * x[i];
            if (i > 0) v += sub[i] * x[i - 1];
            if (i + 1 < n) v += sup[i] * x[i + 1];
            y[i] = v;
        }
        return y;
    }
};

} // namespace

GroundState ground_state_radial(const RadialGrid& grid, const ArrayXd& W,
                                const ArrayXd* warm_start, int max_iter) {
    const int n = grid.n_points();
    if (W.size() != n) throw ConfigError("ground_state_radial: potential size mismatch");
    if (!W.isFinite().all()) throw NonFiniteError("ground_state_radial: non-finite potential");
    const ArrayXd& r = grid.nodes();

    // A u = e B u with Dirichlet ghosts at r = 0 and one spacing past r_max
    Tridiag A{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
    Tridiag B{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
    if (grid.is_uniform()) {
        // Numerov weighting: -1/2 T u + B (W u) = e B u, B = I + (h^2/12) T
        const double h2 = grid.step() * grid.step();
        for (int i = 0; i < n; ++i) {
            A.diag[i] = 1.0 / h2 + (10.0 / 12.0) * W[i];
            if (i > 0) A.sub[i] = -0.5 / h2 + W[i - 1] / 12.0;
            if (i + 1 < n) A.sup[i] = -0.5 / h2 + W[i + 1] / 12.0;
            B.diag[i] = 10.0 / 12.0;
            if (i > 0) B.sub[i] = 1.0 / 12.0;
            if (i + 1 < n) B.sup[i] = 1.0 / 12.0;
        }
    } else {
        // plain second difference on the nonuniform mesh; B = I
        const double ratio = r[1] / r[0];
        for (int i = 0; i < n; ++i) {
            const double hm = (i > 0) ? r[i] - r[i - 1] : r[i];
            const double hp = (i + 1 < n) ? r[i + 1] - r[i] : r[i] * (ratio - 1.0);
            A.diag[i] = 1.0 / (hm * hp) + W[i];
            if (i > 0) A.sub[i] = -1.0 / (hm * (hm + hp));
            if (i + 1 < n) A.sup[i] = -1.0 / (hp * (hm + hp));
            B.diag[i] = 1.0;
        }
    }

    ArrayXd u;
    if (warm_start && warm_start->size() == n)
        u = *warm_start;
    else
        u = r * (-r).exp();
    u /= std::sqrt(u.matrix().squaredNorm());

    auto rayleigh = [&](const ArrayXd& v) {
        return (v * A.apply(v)).sum() / (v * B.apply(v)).sum();
    };

    // Number of pencil eigenvalues below lambda = negative pivots in the
    // LDL^T factorization of A - lambda B (B is positive definite).
    auto count_below = [&](double lambda) {
        int cnt = 0;
        double prev = 0;
        for (int i = 0; i < n; ++i) {
            double piv = A.diag[i] - lambda * B.diag[i];
            if (i > 0) {
                const double off = A.sub[i] - lambda * B.sub[i];
                piv -= off * off / prev;
            }
            if (piv == 0) piv = -1e-300;
            if (piv < 0) ++cnt;
            prev = piv;
        }
        return cnt;
    };

    // Bracket the smallest eigenvalue by bisection so the inverse iteration
    // cannot lock onto an excited state when the start is poor (e.g. W = 0,
    // where the default start has Rayleigh quotient near a higher mode).
    double hi = rayleigh(u) + 1e-9 * (1.0 + std::abs(rayleigh(u)));
    double lo = hi;
    for (double span = 1.0 + std::abs(hi); count_below(lo) > 0; span *= 4.0) lo = hi - span;
    while (hi - lo > 1e-10 * (1.0 + std::abs(lo))) {
        const double mid = 0.5 * (lo + hi);
        if (count_below(mid) > 0)
            hi = mid;
        else
            lo = mid;
    }

    double e = hi;
    for (int it = 0; it < max_iter; ++it) {
        const double shift = std::min(e, lo) - 1e-6 * (1.0 + std::abs(e));
        std::vector<double> sub = A.sub, diag = A.diag, sup = A.sup;
        for (int i = 0; i < n; ++i) {
            diag[i] -= shift * B.diag[i];
            if (i > 0) sub[i] -= shift * B.sub[i];
            if (i + 1 < n) sup[i] -= shift * B.sup[i];
        }
        ArrayXd rhs = B.apply(u);
        thomas_solve(sub, diag, sup, rhs);
        int imax = 0;
        rhs.abs().maxCoeff(&imax);
        if (rhs[imax] < 0) rhs = -rhs;
        u = rhs / std::sqrt(rhs.matrix().squaredNorm());
        const double e_new = rayleigh(u);
        const bool done = std::abs(e_new - e) < 1e-13 * (1.0 + std::abs(e_new));
        e = e_new;
        if (done) {
            const double res = (A.apply(u) - e * B.apply(u)).abs().maxCoeff();
            if (!std::isfinite(res) || res > 1e-6 * (1.0 + std::abs(e)))
                throw NoConvergenceError("ground_state_radial: eigenresidual too large");
            return GroundState{e, u.cwiseMax(0.0)};
        }
    }
    throw NoConvergenceError("ground_state_radial: inverse iteration did not converge");
}

ScfStep scf_step(const WaveFunction& psi, double damping) {
    if (!(damping > 0) || damping > 1) throw ConfigError("scf_step: damping must be in (0, 1]");
    const RadialGrid& grid = psi.grid();
    const ArrayXd phi = hartree_potential(psi, false).values();
    const ArrayXd W = -2.0 * phi;
    const ArrayXd warm = grid.nodes() * psi.values();
    const GroundState gs = ground_state_radial(grid, W, &warm);
    const WaveFunction eig = normalize(psi.grid_ptr(), gs.u / grid.nodes());
    WaveFunction mixed =
        normalize(psi.grid_ptr(), (1.0 - damping) * psi.values() + damping * eig.values());
    const double residual = (mixed.values() - psi.values()).abs().maxCoeff();
    EnergyBreakdown en = energy(mixed);
    return ScfStep{std::move(mixed), gs.e, residual, en};
}

PekarSolution solve_pekar(GridPtr grid, const PekarOptions& opts) {
    if (opts.max_iter < 1) throw ConfigError("solve_pekar: max_iter must be positive");
    WaveFunction psi = [&]() {
        if (opts.custom_init) return normalize(*opts.custom_init);
        if (opts.init == PekarInit::exponential)
            return normalize(grid, (-grid->nodes()).exp().eval());
        return gaussian_state(grid, kGaussianTrialLambda);
    }();

    double damping = opts.damping;
    double g_prev = energy(psi).g;
    double residual = std::numeric_limits<double>::infinity();
    double e_last = 0;
    int iterations = 0;
    EnergyBreakdown en;

    for (; iterations < opts.max_iter; ++iterations) {
        ScfStep step = scf_step(psi, damping);
        psi = std::move(step.psi);
        residual = step.residual;
        e_last = step.e;
        en = step.energies;
        if (en.g < g_prev - 1e-14) damping = std::max(0.5 * damping, 0.05);
        g_prev = en.g;
        if (residual < opts.tol) break;
    }
    if (residual >= opts.tol) {
        char msg[120];
        std::snprintf(msg, sizeof msg,
                      "solve_pekar: residual %.3e still above tol %.3e after %d iterations",
                      residual, opts.tol, iterations);
        throw NoConvergenceError(msg);
    }
    if (std::abs(en.C - 2.0 * en.K) > 1e-4 * en.C)
        throw NoConvergenceError("solve_pekar: virial identity C = 2K violated at the "
                                 "reported state");
    return PekarSolution{std::move(psi), en.C, en.K, en.g, -e_last, residual, iterations + 1};
}

PekarSolution solve_pekar() {
    return solve_pekar(std::make_shared<RadialGrid>(RadialGrid::uniform(20.0, 2000)));
}

RadialFunction drift_field(const WaveFunction& psi) {
    if (!(psi.values() > 0).all())
        throw NonPositivePsiError("drift_field: psi must be strictly positive on all nodes");
    const ArrayXd logpsi = psi.values().log();
    return RadialFunction(psi.grid_ptr(), psi.grid().derivative(logpsi));
}

RadialFunction laplace_log_psi(const WaveFunction& psi) {
    if (!(psi.values() > 0).all())
        throw NonPositivePsiError("laplace_log_psi: psi must be strictly positive on all nodes");
    const ArrayXd logpsi = psi.values().log();
    const ArrayXd d1 = psi.grid().derivative(logpsi);
    const ArrayXd d2 = psi.grid().second_derivative(logpsi);
    return RadialFunction(psi.grid_ptr(), d2 + 2.0 * d1 / psi.grid().nodes());
}

} // namespace polaron
