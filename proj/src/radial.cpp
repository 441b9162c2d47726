#include "polaron/radial.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace polaron {

namespace {

// int_a^b r^k dr
inline double moment(double a, double b, int k) {
    return (std::pow(b, k + 1) - std::pow(a, k + 1)) / (k + 1);
}

// integrals of the three Lagrange basis parabolas through x0 < x1 < x2
// against r^p dr over [a, b]. Worked in s = r - x1: global-coordinate moments
// would cancel ~(r/h)^2 digits near the far end of a fine mesh.
inline void parabola_basis_integrals(double x0, double x1, double x2, double a, double b,
                                     int p, double out[3]) {
    const double u0 = x0 - x1, u2 = x2 - x1;
    double S[7]; // s-moments over [a - x1, b - x1]
    for (int m = 0; m <= p + 2; ++m) S[m] = moment(a - x1, b - x1, m);
    // basis_j(s) = (s^2 + beta_j s + gamma_j) / d_j
    const double beta[3] = {-u2, -(u0 + u2), -u0};
    const double gamma[3] = {0.0, u0 * u2, 0.0};
    const double d[3] = {u0 * (u0 - u2), u0 * u2, u2 * (u2 - u0)};
    for (int j = 0; j < 3; ++j) {
        double acc = 0, binom = 1, xpow = std::pow(x1, p);
        for (int k = 0; k <= p; ++k) { // (x1 + s)^p expanded
            acc += binom * xpow * (S[k + 2] + beta[j] * S[k + 1] + gamma[j] * S[k]);
            binom *= static_cast<double>(p - k) / (k + 1);
            xpow /= x1;
        }
        out[j] = acc / d[j];
    }
}

// integrals of the two hat functions on [x0, x1] against r^p dr
inline void linear_basis_integrals(double x0, double x1, int p, double out[2]) {
    const double dx = x1 - x0;
    double S[4]; // s-moments over [0, dx], s = r - x0
    for (int m = 0; m <= p + 1; ++m) S[m] = moment(0.0, dx, m);
    out[0] = out[1] = 0;
    double binom = 1, xpow = std::pow(x0, p);
    for (int k = 0; k <= p; ++k) {
        out[0] += binom * xpow * (S[k] - S[k + 1] / dx);
        out[1] += binom * xpow * (S[k + 1] / dx);
        binom *= static_cast<double>(p - k) / (k + 1);
        xpow /= x0;
    }
}

} // namespace

RadialGrid::RadialGrid(ArrayXd nodes, Spacing spacing)
    : nodes_(std::move(nodes)), spacing_(spacing) {
    const int n = static_cast<int>(nodes_.size());
    if (n < 8) throw ConfigError("radial grid needs at least 8 nodes");
    if (!nodes_.isFinite().all()) throw ConfigError("radial grid nodes must be finite");
    for (int i = 0; i + 1 < n; ++i)
        if (!(nodes_[i] < nodes_[i + 1]))
            throw ConfigError("radial grid nodes must be strictly increasing");
    if (!(nodes_[0] > 0)) throw ConfigError("first radial node must be positive");
    r_max_ = nodes_[n - 1];
    if (nodes_[0] > 1e-3 * r_max_ * (1 + 1e-12))
        throw ConfigError("first radial node must not exceed 1e-3 * r_max");
    build_weights();
}

RadialGrid RadialGrid::uniform(double r_max, int n_points) {
    if (!(r_max > 0) || !std::isfinite(r_max)) throw ConfigError("r_max must be positive");
    if (n_points < 1000)
        throw ConfigError("uniform radial grid needs n_points >= 1000 so that r_1 <= 1e-3 r_max");
    const double h = r_max / n_points;
    ArrayXd nodes(n_points);
    for (int i = 0; i < n_points; ++i) nodes[i] = h * (i + 1);
    nodes[n_points - 1] = r_max;
    return RadialGrid(std::move(nodes), Spacing::uniform);
}

RadialGrid RadialGrid::geometric(double r_max, int n_points, double r_min) {
    if (!(r_max > 0) || !std::isfinite(r_max)) throw ConfigError("r_max must be positive");
    if (!(r_min > 0) || r_min >= r_max) throw ConfigError("need 0 < r_min < r_max");
    if (r_min > 1e-3 * r_max)
        throw ConfigError("geometric radial grid needs r_min <= 1e-3 * r_max");
    const double ratio = std::pow(r_max / r_min, 1.0 / (n_points - 1));
    ArrayXd nodes(n_points);
    double r = r_min;
    for (int i = 0; i < n_points; ++i, r *= ratio) nodes[i] = r;
    nodes[n_points - 1] = r_max;
    return RadialGrid(std::move(nodes), Spacing::geometric);
}

void RadialGrid::build_weights() {
    const int n = static_cast<int>(nodes_.size());
    weights_ = ArrayXd::Zero(n);
    double b[3];

    // stub [0, r_1]: constant extension of the first node value. Extrapolating
    // the first parabola here would assign the nearly-coincident leading nodes
    // of a geometric grid large weights of opposite sign; the constant rule
    // keeps every weight positive at an O(r_1^4) cost.
    weights_[0] += moment(0.0, nodes_[0], 2);

    // pairs of intervals; an odd interval count leaves a single interval over,
    // handled with the linear rule at the small-r end where its degree-2
    // defect is O(r_1^5) instead of O(r_max^2 h^3)
    int i = 0;
    if ((n - 1) % 2 == 1) {
        double lb[2];
        linear_basis_integrals(nodes_[0], nodes_[1], 2, lb);
        weights_[0] += lb[0];
        weights_[1] += lb[1];
        i = 1;
    }
    for (; i + 2 < n; i += 2) {
        parabola_basis_integrals(nodes_[i], nodes_[i + 1], nodes_[i + 2], nodes_[i],
                                 nodes_[i + 2], 2, b);
        for (int j = 0; j < 3; ++j) weights_[i + j] += b[j];
    }
    weights_ *= 4.0 * M_PI;

    if (!(weights_ > 0).all()) throw ConfigError("radial quadrature weights must be positive");
    const double vol = 4.0 / 3.0 * M_PI * std::pow(r_max_, 3);
    if (std::abs(weights_.sum() - vol) > 1e-10 * vol)
        throw ConfigError("radial quadrature fails the constant shell-volume check");
}

int RadialGrid::interval_of(double r) const {
    const int n = n_points();
    if (is_uniform()) {
        const double h = step();
        const double i = std::floor((r - nodes_[0]) / h); // clamp before the int cast
        return static_cast<int>(std::clamp(i, 0.0, static_cast<double>(n - 2)));
    }
    const double* beg = nodes_.data();
    const double* end = beg + n;
    int i = static_cast<int>(std::upper_bound(beg, end, r) - beg) - 1;
    return std::clamp(i, 0, n - 2);
}

double RadialGrid::shell_integral(const ArrayXd& f) const { return (weights_ * f).sum(); }

ArrayXd RadialGrid::cumulative_moment(const ArrayXd& f, int p) const {
    const int n = n_points();
    ArrayXd cum(n);
    double b[3];

    parabola_basis_integrals(nodes_[0], nodes_[1], nodes_[2], 0.0, nodes_[0], p, b);
    cum[0] = b[0] * f[0] + b[1] * f[1] + b[2] * f[2];

    for (int j = 0; j + 1 < n; ++j) {
        double seg = 0;
        int pieces = 0;
        if (j >= 1) {
            parabola_basis_integrals(nodes_[j - 1], nodes_[j], nodes_[j + 1], nodes_[j],
                                     nodes_[j + 1], p, b);
            seg += b[0] * f[j - 1] + b[1] * f[j] + b[2] * f[j + 1];
            ++pieces;
        }
        if (j + 2 < n) {
            parabola_basis_integrals(nodes_[j], nodes_[j + 1], nodes_[j + 2], nodes_[j],
                                     nodes_[j + 1], p, b);
            seg += b[0] * f[j] + b[1] * f[j + 1] + b[2] * f[j + 2];
            ++pieces;
        }
        cum[j + 1] = cum[j] + seg / pieces;
    }
    return cum;
}

ArrayXd RadialGrid::derivative(const ArrayXd& f) const {
    const int n = n_points();
    ArrayXd d(n);
    if (is_uniform() && n >= 5) {
        const double h = step();
        d[0] = (-25.0 / 12.0 * f[0] + 4.0 * f[1] - 3.0 * f[2] + 4.0 / 3.0 * f[3] - 0.25 * f[4]) / h;
        d[1] = (-0.25 * f[0] - 5.0 / 6.0 * f[1] + 1.5 * f[2] - 0.5 * f[3] + f[4] / 12.0) / h;
        for (int i = 2; i + 2 < n; ++i)
            d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
        d[n - 2] = (0.25 * f[n - 1] + 5.0 / 6.0 * f[n - 2] - 1.5 * f[n - 3] + 0.5 * f[n - 4] -
                    f[n - 5] / 12.0) / h;
        d[n - 1] = (25.0 / 12.0 * f[n - 1] - 4.0 * f[n - 2] + 3.0 * f[n - 3] -
                    4.0 / 3.0 * f[n - 4] + 0.25 * f[n - 5]) / h;
        return d;
    }
    auto fit_deriv = [&](int i0, double at) {
        const double x0 = nodes_[i0], x1 = nodes_[i0 + 1], x2 = nodes_[i0 + 2];
        const double c0 = (2 * at - x1 - x2) / ((x0 - x1) * (x0 - x2));
        const double c1 = (2 * at - x0 - x2) / ((x1 - x0) * (x1 - x2));
        const double c2 = (2 * at - x0 - x1) / ((x2 - x0) * (x2 - x1));
        return c0 * f[i0] + c1 * f[i0 + 1] + c2 * f[i0 + 2];
    };
    d[0] = fit_deriv(0, nodes_[0]);
    for (int i = 1; i + 1 < n; ++i) d[i] = fit_deriv(i - 1, nodes_[i]);
    d[n - 1] = fit_deriv(n - 3, nodes_[n - 1]);
    return d;
}

ArrayXd RadialGrid::second_derivative(const ArrayXd& f) const {
    const int n = n_points();
    ArrayXd d(n);
    auto fit_second = [&](int i0) {
        const double x0 = nodes_[i0], x1 = nodes_[i0 + 1], x2 = nodes_[i0 + 2];
        return 2.0 * (f[i0] / ((x0 - x1) * (x0 - x2)) + f[i0 + 1] / ((x1 - x0) * (x1 - x2)) +
                      f[i0 + 2] / ((x2 - x0) * (x2 - x1)));
    };
    if (is_uniform() && n >= 5) {
        const double h2 = step() * step();
        d[0] = fit_second(0);
        d[1] = (f[0] - 2.0 * f[1] + f[2]) / h2;
        for (int i = 2; i + 2 < n; ++i)
            d[i] = (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2]) /
                   (12.0 * h2);
        d[n - 2] = (f[n - 3] - 2.0 * f[n - 2] + f[n - 1]) / h2;
        d[n - 1] = fit_second(n - 3);
        return d;
    }
    d[0] = fit_second(0);
    for (int i = 1; i + 1 < n; ++i) d[i] = fit_second(i - 1);
    d[n - 1] = fit_second(n - 3);
    return d;
}

bool RadialGrid::same_as(const RadialGrid& other) const {
    return nodes_.size() == other.nodes_.size() && (nodes_ == other.nodes_).all();
}

double ExponentialTail::operator()(double r) const { return A * std::exp(-kappa * r) / r; }

RadialFunction::RadialFunction(GridPtr grid, ArrayXd values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    if (!grid_) throw ConfigError("radial function needs a grid");
    if (values_.size() != grid_->nodes().size())
        throw ConfigError("radial function values must match the grid size");
    if (!values_.isFinite().all()) throw NonFiniteError("radial function values must be finite");
    slopes_ = pchip_slopes(grid_->nodes(), values_);
}

double RadialFunction::operator()(double r) const {
    const ArrayXd& x = grid_->nodes();
    const int n = grid_->n_points();
    if (r >= x[n - 1]) {
        if (r > x[n - 1] && tail_) return (*tail_)(r);
        return values_[n - 1];
    }
    const int i = grid_->interval_of(r);
    const double h = x[i + 1] - x[i];
    const double t = (r - x[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1;
    const double h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2;
    const double h11 = t3 - t2;
    return h00 * values_[i] + h10 * h * slopes_[i] + h01 * values_[i + 1] +
           h11 * h * slopes_[i + 1];
}

ArrayXd pchip_slopes(const ArrayXd& x, const ArrayXd& y) {
    const int n = static_cast<int>(x.size());
    ArrayXd h(n - 1), delta(n - 1), d(n);
    for (int i = 0; i + 1 < n; ++i) {
        h[i] = x[i + 1] - x[i];
        delta[i] = (y[i + 1] - y[i]) / h[i];
    }
    for (int i = 1; i + 1 < n; ++i) {
        if (delta[i - 1] * delta[i] <= 0) {
            d[i] = 0;
        } else {
            const double w1 = 2 * h[i] + h[i - 1];
            const double w2 = h[i] + 2 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    auto end_slope = [](double h0, double h1, double d0, double d1) {
        double s = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if (s * d0 <= 0) return 0.0;
        if (d0 * d1 < 0 && std::abs(s) > 3 * std::abs(d0)) return 3 * d0;
        return s;
    };
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    return d;
}

ExponentialTail fit_exponential_tail(const RadialFunction& f, double fit_fraction) {
    const ArrayXd& x = f.grid().nodes();
    const ArrayXd& v = f.values();
    const int n = static_cast<int>(x.size());
    double lo = (1.0 - fit_fraction) * f.grid().r_max();

    std::vector<double> rs, zs;
    for (int pass = 0; pass < 2 && rs.size() < 5; ++pass) {
        rs.clear();
        zs.clear();
        for (int i = 0; i < n; ++i) {
            if (x[i] >= lo && v[i] > 0) {
                rs.push_back(x[i]);
                zs.push_back(std::log(x[i] * v[i]));
            }
        }
        lo = 0; // second pass: take every positive node
    }
    if (rs.size() < 5)
        throw InsufficientSamplesError("exponential tail fit needs at least 5 positive nodes");

    const auto m = static_cast<double>(rs.size());
    double sr = 0, sz = 0, srr = 0, srz = 0;
    for (size_t i = 0; i < rs.size(); ++i) {
        sr += rs[i];
        sz += zs[i];
        srr += rs[i] * rs[i];
        srz += rs[i] * zs[i];
    }
    const double slope = (m * srz - sr * sz) / (m * srr - sr * sr);
    const double intercept = (sz - slope * sr) / m;
    return ExponentialTail{std::exp(intercept), -slope};
}

} // namespace polaron
