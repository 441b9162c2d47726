#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <optional>

#include "polaron/errors.hpp"

namespace polaron {

using Eigen::ArrayXd;

enum class Spacing { uniform, geometric };

// Radial mesh on (0, r_max] together with quadrature weights for the shell
// measure 4*pi*r^2 dr on [0, r_max]. Weights integrate the piecewise-quadratic
// interpolant of a node function against the measure; the stub [0, r_1]
// extends the first node value as a constant, so all weights stay positive on
// any admissible grid. Polynomials of degree <= 2 are integrated exactly up
// to roundoff and an O(r_1^4) stub term; the constant shell volume
// (4/3) pi r_max^3 is exact.
class RadialGrid {
  public:
    static RadialGrid uniform(double r_max, int n_points);
    static RadialGrid geometric(double r_max, int n_points, double r_min);

    const ArrayXd& nodes() const { return nodes_; }
    const ArrayXd& weights() const { return weights_; }
    double r_max() const { return r_max_; }
    int n_points() const { return static_cast<int>(nodes_.size()); }
    Spacing spacing() const { return spacing_; }

    bool is_uniform() const { return spacing_ == Spacing::uniform; }
    // node spacing of a uniform grid
    double step() const { return nodes_[1] - nodes_[0]; }

    // index i with nodes[i] <= r < nodes[i+1], clamped to [0, n-2]
    int interval_of(double r) const;

    // integral of f against 4 pi r^2 dr over [0, r_max]
    double shell_integral(const ArrayXd& f) const;

    // cumulative integrals c_i = int_0^{r_i} f(s) s^p ds for p in {1, 2},
    // per-interval averaged-parabola rule (the [0, r_1] stub uses the first
    // parabola)
    ArrayXd cumulative_moment(const ArrayXd& f, int p) const;

    // nodewise first/second derivatives of node values. Uniform grids use
    // fourth-order stencils in the interior; otherwise local quadratic fits.
    ArrayXd derivative(const ArrayXd& f) const;
    ArrayXd second_derivative(const ArrayXd& f) const;

    bool same_as(const RadialGrid& other) const;

  private:
    RadialGrid(ArrayXd nodes, Spacing spacing);
    void build_weights();

    ArrayXd nodes_;
    ArrayXd weights_;
    double r_max_ = 0;
    Spacing spacing_ = Spacing::uniform;
};

using GridPtr = std::shared_ptr<const RadialGrid>;

// Exponential far-field model  A exp(-kappa r) / r  attached to a radial
// function for evaluation beyond the mesh.
struct ExponentialTail {
    double A = 0;
    double kappa = 0;
    double operator()(double r) const;
};

// Node values on a RadialGrid with a monotone-cubic (Fritsch-Carlson)
// interpolant between nodes. Below the first node the first Hermite segment
// is extended; beyond r_max an attached exponential tail is used when
// present, otherwise the last node value.
class RadialFunction {
  public:
    RadialFunction() = default;
    RadialFunction(GridPtr grid, ArrayXd values);

    const RadialGrid& grid() const { return *grid_; }
    const GridPtr& grid_ptr() const { return grid_; }
    const ArrayXd& values() const { return values_; }

    double operator()(double r) const;

    void attach_tail(ExponentialTail tail) { tail_ = tail; }
    const std::optional<ExponentialTail>& tail() const { return tail_; }

    RadialFunction with_values(ArrayXd values) const { return {grid_, std::move(values)}; }

  private:
    GridPtr grid_;
    ArrayXd values_;
    ArrayXd slopes_; // Hermite slopes at nodes
    std::optional<ExponentialTail> tail_;
};

// Least-squares fit of log(r f(r)) = log A - kappa r over the outer part of
// the mesh (default: nodes with r >= (1 - fit_fraction) r_max restricted to
// positive values).
ExponentialTail fit_exponential_tail(const RadialFunction& f, double fit_fraction = 0.25);

// Monotone-cubic slopes for Hermite interpolation of (x, y).
ArrayXd pchip_slopes(const ArrayXd& x, const ArrayXd& y);

} // namespace polaron
