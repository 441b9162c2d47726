#pragma once

#include <optional>

#include "polaron/radial.hpp"

namespace polaron {

// Nonnegative, unit-norm radial wave function under the shell measure
// 4 pi r^2 dr. Construct via normalize().
class WaveFunction {
  public:
    const RadialGrid& grid() const { return f_.grid(); }
    const GridPtr& grid_ptr() const { return f_.grid_ptr(); }
    const ArrayXd& values() const { return f_.values(); }
    const RadialFunction& as_radial() const { return f_; }
    double operator()(double r) const { return f_(r); }

    // Deserialization path: accepts already-normalized values verbatim so a
    // stored solution round-trips bit-exactly (norm still checked to 1e-8).
    static WaveFunction from_stored(GridPtr grid, ArrayXd values,
                                    std::optional<ExponentialTail> tail);

  private:
    explicit WaveFunction(RadialFunction f) : f_(std::move(f)) {}
    friend WaveFunction normalize(const RadialFunction&);
    RadialFunction f_;
};

// |f| / ||f||, with || . || the shell-measure L2 norm on the grid. Attaches an
// exponential far-field tail when one can be fitted.
WaveFunction normalize(const RadialFunction& f);
WaveFunction normalize(GridPtr grid, ArrayXd values);

// Gaussian trial state with density psi^2 = (lambda/pi)^{3/2} exp(-lambda r^2);
// lambda = 8/(9 pi) maximizes the Gaussian family.
constexpr double kGaussianTrialLambda = 8.0 / (9.0 * M_PI);
WaveFunction gaussian_state(GridPtr grid, double lambda);

// Electrostatic potential of the density psi^2:
//   Phi(r) = q(r)/r + int_r^{rmax} 4 pi s psi^2(s) ds,   q(r) = int_0^r 4 pi s^2 psi^2 ds.
// With verify=true (default in debug builds) a mid-grid node is checked
// against the two-shell kernel sum_j w_j psi_j^2 / max(r, r_j).
#ifdef NDEBUG
inline constexpr bool kDebugBuild = false;
#else
inline constexpr bool kDebugBuild = true;
#endif
RadialFunction hartree_potential(const WaveFunction& psi, bool verify = kDebugBuild);

struct EnergyBreakdown {
    double C = 0; // Coulomb self-interaction  int psi^2 Phi
    double K = 0; // kinetic energy  1/2 ||grad psi||^2
    double g = 0; // C - K
};
EnergyBreakdown energy(const WaveFunction& psi);

// Ground state of  -1/2 u'' + W u = e u  on the grid nodes with u(0) = 0 and
// u = 0 one spacing beyond r_max (so psi = u/r is positive on every stored
// node). Tridiagonal finite differences -- Numerov-weighted on uniform grids
// -- with shifted inverse-power iteration.
struct GroundState {
    double e = 0;
    ArrayXd u; // sign-fixed positive, unit Euclidean norm
};
GroundState ground_state_radial(const RadialGrid& grid, const ArrayXd& W,
                                const ArrayXd* warm_start = nullptr, int max_iter = 200);

struct ScfStep {
    WaveFunction psi;
    double e = 0;        // eigenvalue of -1/2 Lap - 2 Phi at the accepted state
    double residual = 0; // sup-norm change of psi
    EnergyBreakdown energies;
};
// One damped self-consistency step: W = -2 hartree_potential(psi), eigensolve,
// mix new psi with old by `damping`, renormalize.
ScfStep scf_step(const WaveFunction& psi, double damping = 0.7);

enum class PekarInit { gaussian, exponential };

struct PekarOptions {
    PekarInit init = PekarInit::gaussian;
    const RadialFunction* custom_init = nullptr;
    double damping = 0.7;
    double tol = 1e-11;
    int max_iter = 300;
};

struct PekarSolution {
    WaveFunction psi;
    double C = 0;
    double K = 0;
    double g = 0;        // C - K
    double mu = 0;       // Lagrange multiplier, -e of the final eigensolve
    double residual = 0; // final sup-norm change
    int iterations = 0;
};

// Maximize  C(psi) - K(psi)  over unit-norm radial psi by damped SCF.
// The damping is halved whenever g decreases. Throws NoConvergenceError if
// the residual stays above tol for max_iter iterations or the virial
// identity C = 2K fails at the reported solution.
PekarSolution solve_pekar(GridPtr grid, const PekarOptions& opts = {});
PekarSolution solve_pekar(); // default mesh: uniform, r_max = 20, n = 2000

// Radial log-derivative b(r) = d log psi / dr on the nodes.
RadialFunction drift_field(const WaveFunction& psi);

// (log psi)'' + (2/r) (log psi)' on the nodes; as r -> 0 the continuum limit
// of this quantity is 3 (log psi)''(0), which evaluation below the first node
// should use.
RadialFunction laplace_log_psi(const WaveFunction& psi);

} // namespace polaron
