#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "polaron/rng.hpp"
#include "polaron/sde.hpp"

using namespace polaron;

namespace {

GridPtr uni(double r_max, int n) {
    return std::make_shared<RadialGrid>(RadialGrid::uniform(r_max, n));
}

// mean and 3-sigma half width of a sample of doubles
struct MeanBand {
    double mean, half;
};
MeanBand band3(const std::vector<double>& x) {
    double m = mean_of(x);
    double se = std::sqrt(variance_of(x) / x.size());
    return {m, 3.0 * se};
}

} // namespace

TEST_CASE("psi fields of a gaussian state have the closed-form drift") {
    // psi ~ exp(-lambda r^2 / 2): b(r) = -lambda r, (Delta log psi) = -3 lambda
    const double lam = 1.3;
    WaveFunction psi = gaussian_state(uni(12.0, 2400), lam);
    PsiFields fields(psi);

    for (double r : {0.002, 0.31, 1.0, 2.57, 6.0}) {
        CHECK(fields.drift(r) == doctest::Approx(-lam * r).epsilon(1e-8));
        CHECK(fields.laplace_log(r) == doctest::Approx(-3.0 * lam).epsilon(1e-7));
    }
    Vector3d x(0.3, -1.1, 0.7);
    CHECK((fields.drift_vec(x) + lam * x).norm() < 1e-8);
    // log psi differences (the additive constant is arbitrary)
    CHECK(fields.log_psi(1.0) - fields.log_psi(2.0) ==
          doctest::Approx(-0.5 * lam * (1.0 - 4.0)).epsilon(1e-7));
}

TEST_CASE("exponential tail continues drift and laplacian beyond the mesh") {
    // psi = 3 e^{-2r} / r lies exactly in the fitted tail family
    GridPtr g = uni(12.0, 2400);
    ArrayXd v = 3.0 * (-2.0 * g->nodes()).exp() / g->nodes();
    const double nrm = std::sqrt(g->shell_integral(v.square()));
    WaveFunction psi = normalize(g, v);
    const auto& tail = psi.as_radial().tail();
    REQUIRE(tail.has_value());
    CHECK(tail->kappa == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(tail->A == doctest::Approx(3.0 / nrm).epsilon(1e-9));

    PsiFields fields(psi);
    const double r = 18.0; // past r_max
    CHECK(fields.drift(r) == doctest::Approx(-tail->kappa - 1.0 / r).epsilon(1e-12));
    CHECK(fields.laplace_log(r) ==
          doctest::Approx(-2.0 * tail->kappa / r - 1.0 / (r * r)).epsilon(1e-12));

    // clamp caps the drift magnitude
    PsiFields clamped(psi, 0.7);
    CHECK(clamped.drift(5.0) == doctest::Approx(-0.7));
    CHECK_THROWS_AS(PsiFields(psi, 0.0), ConfigError);
}

TEST_CASE("stationary start samples the psi^2 shell density") {
    const double lam = 1.0;
    WaveFunction psi = gaussian_state(uni(12.0, 2400), lam);
    std::mt19937_64 rng = derive_stream(5, 0);
    const int n = 20000;
    std::vector<double> r2;
    Vector3d dirsum = Vector3d::Zero();
    for (int k = 0; k < n; ++k) {
        Vector3d x = sample_stationary_start(psi, rng);
        r2.push_back(x.squaredNorm());
        dirsum += x.normalized();
    }
    // E[r^2] = 3/(2 lambda) under 4 pi r^2 psi^2
    MeanBand b = band3(r2);
    CHECK(std::abs(b.mean - 1.5) < b.half);
    // isotropy
    CHECK((dirsum / n).norm() < 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("gaussian state diffuses as an ornstein-uhlenbeck process") {
    const double lam = 1.0;
    WaveFunction psi = gaussian_state(uni(12.0, 2400), lam);

    DiffusionConfig cfg;
    cfg.dt = 1e-3;
    cfg.n_steps = 1000;
    cfg.n_paths = 4000;
    cfg.store_stride = 100; // stored spacing 0.1
    cfg.seed = 11;
    TrajectorySample traj = simulate_pekar(psi, cfg);
    CHECK(traj.dt_fine == doctest::Approx(1e-3));
    CHECK(traj.dt_store == doctest::Approx(0.1));
    REQUIRE(traj.paths.size() == 4000);
    REQUIRE(traj.paths.front().cols() == 11);

    // stationary second moment E|X|^2 = 3/(2 lambda), preserved along the path
    for (int frame : {0, 10}) {
        std::vector<double> r2;
        for (const auto& p : traj.paths) r2.push_back(p.col(frame).squaredNorm());
        MeanBand b = band3(r2);
        CHECK(std::abs(b.mean - 1.5) < b.half + 2e-3); // + Euler bias allowance
    }

    // MSD(t) = (3/lambda)(1 - e^{-lambda t}) and per-axis increment variance
    // (1/lambda)(1 - e^{-lambda lag}) for the stationary process
    for (double t : {0.2, 0.5, 1.0}) {
        const int frame = static_cast<int>(std::lround(t / traj.dt_store));
        std::vector<double> d2;
        for (const auto& p : traj.paths) d2.push_back((p.col(frame) - p.col(0)).squaredNorm());
        MeanBand b = band3(d2);
        const double exact = 3.0 / lam * (1.0 - std::exp(-lam * t));
        CHECK(std::abs(b.mean - exact) < b.half + 4e-3);
    }

    auto incs = increments(traj, {0.3, 1.0});
    for (const auto& s : incs) {
        const double exact = (1.0 - std::exp(-lam * s.lag)) / lam;
        double acc = 0;
        for (const auto& v : s.vecs) acc += v.squaredNorm();
        const double var = acc / (3.0 * s.vecs.size());
        // chi^2 error bar (increments at the same lag are weakly correlated)
        const double se = exact * std::sqrt(2.0 / (3.0 * s.vecs.size())) * 2.0;
        CHECK(std::abs(var - exact) < 3.0 * se + 2e-3);
    }
}

TEST_CASE("zero-drift override yields brownian motion") {
    WaveFunction psi = gaussian_state(uni(12.0, 2400), 1.0);
    DiffusionConfig cfg;
    cfg.dt = 1e-3;
    cfg.n_steps = 500;
    cfg.n_paths = 4000;
    cfg.store_stride = 250;
    cfg.init = DiffusionConfig::Init::origin;
    cfg.zero_drift = true;
    cfg.seed = 13;
    TrajectorySample traj = simulate_pekar(psi, cfg);

    for (int frame : {1, 2}) {
        const double t = frame * traj.dt_store;
        std::vector<double> r2;
        for (const auto& p : traj.paths) r2.push_back(p.col(frame).squaredNorm());
        MeanBand b = band3(r2);
        CHECK(std::abs(b.mean - 3.0 * t) < b.half);
    }
}

TEST_CASE("girsanov log density matches the gaussian closed form") {
    const double lam = 0.8;
    WaveFunction psi = gaussian_state(uni(12.0, 2400), lam);
    PsiFields fields(psi);

    const double dt = 1e-3;
    const int n_steps = 400;
    std::mt19937_64 rng = derive_stream(7, 0);
    for (int rep = 0; rep < 5; ++rep) {
        Vector3d x0 = sample_stationary_start(psi, rng);
        Matrix3Xd path = simulate_path(fields, /*zero_drift=*/true, x0, n_steps, dt, rng);
        REQUIRE(path.cols() == n_steps + 1);

        double sum = 0;
        for (int k = 0; k < n_steps; ++k) {
            const double r2 = path.col(k).squaredNorm();
            sum += 1.5 * lam - 0.5 * lam * lam * r2;
        }
        const double exact = -0.5 * lam * (path.col(n_steps).squaredNorm() -
                                           path.col(0).squaredNorm()) +
                             sum * dt;
        CHECK(girsanov_log_density(path, fields, dt) == doctest::Approx(exact).epsilon(5e-6));
        CHECK(girsanov_log_density(path, psi, dt) == doctest::Approx(exact).epsilon(5e-6));
    }
}

TEST_CASE("exp(girsanov) has brownian expectation one") {
    WaveFunction psi = gaussian_state(uni(12.0, 2400), 1.0);
    PsiFields fields(psi);
    const double dt = 1e-3;
    const int n_steps = 500;
    std::mt19937_64 rng = derive_stream(19, 0);
    std::vector<double> w;
    for (int k = 0; k < 20000; ++k) {
        Vector3d x0 = sample_stationary_start(psi, rng);
        Matrix3Xd path = simulate_path(fields, /*zero_drift=*/true, x0, n_steps, dt, rng);
        w.push_back(std::exp(girsanov_log_density(path, fields, dt)));
    }
    MeanBand b = band3(w);
    CHECK(std::abs(b.mean - 1.0) < b.half + 2e-3); // + O(dt) discretization
}

TEST_CASE("increment extraction bookkeeping") {
    TrajectorySample traj;
    traj.dt_fine = 0.1;
    traj.dt_store = 0.5;
    traj.source = "unit";
    Matrix3Xd a(3, 5), b(3, 5);
    for (int k = 0; k < 5; ++k) {
        a.col(k) = Vector3d(k, 2.0 * k, -k);
        b.col(k) = Vector3d(0.25 * k * k, 1.0, std::sin(0.7 * k));
    }
    traj.paths = {a, b};

    auto out = increments(traj, {0.0, 0.5, 1.0, 2.0});
    REQUIRE(out.size() == 4);

    CHECK(out[0].vecs.size() == 10); // lag 0: one zero per stored point
    for (const auto& v : out[0].vecs) CHECK(v.norm() == 0.0);

    CHECK(out[1].vecs.size() == 8); // four per path
    CHECK(out[1].vecs[0] == Vector3d(1, 2, -1));
    CHECK(out[2].vecs.size() == 4);
    CHECK(out[2].vecs[0] == Vector3d(2, 4, -2));
    CHECK(out[3].vecs.size() == 2); // single span-long increment per path
    CHECK(out[3].source == "unit");

    // shifting a whole path leaves increments unchanged (up to roundoff in
    // the cancellation)
    TrajectorySample shifted = traj;
    for (auto& p : shifted.paths) p.colwise() += Vector3d(3.7, -1.2, 9.9);
    auto out2 = increments(shifted, {0.5, 1.0});
    auto ref = increments(traj, {0.5, 1.0});
    for (std::size_t s = 0; s < out2.size(); ++s)
        for (std::size_t k = 0; k < out2[s].vecs.size(); ++k)
            CHECK((out2[s].vecs[k] - ref[s].vecs[k]).norm() < 1e-12);

    CHECK_THROWS_AS(increments(traj, {2.5}), LagTooLongError);
    CHECK_THROWS_AS(increments(traj, {0.3}), ConfigError);
    TrajectorySample empty;
    empty.dt_store = 0.5;
    CHECK_THROWS_AS(increments(empty, {0.5}), InsufficientSamplesError);
}

TEST_CASE("diffusion runs are deterministic and thread-count independent") {
    WaveFunction psi = gaussian_state(uni(12.0, 2400), 1.0);
    DiffusionConfig cfg;
    cfg.n_steps = 200;
    cfg.n_paths = 6;
    cfg.store_stride = 50;
    cfg.seed = 23;
    TrajectorySample x = simulate_pekar(psi, cfg);
    cfg.threads = 3;
    TrajectorySample y = simulate_pekar(psi, cfg);
    REQUIRE(x.paths.size() == y.paths.size());
    for (std::size_t k = 0; k < x.paths.size(); ++k) CHECK(x.paths[k] == y.paths[k]);
}

TEST_CASE("diffusion config validation") {
    DiffusionConfig cfg;
    cfg.n_steps = 100;

    DiffusionConfig bad = cfg;
    bad.dt = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    bad = cfg;
    bad.store_stride = 3; // does not divide 100
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    bad = cfg;
    bad.n_paths = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    bad = cfg;
    bad.drift_clamp = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}
