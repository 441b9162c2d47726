#include "polaron/sde.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "polaron/rng.hpp"

namespace polaron {

PsiFields::PsiFields(const WaveFunction& psi, double drift_clamp)
    : log_psi_(psi.grid_ptr(), psi.values().log().eval()),
      b_(drift_field(psi)),
      lap_(laplace_log_psi(psi)),
      tail_(psi.as_radial().tail()),
      clamp_(drift_clamp) {
    if (!(drift_clamp > 0)) throw ConfigError("PsiFields: drift clamp must be positive");
    r_first_ = psi.grid().nodes()[0];
    r_max_ = psi.grid().r_max();
    b_first_ = b_.values()[0];
    lap_first_ = lap_.values()[0];
}

double PsiFields::log_psi(double r) const {
    if (r > r_max_ && tail_) return std::log(tail_->A) - tail_->kappa * r - std::log(r);
    return log_psi_(r);
}

double PsiFields::drift(double r) const {
    double b;
    if (r < r_first_)
        b = b_first_ * (r / r_first_);
    else if (r > r_max_ && tail_)
        b = -tail_->kappa - 1.0 / r;
    else
        b = b_(r);
    return std::clamp(b, -clamp_, clamp_);
}

double PsiFields::laplace_log(double r) const {
    if (r < r_first_) return lap_first_;
    if (r > r_max_ && tail_) return -2.0 * tail_->kappa / r - 1.0 / (r * r);
    return lap_(r);
}

Vector3d PsiFields::drift_vec(const Vector3d& x) const {
    const double r = x.norm();
    if (r <= 0) return Vector3d::Zero();
    return (drift(r) / r) * x;
}

void DiffusionConfig::validate() const {
    if (!(dt > 0)) throw ConfigError("diffusion: dt must be positive");
    if (n_steps < 1) throw ConfigError("diffusion: n_steps must be positive");
    if (n_paths < 1) throw ConfigError("diffusion: n_paths must be positive");
    if (store_stride < 1 || n_steps % store_stride != 0)
        throw ConfigError("diffusion: store_stride must divide n_steps");
    if (!(drift_clamp > 0)) throw ConfigError("diffusion: drift_clamp must be positive");
    if (threads < 1) throw ConfigError("diffusion: threads must be positive");
}

Vector3d sample_stationary_start(const WaveFunction& psi, std::mt19937_64& rng) {
    const RadialGrid& grid = psi.grid();
    const ArrayXd cdf_raw = grid.cumulative_moment(psi.values().square(), 2);
    const double total = cdf_raw[cdf_raw.size() - 1];

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng) * total;
    const double* beg = cdf_raw.data();
    const double* end = beg + cdf_raw.size();
    const auto it = std::lower_bound(beg, end, u);
    double r;
    if (it == beg) {
        // inside [0, r_1] the enclosed mass grows like r^3
        r = grid.nodes()[0] * std::cbrt(u / cdf_raw[0]);
    } else {
        const auto i = static_cast<Eigen::Index>(it - beg);
        const double f0 = cdf_raw[i - 1], f1 = cdf_raw[i];
        const double t = (f1 > f0) ? (u - f0) / (f1 - f0) : 0.5;
        r = grid.nodes()[i - 1] + t * (grid.nodes()[i] - grid.nodes()[i - 1]);
    }

    std::normal_distribution<double> gauss(0.0, 1.0);
    Vector3d dir;
    do {
        for (int c = 0; c < 3; ++c) dir[c] = gauss(rng);
    } while (dir.squaredNorm() == 0);
    return r * dir.normalized();
}

Matrix3Xd simulate_path(const PsiFields& fields, bool zero_drift, const Vector3d& x0,
                        int n_steps, double dt, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, std::sqrt(dt));
    Matrix3Xd path(3, n_steps + 1);
    Vector3d x = x0;
    path.col(0) = x;
    for (int k = 1; k <= n_steps; ++k) {
        if (!zero_drift) x += fields.drift_vec(x) * dt;
        for (int c = 0; c < 3; ++c) x[c] += gauss(rng);
        path.col(k) = x;
    }
    return path;
}

TrajectorySample simulate_pekar(const WaveFunction& psi, const DiffusionConfig& cfg) {
    cfg.validate();
    const PsiFields fields(psi, cfg.drift_clamp);

    TrajectorySample out;
    out.dt_fine = cfg.dt;
    out.dt_store = cfg.dt * cfg.store_stride;
    out.source = cfg.zero_drift ? "zero_drift" : "pekar";
    out.paths.resize(cfg.n_paths);

    auto run_block = [&](int p) {
        auto rng = derive_stream(cfg.seed, static_cast<std::uint64_t>(p));
        const Vector3d x0 = cfg.init == DiffusionConfig::Init::origin
                                ? Vector3d::Zero()
                                : sample_stationary_start(psi, rng);
        const Matrix3Xd fine = simulate_path(fields, cfg.zero_drift, x0, cfg.n_steps, cfg.dt, rng);
        const int stored = cfg.n_steps / cfg.store_stride;
        Matrix3Xd thin(3, stored + 1);
        for (int k = 0; k <= stored; ++k) thin.col(k) = fine.col(k * cfg.store_stride);
        out.paths[p] = std::move(thin);
    };

    const int workers = std::min(cfg.threads, cfg.n_paths);
    if (workers <= 1) {
        for (int p = 0; p < cfg.n_paths; ++p) run_block(p);
        return out;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&]() {
            for (;;) {
                const int p = next.fetch_add(1);
                if (p >= cfg.n_paths) return;
                run_block(p);
            }
        });
    for (auto& t : pool) t.join();
    return out;
}

double girsanov_log_density(const Matrix3Xd& path, const PsiFields& fields, double dt) {
    const auto n = path.cols();
    if (n < 2) throw ConfigError("girsanov_log_density: path needs at least two points");
    double g = fields.log_psi(path.col(n - 1).norm()) - fields.log_psi(path.col(0).norm());
    double acc = 0;
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
        const double r = path.col(k).norm();
        const double b = fields.drift(r);
        acc += fields.laplace_log(r) + b * b;
    }
    return g - 0.5 * acc * dt;
}

double girsanov_log_density(const Matrix3Xd& path, const WaveFunction& psi, double dt) {
    return girsanov_log_density(path, PsiFields(psi), dt);
}

std::vector<IncrementSample> increments(const TrajectorySample& traj,
                                        const std::vector<double>& lags) {
    if (traj.paths.empty()) throw InsufficientSamplesError("increments: no trajectories");
    const auto stored = traj.paths.front().cols() - 1;
    std::vector<IncrementSample> out;
    for (double lag : lags) {
        const long L = std::lround(lag / traj.dt_store);
        if (std::abs(L * traj.dt_store - lag) > 1e-9 * std::max(1.0, lag))
            throw ConfigError("increments: lag must be a multiple of the stored spacing");
        if (L > stored) throw LagTooLongError("increments: lag exceeds the trajectory span");
        IncrementSample s;
        s.lag = lag;
        s.source = traj.source;
        for (const auto& p : traj.paths) {
            if (L == 0) {
                for (Eigen::Index k = 0; k <= stored; ++k) s.vecs.push_back(Vector3d::Zero());
            } else {
                for (Eigen::Index k = 0; k + L <= stored; k += L)
                    s.vecs.push_back(p.col(k + L) - p.col(k));
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace polaron
