#include "fluidest/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "fluidest/parallel.hpp"
#include "fluidest/warp.hpp"

namespace fluidest {

void SimConfig::validate() const {
    if (!(nu >= 0.0) || !std::isfinite(nu)) throw ConfigError("simulation: nu must be >= 0");
    if (!(rho > 0.0) || !std::isfinite(rho)) throw ConfigError("simulation: rho must be > 0");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("simulation: dt must be > 0");
    if (!(tolerance > 0.0)) throw ConfigError("simulation: solver tolerance must be > 0");
    if (max_iterations < 1) throw ConfigError("simulation: max iterations must be >= 1");
    if (!(tracer_diffusion >= 0.0)) throw ConfigError("simulation: tracer diffusion must be >= 0");
    if (!(inflow >= 0.0)) throw ConfigError("simulation: inflow speed must be >= 0");
}

namespace {

double max_speed(const VectorField2D& u) {
    double m = 0.0;
    auto ud = u.u.data();
    auto vd = u.v.data();
    for (std::size_t i = 0; i < ud.size(); ++i) m = std::max(m, std::hypot(ud[i], vd[i]));
    return m;
}

void check_cfl(const VectorField2D& u, double dt, const char* op) {
    const double limit = std::min(u.height(), u.width()) / 4.0;
    const double disp = max_speed(u) * dt;
    if (!std::isfinite(disp) || disp >= limit)
        throw CflError(std::string(op) + ": CFL violation, max displacement " + std::to_string(disp) +
                       " px >= " + std::to_string(limit) + " px");
}

}  // namespace

VectorField2D advect_diffuse(const VectorField2D& u_prev, double nu, double dt) {
    require_same_shape(u_prev.u, u_prev.v, "advect_diffuse");
    if (u_prev.height() < 3 || u_prev.width() < 3) throw DimensionError("advect_diffuse: grid must be at least 3x3");
    if (!(nu >= 0.0)) throw ConfigError("advect_diffuse: nu must be >= 0");
    if (!(dt > 0.0)) throw ConfigError("advect_diffuse: dt must be > 0");
    check_cfl(u_prev, dt, "advect_diffuse");
    if (nu * dt > 1.0)
        throw CflError("advect_diffuse: diffusion number nu*dt = " + std::to_string(nu * dt) + " exceeds 1");

    const int h = u_prev.height(), w = u_prev.width();
    VectorField2D out(h, w);
    parallel_for(0, h, [&](int y) {
        for (int x = 0; x < w; ++x) {
            const double px = x - dt * u_prev.u(x, y);
            const double py = y - dt * u_prev.v(x, y);
            out.u(x, y) = interpolate_bilinear(u_prev.u, px, py);
            out.v(x, y) = interpolate_bilinear(u_prev.v, px, py);
        }
    });
    if (nu > 0.0) {
        out.u += (dt * nu) * laplacian(u_prev.u);
        out.v += (dt * nu) * laplacian(u_prev.v);
    }
    return out;
}

VectorField2D pressure_gradient(const ScalarField2D& p) {
    const int h = p.height(), w = p.width();
    if (h < 3 || w < 3) throw DimensionError("pressure_gradient: grid must be at least 3x3");
    VectorField2D g(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 1; x < w - 1; ++x) g.u(x, y) = 0.5 * (p(x + 1, y) - p(x - 1, y));
    for (int y = 1; y < h - 1; ++y)
        for (int x = 0; x < w; ++x) g.v(x, y) = 0.5 * (p(x, y + 1) - p(x, y - 1));
    return g;
}

VectorField2D apply_pressure_gradient(const VectorField2D& u_star, const ScalarField2D& p, double rho, double dt) {
    require_same_shape(u_star, p, "apply_pressure_gradient");
    return u_star - (dt / rho) * pressure_gradient(p);
}

namespace {

// Matrix-free pieces of the weighted normal equations G^T W G lambda = G^T W u*.
// G is pressure_gradient, W the trapezoid weights (1/2 per boundary axis).
class ProjectionOperator {
public:
    ProjectionOperator(int h, int w) : h_(h), w_(w), gx_(size()), gy_(size()) {}

    std::size_t size() const { return static_cast<std::size_t>(h_) * static_cast<std::size_t>(w_); }

    double weight(int x, int y) const {
        const double wx = (x == 0 || x == w_ - 1) ? 0.5 : 1.0;
        const double wy = (y == 0 || y == h_ - 1) ? 0.5 : 1.0;
        return wx * wy;
    }

    /// out = G^T W (a, b)
    void apply_gt_w(const std::vector<double>& a, const std::vector<double>& b, std::vector<double>& out) const {
        std::fill(out.begin(), out.end(), 0.0);
        for (int y = 0; y < h_; ++y)
            for (int x = 1; x < w_ - 1; ++x) {
                const double g = 0.5 * weight(x, y) * a[idx(x, y)];
                out[idx(x + 1, y)] += g;
                out[idx(x - 1, y)] -= g;
            }
        for (int y = 1; y < h_ - 1; ++y)
            for (int x = 0; x < w_; ++x) {
                const double g = 0.5 * weight(x, y) * b[idx(x, y)];
                out[idx(x, y + 1)] += g;
                out[idx(x, y - 1)] -= g;
            }
    }

    void apply_g(const std::vector<double>& p, std::vector<double>& gx, std::vector<double>& gy) const {
        std::fill(gx.begin(), gx.end(), 0.0);
        std::fill(gy.begin(), gy.end(), 0.0);
        for (int y = 0; y < h_; ++y)
            for (int x = 1; x < w_ - 1; ++x) gx[idx(x, y)] = 0.5 * (p[idx(x + 1, y)] - p[idx(x - 1, y)]);
        for (int y = 1; y < h_ - 1; ++y)
            for (int x = 0; x < w_; ++x) gy[idx(x, y)] = 0.5 * (p[idx(x, y + 1)] - p[idx(x, y - 1)]);
    }

    void apply(const std::vector<double>& p, std::vector<double>& out) {
        apply_g(p, gx_, gy_);
        apply_gt_w(gx_, gy_, out);
    }

    std::size_t idx(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(w_) + static_cast<std::size_t>(x);
    }

private:
    int h_, w_;
    std::vector<double> gx_, gy_;
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// The null space of G is spanned by the indicators of the four (x, y) parity
// classes. Rounding leaks small components into it, so they are removed explicitly.
void remove_parity_means(std::vector<double>& a, int h, int w) {
    double sum[4] = {0, 0, 0, 0};
    double count[4] = {0, 0, 0, 0};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int c = (x & 1) + 2 * (y & 1);
            sum[c] += a[static_cast<std::size_t>(y) * w + x];
            count[c] += 1.0;
        }
    for (int c = 0; c < 4; ++c) sum[c] /= count[c];
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) a[static_cast<std::size_t>(y) * w + x] -= sum[(x & 1) + 2 * (y & 1)];
}

double max_abs(const std::vector<double>& a) {
    double m = 0.0;
    for (double d : a) m = std::max(m, std::abs(d));
    return m;
}

}  // namespace

Projection pressure_project(const VectorField2D& u_star, double rho, double dt, double tol, int max_iter) {
    require_same_shape(u_star.u, u_star.v, "pressure_project");
    const int h = u_star.height(), w = u_star.width();
    if (h < 3 || w < 3) throw DimensionError("pressure_project: grid must be at least 3x3");
    if (!u_star.all_finite()) throw NumericalError("pressure_project: non-finite tentative velocity");
    if (!(rho > 0.0) || !(dt > 0.0)) throw ConfigError("pressure_project: rho and dt must be > 0");
    if (!(tol > 0.0) || max_iter < 1) throw ConfigError("pressure_project: invalid solver settings");

    ProjectionOperator op(h, w);
    const std::size_t n = op.size();
    const std::vector<double> us(u_star.u.data().begin(), u_star.u.data().end());
    const std::vector<double> vs(u_star.v.data().begin(), u_star.v.data().end());

    std::vector<double> b(n), lambda(n, 0.0), r(n), d(n), q(n);
    op.apply_gt_w(us, vs, b);
    remove_parity_means(b, h, w);
    const double bnorm = max_abs(b);
    // Right-hand sides at rounding level (already solenoidal input) cannot be reduced further.
    const double scale = std::max(u_star.u.max_abs(), u_star.v.max_abs());
    const double floor = 64.0 * std::numeric_limits<double>::epsilon() * scale;

    Projection result;
    result.velocity = u_star;
    result.pressure = ScalarField2D(h, w);
    if (bnorm <= floor) {
        result.residual = bnorm == 0.0 ? 0.0 : 1.0;
        return result;
    }
    const double target = std::max(tol * bnorm, floor);

    r = b;
    d = r;
    double rr = dot(r, r);
    int it = 0;
    double rel = 1.0;
    while (true) {
        const double rmax = max_abs(r);
        rel = rmax / bnorm;
        if (rmax <= target) break;
        if (it >= max_iter)
            throw ConvergenceError("pressure_project: CG did not converge in " + std::to_string(max_iter) +
                                       " iterations, relative residual " + std::to_string(rel),
                                   it, rel);
        op.apply(d, q);
        const double dq = dot(d, q);
        if (!(dq > 0.0)) throw ConvergenceError("pressure_project: CG breakdown", it, rel);
        const double alpha = rr / dq;
        for (std::size_t i = 0; i < n; ++i) {
            lambda[i] += alpha * d[i];
            r[i] -= alpha * q[i];
        }
        remove_parity_means(r, h, w);
        const double rr_new = dot(r, r);
        const double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t i = 0; i < n; ++i) d[i] = r[i] + beta * d[i];
        ++it;
    }

    std::vector<double> gx(n), gy(n);
    op.apply_g(lambda, gx, gy);
    auto ou = result.velocity.u.data();
    auto ov = result.velocity.v.data();
    for (std::size_t i = 0; i < n; ++i) {
        ou[i] -= gx[i];
        ov[i] -= gy[i];
    }

    double mean = 0.0;
    for (double l : lambda) mean += l;
    mean /= static_cast<double>(n);
    auto pd = result.pressure.data();
    for (std::size_t i = 0; i < n; ++i) pd[i] = (rho / dt) * (lambda[i] - mean);

    result.iterations = it;
    result.residual = rel;
    return result;
}

VectorField2D explicit_tendency(const VectorField2D& u, double nu) {
    const ScalarField2D ux = diff_x(u.u), uy = diff_y(u.u);
    const ScalarField2D vx = diff_x(u.v), vy = diff_y(u.v);
    VectorField2D t(u.height(), u.width());
    t.u = nu * laplacian(u.u) - hadamard(u.u, ux) - hadamard(u.v, uy);
    t.v = nu * laplacian(u.v) - hadamard(u.u, vx) - hadamard(u.v, vy);
    return t;
}

VectorField2D ns_update_explicit(const VectorField2D& u, const ScalarField2D& p, double nu, double rho, double dt) {
    const VectorField2D t = explicit_tendency(u, nu);
    const VectorField2D g = pressure_gradient(p);
    VectorField2D out(u.height(), u.width());
    for (int y = 0; y < u.height(); ++y)
        for (int x = 0; x < u.width(); ++x) {
            out.u(x, y) = u.u(x, y) + dt * (t.u(x, y) - g.u(x, y) / rho);
            out.v(x, y) = u.v(x, y) + dt * (t.v(x, y) - g.v(x, y) / rho);
        }
    return out;
}

void apply_velocity_boundary(VectorField2D& u, const SimConfig& cfg) {
    const int h = u.height(), w = u.width();
    if (cfg.inflow > 0.0) {
        for (int y = 0; y < h; ++y) {
            u.u(0, y) = cfg.inflow;
            u.v(0, y) = 0.0;
            u.u(w - 1, y) = u.u(w - 2, y);
            u.v(w - 1, y) = u.v(w - 2, y);
        }
    } else {
        for (int y = 0; y < h; ++y) {
            u.u(0, y) = 0.0;
            u.u(w - 1, y) = 0.0;
        }
    }
    for (int x = 0; x < w; ++x) {
        u.v(x, 0) = 0.0;
        u.v(x, h - 1) = 0.0;
    }
    if (cfg.solid) {
        require_same_shape(u, *cfg.solid, "solid mask");
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if ((*cfg.solid)(x, y) != 0.0) {
                    u.u(x, y) = 0.0;
                    u.v(x, y) = 0.0;
                }
    }
}

SimState step_ns(const SimState& state, const SimConfig& cfg) {
    cfg.validate();
    const VectorField2D& u = state.velocity;
    require_same_shape(u.u, u.v, "step_ns");

    VectorField2D u_star = advect_diffuse(u, cfg.nu, cfg.dt);
    if (!cfg.force.u.empty()) {
        require_same_shape(u_star, cfg.force, "step_ns force");
        u_star += cfg.dt * cfg.force;
    }
    apply_velocity_boundary(u_star, cfg);

    Projection proj = pressure_project(u_star, cfg.rho, cfg.dt, cfg.tolerance, cfg.max_iterations);
    apply_velocity_boundary(proj.velocity, cfg);

    SimState next;
    next.velocity = std::move(proj.velocity);
    next.pressure = std::move(proj.pressure);
    if (!state.tracer.empty()) {
        require_same_shape(u, state.tracer, "step_ns tracer");
        next.tracer = warp_gaussian(state.tracer, cfg.dt * next.velocity, {cfg.tracer_diffusion, cfg.dt, 4});
    }
    next.time = state.time + cfg.dt;
    if (!next.velocity.all_finite()) throw NumericalError("step_ns: non-finite velocity at t = " + std::to_string(next.time));
    return next;
}

double kinetic_energy(const VectorField2D& u) {
    const int h = u.height(), w = u.width();
    double e = 0.0;
    for (int y = 0; y < h; ++y) {
        const double wy = (y == 0 || y == h - 1) ? 0.5 : 1.0;
        for (int x = 0; x < w; ++x) {
            const double wx = (x == 0 || x == w - 1) ? 0.5 : 1.0;
            e += wx * wy * (u.u(x, y) * u.u(x, y) + u.v(x, y) * u.v(x, y));
        }
    }
    return 0.5 * e;
}

ScalarField2D step_vorticity(const ScalarField2D& omega, const VectorField2D& u, double nu, double dt) {
    require_same_shape(u, omega, "step_vorticity");
    if (!(nu >= 0.0)) throw ConfigError("step_vorticity: nu must be >= 0");
    if (!(dt > 0.0)) throw ConfigError("step_vorticity: dt must be > 0");
    check_cfl(u, dt, "step_vorticity");
    return warp_gaussian(omega, dt * u, {nu, dt, 4});
}

void ParticleSet::validate() const {
    if (!(intensity > 0.0 && intensity <= 1.0)) throw ConfigError("particles: intensity must be in (0, 1]");
    if (!(radius > 0.0)) throw ConfigError("particles: radius must be > 0");
    for (const auto& p : positions)
        if (!std::isfinite(p[0]) || !std::isfinite(p[1])) throw ConfigError("particles: non-finite position");
}

ScalarField2D render_particles(const ParticleSet& particles, int height, int width) {
    if (height < 8 || width < 8) throw DimensionError("render_particles: image must be at least 8x8");
    particles.validate();
    ScalarField2D img(height, width);
    const double s = particles.radius;
    const int r = static_cast<int>(std::ceil(6.0 * s));
    const double inv = 1.0 / (2.0 * s * s);
    for (const auto& p : particles.positions) {
        const int cx = static_cast<int>(std::lround(p[0]));
        const int cy = static_cast<int>(std::lround(p[1]));
        for (int y = std::max(0, cy - r); y <= std::min(height - 1, cy + r); ++y)
            for (int x = std::max(0, cx - r); x <= std::min(width - 1, cx + r); ++x) {
                const double dx = x - p[0], dy = y - p[1];
                img(x, y) += particles.intensity * std::exp(-(dx * dx + dy * dy) * inv);
            }
    }
    for (double& v : img.data()) v = std::clamp(v, 0.0, 1.0);
    return img;
}

ParticleSet random_particles(int count, int height, int width, double margin, double intensity, double radius,
                             std::mt19937_64& rng) {
    std::uniform_real_distribution<double> ux(-margin, width - 1 + margin);
    std::uniform_real_distribution<double> uy(-margin, height - 1 + margin);
    ParticleSet ps;
    ps.intensity = intensity;
    ps.radius = radius;
    ps.positions.reserve(static_cast<std::size_t>(std::max(count, 0)));
    for (int i = 0; i < count; ++i) {
        const double x = ux(rng);
        const double y = uy(rng);
        ps.positions.push_back({x, y});
    }
    return ps;
}

ParticleSet advect_particles(const ParticleSet& particles, const VectorField2D& u, double dt, std::mt19937_64& rng,
                             double margin) {
    const int h = u.height(), w = u.width();
    const double xlo = -margin, xhi = w - 1 + margin;
    const double ylo = -margin, yhi = h - 1 + margin;
    std::uniform_real_distribution<double> ux(xlo, xhi);
    std::uniform_real_distribution<double> uy(ylo, yhi);
    auto in_grid = [&](double x, double y) { return x >= 0.0 && x <= w - 1.0 && y >= 0.0 && y <= h - 1.0; };

    ParticleSet out = particles;
    for (auto& p : out.positions) {
        const double vx = interpolate_bilinear(u.u, p[0], p[1]);
        const double vy = interpolate_bilinear(u.v, p[0], p[1]);
        p[0] += dt * vx;
        p[1] += dt * vy;
        if (p[0] >= xlo && p[0] <= xhi && p[1] >= ylo && p[1] <= yhi) continue;
        do {
            const double x = ux(rng);
            const double y = uy(rng);
            p = {x, y};
        } while (margin > 0.0 && in_grid(p[0], p[1]));
    }
    return out;
}

FlowPreset parse_preset(const std::string& name) {
    if (name == "taylor-green") return FlowPreset::TaylorGreen;
    if (name == "cylinder-wake") return FlowPreset::CylinderWake;
    if (name == "decaying-turbulence") return FlowPreset::DecayingTurbulence;
    if (name == "uniform") return FlowPreset::Uniform;
    throw ConfigError("unknown flow preset '" + name + "'");
}

std::string preset_name(FlowPreset preset) {
    switch (preset) {
        case FlowPreset::TaylorGreen: return "taylor-green";
        case FlowPreset::CylinderWake: return "cylinder-wake";
        case FlowPreset::DecayingTurbulence: return "decaying-turbulence";
        case FlowPreset::Uniform: return "uniform";
    }
    return "unknown";
}

VectorField2D random_solenoidal(int height, int width, double max_speed_px, std::mt19937_64& rng) {
    // Stream function as a sine series vanishing on the walls, modes in a wavenumber band.
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double lx = width - 1.0, ly = height - 1.0;
    VectorField2D u(height, width);
    for (int m = 1; m <= 8; ++m)
        for (int n = 1; n <= 8; ++n) {
            const double k2 = m * m + n * n;
            const double a = gauss(rng);
            if (k2 < 4.0 || k2 > 40.0) continue;
            const double amp = a / k2;
            const double kx = m * std::numbers::pi / lx, ky = n * std::numbers::pi / ly;
            for (int y = 0; y < height; ++y)
                for (int x = 0; x < width; ++x) {
                    // psi = amp sin(kx x) sin(ky y); u = dpsi/dy, v = -dpsi/dx
                    u.u(x, y) += amp * ky * std::sin(kx * x) * std::cos(ky * y);
                    u.v(x, y) -= amp * kx * std::cos(kx * x) * std::sin(ky * y);
                }
        }
    SimConfig walls;
    apply_velocity_boundary(u, walls);
    Projection p = pressure_project(u, 1.0, 1.0, 1e-12, 20000);
    const double m = max_speed(p.velocity);
    if (m > 0.0) p.velocity *= max_speed_px / m;
    return p.velocity;
}

namespace {

ScalarField2D initial_tracer(int height, int width, std::mt19937_64& rng) {
    const int count = std::max(4, height * width / 64);
    ParticleSet blobs = random_particles(count, height, width, 0.0, 0.5, 3.0, rng);
    return render_particles(blobs, height, width);
}

}  // namespace

PresetSetup make_preset(FlowPreset preset, const SimConfig& base, const PresetOptions& opts, std::uint64_t seed) {
    const int h = opts.height, w = opts.width;
    if (h < 8 || w < 8) throw DimensionError("preset grids must be at least 8x8");
    base.validate();
    std::mt19937_64 rng(seed ^ 0x5eed5eed5eedULL);
    PresetSetup s;
    s.config = base;
    s.state.pressure = ScalarField2D(h, w);
    const double U = opts.speed;

    switch (preset) {
        case FlowPreset::TaylorGreen: {
            const double kx = 2.0 * std::numbers::pi / (w - 1), ky = 2.0 * std::numbers::pi / (h - 1);
            s.state.velocity = VectorField2D::from_function(h, w, [&](double x, double y) {
                return std::pair{U * std::sin(kx * x) * std::cos(ky * y), -U * (kx / ky) * std::cos(kx * x) * std::sin(ky * y)};
            });
            break;
        }
        case FlowPreset::CylinderWake: {
            const double cx = w / 5.0, cy = (h - 1) / 2.0, radius = std::max(2.0, h / 10.0);
            ScalarField2D solid(h, w);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    if (std::hypot(x - cx, y - cy) <= radius) solid(x, y) = 1.0;
            s.config.solid = solid;
            s.config.inflow = U;
            std::uniform_real_distribution<double> jitter(-0.05 * U, 0.05 * U);
            s.state.velocity = VectorField2D(h, w, U, 0.0);
            for (int y = 1; y < h - 1; ++y)
                for (int x = 1; x < w - 1; ++x) s.state.velocity.v(x, y) = jitter(rng);
            apply_velocity_boundary(s.state.velocity, s.config);
            break;
        }
        case FlowPreset::DecayingTurbulence:
            s.state.velocity = random_solenoidal(h, w, U, rng);
            break;
        case FlowPreset::Uniform: {
            std::array<double, 2> d{};
            if (opts.displacement) {
                d = *opts.displacement;
            } else {
                std::uniform_real_distribution<double> mag(0.0, 5.0);
                std::uniform_real_distribution<double> ang(0.0, 2.0 * std::numbers::pi);
                const double r = mag(rng), a = ang(rng);
                d = {r * std::cos(a), r * std::sin(a)};
            }
            s.state.velocity = VectorField2D(h, w, d[0], d[1]);
            break;
        }
    }
    s.state.tracer = initial_tracer(h, w, rng);
    return s;
}

Dataset gen_dataset(const SimConfig& cfg, FlowPreset preset, int frames, std::uint64_t seed,
                    const DatasetOptions& opts) {
    if (frames < 2) throw ConfigError("gen_dataset: need at least 2 frames");
    if (opts.steps_per_frame < 1) throw ConfigError("gen_dataset: steps per frame must be >= 1");
    PresetSetup setup = make_preset(preset, cfg, opts.preset, seed);
    const int h = opts.preset.height, w = opts.preset.width;
    const bool simulated = preset != FlowPreset::Uniform;
    const double frame_dt = simulated ? opts.steps_per_frame * setup.config.dt : 1.0;

    if (simulated)
        for (int i = 0; i < opts.warmup_steps; ++i) setup.state = step_ns(setup.state, setup.config);

    std::mt19937_64 rng(seed);
    int count = opts.particles;
    if (count <= 0) count = static_cast<int>(std::lround((h + 2 * opts.margin) * (w + 2 * opts.margin) / 12.0));
    ParticleSet particles = random_particles(count, h, w, opts.margin, opts.particle_intensity, opts.particle_sigma, rng);

    Dataset ds;
    for (int k = 0; k < frames; ++k) {
        ds.images.push_back(render_particles(particles, h, w));
        ds.tracers.push_back(setup.state.tracer);
        if (k == frames - 1) break;
        ds.flows.push_back(frame_dt * setup.state.velocity);
        particles = advect_particles(particles, setup.state.velocity, frame_dt, rng, opts.margin);
        if (simulated)
            for (int i = 0; i < opts.steps_per_frame; ++i) setup.state = step_ns(setup.state, setup.config);
    }
    return ds;
}

}  // namespace fluidest
