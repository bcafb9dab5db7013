#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fluidest/fields.hpp"

namespace fluidest {

struct SimConfig {
    double nu = 0.01;   ///< kinematic viscosity, pixel^2 per frame
    double rho = 1.0;   ///< density
    double dt = 0.01;   ///< time step, frames
    VectorField2D force;  ///< empty means no forcing
    double tolerance = 1e-10;
    int max_iterations = 10000;
    double tracer_diffusion = 0.05;

    /// Optional obstacle: nodes with a nonzero mask value are held at zero velocity.
    std::optional<ScalarField2D> solid;
    /// When > 0 the left column is an inflow of this speed and the right column a
    /// zero-gradient outflow; otherwise all four walls are impermeable.
    double inflow = 0.0;

    void validate() const;
};

struct SimState {
    VectorField2D velocity;
    ScalarField2D pressure;
    ScalarField2D tracer;
    double time = 0.0;
};

/// Semi-Lagrangian tentative velocity: backtrace x - dt*u(x), bilinear sample, plus an
/// explicit viscous increment dt*nu*laplacian(u). Throws CflError when the largest
/// displacement reaches a quarter of the smaller grid dimension.
VectorField2D advect_diffuse(const VectorField2D& u_prev, double nu, double dt);

/// Gradient used by the projection: central differences, with the wall-normal
/// derivative set to zero on the boundary ring so walls stay impermeable.
VectorField2D pressure_gradient(const ScalarField2D& p);

/// u* - (dt/rho) * pressure_gradient(p).
VectorField2D apply_pressure_gradient(const VectorField2D& u_star, const ScalarField2D& p, double rho, double dt);

struct Projection {
    VectorField2D velocity;
    ScalarField2D pressure;  ///< zero mean
    int iterations = 0;
    double residual = 0.0;  ///< final max-norm residual relative to the right-hand side
};

/// Discrete Helmholtz projection with homogeneous Neumann walls, solved by conjugate
/// gradients. Throws ConvergenceError if the relative residual stays above tol.
Projection pressure_project(const VectorField2D& u_star, double rho, double dt, double tol, int max_iter);

/// -(u.grad)u + nu*laplacian(u) with the canonical stencils.
VectorField2D explicit_tendency(const VectorField2D& u, double nu);

/// One explicit Navier-Stokes update u + dt*(tendency - grad(p)/rho), written as a single expression.
VectorField2D ns_update_explicit(const VectorField2D& u, const ScalarField2D& p, double nu, double rho, double dt);

/// Zero the wall-normal velocity components (and apply inflow/obstacle settings).
void apply_velocity_boundary(VectorField2D& u, const SimConfig& cfg);

SimState step_ns(const SimState& state, const SimConfig& cfg);

/// Kinetic energy with trapezoid weights (half weight on boundary rows and columns).
double kinetic_energy(const VectorField2D& u);

/// Advects and diffuses vorticity in one Gaussian-kernel warp: D = nu, displacement u*dt.
ScalarField2D step_vorticity(const ScalarField2D& omega, const VectorField2D& u, double nu, double dt);

struct ParticleSet {
    std::vector<std::array<double, 2>> positions;  ///< (x, y)
    double intensity = 1.0;
    double radius = 1.0;  ///< Gaussian sigma, pixels

    void validate() const;
};

ScalarField2D render_particles(const ParticleSet& particles, int height, int width);

/// Explicit Euler step pos += dt*u(pos). The domain is the grid grown by margin on every
/// side; particles leaving it are respawned uniformly at random, restricted to the
/// margin band when margin > 0 so that no particle appears inside the visible grid.
ParticleSet advect_particles(const ParticleSet& particles, const VectorField2D& u, double dt,
                             std::mt19937_64& rng, double margin = 0.0);

/// Uniformly distributed particles over the grid grown by margin.
ParticleSet random_particles(int count, int height, int width, double margin, double intensity, double radius,
                             std::mt19937_64& rng);

enum class FlowPreset { TaylorGreen, CylinderWake, DecayingTurbulence, Uniform };

FlowPreset parse_preset(const std::string& name);
std::string preset_name(FlowPreset preset);

/// Velocity field and configuration a preset starts from.
struct PresetSetup {
    SimState state;
    SimConfig config;
};

struct PresetOptions {
    int height = 64;
    int width = 64;
    double speed = 1.0;  ///< characteristic speed, pixels per frame
    std::optional<std::array<double, 2>> displacement;  ///< uniform preset only
};

PresetSetup make_preset(FlowPreset preset, const SimConfig& base, const PresetOptions& opts, std::uint64_t seed);

/// Random band-limited solenoidal field with impermeable walls, scaled to max speed.
VectorField2D random_solenoidal(int height, int width, double max_speed, std::mt19937_64& rng);

struct DatasetOptions {
    PresetOptions preset;
    int steps_per_frame = 10;  ///< simulation steps between consecutive frames
    int warmup_steps = 0;
    int particles = 0;  ///< 0 picks a density of one particle per 12 square pixels
    double particle_sigma = 1.5;
    double particle_intensity = 1.0;
    double margin = 8.0;
};

struct Dataset {
    std::vector<ScalarField2D> images;  ///< frames
    std::vector<VectorField2D> flows;   ///< frames-1 displacements, image k to image k+1
    std::vector<ScalarField2D> tracers;
};

Dataset gen_dataset(const SimConfig& cfg, FlowPreset preset, int frames, std::uint64_t seed,
                    const DatasetOptions& opts = {});

}  // namespace fluidest
