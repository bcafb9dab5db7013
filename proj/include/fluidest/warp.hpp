#pragma once

#include <vector>

#include "fluidest/fields.hpp"

namespace fluidest {

struct WarpConfig {
    double diffusion = 0.0;  ///< D, pixel^2 per frame
    double dt = 1.0;         ///< time interval, frames
    int truncation = 4;      ///< kernel window radius in standard deviations

    void validate() const;
};

/// Gather transport with a Gaussian kernel: output(x) is the kernel-weighted mean of
/// f around x - w(x), variance 2*D*dt per axis. The kernel center is clamped to the
/// grid, window nodes outside the grid are dropped and the remaining weights are
/// renormalized. D = 0 falls back to bilinear sampling at x - w(x).
ScalarField2D warp_gaussian(const ScalarField2D& f, const VectorField2D& w, const WarpConfig& cfg);

struct KernelTap {
    int x;
    int y;
    double weight;
};

/// The normalized taps warp_gaussian uses for output node (x, y). Only meaningful for D > 0.
std::vector<KernelTap> gaussian_taps(const VectorField2D& w, const WarpConfig& cfg, int x, int y);

enum class WarpDirection { Plus, Minus };

/// output(x) = f(x +/- w(x)) by bilinear interpolation with clamped coordinates.
ScalarField2D warp_bilinear(const ScalarField2D& f, const VectorField2D& w, WarpDirection direction);

}  // namespace fluidest
