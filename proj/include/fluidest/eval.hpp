#pragma once

#include <span>
#include <utility>
#include <vector>

#include "fluidest/fields.hpp"

namespace fluidest {

/// Mean end-point error over all pixels. normalize scales to pixels per 100 pixels of image width.
double aepe(const VectorField2D& est, const VectorField2D& gt, bool normalize = false);

/// Mean angle in degrees between the augmented vectors (u, v, 1).
double aae(const VectorField2D& est, const VectorField2D& gt);

struct DivergenceStats {
    double mean_abs = 0.0;
    double max_abs = 0.0;
};

/// Statistics of |divergence(u)| over interior nodes.
DivergenceStats divergence_stats(const VectorField2D& u);

struct Histogram {
    std::vector<double> edges;  ///< bins + 1 increasing edges
    std::vector<long> u;
    std::vector<long> v;
};

/// Equal-width bins over [lo, hi]. Values outside the range are counted in the end bins,
/// so each component's counts always sum to the pixel count.
Histogram displacement_histogram(const VectorField2D& u, int bins, double lo, double hi);

/// For each row, the mean (u, v) at the given column across all frames.
std::vector<std::pair<double, double>> wake_profile(std::span<const VectorField2D> frames, int column);

struct Reconstruction {
    ScalarField2D image;  ///< I1 sampled at x - u(x)
    double residual = 0.0;  ///< crop mean of |image - I2|
};

Reconstruction reconstruction_residual(const ScalarField2D& i1, const ScalarField2D& i2, const VectorField2D& u);

struct FrameMetrics {
    int frame = 0;
    double aepe = 0.0;
    double aae = 0.0;
    double div_mean = 0.0;
    double div_max = 0.0;
};

struct MetricReport {
    std::vector<FrameMetrics> frames;

    double mean_aepe() const;
    double mean_aae() const;
    double max_divergence() const;
};

MetricReport evaluate_sequence(std::span<const VectorField2D> est, std::span<const VectorField2D> gt,
                               bool normalize = false);

}  // namespace fluidest
