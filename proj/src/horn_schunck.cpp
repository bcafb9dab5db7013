#include <cmath>

#include "fluidest/predict.hpp"
#include "fluidest/warp.hpp"

namespace fluidest {

namespace {

// Linearization of I2(x + u) around u0: I2(x + u) - I1 ~ a.(u - u0) + c.
struct Linearization {
    VectorField2D a;
    ScalarField2D c;
};

Linearization linearize(const ScalarField2D& i1, const ScalarField2D& i2, const VectorField2D& u0) {
    const ScalarField2D i2w = warp_bilinear(i2, u0, WarpDirection::Plus);
    Linearization lin;
    lin.a = 0.5 * (gradient(i1) + gradient(i2w));
    lin.c = i2w - i1;
    return lin;
}

double energy(const Linearization& lin, const VectorField2D& u0, const VectorField2D& u, double alpha) {
    const int h = u.height(), w = u.width();
    double e = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double r = lin.a.u(x, y) * (u.u(x, y) - u0.u(x, y)) + lin.a.v(x, y) * (u.v(x, y) - u0.v(x, y)) + lin.c(x, y);
            e += r * r;
            if (x + 1 < w) e += alpha * alpha * (std::pow(u.u(x + 1, y) - u.u(x, y), 2) + std::pow(u.v(x + 1, y) - u.v(x, y), 2));
            if (y + 1 < h) e += alpha * alpha * (std::pow(u.u(x, y + 1) - u.u(x, y), 2) + std::pow(u.v(x, y + 1) - u.v(x, y), 2));
        }
    return e;
}

// Exact minimization over the pixel's own vector with its neighbors fixed:
// (a a^T + n alpha^2 I) w = n alpha^2 wbar - a c'  solved by Sherman-Morrison.
void sweep(const Linearization& lin, const VectorField2D& u0, VectorField2D& u, double alpha, int color) {
    const int h = u.height(), w = u.width();
    const double a2 = alpha * alpha;
    for (int y = 0; y < h; ++y)
        for (int x = (y + color) & 1; x < w; x += 2) {
            double su = 0.0, sv = 0.0;
            int n = 0;
            auto add = [&](int i, int j) {
                su += u.u(i, j);
                sv += u.v(i, j);
                ++n;
            };
            if (x > 0) add(x - 1, y);
            if (x + 1 < w) add(x + 1, y);
            if (y > 0) add(x, y - 1);
            if (y + 1 < h) add(x, y + 1);
            const double mu = su / n, mv = sv / n;
            const double ax = lin.a.u(x, y), ay = lin.a.v(x, y);
            const double c = lin.c(x, y) - ax * u0.u(x, y) - ay * u0.v(x, y);
            const double k = (ax * mu + ay * mv + c) / (n * a2 + ax * ax + ay * ay);
            u.u(x, y) = mu - ax * k;
            u.v(x, y) = mv - ay * k;
        }
}

}  // namespace

double hs_energy(const ScalarField2D& i1, const ScalarField2D& i2, const VectorField2D& u0, const VectorField2D& u,
                 double alpha) {
    require_same_shape(i1, i2, "hs_energy");
    require_same_shape(u, i1, "hs_energy");
    require_same_shape(u0, i1, "hs_energy");
    return energy(linearize(i1, i2, u0), u0, u, alpha);
}

VectorField2D estimate_hs(const ScalarField2D& i1, const ScalarField2D& i2, const HsConfig& cfg,
                          std::vector<double>* energy_trace) {
    require_same_shape(i1, i2, "estimate_hs");
    if (i1.height() < 3 || i1.width() < 3) throw DimensionError("estimate_hs: images must be at least 3x3");
    if (!(cfg.alpha > 0.0)) throw ConfigError("estimate_hs: alpha must be > 0");
    if (cfg.iterations < 0 || cfg.warps < 1) throw ConfigError("estimate_hs: invalid iteration counts");

    VectorField2D u(i1.height(), i1.width());
    for (int warp = 0; warp < cfg.warps; ++warp) {
        const VectorField2D u0 = u;
        const Linearization lin = linearize(i1, i2, u0);
        for (int it = 0; it < cfg.iterations; ++it) {
            sweep(lin, u0, u, cfg.alpha, 0);
            sweep(lin, u0, u, cfg.alpha, 1);
            if (energy_trace) energy_trace->push_back(energy(lin, u0, u, cfg.alpha));
        }
    }
    return u;
}

}  // namespace fluidest
