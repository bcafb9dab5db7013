#include "fluidest/warp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fluidest/parallel.hpp"

namespace fluidest {

void WarpConfig::validate() const {
    if (!(diffusion >= 0.0) || !std::isfinite(diffusion))
        throw ConfigError("warp: diffusion must be finite and >= 0, got " + std::to_string(diffusion));
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw ConfigError("warp: time interval must be > 0, got " + std::to_string(dt));
    if (truncation < 3) throw ConfigError("warp: truncation radius must be >= 3 standard deviations");
}

namespace {

struct Window {
    double cx, cy;
    int x0, x1, y0, y1;
    double inv_two_var;
};

Window make_window(const VectorField2D& w, const WarpConfig& cfg, int x, int y) {
    const int width = w.width(), height = w.height();
    Window win{};
    win.cx = std::clamp(x - w.u(x, y), 0.0, width - 1.0);
    win.cy = std::clamp(y - w.v(x, y), 0.0, height - 1.0);
    const double var = 2.0 * cfg.diffusion * cfg.dt;
    const int r = static_cast<int>(std::ceil(cfg.truncation * std::sqrt(var)));
    const int rx = static_cast<int>(std::lround(win.cx));
    const int ry = static_cast<int>(std::lround(win.cy));
    win.x0 = std::max(0, rx - r);
    win.x1 = std::min(width - 1, rx + r);
    win.y0 = std::max(0, ry - r);
    win.y1 = std::min(height - 1, ry + r);
    win.inv_two_var = 1.0 / (2.0 * var);
    return win;
}

// Exponents are shifted by the smallest squared distance in the window so the
// largest weight is 1 and narrow kernels never underflow to an all-zero window.
template <typename Visit>
void visit_taps(const Window& win, Visit&& visit) {
    double dmin = std::numeric_limits<double>::infinity();
    for (int j = win.y0; j <= win.y1; ++j)
        for (int i = win.x0; i <= win.x1; ++i) {
            const double dx = i - win.cx, dy = j - win.cy;
            dmin = std::min(dmin, dx * dx + dy * dy);
        }
    for (int j = win.y0; j <= win.y1; ++j)
        for (int i = win.x0; i <= win.x1; ++i) {
            const double dx = i - win.cx, dy = j - win.cy;
            visit(i, j, std::exp(-(dx * dx + dy * dy - dmin) * win.inv_two_var));
        }
}

}  // namespace

std::vector<KernelTap> gaussian_taps(const VectorField2D& w, const WarpConfig& cfg, int x, int y) {
    cfg.validate();
    std::vector<KernelTap> taps;
    if (cfg.diffusion == 0.0) return taps;
    const Window win = make_window(w, cfg, x, y);
    double total = 0.0;
    visit_taps(win, [&](int i, int j, double k) {
        taps.push_back({i, j, k});
        total += k;
    });
    for (auto& t : taps) t.weight /= total;
    return taps;
}

ScalarField2D warp_gaussian(const ScalarField2D& f, const VectorField2D& w, const WarpConfig& cfg) {
    cfg.validate();
    require_same_shape(w, f, "warp_gaussian");
    const int h = f.height(), width = f.width();
    ScalarField2D out(h, width);
    if (cfg.diffusion == 0.0) {
        parallel_for(0, h, [&](int y) {
            for (int x = 0; x < width; ++x) out(x, y) = interpolate_bilinear(f, x - w.u(x, y), y - w.v(x, y));
        });
        return out;
    }
    parallel_for(0, h, [&](int y) {
        for (int x = 0; x < width; ++x) {
            const Window win = make_window(w, cfg, x, y);
            double acc = 0.0, total = 0.0;
            visit_taps(win, [&](int i, int j, double k) {
                acc += k * f(i, j);
                total += k;
            });
            out(x, y) = acc / total;
        }
    });
    return out;
}

ScalarField2D warp_bilinear(const ScalarField2D& f, const VectorField2D& w, WarpDirection direction) {
    require_same_shape(w, f, "warp_bilinear");
    const double s = direction == WarpDirection::Plus ? 1.0 : -1.0;
    const int h = f.height(), width = f.width();
    ScalarField2D out(h, width);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < width; ++x) out(x, y) = interpolate_bilinear(f, x + s * w.u(x, y), y + s * w.v(x, y));
    return out;
}

}  // namespace fluidest
