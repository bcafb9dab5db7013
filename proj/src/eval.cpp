#include "fluidest/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fluidest/warp.hpp"

namespace fluidest {

double aepe(const VectorField2D& est, const VectorField2D& gt, bool normalize) {
    require_same_shape(est, gt, "aepe");
    const auto eu = est.u.data(), ev = est.v.data(), gu = gt.u.data(), gv = gt.v.data();
    double sum = 0.0;
    for (std::size_t i = 0; i < eu.size(); ++i) sum += std::hypot(eu[i] - gu[i], ev[i] - gv[i]);
    const double mean = sum / static_cast<double>(eu.size());
    return normalize ? mean * 100.0 / est.width() : mean;
}

double aae(const VectorField2D& est, const VectorField2D& gt) {
    require_same_shape(est, gt, "aae");
    const auto eu = est.u.data(), ev = est.v.data(), gu = gt.u.data(), gv = gt.v.data();
    double sum = 0.0;
    for (std::size_t i = 0; i < eu.size(); ++i) {
        const double dot = eu[i] * gu[i] + ev[i] * gv[i] + 1.0;
        const double norm = std::sqrt((eu[i] * eu[i] + ev[i] * ev[i] + 1.0) * (gu[i] * gu[i] + gv[i] * gv[i] + 1.0));
        sum += std::acos(std::clamp(dot / norm, -1.0, 1.0));
    }
    return sum / static_cast<double>(eu.size()) * 180.0 / std::numbers::pi;
}

DivergenceStats divergence_stats(const VectorField2D& u) {
    const ScalarField2D d = divergence(u);
    DivergenceStats s;
    long n = 0;
    for (int y = 0; y < d.height(); ++y)
        for (int x = 0; x < d.width(); ++x)
            if (is_interior(x, y, d.height(), d.width())) {
                const double a = std::abs(d(x, y));
                s.mean_abs += a;
                s.max_abs = std::max(s.max_abs, a);
                ++n;
            }
    if (n > 0) s.mean_abs /= static_cast<double>(n);
    return s;
}

Histogram displacement_histogram(const VectorField2D& u, int bins, double lo, double hi) {
    if (bins < 1) throw ConfigError("displacement_histogram: bins must be >= 1");
    if (!(hi > lo)) throw ConfigError("displacement_histogram: empty range");
    Histogram h;
    h.edges.resize(static_cast<std::size_t>(bins) + 1);
    const double width = (hi - lo) / bins;
    for (int i = 0; i <= bins; ++i) h.edges[static_cast<std::size_t>(i)] = i == bins ? hi : lo + i * width;
    h.u.assign(static_cast<std::size_t>(bins), 0);
    h.v.assign(static_cast<std::size_t>(bins), 0);
    auto bin_of = [&](double x) {
        if (std::isnan(x)) return 0;
        return std::clamp(static_cast<int>(std::floor((x - lo) / width)), 0, bins - 1);
    };
    for (double x : u.u.data()) ++h.u[static_cast<std::size_t>(bin_of(x))];
    for (double x : u.v.data()) ++h.v[static_cast<std::size_t>(bin_of(x))];
    return h;
}

std::vector<std::pair<double, double>> wake_profile(std::span<const VectorField2D> frames, int column) {
    if (frames.empty()) throw ConfigError("wake_profile: no frames");
    const int h = frames[0].height(), w = frames[0].width();
    if (column < 0 || column >= w)
        throw DimensionError("wake_profile: column " + std::to_string(column) + " outside [0, " + std::to_string(w) + ")");
    std::vector<std::pair<double, double>> out(static_cast<std::size_t>(h), {0.0, 0.0});
    for (const auto& f : frames) {
        require_same_shape(f, frames[0], "wake_profile");
        for (int y = 0; y < h; ++y) {
            out[static_cast<std::size_t>(y)].first += f.u(column, y);
            out[static_cast<std::size_t>(y)].second += f.v(column, y);
        }
    }
    const double n = static_cast<double>(frames.size());
    for (auto& p : out) {
        p.first /= n;
        p.second /= n;
    }
    return out;
}

Reconstruction reconstruction_residual(const ScalarField2D& i1, const ScalarField2D& i2, const VectorField2D& u) {
    require_same_shape(i1, i2, "reconstruction_residual");
    require_same_shape(u, i1, "reconstruction_residual");
    const int h = i1.height(), w = i1.width();
    if (h < 2 * kInteriorMargin + 1 || w < 2 * kInteriorMargin + 1)
        throw DimensionError("reconstruction_residual: grid too small for the interior crop");
    Reconstruction r;
    r.image = warp_bilinear(i1, u, WarpDirection::Minus);
    for (int y = kInteriorMargin; y < h - kInteriorMargin; ++y)
        for (int x = kInteriorMargin; x < w - kInteriorMargin; ++x) r.residual += std::abs(r.image(x, y) - i2(x, y));
    r.residual /= static_cast<double>(h - 2 * kInteriorMargin) * (w - 2 * kInteriorMargin);
    return r;
}

double MetricReport::mean_aepe() const {
    double s = 0.0;
    for (const auto& f : frames) s += f.aepe;
    return frames.empty() ? 0.0 : s / static_cast<double>(frames.size());
}

double MetricReport::mean_aae() const {
    double s = 0.0;
    for (const auto& f : frames) s += f.aae;
    return frames.empty() ? 0.0 : s / static_cast<double>(frames.size());
}

double MetricReport::max_divergence() const {
    double m = 0.0;
    for (const auto& f : frames) m = std::max(m, f.div_max);
    return m;
}

MetricReport evaluate_sequence(std::span<const VectorField2D> est, std::span<const VectorField2D> gt, bool normalize) {
    if (est.size() != gt.size())
        throw DimensionError("evaluate_sequence: " + std::to_string(est.size()) + " estimates for " +
                             std::to_string(gt.size()) + " ground-truth frames");
    MetricReport r;
    for (std::size_t k = 0; k < est.size(); ++k) {
        const auto d = divergence_stats(est[k]);
        r.frames.push_back({static_cast<int>(k), aepe(est[k], gt[k], normalize), aae(est[k], gt[k]), d.mean_abs, d.max_abs});
    }
    return r;
}

}  // namespace fluidest
