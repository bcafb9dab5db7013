#include "fluidest/predict.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fluidest/optim.hpp"

namespace fluidest {

void PredictorConfig::validate() const {
    if (!(lambda_s >= 0.0) || !(lambda_d >= 0.0)) throw ConfigError("predictor: weights must be >= 0");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("predictor: gamma must be in (0, 1]");
    if (!(epsilon > 0.0)) throw ConfigError("predictor: epsilon must be > 0");
    if (levels < 1) throw ConfigError("predictor: levels must be >= 1");
    if (iterations < 0) throw ConfigError("predictor: iterations must be >= 0");
    if (!(step >= 0.0)) throw ConfigError("predictor: step must be >= 0");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
        throw ConfigError("predictor: moment decays must be in (0, 1)");
}

double charbonnier(double x, double gamma, double epsilon) { return std::pow(x * x + epsilon * epsilon, gamma); }

double charbonnier_derivative(double x, double gamma, double epsilon) {
    return 2.0 * gamma * x * std::pow(x * x + epsilon * epsilon, gamma - 1.0);
}

ScalarField2D charbonnier(const ScalarField2D& x, double gamma, double epsilon) {
    ScalarField2D out = x;
    for (double& v : out.data()) v = charbonnier(v, gamma, epsilon);
    return out;
}

namespace {

// Value and derivative of the penalty with a single pow call.
inline void charbonnier_both(double x, double gamma, double epsilon, double& value, double& deriv) {
    const double t = x * x + epsilon * epsilon;
    const double p = std::pow(t, gamma - 1.0);
    value = p * t;
    deriv = 2.0 * gamma * x * p;
}

void require_crop(const ScalarField2D& f, const char* op) {
    if (f.height() < 2 * kInteriorMargin + 1 || f.width() < 2 * kInteriorMargin + 1)
        throw DimensionError(std::string(op) + ": grid too small for the interior crop");
}

double crop_count(int h, int w) {
    return static_cast<double>(h - 2 * kInteriorMargin) * static_cast<double>(w - 2 * kInteriorMargin);
}

void check_inputs(const ScalarField2D& i1, const ScalarField2D& i2, const FlowPair& flows, const char* op) {
    require_same_shape(i1, i2, op);
    require_same_shape(flows.forward, i1, op);
    require_same_shape(flows.backward, i1, op);
    require_crop(i1, op);
}

FlowPair zero_pair(int h, int w) { return {VectorField2D(h, w), VectorField2D(h, w)}; }

// One direction of the data term: mean sigma(a(x) - b(x + u(x))), gradient into g.
double photometric_direction(const ScalarField2D& a, const ScalarField2D& b, const VectorField2D& u,
                             const PredictorConfig& cfg, VectorField2D* g) {
    const int h = a.height(), w = a.width();
    const double inv = 1.0 / crop_count(h, w);
    double total = 0.0;
    for (int y = kInteriorMargin; y < h - kInteriorMargin; ++y)
        for (int x = kInteriorMargin; x < w - kInteriorMargin; ++x) {
            const BilinearSample s = sample_bilinear(b, x + u.u(x, y), y + u.v(x, y));
            const double r = a(x, y) - s.value;
            double value, deriv;
            charbonnier_both(r, cfg.gamma, cfg.epsilon, value, deriv);
            total += value;
            if (g) {
                const double d = -deriv * inv;
                g->u(x, y) += d * s.d_dx;
                g->v(x, y) += d * s.d_dy;
            }
        }
    return total * inv;
}

// Crop mean of sigma(d), adding the gradient with respect to d (already divided by the count) into gd.
double crop_penalty(const ScalarField2D& d, const PredictorConfig& cfg, double scale, ScalarField2D* gd) {
    const int h = d.height(), w = d.width();
    const double inv = scale / crop_count(h, w);
    double total = 0.0;
    for (int y = kInteriorMargin; y < h - kInteriorMargin; ++y)
        for (int x = kInteriorMargin; x < w - kInteriorMargin; ++x) {
            double value, deriv;
            charbonnier_both(d(x, y), cfg.gamma, cfg.epsilon, value, deriv);
            total += value;
            if (gd) (*gd)(x, y) = deriv * inv;
        }
    return total * inv;
}

double smoothness_direction(const VectorField2D& u, const PredictorConfig& cfg, VectorField2D* g) {
    const int h = u.height(), w = u.width();
    double total = 0.0;
    for (int c = 0; c < 2; ++c) {
        const ScalarField2D& comp = c == 0 ? u.u : u.v;
        ScalarField2D gx(h, w), gy(h, w);
        total += crop_penalty(diff_x(comp), cfg, 0.5, g ? &gx : nullptr);
        total += crop_penalty(diff_y(comp), cfg, 0.5, g ? &gy : nullptr);
        if (g) (c == 0 ? g->u : g->v) += diff_x_adjoint(gx) + diff_y_adjoint(gy);
    }
    return total;
}

double divergence_direction(const VectorField2D& u, const PredictorConfig& cfg, VectorField2D* g) {
    const int h = u.height(), w = u.width();
    ScalarField2D gd(h, w);
    const double value = crop_penalty(divergence(u), cfg, 1.0, g ? &gd : nullptr);
    if (g) {
        g->u += diff_x_adjoint(gd);
        g->v += diff_y_adjoint(gd);
    }
    return value;
}

}  // namespace

double photometric_loss(const ScalarField2D& i1, const ScalarField2D& i2, const FlowPair& flows,
                        const PredictorConfig& cfg) {
    check_inputs(i1, i2, flows, "photometric_loss");
    return photometric_direction(i1, i2, flows.forward, cfg, nullptr) +
           photometric_direction(i2, i1, flows.backward, cfg, nullptr);
}

LossGradient photometric_loss_grad(const ScalarField2D& i1, const ScalarField2D& i2, const FlowPair& flows,
                                   const PredictorConfig& cfg) {
    check_inputs(i1, i2, flows, "photometric_loss");
    LossGradient lg{0.0, zero_pair(i1.height(), i1.width())};
    lg.value = photometric_direction(i1, i2, flows.forward, cfg, &lg.grad.forward) +
               photometric_direction(i2, i1, flows.backward, cfg, &lg.grad.backward);
    return lg;
}

RegularizerLoss regularizer_loss(const FlowPair& flows, const PredictorConfig& cfg) {
    require_same_shape(flows.forward, flows.backward, "regularizer_loss");
    require_crop(flows.forward.u, "regularizer_loss");
    RegularizerLoss r;
    r.smoothness = smoothness_direction(flows.forward, cfg, nullptr) + smoothness_direction(flows.backward, cfg, nullptr);
    r.divergence = divergence_direction(flows.forward, cfg, nullptr) + divergence_direction(flows.backward, cfg, nullptr);
    return r;
}

LossGradient smoothness_loss_grad(const FlowPair& flows, const PredictorConfig& cfg) {
    require_same_shape(flows.forward, flows.backward, "smoothness_loss");
    require_crop(flows.forward.u, "smoothness_loss");
    LossGradient lg{0.0, zero_pair(flows.forward.height(), flows.forward.width())};
    lg.value = smoothness_direction(flows.forward, cfg, &lg.grad.forward) +
               smoothness_direction(flows.backward, cfg, &lg.grad.backward);
    return lg;
}

LossGradient divergence_loss_grad(const FlowPair& flows, const PredictorConfig& cfg) {
    require_same_shape(flows.forward, flows.backward, "divergence_loss");
    require_crop(flows.forward.u, "divergence_loss");
    LossGradient lg{0.0, zero_pair(flows.forward.height(), flows.forward.width())};
    lg.value = divergence_direction(flows.forward, cfg, &lg.grad.forward) +
               divergence_direction(flows.backward, cfg, &lg.grad.backward);
    return lg;
}

double total_predictor_loss(const ScalarField2D& i1, const ScalarField2D& i2, const FlowPair& flows,
                            const PredictorConfig& cfg) {
    const RegularizerLoss r = regularizer_loss(flows, cfg);
    return photometric_loss(i1, i2, flows, cfg) + cfg.lambda_s * r.smoothness + cfg.lambda_d * r.divergence;
}

LossGradient total_predictor_loss_grad(const ScalarField2D& i1, const ScalarField2D& i2, const FlowPair& flows,
                                       const PredictorConfig& cfg) {
    LossGradient lg = photometric_loss_grad(i1, i2, flows, cfg);
    const LossGradient s = smoothness_loss_grad(flows, cfg);
    const LossGradient d = divergence_loss_grad(flows, cfg);
    lg.value += cfg.lambda_s * s.value + cfg.lambda_d * d.value;
    lg.grad.forward += cfg.lambda_s * s.grad.forward + cfg.lambda_d * d.grad.forward;
    lg.grad.backward += cfg.lambda_s * s.grad.backward + cfg.lambda_d * d.grad.backward;
    return lg;
}

namespace {

// Anti-aliasing blur before decimation, in fine-level pixels (one coarse pixel). It keeps
// the apparent particle size from shrinking level after level, which would otherwise make
// the coarse-level data term blind to displacements of a coarse pixel or more.
constexpr double kPyramidBlurSigma = 2.0;

}  // namespace

ScalarField2D downsample(const ScalarField2D& f) {
    const int h = f.height(), w = f.width();
    const double sig = kPyramidBlurSigma;
    const int r = static_cast<int>(std::ceil(3.0 * sig));
    std::vector<double> k(2 * r + 1);
    double ks = 0.0;
    for (int i = -r; i <= r; ++i) ks += k[i + r] = std::exp(-0.5 * i * i / (sig * sig));
    for (double& v : k) v /= ks;
    ScalarField2D bx(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k[i + r] * f.clamped(x + i, y);
            bx(x, y) = acc;
        }
    const int hc = (h + 1) / 2, wc = (w + 1) / 2;
    ScalarField2D out(hc, wc);
    for (int y = 0; y < hc; ++y)
        for (int x = 0; x < wc; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k[i + r] * bx.clamped(2 * x, 2 * y + i);
            out(x, y) = acc;
        }
    return out;
}

VectorField2D upsample_flow(const VectorField2D& coarse, int height, int width) {
    VectorField2D out(height, width);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            out.u(x, y) = 2.0 * interpolate_bilinear(coarse.u, 0.5 * x, 0.5 * y);
            out.v(x, y) = 2.0 * interpolate_bilinear(coarse.v, 0.5 * x, 0.5 * y);
        }
    return out;
}

namespace {

constexpr int kMinPyramidSize = 16;
constexpr int kMaxHalvings = 10;

std::vector<double> pack(const FlowPair& f) {
    std::vector<double> p;
    p.reserve(4 * f.forward.u.size());
    for (const ScalarField2D* s : {&f.forward.u, &f.forward.v, &f.backward.u, &f.backward.v})
        p.insert(p.end(), s->data().begin(), s->data().end());
    return p;
}

void unpack(const std::vector<double>& p, FlowPair& f) {
    std::size_t off = 0;
    for (ScalarField2D* s : {&f.forward.u, &f.forward.v, &f.backward.u, &f.backward.v}) {
        std::copy(p.begin() + static_cast<std::ptrdiff_t>(off), p.begin() + static_cast<std::ptrdiff_t>(off + s->size()),
                  s->data().begin());
        off += s->size();
    }
}

void fill_border_ring(ScalarField2D& f) {
    const int h = f.height(), w = f.width();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (is_interior(x, y, h, w)) continue;
            const int cx = std::clamp(x, kInteriorMargin, w - 1 - kInteriorMargin);
            const int cy = std::clamp(y, kInteriorMargin, h - 1 - kInteriorMargin);
            f(x, y) = f(cx, cy);
        }
}

void check_finite_loss(double v, int level, int iteration) {
    if (!std::isfinite(v))
        throw NumericalError("estimate_variational: non-finite loss at pyramid level " + std::to_string(level) +
                             ", iteration " + std::to_string(iteration));
}

void optimize_level(const ScalarField2D& i1, const ScalarField2D& i2, FlowPair& flows, const PredictorConfig& cfg,
                    int level, std::vector<double>* losses) {
    Adam adam(4 * i1.size(), cfg.step, cfg.beta1, cfg.beta2);
    std::vector<double> theta = pack(flows);
    LossGradient cur = total_predictor_loss_grad(i1, i2, flows, cfg);
    check_finite_loss(cur.value, level, 0);
    FlowPair trial = flows;
    for (int it = 0; it < cfg.iterations; ++it) {
        const std::vector<double> delta = adam.propose(pack(cur.grad));
        double scale = 1.0;
        for (int k = 0; k <= kMaxHalvings; ++k, scale *= 0.5) {
            std::vector<double> cand = theta;
            for (std::size_t i = 0; i < cand.size(); ++i) cand[i] += scale * delta[i];
            unpack(cand, trial);
            LossGradient next = total_predictor_loss_grad(i1, i2, trial, cfg);
            check_finite_loss(next.value, level, it + 1);
            if (next.value <= cur.value) {
                theta = std::move(cand);
                cur = std::move(next);
                break;
            }
        }
        if (losses) losses->push_back(cur.value);
    }
    unpack(theta, flows);
}

}  // namespace

FlowPair estimate_variational(const ScalarField2D& i1, const ScalarField2D& i2, const PredictorConfig& cfg,
                              VariationalTrace* trace) {
    cfg.validate();
    require_same_shape(i1, i2, "estimate_variational");
    if (i1.height() < kMinPyramidSize || i1.width() < kMinPyramidSize)
        throw DimensionError("estimate_variational: images must be at least 16x16");
    if (!i1.all_finite() || !i2.all_finite()) throw NumericalError("estimate_variational: non-finite image samples");

    std::vector<std::pair<ScalarField2D, ScalarField2D>> pyramid{{i1, i2}};
    while (static_cast<int>(pyramid.size()) < cfg.levels) {
        const auto& top = pyramid.back();
        const int hc = (top.first.height() + 1) / 2, wc = (top.first.width() + 1) / 2;
        if (std::min(hc, wc) < kMinPyramidSize) break;
        pyramid.emplace_back(downsample(top.first), downsample(top.second));
    }

    if (trace) trace->level_losses.clear();
    FlowPair flows;
    for (int level = static_cast<int>(pyramid.size()) - 1; level >= 0; --level) {
        const auto& [a, b] = pyramid[static_cast<std::size_t>(level)];
        if (flows.forward.u.empty()) {
            flows = zero_pair(a.height(), a.width());
        } else {
            flows.forward = upsample_flow(flows.forward, a.height(), a.width());
            flows.backward = upsample_flow(flows.backward, a.height(), a.width());
        }
        std::vector<double>* losses = nullptr;
        if (trace) losses = &trace->level_losses.emplace_back();
        optimize_level(a, b, flows, cfg, level, losses);
        for (ScalarField2D* s : {&flows.forward.u, &flows.forward.v, &flows.backward.u, &flows.backward.v})
            fill_border_ring(*s);
    }
    return flows;
}

namespace {

ScalarField2D crop_mask(int h, int w) {
    ScalarField2D m(h, w);
    for (int y = kInteriorMargin; y < h - kInteriorMargin; ++y)
        for (int x = kInteriorMargin; x < w - kInteriorMargin; ++x) m(x, y) = 1.0;
    return m;
}

ScalarField2D ring1_mask(int h, int w) {
    ScalarField2D m(h, w);
    for (int y = 1; y < h - 1; ++y)
        for (int x = 1; x < w - 1; ++x) m(x, y) = 1.0;
    return m;
}

// Hessian-vector product of the quadratic energy (one direction), restricted to the crop.
VectorField2D quadratic_apply(const VectorField2D& u, double mu, double lambda_d, const ScalarField2D& crop,
                              const ScalarField2D& ring1) {
    VectorField2D out(u.height(), u.width());
    for (int c = 0; c < 2; ++c) {
        const ScalarField2D& comp = c == 0 ? u.u : u.v;
        ScalarField2D& o = c == 0 ? out.u : out.v;
        o += (2.0 * mu) * (diff_x_adjoint(hadamard(ring1, diff_x(comp))) + diff_y_adjoint(hadamard(ring1, diff_y(comp))));
    }
    const ScalarField2D d = hadamard(ring1, divergence(u));
    out.u += (2.0 * lambda_d) * diff_x_adjoint(d);
    out.v += (2.0 * lambda_d) * diff_y_adjoint(d);
    out.u = hadamard(out.u, crop);
    out.v = hadamard(out.v, crop);
    return out;
}

double inner(const VectorField2D& a, const VectorField2D& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.u.size(); ++i) s += a.u.data()[i] * b.u.data()[i] + a.v.data()[i] * b.v.data()[i];
    return s;
}

VectorField2D data_gradient(const ScalarField2D& i1, const ScalarField2D& i2, double sign) {
    const ScalarField2D mean = 0.5 * (i1 + i2);
    return sign * gradient(mean);
}

VectorField2D solve_quadratic(const VectorField2D& b, double mu, double lambda_d, double tol, int max_iter) {
    const int h = b.height(), w = b.width();
    const ScalarField2D crop = crop_mask(h, w), ring1 = ring1_mask(h, w);
    VectorField2D rhs(hadamard(b.u, crop), hadamard(b.v, crop));
    rhs *= -1.0;
    VectorField2D x(h, w), r = rhs, d = rhs;
    double rr = inner(r, r);
    const double stop = tol * tol * rr;
    if (rr == 0.0) return x;
    for (int it = 0; it < max_iter; ++it) {
        if (rr <= stop) return x;
        const VectorField2D q = quadratic_apply(d, mu, lambda_d, crop, ring1);
        const double alpha = rr / inner(d, q);
        x += alpha * d;
        r -= alpha * q;
        const double rr_new = inner(r, r);
        d = r + (rr_new / rr) * d;
        rr = rr_new;
    }
    if (rr <= stop) return x;
    throw ConvergenceError("estimate_quadratic: CG did not converge", max_iter, std::sqrt(rr / (stop / (tol * tol))));
}

}  // namespace

FlowPair estimate_quadratic(const ScalarField2D& i1, const ScalarField2D& i2, const PredictorConfig& cfg, double tol,
                            int max_iter) {
    cfg.validate();
    require_same_shape(i1, i2, "estimate_quadratic");
    require_crop(i1, "estimate_quadratic");
    if (!(cfg.mu() > 0.0)) throw ConfigError("estimate_quadratic: smoothness weight must be > 0");
    FlowPair out;
    out.forward = solve_quadratic(data_gradient(i1, i2, 1.0), cfg.mu(), cfg.lambda_d, tol, max_iter);
    out.backward = solve_quadratic(data_gradient(i1, i2, -1.0), cfg.mu(), cfg.lambda_d, tol, max_iter);
    return out;
}

double stokes_residual(const FlowPair& flows, const ScalarField2D& i1, const ScalarField2D& i2,
                       const PredictorConfig& cfg) {
    check_inputs(i1, i2, flows, "stokes_residual");
    const int h = i1.height(), w = i1.width();
    double num = 0.0, den = 0.0;
    for (int dir = 0; dir < 2; ++dir) {
        const VectorField2D& u = dir == 0 ? flows.forward : flows.backward;
        const VectorField2D b = data_gradient(i1, i2, dir == 0 ? 1.0 : -1.0);
        const ScalarField2D p_h = (-2.0 * cfg.lambda_d) * divergence(u);
        const VectorField2D gp = gradient(p_h);
        const ScalarField2D lu = laplacian(u.u), lv = laplacian(u.v);
        for (int y = kInteriorMargin; y < h - kInteriorMargin; ++y)
            for (int x = kInteriorMargin; x < w - kInteriorMargin; ++x) {
                const double ru = b.u(x, y) - 2.0 * cfg.mu() * lu(x, y) + gp.u(x, y);
                const double rv = b.v(x, y) - 2.0 * cfg.mu() * lv(x, y) + gp.v(x, y);
                num += ru * ru + rv * rv;
                den += b.u(x, y) * b.u(x, y) + b.v(x, y) * b.v(x, y);
            }
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace fluidest
