#include "fluidest/correct.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <string>

#include "fluidest/optim.hpp"
#include "fluidest/predict.hpp"
#include "fluidest/sim.hpp"

namespace fluidest {

namespace {

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Correlation of f with one k x k stencil, replicate padding.
void correlate_add(const ScalarField2D& f, const double* w, int k, ScalarField2D& out) {
    const int h = f.height(), wd = f.width(), r = k / 2;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < wd; ++x) {
            double s = 0.0;
            for (int row = 0; row < k; ++row)
                for (int col = 0; col < k; ++col) s += w[row * k + col] * f.clamped(x + col - r, y + row - r);
            out(x, y) += s;
        }
}

// Gradient of sum(g * correlate(f, w)) with respect to w.
void correlate_weight_grad(const ScalarField2D& f, const ScalarField2D& g, int k, double* dw) {
    const int h = f.height(), wd = f.width(), r = k / 2;
    for (int row = 0; row < k; ++row)
        for (int col = 0; col < k; ++col) {
            double s = 0.0;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < wd; ++x) s += g(x, y) * f.clamped(x + col - r, y + row - r);
            dw[row * k + col] += s;
        }
}

const ScalarField2D& component(const VectorField2D& f, int c) { return c == 0 ? f.u : f.v; }
ScalarField2D& component(VectorField2D& f, int c) { return c == 0 ? f.u : f.v; }

ScalarField2D gate_logits(const VectorField2D& estimate, const VectorField2D& tentative, const GateParams& p, int out) {
    ScalarField2D z(estimate.height(), estimate.width(), p.bias[static_cast<std::size_t>(out)]);
    const int k = p.size;
    for (int in = 0; in < 2; ++in) {
        correlate_add(component(estimate, in), &p.w_e[static_cast<std::size_t>(GateParams::index(k, out, in, 0, 0))], k, z);
        correlate_add(component(tentative, in), &p.w_p[static_cast<std::size_t>(GateParams::index(k, out, in, 0, 0))], k, z);
    }
    return z;
}

void require_crop(const VectorField2D& f, const char* op) {
    if (f.height() < 2 * kInteriorMargin + 1 || f.width() < 2 * kInteriorMargin + 1)
        throw DimensionError(std::string(op) + ": grid too small for the interior crop");
}

// Crop mean of sigma(d); accumulates scale * d(mean)/d(d) into gd when given.
double crop_penalty(const ScalarField2D& d, double scale, ScalarField2D* gd) {
    const int h = d.height(), w = d.width();
    const double inv = scale / (static_cast<double>(h - 2 * kInteriorMargin) * (w - 2 * kInteriorMargin));
    double total = 0.0;
    for (int y = kInteriorMargin; y < h - kInteriorMargin; ++y)
        for (int x = kInteriorMargin; x < w - kInteriorMargin; ++x) {
            total += charbonnier(d(x, y), kCorrectorGamma, kCorrectorEpsilon);
            if (gd) (*gd)(x, y) = inv * charbonnier_derivative(d(x, y), kCorrectorGamma, kCorrectorEpsilon);
        }
    return total * inv;
}

}  // namespace

GateParams GateParams::zeros(int size) {
    GateParams p;
    p.size = size;
    const auto n = static_cast<std::size_t>(4 * size * size);
    p.w_e.assign(n, 0.0);
    p.w_p.assign(n, 0.0);
    p.validate();
    return p;
}

void GateParams::validate() const {
    if (size < 1 || size % 2 == 0) throw ConfigError("gate: stencil size must be odd and positive");
    const auto n = static_cast<std::size_t>(4 * size * size);
    if (w_e.size() != n || w_p.size() != n) throw ConfigError("gate: stencil arrays do not match the size");
    if (!all_finite(w_e) || !all_finite(w_p) || !std::isfinite(bias[0]) || !std::isfinite(bias[1]))
        throw ConfigError("gate: non-finite parameter");
}

std::vector<std::pair<int, int>> derivative_indices(int order) {
    std::vector<std::pair<int, int>> out;
    for (int total = 0; total < order; ++total)
        for (int i = total; i >= 0; --i) out.emplace_back(i, total - i);
    return out;
}

GammaParams GammaParams::zeros(int order) {
    GammaParams p;
    p.order = order;
    const auto n = static_cast<std::size_t>(order * (order + 1) / 2);
    p.cu.assign(n, 0.0);
    p.cv.assign(n, 0.0);
    p.validate();
    return p;
}

void GammaParams::validate() const {
    if (order < 1) throw ConfigError("gamma: order must be >= 1");
    if (order - 1 > kMaxDerivativeOrder)
        throw ConfigError("gamma: order " + std::to_string(order) + " exceeds the supported derivative order");
    const auto n = static_cast<std::size_t>(order * (order + 1) / 2);
    if (cu.size() != n || cv.size() != n)
        throw ConfigError("gamma: expected " + std::to_string(n) + " coefficients per component");
    if (!all_finite(cu) || !all_finite(cv)) throw ConfigError("gamma: non-finite coefficient");
}

CorrectorParams CorrectorParams::initial(int gate_size, int order, double nu, double dt) {
    CorrectorParams p;
    p.gate = GateParams::zeros(gate_size);
    p.gamma = GammaParams::zeros(order);
    p.nu = nu;
    p.dt = dt;
    p.validate();
    return p;
}

void CorrectorParams::validate() const {
    gate.validate();
    gamma.validate();
    if (!(nu >= 0.0) || !std::isfinite(nu)) throw ConfigError("corrector: nu must be finite and >= 0");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("corrector: dt must be finite and > 0");
}

std::size_t CorrectorParams::trainable_count() const noexcept {
    return gate.w_e.size() + gate.w_p.size() + 2 + gamma.cu.size() + gamma.cv.size();
}

std::vector<double> CorrectorParams::flatten() const {
    std::vector<double> out;
    out.reserve(trainable_count());
    out.insert(out.end(), gate.w_e.begin(), gate.w_e.end());
    out.insert(out.end(), gate.w_p.begin(), gate.w_p.end());
    out.push_back(gate.bias[0]);
    out.push_back(gate.bias[1]);
    out.insert(out.end(), gamma.cu.begin(), gamma.cu.end());
    out.insert(out.end(), gamma.cv.begin(), gamma.cv.end());
    return out;
}

void CorrectorParams::assign(std::span<const double> values) {
    if (values.size() != trainable_count()) throw ConfigError("corrector: parameter vector has the wrong length");
    auto it = values.begin();
    for (double& v : gate.w_e) v = *it++;
    for (double& v : gate.w_p) v = *it++;
    gate.bias[0] = *it++;
    gate.bias[1] = *it++;
    for (double& v : gamma.cu) v = *it++;
    for (double& v : gamma.cv) v = *it++;
}

VectorField2D gate(const VectorField2D& estimate, const VectorField2D& tentative, const GateParams& params) {
    require_same_shape(estimate, tentative, "gate");
    params.validate();
    VectorField2D k(estimate.height(), estimate.width());
    for (int c = 0; c < 2; ++c) {
        ScalarField2D z = gate_logits(estimate, tentative, params, c);
        for (double& v : z.data()) {
            // Clamp so the gain stays strictly inside (0, 1) in double precision.
            v = sigmoid(std::clamp(v, -36.0, 36.0));
        }
        component(k, c) = std::move(z);
    }
    return k;
}

VectorField2D gamma_residual(const VectorField2D& estimate, const VectorField2D& previous, const GammaParams& params) {
    require_same_shape(estimate, previous, "gamma_residual");
    params.validate();
    const VectorField2D psi = estimate - previous;
    VectorField2D phi(estimate.height(), estimate.width());
    const auto idx = derivative_indices(params.order);
    for (std::size_t n = 0; n < idx.size(); ++n) {
        if (params.cu[n] == 0.0 && params.cv[n] == 0.0) continue;
        const auto [i, j] = idx[n];
        if (params.cu[n] != 0.0) phi.u += params.cu[n] * partial_derivative(psi.u, i, j);
        if (params.cv[n] != 0.0) phi.v += params.cv[n] * partial_derivative(psi.v, i, j);
    }
    return phi;
}

CorrectionParts correction_parts(const VectorField2D& previous, const VectorField2D& estimate,
                                 const CorrectorParams& params) {
    require_same_shape(previous, estimate, "correct_step");
    params.validate();
    CorrectionParts parts;
    parts.tentative = advect_diffuse(previous, params.nu, params.dt);
    parts.gain = gate(estimate, parts.tentative, params.gate);
    parts.residual = gamma_residual(estimate, previous, params.gamma);
    return parts;
}

VectorField2D blend_increment(const CorrectionParts& parts, const VectorField2D& estimate) {
    const VectorField2D& t = parts.tentative;
    return VectorField2D(t.u + hadamard(parts.gain.u, estimate.u - t.u) + parts.residual.u,
                         t.v + hadamard(parts.gain.v, estimate.v - t.v) + parts.residual.v);
}

VectorField2D blend_convex(const CorrectionParts& parts, const VectorField2D& estimate) {
    VectorField2D out(estimate.height(), estimate.width());
    for (int c = 0; c < 2; ++c) {
        const auto k = component(parts.gain, c).data();
        const auto e = component(estimate, c).data();
        const auto t = component(parts.tentative, c).data();
        const auto r = component(parts.residual, c).data();
        auto o = component(out, c).data();
        for (std::size_t i = 0; i < o.size(); ++i) o[i] = k[i] * e[i] + (1.0 - k[i]) * t[i] + r[i];
    }
    return out;
}

VectorField2D correct_step(const VectorField2D& previous, const VectorField2D& estimate, const CorrectorParams& params) {
    const CorrectionParts parts = correction_parts(previous, estimate, params);
    VectorField2D out = blend_increment(parts, estimate);
#ifndef NDEBUG
    const VectorField2D convex = blend_convex(parts, estimate);
    const double scale = 1.0 + std::max({estimate.u.max_abs(), estimate.v.max_abs(), parts.tentative.u.max_abs(),
                                         parts.tentative.v.max_abs(), parts.residual.u.max_abs(),
                                         parts.residual.v.max_abs()});
    assert((out.u - convex.u).max_abs() <= 1e-12 * scale && (out.v - convex.v).max_abs() <= 1e-12 * scale);
#endif
    return out;
}

std::vector<VectorField2D> correct_sequence(std::span<const VectorField2D> estimates, const CorrectorParams& params) {
    std::vector<VectorField2D> out;
    if (estimates.empty()) return out;
    out.push_back(estimates[0]);
    for (std::size_t t = 1; t < estimates.size(); ++t) out.push_back(correct_step(out.back(), estimates[t], params));
    return out;
}

CorrectorLossGradient corrector_loss_grad(const VectorField2D& u, const ScalarField2D& previous_vorticity,
                                          const VectorField2D& previous, double lambda_d, double nu, double dt) {
    require_same_shape(u, previous, "corrector_loss");
    require_same_shape(u, previous_vorticity, "corrector_loss");
    require_crop(u, "corrector_loss");
    if (!(lambda_d >= 0.0)) throw ConfigError("corrector_loss: lambda_d must be >= 0");
    const ScalarField2D carried = step_vorticity(previous_vorticity, previous, nu, dt);
    const int h = u.height(), w = u.width();
    ScalarField2D g_temporal(h, w), g_div(h, w);
    CorrectorLossGradient out;
    out.value = crop_penalty(carried - curl(u), 1.0, &g_temporal) + lambda_d * crop_penalty(divergence(u), 1.0, &g_div);
    g_div *= lambda_d;
    // curl = d_x v - d_y u enters with a minus sign; divergence = d_x u + d_y v.
    out.grad = VectorField2D(diff_y_adjoint(g_temporal) + diff_x_adjoint(g_div),
                             diff_y_adjoint(g_div) - diff_x_adjoint(g_temporal));
    return out;
}

double corrector_loss(const VectorField2D& u, const ScalarField2D& previous_vorticity, const VectorField2D& previous,
                      double lambda_d, double nu, double dt) {
    return corrector_loss_grad(u, previous_vorticity, previous, lambda_d, nu, dt).value;
}

StepGradient corrector_step_grad(const VectorField2D& previous, const VectorField2D& estimate,
                                 const ScalarField2D& previous_vorticity, const CorrectorParams& params,
                                 double lambda_d) {
    const CorrectionParts parts = correction_parts(previous, estimate, params);
    const VectorField2D u = blend_increment(parts, estimate);
    const auto lg = corrector_loss_grad(u, previous_vorticity, previous, lambda_d, params.nu, params.dt);

    StepGradient out;
    out.value = lg.value;
    out.corrected = u;
    out.grad.assign(params.trainable_count(), 0.0);
    const int k = params.gate.size;
    const std::size_t n_w = params.gate.w_e.size();
    double* d_we = out.grad.data();
    double* d_wp = d_we + n_w;
    double* d_bias = d_wp + n_w;
    double* d_cu = d_bias + 2;
    double* d_cv = d_cu + params.gamma.cu.size();

    for (int c = 0; c < 2; ++c) {
        // dL/dz = g * (estimate - tentative) * K (1 - K). The clamp in gate() is inactive for
        // any logit the gradient can meaningfully see, so it is not differentiated.
        ScalarField2D dz = hadamard(component(lg.grad, c), component(estimate, c) - component(parts.tentative, c));
        const auto kd = component(parts.gain, c).data();
        auto dzd = dz.data();
        double bias = 0.0;
        for (std::size_t i = 0; i < dzd.size(); ++i) {
            dzd[i] *= kd[i] * (1.0 - kd[i]);
            bias += dzd[i];
        }
        d_bias[c] = bias;
        for (int in = 0; in < 2; ++in) {
            const auto off = static_cast<std::size_t>(GateParams::index(k, c, in, 0, 0));
            correlate_weight_grad(component(estimate, in), dz, k, d_we + off);
            correlate_weight_grad(component(parts.tentative, in), dz, k, d_wp + off);
        }
    }

    const VectorField2D psi = estimate - previous;
    const auto idx = derivative_indices(params.gamma.order);
    for (std::size_t n = 0; n < idx.size(); ++n) {
        const auto [i, j] = idx[n];
        double su = 0.0, sv = 0.0;
        const auto du = partial_derivative(psi.u, i, j), dv = partial_derivative(psi.v, i, j);
        const auto gu = lg.grad.u.data(), gv = lg.grad.v.data();
        for (std::size_t p = 0; p < gu.size(); ++p) {
            su += gu[p] * du.data()[p];
            sv += gv[p] * dv.data()[p];
        }
        d_cu[n] = su;
        d_cv[n] = sv;
    }
    return out;
}

void TrainOptions::validate() const {
    if (epochs < 0) throw ConfigError("train_corrector: epochs must be >= 0");
    if (!(step >= 0.0)) throw ConfigError("train_corrector: step must be >= 0");
    if (!(lambda_d >= 0.0)) throw ConfigError("train_corrector: lambda_d must be >= 0");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
        throw ConfigError("train_corrector: moment decays must be in (0, 1)");
}

TrainResult train_corrector(std::span<const VectorField2D> estimates, const CorrectorParams& initial,
                            const TrainOptions& options) {
    options.validate();
    initial.validate();
    if (estimates.size() < 3) throw ConfigError("train_corrector: need at least 3 frames");
    for (const auto& e : estimates) require_same_shape(e, estimates[0], "train_corrector");

    CorrectorParams params = initial;
    std::vector<double> theta = params.flatten();
    Adam adam(theta.size(), options.step, options.beta1, options.beta2);
    TrainResult result;
    result.params = initial;
    double best = std::numeric_limits<double>::infinity();
    const double frames = static_cast<double>(estimates.size() - 1);

    for (int epoch = 0; epoch <= options.epochs; ++epoch) {
        double loss = 0.0;
        std::vector<double> grad(theta.size(), 0.0);
        VectorField2D previous = estimates[0];
        for (std::size_t t = 1; t < estimates.size(); ++t) {
            const ScalarField2D w =
                options.vorticity == VorticitySource::Estimate ? curl(estimates[t - 1]) : curl(previous);
            const StepGradient sg = corrector_step_grad(previous, estimates[t], w, params, options.lambda_d);
            if (!std::isfinite(sg.value) || !all_finite(sg.grad))
                throw NumericalError("train_corrector: non-finite loss at frame " + std::to_string(t) + ", epoch " +
                                     std::to_string(epoch));
            loss += sg.value / frames;
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += sg.grad[i] / frames;
            previous = sg.corrected;
        }
        result.curve.push_back(loss);
        if (loss < best) {
            best = loss;
            result.params = params;
            result.best_epoch = epoch;
        }
        if (epoch == options.epochs) break;
        const auto delta = adam.propose(grad);
        for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += delta[i];
        params.assign(theta);
    }
    return result;
}

}  // namespace fluidest
