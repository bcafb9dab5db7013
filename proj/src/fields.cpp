#include "fluidest/fields.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fluidest {

namespace {

void require_stencil_size(const ScalarField2D& f, const char* op) {
    if (f.height() < 3 || f.width() < 3)
        throw DimensionError(std::string(op) + ": grid must be at least 3x3, got " +
                             std::to_string(f.height()) + "x" + std::to_string(f.width()));
}

std::string shape_string(int h, int w) { return std::to_string(h) + "x" + std::to_string(w); }

}  // namespace

ScalarField2D::ScalarField2D(int height, int width, double value) : height_(height), width_(width) {
    if (height < 0 || width < 0) throw DimensionError("negative field dimensions");
    data_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), value);
}

double ScalarField2D::clamped(int x, int y) const {
    x = std::clamp(x, 0, width_ - 1);
    y = std::clamp(y, 0, height_ - 1);
    return (*this)(x, y);
}

bool ScalarField2D::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double d) { return std::isfinite(d); });
}

double ScalarField2D::sum() const noexcept {
    double s = 0.0;
    for (double d : data_) s += d;
    return s;
}

double ScalarField2D::max_abs() const noexcept {
    double m = 0.0;
    for (double d : data_) m = std::max(m, std::abs(d));
    return m;
}

ScalarField2D& ScalarField2D::operator+=(const ScalarField2D& rhs) {
    require_same_shape(*this, rhs, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
    return *this;
}

ScalarField2D& ScalarField2D::operator-=(const ScalarField2D& rhs) {
    require_same_shape(*this, rhs, "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= rhs.data_[i];
    return *this;
}

ScalarField2D& ScalarField2D::operator*=(double s) noexcept {
    for (double& d : data_) d *= s;
    return *this;
}

ScalarField2D operator+(ScalarField2D a, const ScalarField2D& b) { return a += b; }
ScalarField2D operator-(ScalarField2D a, const ScalarField2D& b) { return a -= b; }
ScalarField2D operator*(double s, ScalarField2D a) { return a *= s; }
ScalarField2D operator*(ScalarField2D a, double s) { return a *= s; }

ScalarField2D hadamard(const ScalarField2D& a, const ScalarField2D& b) {
    require_same_shape(a, b, "hadamard");
    ScalarField2D r = a;
    auto rd = r.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < rd.size(); ++i) rd[i] *= bd[i];
    return r;
}

VectorField2D::VectorField2D(ScalarField2D u_, ScalarField2D v_) : u(std::move(u_)), v(std::move(v_)) {
    require_same_shape(u, v, "VectorField2D");
}

VectorField2D& VectorField2D::operator+=(const VectorField2D& rhs) {
    u += rhs.u;
    v += rhs.v;
    return *this;
}

VectorField2D& VectorField2D::operator-=(const VectorField2D& rhs) {
    u -= rhs.u;
    v -= rhs.v;
    return *this;
}

VectorField2D& VectorField2D::operator*=(double s) noexcept {
    u *= s;
    v *= s;
    return *this;
}

VectorField2D operator+(VectorField2D a, const VectorField2D& b) { return a += b; }
VectorField2D operator-(VectorField2D a, const VectorField2D& b) { return a -= b; }
VectorField2D operator*(double s, VectorField2D a) { return a *= s; }

void require_same_shape(const ScalarField2D& a, const ScalarField2D& b, const char* op) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.height(), a.width()) +
                             " vs " + shape_string(b.height(), b.width()));
}

void require_same_shape(const VectorField2D& a, const VectorField2D& b, const char* op) {
    require_same_shape(a.u, b.u, op);
}

void require_same_shape(const VectorField2D& a, const ScalarField2D& b, const char* op) {
    require_same_shape(a.u, b, op);
}

ScalarField2D diff_x(const ScalarField2D& f) {
    require_stencil_size(f, "diff_x");
    const int h = f.height(), w = f.width();
    ScalarField2D d(h, w);
    for (int y = 0; y < h; ++y) {
        d(0, y) = f(1, y) - f(0, y);
        for (int x = 1; x < w - 1; ++x) d(x, y) = 0.5 * (f(x + 1, y) - f(x - 1, y));
        d(w - 1, y) = f(w - 1, y) - f(w - 2, y);
    }
    return d;
}

ScalarField2D diff_y(const ScalarField2D& f) {
    require_stencil_size(f, "diff_y");
    const int h = f.height(), w = f.width();
    ScalarField2D d(h, w);
    for (int x = 0; x < w; ++x) {
        d(x, 0) = f(x, 1) - f(x, 0);
        d(x, h - 1) = f(x, h - 1) - f(x, h - 2);
    }
    for (int y = 1; y < h - 1; ++y)
        for (int x = 0; x < w; ++x) d(x, y) = 0.5 * (f(x, y + 1) - f(x, y - 1));
    return d;
}

// Scatter form of the transpose: every row of the stencil matrix pushes its
// coefficients back onto the nodes it read.
ScalarField2D diff_x_adjoint(const ScalarField2D& g) {
    require_stencil_size(g, "diff_x_adjoint");
    const int h = g.height(), w = g.width();
    ScalarField2D r(h, w);
    for (int y = 0; y < h; ++y) {
        r(1, y) += g(0, y);
        r(0, y) -= g(0, y);
        for (int x = 1; x < w - 1; ++x) {
            r(x + 1, y) += 0.5 * g(x, y);
            r(x - 1, y) -= 0.5 * g(x, y);
        }
        r(w - 1, y) += g(w - 1, y);
        r(w - 2, y) -= g(w - 1, y);
    }
    return r;
}

ScalarField2D diff_y_adjoint(const ScalarField2D& g) {
    require_stencil_size(g, "diff_y_adjoint");
    const int h = g.height(), w = g.width();
    ScalarField2D r(h, w);
    for (int x = 0; x < w; ++x) {
        r(x, 1) += g(x, 0);
        r(x, 0) -= g(x, 0);
        r(x, h - 1) += g(x, h - 1);
        r(x, h - 2) -= g(x, h - 1);
    }
    for (int y = 1; y < h - 1; ++y)
        for (int x = 0; x < w; ++x) {
            r(x, y + 1) += 0.5 * g(x, y);
            r(x, y - 1) -= 0.5 * g(x, y);
        }
    return r;
}

VectorField2D gradient(const ScalarField2D& f) { return VectorField2D(diff_x(f), diff_y(f)); }

ScalarField2D divergence(const VectorField2D& w) {
    require_same_shape(w.u, w.v, "divergence");
    return diff_x(w.u) + diff_y(w.v);
}

ScalarField2D curl(const VectorField2D& w) {
    require_same_shape(w.u, w.v, "curl");
    return diff_x(w.v) - diff_y(w.u);
}

ScalarField2D laplacian(const ScalarField2D& f) { return divergence(gradient(f)); }

namespace {

void check_order(int order_x, int order_y) {
    if (order_x < 0 || order_y < 0)
        throw ConfigError("partial_derivative: negative derivative order");
    if (order_x + order_y > kMaxDerivativeOrder)
        throw ConfigError("partial_derivative: total order " + std::to_string(order_x + order_y) +
                          " exceeds " + std::to_string(kMaxDerivativeOrder));
}

}  // namespace

ScalarField2D partial_derivative(const ScalarField2D& f, int order_x, int order_y) {
    check_order(order_x, order_y);
    if (order_x + order_y > 0) require_stencil_size(f, "partial_derivative");
    ScalarField2D r = f;
    for (int i = 0; i < order_x; ++i) r = diff_x(r);
    for (int j = 0; j < order_y; ++j) r = diff_y(r);
    return r;
}

ScalarField2D partial_derivative_adjoint(const ScalarField2D& g, int order_x, int order_y) {
    check_order(order_x, order_y);
    if (order_x + order_y > 0) require_stencil_size(g, "partial_derivative_adjoint");
    ScalarField2D r = g;
    for (int j = 0; j < order_y; ++j) r = diff_y_adjoint(r);
    for (int i = 0; i < order_x; ++i) r = diff_x_adjoint(r);
    return r;
}

BilinearSample sample_bilinear(const ScalarField2D& f, double px, double py) {
    const int w = f.width(), h = f.height();
    const double xmax = w - 1, ymax = h - 1;
    const bool clamp_x = !(px >= 0.0 && px <= xmax);
    const bool clamp_y = !(py >= 0.0 && py <= ymax);
    const double cx = std::clamp(px, 0.0, xmax);
    const double cy = std::clamp(py, 0.0, ymax);

    int x0 = static_cast<int>(std::floor(cx));
    int y0 = static_cast<int>(std::floor(cy));
    x0 = std::min(x0, std::max(w - 2, 0));
    y0 = std::min(y0, std::max(h - 2, 0));
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const double tx = cx - x0;
    const double ty = cy - y0;

    const double f00 = f(x0, y0), f10 = f(x1, y0), f01 = f(x0, y1), f11 = f(x1, y1);
    // Convex-combination form so integer positions reproduce samples exactly.
    const double top = (1.0 - tx) * f00 + tx * f10;
    const double bottom = (1.0 - tx) * f01 + tx * f11;

    BilinearSample s{};
    s.value = (1.0 - ty) * top + ty * bottom;
    s.d_dx = clamp_x ? 0.0 : (1.0 - ty) * (f10 - f00) + ty * (f11 - f01);
    s.d_dy = clamp_y ? 0.0 : bottom - top;
    return s;
}

double interpolate_bilinear(const ScalarField2D& f, double px, double py) {
    return sample_bilinear(f, px, py).value;
}

}  // namespace fluidest
