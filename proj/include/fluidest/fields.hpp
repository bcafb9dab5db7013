#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "fluidest/error.hpp"

namespace fluidest {

/// Width of the border ring excluded from "interior" statistics and losses.
/// Nodes at distance >= kInteriorMargin from every edge see only central stencils,
/// including the composed second-order ones.
inline constexpr int kInteriorMargin = 2;

/// h x w grid of real samples, row-major, unit spacing. Indexed as (x, y) with
/// x the column and y the row.
class ScalarField2D {
public:
    ScalarField2D() = default;
    ScalarField2D(int height, int width, double value = 0.0);

    template <typename Fn>
    static ScalarField2D from_function(int height, int width, Fn&& fn) {
        ScalarField2D f(height, width);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) f(x, y) = fn(static_cast<double>(x), static_cast<double>(y));
        return f;
    }

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(int x, int y) { return data_[index(x, y)]; }
    double operator()(int x, int y) const { return data_[index(x, y)]; }

    /// Sample with coordinates clamped to the grid.
    double clamped(int x, int y) const;

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    bool same_shape(const ScalarField2D& other) const noexcept {
        return height_ == other.height_ && width_ == other.width_;
    }
    bool all_finite() const noexcept;

    double sum() const noexcept;
    double max_abs() const noexcept;

    ScalarField2D& operator+=(const ScalarField2D& rhs);
    ScalarField2D& operator-=(const ScalarField2D& rhs);
    ScalarField2D& operator*=(double s) noexcept;

    friend bool operator==(const ScalarField2D&, const ScalarField2D&) = default;

private:
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<double> data_;
};

ScalarField2D operator+(ScalarField2D a, const ScalarField2D& b);
ScalarField2D operator-(ScalarField2D a, const ScalarField2D& b);
ScalarField2D operator*(double s, ScalarField2D a);
ScalarField2D operator*(ScalarField2D a, double s);

/// Elementwise product.
ScalarField2D hadamard(const ScalarField2D& a, const ScalarField2D& b);

/// Grid of 2-vectors stored as two component planes, in pixels per frame.
struct VectorField2D {
    ScalarField2D u;
    ScalarField2D v;

    VectorField2D() = default;
    VectorField2D(int height, int width, double u0 = 0.0, double v0 = 0.0)
        : u(height, width, u0), v(height, width, v0) {}
    VectorField2D(ScalarField2D u_, ScalarField2D v_);

    template <typename Fn>
    static VectorField2D from_function(int height, int width, Fn&& fn) {
        VectorField2D w(height, width);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                auto [a, b] = fn(static_cast<double>(x), static_cast<double>(y));
                w.u(x, y) = a;
                w.v(x, y) = b;
            }
        return w;
    }

    int height() const noexcept { return u.height(); }
    int width() const noexcept { return u.width(); }
    bool same_shape(const VectorField2D& o) const noexcept { return u.same_shape(o.u); }
    bool same_shape(const ScalarField2D& o) const noexcept { return u.same_shape(o); }
    bool all_finite() const noexcept { return u.all_finite() && v.all_finite(); }

    VectorField2D& operator+=(const VectorField2D& rhs);
    VectorField2D& operator-=(const VectorField2D& rhs);
    VectorField2D& operator*=(double s) noexcept;

    friend bool operator==(const VectorField2D&, const VectorField2D&) = default;
};

VectorField2D operator+(VectorField2D a, const VectorField2D& b);
VectorField2D operator-(VectorField2D a, const VectorField2D& b);
VectorField2D operator*(double s, VectorField2D a);

/// Throws DimensionError unless the shapes agree.
void require_same_shape(const ScalarField2D& a, const ScalarField2D& b, const char* op);
void require_same_shape(const VectorField2D& a, const VectorField2D& b, const char* op);
void require_same_shape(const VectorField2D& a, const ScalarField2D& b, const char* op);

/// True when (x, y) lies at distance >= kInteriorMargin from every edge.
inline bool is_interior(int x, int y, int height, int width) noexcept {
    return x >= kInteriorMargin && y >= kInteriorMargin && x < width - kInteriorMargin &&
           y < height - kInteriorMargin;
}

// ---------------------------------------------------------------------------
// Canonical first-derivative stencils. Central differences in the interior,
// first-order one-sided differences on the boundary ring. Every other operator
// in the project is composed from these two, so identities such as
// divergence(gradient(f)) == laplacian(f) hold exactly.
// ---------------------------------------------------------------------------

ScalarField2D diff_x(const ScalarField2D& f);
ScalarField2D diff_y(const ScalarField2D& f);

/// Exact transposes of diff_x / diff_y (used for backpropagating losses).
ScalarField2D diff_x_adjoint(const ScalarField2D& g);
ScalarField2D diff_y_adjoint(const ScalarField2D& g);

VectorField2D gradient(const ScalarField2D& f);
ScalarField2D divergence(const VectorField2D& w);
ScalarField2D curl(const VectorField2D& w);

/// divergence(gradient(f)). In the interior this is the 2h-spaced five-point stencil;
/// it is exact (zero) on affine fields and exact on quadratics.
ScalarField2D laplacian(const ScalarField2D& f);

/// Mixed derivative d^{i+j} f / dx^i dy^j by repeated first-derivative stencils.
/// i + j <= kMaxDerivativeOrder.
inline constexpr int kMaxDerivativeOrder = 4;
ScalarField2D partial_derivative(const ScalarField2D& f, int order_x, int order_y);
ScalarField2D partial_derivative_adjoint(const ScalarField2D& g, int order_x, int order_y);

// ---------------------------------------------------------------------------
// Bilinear sampling shared by the warp, simulation and predictor modules.
// ---------------------------------------------------------------------------

struct BilinearSample {
    double value;
    double d_dx;  ///< derivative of the interpolant w.r.t. the sample x-coordinate
    double d_dy;
};

/// Bilinear interpolation at a real position, clamped to the grid. Derivatives are
/// those of the interpolant and are zero along an axis whose coordinate was clamped.
BilinearSample sample_bilinear(const ScalarField2D& f, double px, double py);

/// Value-only variant.
double interpolate_bilinear(const ScalarField2D& f, double px, double py);

}  // namespace fluidest
