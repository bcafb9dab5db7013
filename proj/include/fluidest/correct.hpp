#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

#include "fluidest/fields.hpp"

namespace fluidest {

/// Gate stencils. Weight (out, in, row, col) is stored at ((out*2 + in)*size + row)*size + col
/// and applied as a correlation with replicate padding.
struct GateParams {
    int size = 3;
    std::vector<double> w_e;  ///< applied to the optical estimate
    std::vector<double> w_p;  ///< applied to the tentative velocity
    std::array<double, 2> bias{};

    static GateParams zeros(int size = 3);
    static int index(int size, int out, int in, int row, int col) noexcept {
        return ((out * 2 + in) * size + row) * size + col;
    }
    void validate() const;
    bool operator==(const GateParams&) const = default;
};

/// Coefficients of the learnable differential operator, one per derivative index (i, j)
/// with i + j < order, for each output component.
struct GammaParams {
    int order = 3;
    std::vector<double> cu;
    std::vector<double> cv;

    static GammaParams zeros(int order = 3);
    void validate() const;
    bool operator==(const GammaParams&) const = default;
};

/// Derivative indices (i, j) with i + j < order, ordered by total order then by falling i:
/// (0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...
std::vector<std::pair<int, int>> derivative_indices(int order);

struct CorrectorParams {
    GateParams gate;
    GammaParams gamma;
    double nu = 1e-3;  ///< viscosity of the tentative step, pixel^2 per frame
    double dt = 1.0;   ///< frames per tentative step

    /// Zero gate weights and bias (K = 0.5) and a zero residual operator.
    static CorrectorParams initial(int gate_size = 3, int order = 3, double nu = 1e-3, double dt = 1.0);
    void validate() const;

    /// Trainable values in a fixed order: w_e, w_p, bias, cu, cv.
    std::vector<double> flatten() const;
    void assign(std::span<const double> values);
    std::size_t trainable_count() const noexcept;
    bool operator==(const CorrectorParams&) const = default;
};

/// Per-component gain sigmoid(W_e * estimate + W_p * tentative + b), strictly inside (0, 1).
VectorField2D gate(const VectorField2D& estimate, const VectorField2D& tentative, const GateParams& params);

/// Sum over (i, j) of c_ij times the (i, j) partial derivative of estimate - previous, per component.
VectorField2D gamma_residual(const VectorField2D& estimate, const VectorField2D& previous, const GammaParams& params);

/// Intermediate quantities of one correction step.
struct CorrectionParts {
    VectorField2D tentative;  ///< advect_diffuse(previous, nu, dt)
    VectorField2D gain;
    VectorField2D residual;
};

CorrectionParts correction_parts(const VectorField2D& previous, const VectorField2D& estimate,
                                 const CorrectorParams& params);

/// tentative + K (estimate - tentative) + residual.
VectorField2D blend_increment(const CorrectionParts& parts, const VectorField2D& estimate);
/// K estimate + (1 - K) tentative + residual.
VectorField2D blend_convex(const CorrectionParts& parts, const VectorField2D& estimate);

VectorField2D correct_step(const VectorField2D& previous, const VectorField2D& estimate, const CorrectorParams& params);

/// Corrects a whole sequence of estimates. The first output is the first estimate.
std::vector<VectorField2D> correct_sequence(std::span<const VectorField2D> estimates, const CorrectorParams& params);

inline constexpr double kCorrectorGamma = 0.45;
inline constexpr double kCorrectorEpsilon = 1e-3;

/// Crop mean of sigma(omega_hat - curl(u)) plus lambda_d times the crop mean of sigma(div u),
/// where omega_hat = step_vorticity(previous_vorticity, previous, nu, dt).
double corrector_loss(const VectorField2D& u, const ScalarField2D& previous_vorticity, const VectorField2D& previous,
                      double lambda_d, double nu, double dt);

struct CorrectorLossGradient {
    double value = 0.0;
    VectorField2D grad;  ///< with respect to u
};

CorrectorLossGradient corrector_loss_grad(const VectorField2D& u, const ScalarField2D& previous_vorticity,
                                          const VectorField2D& previous, double lambda_d, double nu, double dt);

struct StepGradient {
    double value = 0.0;
    std::vector<double> grad;  ///< layout of CorrectorParams::flatten
    VectorField2D corrected;   ///< the output of correct_step
};

/// Loss of correct_step(previous, estimate, params) against previous_vorticity carried by
/// previous, with its gradient in the trainable parameters. previous is held fixed.
StepGradient corrector_step_grad(const VectorField2D& previous, const VectorField2D& estimate,
                                 const ScalarField2D& previous_vorticity, const CorrectorParams& params,
                                 double lambda_d);

/// Which field supplies the previous-frame vorticity the temporal loss carries forward.
/// Estimate: the previous optical estimate. Corrected: the previous corrected output, which
/// makes u_t = tentative a near-minimizer so training drifts toward ignoring observations.
enum class VorticitySource { Estimate, Corrected };

struct TrainOptions {
    int epochs = 200;
    double step = 1e-2;
    double lambda_d = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    VorticitySource vorticity = VorticitySource::Estimate;

    void validate() const;
};

struct TrainResult {
    CorrectorParams params;     ///< parameters of the lowest recorded loss
    std::vector<double> curve;  ///< mean loss before each epoch's update, then after the last one
    int best_epoch = 0;
};

/// Adam on the mean corrector loss over frames 1..n-1 of the estimate sequence. Each epoch
/// runs the sequence forward with the current parameters; previous outputs enter the next
/// frame as constants and carry the previous vorticity chosen by options.vorticity. Throws NumericalError naming the frame if a loss is not finite.
TrainResult train_corrector(std::span<const VectorField2D> estimates, const CorrectorParams& initial,
                            const TrainOptions& options);

}  // namespace fluidest
