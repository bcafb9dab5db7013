#pragma once

#include <vector>

#include "fluidest/fields.hpp"

namespace fluidest {

struct PredictorConfig {
    double lambda_s = 0.05;  ///< smoothness weight, also the Stokes viscosity-like constant
    double lambda_d = 0.05;  ///< divergence weight
    double gamma = 0.45;     ///< Charbonnier exponent
    double epsilon = 1e-3;   ///< Charbonnier epsilon
    int levels = 3;
    int iterations = 300;  ///< per pyramid level
    double step = 0.02;
    double beta1 = 0.9;
    double beta2 = 0.999;

    double mu() const noexcept { return lambda_s; }
    void validate() const;
};

struct FlowPair {
    VectorField2D forward;
    VectorField2D backward;
};

double charbonnier(double x, double gamma, double epsilon);
double charbonnier_derivative(double x, double gamma, double epsilon);
ScalarField2D charbonnier(const ScalarField2D& x, double gamma, double epsilon);

/// Loss value with its gradient with respect to both flows.
struct LossGradient {
    double value = 0.0;
    FlowPair grad;
};

// Every loss is a mean over the interior crop (distance >= kInteriorMargin from the border).

/// sum over directions of mean sigma(I1 - I2(x + uf)) and mean sigma(I2 - I1(x + ub)).
double photometric_loss(const ScalarField2D& i1, const ScalarField2D& i2, const FlowPair& flows,
                        const PredictorConfig& cfg);
LossGradient photometric_loss_grad(const ScalarField2D& i1, const ScalarField2D& i2, const FlowPair& flows,
                                   const PredictorConfig& cfg);

struct RegularizerLoss {
    double smoothness = 0.0;
    double divergence = 0.0;
};

/// Smoothness: per direction, the crop mean of sigma over the four first derivatives,
/// halved so it is a mean over flow components. Divergence: per direction crop mean of sigma(div u).
RegularizerLoss regularizer_loss(const FlowPair& flows, const PredictorConfig& cfg);
LossGradient smoothness_loss_grad(const FlowPair& flows, const PredictorConfig& cfg);
LossGradient divergence_loss_grad(const FlowPair& flows, const PredictorConfig& cfg);

/// photometric + lambda_s * smoothness + lambda_d * divergence.
double total_predictor_loss(const ScalarField2D& i1, const ScalarField2D& i2, const FlowPair& flows,
                            const PredictorConfig& cfg);
LossGradient total_predictor_loss_grad(const ScalarField2D& i1, const ScalarField2D& i2, const FlowPair& flows,
                                       const PredictorConfig& cfg);

/// Separable Gaussian blur (sigma = 2 px) followed by 2x decimation.
ScalarField2D downsample(const ScalarField2D& f);

/// Bilinear upsampling to the requested shape, values scaled by 2.
VectorField2D upsample_flow(const VectorField2D& coarse, int height, int width);

struct VariationalTrace {
    std::vector<std::vector<double>> level_losses;  ///< coarse to fine, one entry per iteration
};

/// Coarse-to-fine bidirectional estimate minimizing total_predictor_loss with Adam.
/// Rejected steps are halved (up to ten times) so the loss never increases.
FlowPair estimate_variational(const ScalarField2D& i1, const ScalarField2D& i2, const PredictorConfig& cfg,
                              VariationalTrace* trace = nullptr);

/// Quadratic variant used to check the Euler-Lagrange equations: linear data term
/// u . grad(I) (sign flipped for the backward flow), mu |grad u|^2 and lambda_d (div u)^2,
/// with the flow held at zero on the border ring. Solved exactly by conjugate gradients.
FlowPair estimate_quadratic(const ScalarField2D& i1, const ScalarField2D& i2, const PredictorConfig& cfg,
                            double tol = 1e-12, int max_iter = 20000);

/// Relative norm over the crop of grad(I) - 2 mu laplacian(u) + grad(p_h), p_h = -2 lambda_d div(u),
/// for both directions. Falls back to the absolute norm when grad(I) vanishes.
double stokes_residual(const FlowPair& flows, const ScalarField2D& i1, const ScalarField2D& i2,
                       const PredictorConfig& cfg);

struct HsConfig {
    double alpha = 0.5;    ///< smoothness weight (squared in the energy)
    int iterations = 300;  ///< Gauss-Seidel sweeps per warp
    int warps = 1;         ///< outer relinearizations
};

/// Horn-Schunck energy of flow u linearized around u0: sum (a.(u - u0) + c)^2 + alpha^2 sum over edges |du|^2.
double hs_energy(const ScalarField2D& i1, const ScalarField2D& i2, const VectorField2D& u0, const VectorField2D& u,
                 double alpha);

/// Classic quadratic Horn-Schunck, red-black Gauss-Seidel with exact per-pixel minimization.
/// energy_trace, if given, receives the energy after every sweep of every warp.
VectorField2D estimate_hs(const ScalarField2D& i1, const ScalarField2D& i2, const HsConfig& cfg,
                          std::vector<double>* energy_trace = nullptr);

}  // namespace fluidest
