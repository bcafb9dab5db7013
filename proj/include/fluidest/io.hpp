#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fluidest/correct.hpp"
#include "fluidest/eval.hpp"
#include "fluidest/fields.hpp"
#include "fluidest/predict.hpp"
#include "fluidest/sim.hpp"

namespace fluidest {

/// Tag at the start of every .flo file ("PIEH" when read as bytes).
inline constexpr float kFlowMagic = 202021.25f;

/// Middlebury .flo: float tag, int32 width, int32 height, then interleaved (u, v) float32,
/// row-major, little-endian. Values are stored in single precision.
void write_flow(const std::filesystem::path& path, const VectorField2D& u);
VectorField2D read_flow(const std::filesystem::path& path);

/// Number of non-finite samples (files with NaN payloads read fine and are caught here).
std::size_t count_non_finite(const VectorField2D& u);

/// Binary PGM (P5), maxval 65535, big-endian samples. Writing requires values in [0, 1].
void write_image(const std::filesystem::path& path, const ScalarField2D& f);
ScalarField2D read_image(const std::filesystem::path& path);

inline constexpr std::uint32_t kParamsVersion = 1;

/// Little-endian record: "FECP", uint32 version, uint32 order, uint32 gate size,
/// uint32 gate weights per set, uint32 coefficients per component, float64 nu, float64 dt,
/// then float64 w_e, w_p, bias[2], cu, cv.
void write_params(const std::filesystem::path& path, const CorrectorParams& p);
CorrectorParams read_params(const std::filesystem::path& path);

struct DatasetSettings {
    std::string preset = "decaying-turbulence";
    int height = 64;
    int width = 64;
    double speed = 20.0;
    int frames = 20;
    int steps_per_frame = 10;
    int warmup_steps = 0;
    int particles = 0;
    double particle_sigma = 1.5;
    double particle_intensity = 1.0;
    double margin = 8.0;

    DatasetOptions options() const;
    bool operator==(const DatasetSettings&) const = default;
};

struct CorrectorSettings {
    int gate_size = 3;
    int order = 3;
    double nu = 1e-3;
    double dt = 1.0;
    int epochs = 200;
    double step = 1e-2;
    double lambda_d = 0.05;

    CorrectorParams initial_params() const;
    TrainOptions train_options() const;
    bool operator==(const CorrectorSettings&) const = default;
};

struct SimulationSettings {
    double nu = 0.01;
    double rho = 1.0;
    double dt = 0.01;
    double tolerance = 1e-10;
    int max_iterations = 10000;
    double tracer_diffusion = 0.05;

    SimConfig config() const;
    bool operator==(const SimulationSettings&) const = default;
};

struct RunConfig {
    PredictorConfig predictor;
    CorrectorSettings corrector;
    SimulationSettings simulation;
    DatasetSettings dataset;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Plain-text key = value file with [predictor], [corrector], [simulation] and [dataset]
/// sections; seed sits before the first section. Unknown sections or keys are rejected.
RunConfig parse_run_config(const std::string& text);
RunConfig read_run_config(const std::filesystem::path& path);
std::string format_run_config(const RunConfig& cfg);
void write_run_config(const std::filesystem::path& path, const RunConfig& cfg);

/// Shortest decimal form that reads back to the same double.
std::string format_number(double v);

/// CSV with header frame,aepe,aae,div_mean,div_max.
void write_metric_csv(const std::filesystem::path& path, const MetricReport& report);
MetricReport read_metric_csv(const std::filesystem::path& path);

/// Generic numeric CSV.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace fluidest
