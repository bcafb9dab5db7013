#include "fluidest/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fluidest/correct.hpp"
#include "fluidest/eval.hpp"
#include "fluidest/io.hpp"
#include "fluidest/parallel.hpp"
#include "fluidest/predict.hpp"
#include "fluidest/sim.hpp"

namespace fluidest::cli {

namespace fs = std::filesystem;

namespace {

std::string frame_name(const char* prefix, std::size_t k, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%04zu%s", prefix, k, ext);
    return buf;
}

/// Files named prefix_NNNN.ext in a directory, in frame order.
std::vector<fs::path> list_frames(const fs::path& dir, const std::string& prefix, const std::string& ext) {
    if (!fs::is_directory(dir)) throw IoError("'" + dir.string() + "' is not a directory");
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && name.rfind(prefix + "_", 0) == 0 && entry.path().extension() == ext)
            out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) throw IoError("no " + prefix + "_*" + ext + " files in '" + dir.string() + "'");
    return out;
}

std::vector<VectorField2D> read_flows(const fs::path& dir) {
    std::vector<VectorField2D> flows;
    for (const auto& p : list_frames(dir, "flow", ".flo")) {
        flows.push_back(read_flow(p));
        if (count_non_finite(flows.back()) > 0) throw FormatError("'" + p.string() + "' contains non-finite values", 12);
        if (!flows.back().u.same_shape(flows.front().u)) throw DimensionError("'" + p.string() + "' has a different shape");
    }
    return flows;
}

std::vector<ScalarField2D> read_images(const fs::path& dir) {
    std::vector<ScalarField2D> images;
    for (const auto& p : list_frames(dir, "img", ".pgm")) {
        images.push_back(read_image(p));
        if (!images.back().same_shape(images.front())) throw DimensionError("'" + p.string() + "' has a different shape");
    }
    return images;
}

void write_flows(const fs::path& dir, const std::vector<VectorField2D>& flows) {
    fs::create_directories(dir);
    for (std::size_t k = 0; k < flows.size(); ++k) write_flow(dir / frame_name("flow", k, ".flo"), flows[k]);
}

ScalarField2D clamp01(ScalarField2D f) {
    for (double& v : f.data()) v = std::clamp(v, 0.0, 1.0);
    return f;
}

// Flag values; explicit flags override the run configuration loaded from --config.
struct Options {
    std::string config_path;
    RunConfig cfg;

    std::string preset;
    std::vector<int> size;
    std::optional<double> nu, dt, lambda_s, lambda_d, step, sigma, margin, corrector_nu, speed;
    std::optional<int> steps, save_every, levels, iters, particles, epochs, wake_column;
    std::optional<std::uint64_t> seed;

    std::string out, images, flows, est, gt, flows_pred, params;
    std::string method = "variational";
    bool correct = false;
    bool normalize = false;
    int bins = 41;
    std::vector<double> range{-10.0, 10.0};
    std::vector<double> displacement;
    int hs_warps = 3;

    void load() {
        if (!config_path.empty()) cfg = read_run_config(config_path);
        if (seed) cfg.seed = *seed;
        if (lambda_s) cfg.predictor.lambda_s = *lambda_s;
        if (lambda_d) cfg.predictor.lambda_d = *lambda_d;
        if (levels) cfg.predictor.levels = *levels;
        if (iters) cfg.predictor.iterations = *iters;
        if (corrector_nu) cfg.corrector.nu = *corrector_nu;
        if (epochs) cfg.corrector.epochs = *epochs;
        if (step) cfg.corrector.step = *step;
        if (nu) cfg.simulation.nu = *nu;
        if (dt) cfg.simulation.dt = *dt;
        if (!preset.empty()) cfg.dataset.preset = preset;
        if (size.size() == 2) {
            cfg.dataset.height = size[0];
            cfg.dataset.width = size[1];
        }
        if (speed) cfg.dataset.speed = *speed;
        if (save_every) cfg.dataset.steps_per_frame = *save_every;
        if (particles) cfg.dataset.particles = *particles;
        if (sigma) cfg.dataset.particle_sigma = *sigma;
        if (margin) cfg.dataset.margin = *margin;
        cfg.validate();
    }
};

int cmd_simulate(Options& o, std::ostream& out) {
    o.load();
    const int every = o.cfg.dataset.steps_per_frame;
    const int steps = o.steps.value_or(every * (o.cfg.dataset.frames - 1));
    if (steps < every) throw ConfigError("simulate: --steps must be at least the save interval");
    const FlowPreset preset = parse_preset(o.cfg.dataset.preset);
    PresetOptions po = o.cfg.dataset.options().preset;
    if (o.displacement.size() == 2) {
        if (preset != FlowPreset::Uniform) throw ConfigError("simulate: --displacement applies to the uniform preset only");
        po.displacement = std::array<double, 2>{o.displacement[0], o.displacement[1]};
    }
    PresetSetup s = make_preset(preset, o.cfg.simulation.config(), po, o.cfg.seed);
    const fs::path dir = o.out;
    fs::create_directories(dir);
    // The uniform preset is a fixed displacement per frame and is not stepped.
    const bool simulated = preset != FlowPreset::Uniform;
    const double frame_dt = simulated ? every * s.config.dt : 1.0;
    std::size_t frame = 0;
    for (int step = 0;; ++step) {
        if (step % every == 0) {
            write_image(dir / frame_name("tracer", frame, ".pgm"), clamp01(s.state.tracer));
            if (step + every > steps) break;
            write_flow(dir / frame_name("flow", frame, ".flo"), frame_dt * s.state.velocity);
            ++frame;
        }
        if (simulated) s.state = step_ns(s.state, s.config);
    }
    write_run_config(dir / "run.ini", o.cfg);
    out << "simulate: wrote " << frame << " flows and " << frame + 1 << " tracer frames to " << dir.string() << "\n";
    return kExitOk;
}

int cmd_gen_images(Options& o, std::ostream& out) {
    o.load();
    const auto flows = read_flows(o.flows);
    const int h = flows[0].height(), w = flows[0].width();
    const auto& d = o.cfg.dataset;
    std::mt19937_64 rng(o.cfg.seed);
    int count = d.particles;
    if (count <= 0) count = static_cast<int>(std::lround((h + 2 * d.margin) * (w + 2 * d.margin) / 12.0));
    ParticleSet ps = random_particles(count, h, w, d.margin, d.particle_intensity, d.particle_sigma, rng);
    const fs::path dir = o.out;
    fs::create_directories(dir);
    for (std::size_t k = 0; k <= flows.size(); ++k) {
        write_image(dir / frame_name("img", k, ".pgm"), render_particles(ps, h, w));
        if (k == flows.size()) break;
        write_flow(dir / frame_name("flow", k, ".flo"), flows[k]);
        ps = advect_particles(ps, flows[k], 1.0, rng, d.margin);
    }
    out << "gen-images: wrote " << flows.size() + 1 << " images with ground truth to " << dir.string() << "\n";
    return kExitOk;
}

int cmd_estimate(Options& o, std::ostream& out) {
    o.load();
    const auto images = read_images(o.images);
    if (images.size() < 2) throw ConfigError("estimate: need at least two images");
    const int pairs = static_cast<int>(images.size()) - 1;
    std::vector<VectorField2D> pred(static_cast<std::size_t>(pairs));
    const PredictorConfig pc = o.cfg.predictor;
    HsConfig hs;
    hs.alpha = std::sqrt(std::max(pc.lambda_s, 1e-12));
    hs.iterations = pc.iterations;
    hs.warps = o.hs_warps;
    parallel_for(0, pairs, [&](int k) {
        const auto& a = images[static_cast<std::size_t>(k)];
        const auto& b = images[static_cast<std::size_t>(k) + 1];
        pred[static_cast<std::size_t>(k)] = o.method == "hs" ? estimate_hs(a, b, hs) : estimate_variational(a, b, pc).forward;
    });
    const fs::path dir = o.out;
    write_flows(dir, pred);
    out << "estimate: wrote " << pairs << " " << o.method << " flows to " << dir.string() << "\n";
    if (o.correct) {
        const CorrectorParams p = o.params.empty() ? o.cfg.corrector.initial_params() : read_params(o.params);
        write_flows(dir / "corrected", correct_sequence(pred, p));
        out << "estimate: wrote corrected flows to " << (dir / "corrected").string() << "\n";
    }
    return kExitOk;
}

int cmd_train(Options& o, std::ostream& out) {
    o.load();
    const auto images = read_images(o.images);
    const auto pred = read_flows(o.flows_pred);
    if (!images[0].same_shape(pred[0].u)) throw DimensionError("train-corrector: images and flows differ in shape");
    if (images.size() != pred.size() + 1)
        throw DimensionError("train-corrector: expected one flow per image pair, found " + std::to_string(pred.size()) +
                             " flows for " + std::to_string(images.size()) + " images");
    const auto result = train_corrector(pred, o.cfg.corrector.initial_params(), o.cfg.corrector.train_options());
    const fs::path target = o.out;
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    write_params(target, result.params);
    std::vector<std::vector<double>> curve;
    for (std::size_t e = 0; e < result.curve.size(); ++e) curve.push_back({static_cast<double>(e), result.curve[e]});
    fs::path curve_path = target;
    curve_path.replace_filename(target.stem().string() + "_curve.csv");
    write_csv(curve_path, {"epoch", "loss"}, curve);
    out << "train-corrector: loss " << format_number(result.curve.front()) << " -> "
        << format_number(result.curve[static_cast<std::size_t>(result.best_epoch)]) << " (epoch " << result.best_epoch
        << "), parameters in " << target.string() << "\n";
    if (!o.gt.empty()) {
        const auto gt = read_flows(o.gt);
        if (gt.size() != pred.size()) throw DimensionError("train-corrector: ground truth and estimates differ in length");
        const auto corrected = correct_sequence(pred, result.params);
        std::vector<std::vector<double>> rows;
        for (std::size_t k = 0; k < gt.size(); ++k)
            rows.push_back({static_cast<double>(k), aepe(pred[k], gt[k]), aepe(corrected[k], gt[k])});
        fs::path eval_path = target;
        eval_path.replace_filename(target.stem().string() + "_eval.csv");
        write_csv(eval_path, {"frame", "aepe_predicted", "aepe_corrected"}, rows);
    }
    return kExitOk;
}

int cmd_eval(Options& o, std::ostream& out) {
    const auto est = read_flows(o.est);
    const auto gt = read_flows(o.gt);
    if (est.size() != gt.size())
        throw DimensionError("eval: " + std::to_string(est.size()) + " estimates for " + std::to_string(gt.size()) +
                             " ground-truth flows");
    const auto report = evaluate_sequence(est, gt, o.normalize);
    const fs::path target = o.out;
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    write_metric_csv(target, report);
    out << "eval: mean aepe " << format_number(report.mean_aepe()) << (o.normalize ? " px/100px" : " px")
        << ", mean aae " << format_number(report.mean_aae()) << " deg (augmented 3D angle), " << report.frames.size()
        << " frames\n";
    return kExitOk;
}

int cmd_report(Options& o, std::ostream& out) {
    const auto est = read_flows(o.est);
    const fs::path dir = o.out;
    fs::create_directories(dir);
    for (std::size_t k = 0; k < est.size(); ++k) {
        const auto h = displacement_histogram(est[k], o.bins, o.range[0], o.range[1]);
        std::vector<std::vector<double>> rows;
        for (std::size_t b = 0; b < h.u.size(); ++b)
            rows.push_back({h.edges[b], h.edges[b + 1], static_cast<double>(h.u[b]), static_cast<double>(h.v[b])});
        write_csv(dir / frame_name("histogram", k, ".csv"), {"bin_lo", "bin_hi", "count_u", "count_v"}, rows);
    }
    if (o.wake_column) {
        const auto profile = wake_profile(est, *o.wake_column);
        std::vector<std::vector<double>> rows;
        for (std::size_t y = 0; y < profile.size(); ++y)
            rows.push_back({static_cast<double>(y), profile[y].first, profile[y].second});
        write_csv(dir / "wake_profile.csv", {"row", "u", "v"}, rows);
    }
    if (!o.images.empty()) {
        const auto images = read_images(o.images);
        if (images.size() != est.size() + 1)
            throw DimensionError("report: expected " + std::to_string(est.size() + 1) + " images, found " +
                                 std::to_string(images.size()));
        std::vector<std::vector<double>> rows;
        for (std::size_t k = 0; k < est.size(); ++k) {
            const auto r = reconstruction_residual(images[k], images[k + 1], est[k]);
            rows.push_back({static_cast<double>(k), r.residual});
            write_image(dir / frame_name("reconstructed", k, ".pgm"), clamp01(r.image));
        }
        write_csv(dir / "reconstruction.csv", {"frame", "residual"}, rows);
    }
    out << "report: wrote diagnostics for " << est.size() << " frames to " << dir.string() << "\n";
    return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fluid motion estimation from particle image sequences", "fluidest"};
    app.require_subcommand(1);
    Options o;

    auto config = [&](CLI::App* s) {
        s->add_option("--config", o.config_path, "Run configuration file")->check(CLI::ExistingFile);
    };

    auto* sim = app.add_subcommand("simulate", "Run a flow preset and write flow and tracer frames");
    config(sim);
    sim->add_option("--preset", o.preset, "taylor-green | cylinder-wake | decaying-turbulence | uniform")
        ->check(CLI::IsMember({"taylor-green", "cylinder-wake", "decaying-turbulence", "uniform"}));
    sim->add_option("--size", o.size, "Grid height and width")->expected(2);
    sim->add_option("--nu", o.nu, "Kinematic viscosity");
    sim->add_option("--dt", o.dt, "Time step");
    sim->add_option("--steps", o.steps, "Number of simulation steps");
    sim->add_option("--save-every", o.save_every, "Steps between saved frames");
    sim->add_option("--speed", o.speed, "Characteristic speed in pixels per unit time");
    sim->add_option("--displacement", o.displacement, "Fixed displacement for the uniform preset, px per frame")
        ->expected(2);
    sim->add_option("--seed", o.seed, "Random seed");
    sim->add_option("--out", o.out, "Output directory")->required();

    auto* gen = app.add_subcommand("gen-images", "Render particle images moved by a flow sequence");
    config(gen);
    gen->add_option("--flows", o.flows, "Directory of flow_NNNN.flo files")->required();
    gen->add_option("--particles", o.particles, "Particle count (0 picks a density)");
    gen->add_option("--sigma", o.sigma, "Particle radius (Gaussian sigma, px)");
    gen->add_option("--margin", o.margin, "Particle band outside the image, px");
    gen->add_option("--seed", o.seed, "Random seed");
    gen->add_option("--out", o.out, "Output directory")->required();

    auto* est = app.add_subcommand("estimate", "Estimate flows between consecutive images");
    config(est);
    est->add_option("--images", o.images, "Directory of img_NNNN.pgm files")->required();
    est->add_option("--method", o.method, "hs | variational")->check(CLI::IsMember({"hs", "variational"}));
    est->add_option("--lambda-s", o.lambda_s, "Smoothness weight");
    est->add_option("--lambda-d", o.lambda_d, "Divergence weight");
    est->add_option("--levels", o.levels, "Pyramid levels");
    est->add_option("--iters", o.iters, "Iterations per level");
    est->add_option("--hs-warps", o.hs_warps, "Relinearizations for the hs method")->check(CLI::PositiveNumber);
    est->add_flag("--correct", o.correct, "Also write corrected flows");
    est->add_option("--params", o.params, "Corrector parameter file")->check(CLI::ExistingFile);
    est->add_option("--corrector-nu", o.corrector_nu, "Corrector viscosity when no parameter file is given");
    est->add_option("--out", o.out, "Output directory")->required();

    auto* train = app.add_subcommand("train-corrector", "Train the corrector on a predicted flow sequence");
    config(train);
    train->add_option("--images", o.images, "Directory of img_NNNN.pgm files")->required();
    train->add_option("--flows-pred", o.flows_pred, "Directory of predicted flow_NNNN.flo files")->required();
    train->add_option("--gt", o.gt, "Optional ground-truth flow directory");
    train->add_option("--epochs", o.epochs, "Training epochs");
    train->add_option("--step", o.step, "Adam step size");
    train->add_option("--corrector-nu", o.corrector_nu, "Corrector viscosity, px^2 per frame");
    train->add_option("--out", o.out, "Parameter file to write")->required();

    auto* ev = app.add_subcommand("eval", "Compare estimated flows with ground truth");
    ev->add_option("--est", o.est, "Directory of estimated flows")->required();
    ev->add_option("--gt", o.gt, "Directory of ground-truth flows")->required();
    ev->add_flag("--normalize", o.normalize, "Report errors in pixels per 100 pixels of width");
    ev->add_option("--out", o.out, "CSV report to write")->required();

    auto* rep = app.add_subcommand("report", "Write histograms, wake profiles and reconstruction residuals");
    rep->add_option("--est", o.est, "Directory of estimated flows")->required();
    rep->add_option("--images", o.images, "Image directory for reconstruction residuals");
    rep->add_option("--wake-column", o.wake_column, "Column for the wake profile");
    rep->add_option("--bins", o.bins, "Histogram bins")->check(CLI::PositiveNumber);
    rep->add_option("--range", o.range, "Histogram range")->expected(2);
    rep->add_option("--out", o.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        err << app.help();
        return kExitUsage;
    }

    try {
        if (sim->parsed()) return cmd_simulate(o, out);
        if (gen->parsed()) return cmd_gen_images(o, out);
        if (est->parsed()) return cmd_estimate(o, out);
        if (train->parsed()) return cmd_train(o, out);
        if (ev->parsed()) return cmd_eval(o, out);
        return cmd_report(o, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
}

}  // namespace fluidest::cli
