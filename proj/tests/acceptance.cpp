// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fluidest/cli.hpp"
#include "fluidest/correct.hpp"
#include "fluidest/eval.hpp"
#include "fluidest/io.hpp"
#include "fluidest/predict.hpp"
#include "fluidest/sim.hpp"
#include "fluidest/warp.hpp"
#include "oracles.hpp"

using namespace fluidest;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

int failures = 0;

void criterion(int id, const char* name, const std::function<Outcome()>& body) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %2d %-22s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
}

double max_diff(const VectorField2D& a, const VectorField2D& b) {
    return std::max((a.u - b.u).max_abs(), (a.v - b.v).max_abs());
}

VectorField2D taylor_green(int n, double t, double nu) {
    const double k = 2.0 * std::numbers::pi / (n - 1);
    const double decay = std::exp(-2.0 * nu * k * k * t);
    return VectorField2D::from_function(n, n, [&](double x, double y) {
        return std::pair{decay * std::sin(k * x) * std::cos(k * y), -decay * std::cos(k * x) * std::sin(k * y)};
    });
}

double rel_l2(const VectorField2D& a, const VectorField2D& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.u.size(); ++i) {
        num += std::pow(a.u.data()[i] - b.u.data()[i], 2) + std::pow(a.v.data()[i] - b.v.data()[i], 2);
        den += std::pow(b.u.data()[i], 2) + std::pow(b.v.data()[i], 2);
    }
    return std::sqrt(num / den);
}

CorrectorParams random_params(std::mt19937_64& rng, double scale) {
    auto p = CorrectorParams::initial();
    std::uniform_real_distribution<double> d(-scale, scale);
    auto theta = p.flatten();
    for (double& v : theta) v = d(rng);
    p.assign(theta);
    return p;
}

std::vector<double*> pointers(std::initializer_list<ScalarField2D*> fields) {
    std::vector<double*> out;
    for (auto* f : fields)
        for (double& v : f->data()) out.push_back(&v);
    return out;
}

std::vector<double> values(std::initializer_list<const ScalarField2D*> fields) {
    std::vector<double> out;
    for (const auto* f : fields) out.insert(out.end(), f->data().begin(), f->data().end());
    return out;
}

std::string contents(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

int run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "fluidest");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    if (code != 0) std::fprintf(stderr, "%s", err.str().c_str());
    return code;
}

Outcome projection() {
    std::mt19937_64 rng(100);
    double worst_div = 0.0, slowest = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto us = oracle::random_vector(64, 64, rng);
        const auto t0 = Clock::now();
        const auto p = pressure_project(us, 1.0, 1.0, 1e-10, 10000);
        slowest = std::max(slowest, seconds_since(t0));
        worst_div = std::max(worst_div, oracle::interior_max_abs(divergence(p.velocity)));
    }
    return {worst_div < 1e-6 && slowest < 1.0, fmt("max|div| %.2e (< 1e-6), slowest solve %.3f s (< 1 s)", worst_div, slowest)};
}

Outcome taylor_green_decay() {
    const auto t0 = Clock::now();
    SimConfig cfg;
    cfg.nu = 0.01;
    cfg.dt = 0.01;
    SimState s;
    s.velocity = taylor_green(64, 0.0, cfg.nu);
    s.pressure = ScalarField2D(64, 64);
    for (int i = 0; i < 100; ++i) s = step_ns(s, cfg);
    const double err = rel_l2(s.velocity, taylor_green(64, s.time, cfg.nu));
    const double t = seconds_since(t0);
    return {err < 0.02 && t < 10.0, fmt("relative L2 error %.2e (< 2e-2), %.2f s (< 10 s)", err, t)};
}

Outcome warp_oracle() {
    std::mt19937_64 rng(300);
    std::uniform_real_distribution<double> dd(0.01, 2.0);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto f = oracle::random_scalar(16, 16, rng);
        const auto w = oracle::random_vector(16, 16, rng, -3.0, 3.0);
        const double D = dd(rng);
        const auto out = warp_gaussian(f, w, {D, 1.0, 100});
        worst = std::max(worst, (out - oracle::dense_gaussian_warp(f, w, D, 1.0)).max_abs());
    }
    return {worst <= 1e-10, fmt("max abs diff %.2e (<= 1e-10) over 20 cases", worst)};
}

Outcome gradient_suite() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(400);
    const PredictorConfig cfg;
    double worst = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
        const int n = 8;
        const auto i1 = oracle::random_scalar(n, n, rng, 0.0, 1.0), i2 = oracle::random_scalar(n, n, rng, 0.0, 1.0);
        FlowPair f{oracle::random_vector(n, n, rng), oracle::random_vector(n, n, rng)};
        const auto params = pointers({&f.forward.u, &f.forward.v, &f.backward.u, &f.backward.v});
        auto flat = [](const FlowPair& g) { return values({&g.forward.u, &g.forward.v, &g.backward.u, &g.backward.v}); };

        worst = std::max(worst, oracle::max_gradient_error(params, flat(photometric_loss_grad(i1, i2, f, cfg).grad),
                                                           [&] { return photometric_loss(i1, i2, f, cfg); }));
        worst = std::max(worst, oracle::max_gradient_error(params, flat(smoothness_loss_grad(f, cfg).grad),
                                                           [&] { return regularizer_loss(f, cfg).smoothness; }));
        worst = std::max(worst, oracle::max_gradient_error(params, flat(divergence_loss_grad(f, cfg).grad),
                                                           [&] { return regularizer_loss(f, cfg).divergence; }));
        worst = std::max(worst, oracle::max_gradient_error(params, flat(total_predictor_loss_grad(i1, i2, f, cfg).grad),
                                                           [&] { return total_predictor_loss(i1, i2, f, cfg); }));

        auto u = oracle::random_vector(n, n, rng);
        const auto prev = oracle::random_vector(n, n, rng);
        const auto w = oracle::random_scalar(n, n, rng);
        const auto lg = corrector_loss_grad(u, w, prev, 0.3, 0.05, 1.0);
        worst = std::max(worst, oracle::max_gradient_error(pointers({&u.u, &u.v}), values({&lg.grad.u, &lg.grad.v}),
                                                           [&] { return corrector_loss(u, w, prev, 0.3, 0.05, 1.0); }));

        const auto est = oracle::random_vector(n, n, rng);
        const auto p = random_params(rng, 0.3);
        const auto sg = corrector_step_grad(prev, est, w, p, 0.3);
        auto theta = p.flatten();
        std::vector<double*> tp;
        for (double& v : theta) tp.push_back(&v);
        worst = std::max(worst, oracle::max_gradient_error(tp, sg.grad, [&] {
            auto q = p;
            q.assign(theta);
            return corrector_loss(correct_step(prev, est, q), w, prev, 0.3, q.nu, q.dt);
        }));
    }
    const double t = seconds_since(t0);
    return {worst < 1e-4 && t < 30.0, fmt("max relative error %.2e (< 1e-4), %.1f s (< 30 s)", worst, t)};
}

Outcome predictor_accuracy() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(500);
    std::uniform_real_distribution<double> dx(0.0, 5.0);
    const PredictorConfig cfg;
    double moving = 0.0, still = 0.0;
    for (int pair = 0; pair < 20; ++pair) {
        DatasetOptions opts;
        opts.preset.displacement = std::array<double, 2>{dx(rng), 0.0};
        const auto ds = gen_dataset(SimConfig{}, FlowPreset::Uniform, 2, 500 + pair, opts);
        moving += aepe(estimate_variational(ds.images[0], ds.images[1], cfg).forward, ds.flows[0]) / 20.0;
        if (pair < 3) still = std::max(still, aepe(estimate_variational(ds.images[0], ds.images[0], cfg).forward, VectorField2D(64, 64)));
    }
    const double t = seconds_since(t0);
    return {moving < 0.5 && still < 0.05 && t < 120.0,
            fmt("mean AEPE %.3f (< 0.5), identical pairs %.4f (< 0.05), %.1f s (< 120 s)", moving, still, t)};
}

Outcome stokes_stationarity() {
    const int n = 32;
    auto texture = [&](double sx, double sy) {
        return ScalarField2D::from_function(n, n, [&](double x, double y) {
            x -= sx;
            y -= sy;
            return 0.5 + 0.2 * std::sin(0.35 * x + 0.1 * y) + 0.15 * std::cos(0.27 * y - 0.2 * x) +
                   0.1 * std::sin(0.5 * x) * std::cos(0.45 * y);
        });
    };
    const auto a = texture(0.0, 0.0), b = texture(0.5, 0.25);
    const PredictorConfig cfg;
    const double initial = stokes_residual({VectorField2D(n, n), VectorField2D(n, n)}, a, b, cfg);
    const double converged = stokes_residual(estimate_quadratic(a, b, cfg), a, b, cfg);
    return {converged < 1e-2 && initial >= 10.0 * converged,
            fmt("residual %.2e (< 1e-2), initial/final %.1f (>= 10)", converged, initial / converged)};
}

Outcome corrector_improvement() {
    SimConfig sc;
    sc.nu = 0.05;
    DatasetOptions opts;
    opts.preset.speed = 20.0;
    const auto ds = gen_dataset(sc, FlowPreset::DecayingTurbulence, 20, 1, opts);
    const PredictorConfig pc;
    std::vector<VectorField2D> pred;
    for (std::size_t k = 0; k + 1 < ds.images.size(); ++k) pred.push_back(estimate_variational(ds.images[k], ds.images[k + 1], pc).forward);

    const double frame_dt = opts.steps_per_frame * sc.dt;
    const auto trained = train_corrector(pred, CorrectorParams::initial(3, 3, sc.nu * frame_dt, 1.0), TrainOptions{});
    const auto corrected = correct_sequence(pred, trained.params);

    // Frame 0 has no predecessor, so both sequences share it.
    auto stats = [&](const std::vector<VectorField2D>& s) {
        double m = 0.0, q = 0.0;
        const double n = static_cast<double>(s.size() - 1);
        for (std::size_t k = 1; k < s.size(); ++k) {
            const double e = aepe(s[k], ds.flows[k]);
            m += e;
            q += e * e;
        }
        m /= n;
        return std::pair{m, std::sqrt(std::max(0.0, q / n - m * m))};
    };
    const auto [mp, sp] = stats(pred);
    const auto [mc, scr] = stats(corrected);
    return {mc <= mp && scr <= sp, fmt("mean AEPE %.4f -> %.4f, std %.4f -> %.4f", mp, mc, sp, scr)};
}

Outcome scheme_identities() {
    std::mt19937_64 rng(800);
    double blend = 0.0, split = 0.0, extremes = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto prev = oracle::random_vector(12, 12, rng), est = oracle::random_vector(12, 12, rng, -2.0, 2.0);
        const auto parts = correction_parts(prev, est, random_params(rng, 1.0));
        blend = std::max(blend, max_diff(blend_increment(parts, est), blend_convex(parts, est)));

        const auto u = oracle::random_vector(12, 12, rng);
        const auto p = oracle::random_scalar(12, 12, rng);
        const double nu = 0.05, rho = 1.3, dt = 0.02;
        const VectorField2D u_star = u + dt * explicit_tendency(u, nu);
        split = std::max(split, max_diff(apply_pressure_gradient(u_star, p, rho, dt), ns_update_explicit(u, p, nu, rho, dt)));
    }
    for (int trial = 0; trial < 10; ++trial) {
        const auto prev = oracle::random_vector(12, 12, rng), est = oracle::random_vector(12, 12, rng);
        auto q = random_params(rng, 0.3);
        q.gamma = GammaParams::zeros(q.gamma.order);
        q.gate.bias = {40.0, 40.0};
        extremes = std::max(extremes, max_diff(correct_step(prev, est, q), est));
        q.gate.bias = {-40.0, -40.0};
        extremes = std::max(extremes, max_diff(correct_step(prev, est, q), advect_diffuse(prev, q.nu, q.dt)));
    }
    return {blend <= 1e-12 && split <= 1e-12 && extremes <= 1e-8,
            fmt("blend forms %.1e, splitting %.1e (<= 1e-12), gate extremes %.1e (<= 1e-8)", blend, split, extremes)};
}

Outcome io_round_trips() {
    const auto dir = fs::temp_directory_path() / ("fluidest_accept_io_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir);
    std::mt19937_64 rng(900);
    bool ok = true;

    auto flow = oracle::random_vector(13, 17, rng, -6.0, 6.0);
    for (auto* c : {&flow.u, &flow.v})
        for (double& v : c->data()) v = static_cast<float>(v);
    write_flow(dir / "a.flo", flow);
    const bool flow_ok = read_flow(dir / "a.flo") == flow;

    const auto img = oracle::random_scalar(11, 9, rng, 0.0, 1.0);
    write_image(dir / "a.pgm", img);
    const auto back = read_image(dir / "a.pgm");
    write_image(dir / "b.pgm", back);
    const double quant = (back - img).max_abs();
    const bool image_ok = quant <= 0.5 / 65535.0 + 1e-15 && read_image(dir / "b.pgm") == back;

    auto params = random_params(rng, 2.0);
    params.nu = 0.0123;
    write_params(dir / "p.bin", params);
    const bool params_ok = read_params(dir / "p.bin") == params;

    write_flow(dir / "one.flo", VectorField2D(1, 1, 1.5, -2.25));
    const std::string expect{'P', 'I', 'E', 'H', 1, 0, 0, 0, 1, 0, 0, 0, '\x00', '\x00', '\xc0', '\x3f', '\x00', '\x00', '\x10', '\xc0'};
    const bool bytes_ok = contents(dir / "one.flo") == expect;

    fs::remove_all(dir);
    ok = flow_ok && image_ok && params_ok && bytes_ok;
    return {ok, fmt("flow %s, image %s (quantization %.2e <= %.2e), params %s, 1x1 bytes %s", flow_ok ? "ok" : "bad",
                    image_ok ? "ok" : "bad", quant, 0.5 / 65535.0, params_ok ? "ok" : "bad", bytes_ok ? "ok" : "bad")};
}

Outcome determinism() {
    const auto dir = fs::temp_directory_path() / ("fluidest_accept_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir);
    RunConfig cfg;
    cfg.seed = 3;
    cfg.dataset.preset = "decaying-turbulence";
    cfg.dataset.height = cfg.dataset.width = 32;
    cfg.dataset.steps_per_frame = 3;
    cfg.predictor.iterations = 40;
    cfg.predictor.levels = 2;
    cfg.corrector.epochs = 5;
    write_run_config(dir / "run.ini", cfg);
    const auto c = (dir / "run.ini").string();

    auto pipeline = [&](const std::string& tag) {
        const auto b = dir / tag;
        const auto s = [&](const char* sub) { return (b / sub).string(); };
        bool ok = run_cli({"simulate", "--config", c, "--steps", "12", "--out", s("sim")}) == 0;
        ok = ok && run_cli({"gen-images", "--config", c, "--flows", s("sim"), "--out", s("img")}) == 0;
        ok = ok && run_cli({"estimate", "--config", c, "--images", s("img"), "--correct", "--out", s("est")}) == 0;
        ok = ok && run_cli({"train-corrector", "--config", c, "--images", s("img"), "--flows-pred", s("est"), "--gt", s("img"),
                            "--out", (b / "train" / "params.bin").string()}) == 0;
        ok = ok && run_cli({"eval", "--est", s("est"), "--gt", s("img"), "--out", (b / "metrics.csv").string()}) == 0;
        ok = ok && run_cli({"report", "--est", s("est"), "--images", s("img"), "--wake-column", "20", "--out", s("report")}) == 0;
        return ok;
    };
    const bool ran = pipeline("a") && pipeline("b");
    std::size_t files = 0, differing = 0;
    if (ran)
        for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
            if (!e.is_regular_file()) continue;
            ++files;
            if (contents(e.path()) != contents(dir / "b" / fs::relative(e.path(), dir / "a"))) ++differing;
        }
    fs::remove_all(dir);
    return {ran && files > 0 && differing == 0, fmt("%zu artifacts compared, %zu differ", files, differing)};
}

}  // namespace

int main() {
    criterion(1, "projection", projection);
    criterion(2, "taylor-green decay", taylor_green_decay);
    criterion(3, "warp oracle", warp_oracle);
    criterion(4, "gradient suite", gradient_suite);
    criterion(5, "predictor accuracy", predictor_accuracy);
    criterion(6, "stokes stationarity", stokes_stationarity);
    criterion(7, "corrector improvement", corrector_improvement);
    criterion(8, "scheme identities", scheme_identities);
    criterion(9, "io round trips", io_round_trips);
    criterion(10, "determinism", determinism);
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
