#include <doctest.h>

#include <cmath>
#include <random>

#include "fluidest/correct.hpp"
#include "fluidest/sim.hpp"
#include "oracles.hpp"

using namespace fluidest;

namespace {

double sigma0() { return std::pow(1e-6, 0.45); }

CorrectorParams random_params(std::mt19937_64& rng, double scale = 0.3) {
    auto p = CorrectorParams::initial();
    std::uniform_real_distribution<double> d(-scale, scale);
    auto theta = p.flatten();
    for (double& v : theta) v = d(rng);
    p.assign(theta);
    return p;
}

VectorField2D smooth_flow(int n, double phase, double amp = 0.8) {
    return VectorField2D::from_function(n, n, [&](double x, double y) {
        return std::pair{amp * std::sin(0.3 * x + phase) * std::cos(0.2 * y), amp * std::cos(0.25 * x - phase) * std::sin(0.35 * y)};
    });
}

}  // namespace

TEST_CASE("parameter layout") {
    const auto p = CorrectorParams::initial();
    CHECK(p.gamma.cu.size() == 6);
    CHECK(p.gate.w_e.size() == 36);
    CHECK(p.trainable_count() == 36 + 36 + 2 + 12);
    const auto idx = derivative_indices(3);
    REQUIRE(idx.size() == 6);
    CHECK(idx[0] == std::pair{0, 0});
    CHECK(idx[3] == std::pair{2, 0});
    CHECK(idx[5] == std::pair{0, 2});
    CHECK_THROWS_AS(GateParams::zeros(4), ConfigError);
    CHECK_THROWS_AS(GammaParams::zeros(6), ConfigError);
    CHECK_THROWS_AS(GammaParams::zeros(0), ConfigError);

    std::mt19937_64 rng(1);
    auto q = random_params(rng);
    auto r = CorrectorParams::initial();
    r.assign(q.flatten());
    CHECK(r == q);
}

TEST_CASE("gate examples") {
    std::mt19937_64 rng(2);
    const auto e = oracle::random_vector(10, 12, rng), t = oracle::random_vector(10, 12, rng);
    auto p = GateParams::zeros();
    const auto half = gate(e, t, p);
    CHECK(half.u.max_abs() == 0.5);
    CHECK((half.v - ScalarField2D(10, 12, 0.5)).max_abs() == 0.0);

    p.bias = {20.0, 20.0};
    const auto one = gate(e, t, p);
    CHECK((one.u - ScalarField2D(10, 12, 1.0)).max_abs() < 1e-8);
    CHECK((one.v - ScalarField2D(10, 12, 1.0)).max_abs() < 1e-8);

    CHECK_THROWS_AS(gate(e, oracle::random_vector(10, 11, rng), p), DimensionError);
}

TEST_CASE("property: gate values stay strictly inside (0, 1)") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        auto p = random_params(rng, 50.0).gate;
        const auto e = oracle::random_vector(9, 9, rng, -5, 5), t = oracle::random_vector(9, 9, rng, -5, 5);
        const auto k = gate(e, t, p);
        for (const ScalarField2D* c : {&k.u, &k.v})
            for (double v : c->data()) {
                CHECK(v > 0.0);
                CHECK(v < 1.0);
            }
    }
}

TEST_CASE("gate matches a direct convolution") {
    std::mt19937_64 rng(4);
    const int n = 7;
    const auto e = oracle::random_vector(n, n, rng), t = oracle::random_vector(n, n, rng);
    const auto p = random_params(rng).gate;
    const auto k = gate(e, t, p);
    const ScalarField2D* ins_e[2] = {&e.u, &e.v};
    const ScalarField2D* ins_t[2] = {&t.u, &t.v};
    double worst = 0.0;
    for (int out = 0; out < 2; ++out)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                double z = p.bias[static_cast<std::size_t>(out)];
                for (int in = 0; in < 2; ++in)
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            const int xs = std::clamp(x + dx, 0, n - 1), ys = std::clamp(y + dy, 0, n - 1);
                            const auto i = static_cast<std::size_t>(GateParams::index(3, out, in, dy + 1, dx + 1));
                            z += p.w_e[i] * (*ins_e[in])(xs, ys) + p.w_p[i] * (*ins_t[in])(xs, ys);
                        }
                const double expect = 1.0 / (1.0 + std::exp(-z));
                worst = std::max(worst, std::abs(expect - (out == 0 ? k.u : k.v)(x, y)));
            }
    CHECK(worst < 1e-14);
}

TEST_CASE("gamma residual examples") {
    std::mt19937_64 rng(5);
    const auto a = oracle::random_vector(8, 8, rng), b = oracle::random_vector(8, 8, rng);
    const auto zero = GammaParams::zeros();
    CHECK(gamma_residual(a, b, zero).u.max_abs() == 0.0);

    auto p = random_params(rng).gamma;
    const auto same = gamma_residual(a, a, p);
    CHECK(same.u.max_abs() == 0.0);
    CHECK(same.v.max_abs() == 0.0);

    auto id = GammaParams::zeros();
    id.cu[0] = id.cv[0] = 1.0;
    const auto psi = gamma_residual(a, b, id);
    CHECK(psi.u == a.u - b.u);
    CHECK(psi.v == a.v - b.v);
}

TEST_CASE("gamma residual reproduces analytic derivatives in the interior") {
    const int n = 12;
    // psi_u = x^2 + 3xy, psi_v = y^2 - xy; central stencils are exact on quadratics.
    const auto a = VectorField2D::from_function(n, n, [](double x, double y) { return std::pair{x * x + 3 * x * y, y * y - x * y}; });
    const VectorField2D b(n, n);
    auto p = GammaParams::zeros();
    p.cu = {0.0, 1.0, 0.0, 0.5, 0.0, 0.0};  // d/dx + 0.5 d2/dx2
    p.cv = {0.0, 0.0, 0.0, 0.0, 2.0, 1.0};  // 2 d2/dxdy + d2/dy2
    const auto phi = gamma_residual(a, b, p);
    for (int y = 2; y < n - 2; ++y)
        for (int x = 2; x < n - 2; ++x) {
            CHECK(phi.u(x, y) == doctest::Approx(2.0 * x + 3.0 * y + 1.0).epsilon(1e-12));
            CHECK(std::abs(phi.v(x, y)) < 1e-12);
        }
}

TEST_CASE("correct step degenerations") {
    std::mt19937_64 rng(6);
    const auto prev = oracle::random_vector(10, 10, rng), est = oracle::random_vector(10, 10, rng);
    auto p = CorrectorParams::initial();
    p.gate.bias = {40.0, 40.0};
    const auto open = correct_step(prev, est, p);
    CHECK((open.u - est.u).max_abs() < 1e-12);
    CHECK((open.v - est.v).max_abs() < 1e-12);

    p.gate.bias = {-40.0, -40.0};
    const auto shut = correct_step(prev, est, p);
    const auto tentative = advect_diffuse(prev, p.nu, p.dt);
    CHECK((shut.u - tentative.u).max_abs() < 1e-12);
    CHECK((shut.v - tentative.v).max_abs() < 1e-12);

    const auto avg = correct_step(prev, est, CorrectorParams::initial());
    CHECK((avg.u - 0.5 * (est.u + tentative.u)).max_abs() < 1e-14);

    CHECK_THROWS_AS(correct_step(VectorField2D(10, 10, 5.0, 0.0), est, p), CflError);
}

TEST_CASE("property: increment and convex forms agree") {
    std::mt19937_64 rng(7);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto prev = oracle::random_vector(8, 8, rng), est = oracle::random_vector(8, 8, rng, -2, 2);
        const auto p = random_params(rng, 1.0);
        const auto parts = correction_parts(prev, est, p);
        const auto a = blend_increment(parts, est), b = blend_convex(parts, est);
        worst = std::max({worst, (a.u - b.u).max_abs(), (a.v - b.v).max_abs()});
        CHECK(correct_step(prev, est, p) == a);
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("corrector loss examples") {
    const int n = 16;
    const auto u = smooth_flow(n, 0.3);
    const VectorField2D still(n, n);
    // With a still previous field and no viscosity the carried vorticity is the input itself.
    const ScalarField2D w = curl(u);
    const double lam = 0.1;
    const double base = corrector_loss(u, w, still, 0.0, 0.0, 1.0);
    CHECK(base == doctest::Approx(sigma0()).epsilon(1e-12));

    const auto stream = ScalarField2D::from_function(n, n, [](double x, double y) { return std::sin(0.3 * x) * std::cos(0.4 * y); });
    const VectorField2D solenoidal(diff_y(stream), -1.0 * diff_x(stream));
    CHECK(divergence(solenoidal).max_abs() < 1e-15);
    CHECK(corrector_loss(solenoidal, curl(solenoidal), still, lam, 0.0, 1.0) ==
          doctest::Approx((1.0 + lam) * sigma0()).epsilon(1e-12));

    // A gradient perturbation leaves the curl unchanged.
    const auto pot = ScalarField2D::from_function(n, n, [](double x, double y) { return 0.05 * x * x - 0.1 * x * y + std::sin(y); });
    CHECK(std::abs(corrector_loss(u + gradient(pot), w, still, 0.0, 0.0, 1.0) - base) < 1e-14);
    CHECK(corrector_loss(u + gradient(pot), w, still, lam, 0.0, 1.0) != corrector_loss(u, w, still, lam, 0.0, 1.0));

    const ScalarField2D delta = ScalarField2D::from_function(n, n, [](double x, double y) { return 0.1 + 0.01 * x * y; });
    CHECK(corrector_loss(u, w + 2.0 * delta, still, 0.0, 0.0, 1.0) > corrector_loss(u, w + delta, still, 0.0, 0.0, 1.0));

    // The carried vorticity is the Gaussian warp of the previous vorticity.
    const auto prev = smooth_flow(n, 1.1, 0.5);
    const ScalarField2D carried = step_vorticity(curl(prev), prev, 0.02, 1.0);
    const VectorField2D matched(n, n);  // curl 0, div 0
    double expect = 0.0;
    for (int y = 2; y < n - 2; ++y)
        for (int x = 2; x < n - 2; ++x) expect += std::pow(carried(x, y) * carried(x, y) + 1e-6, 0.45);
    expect /= (n - 4) * (n - 4);
    CHECK(corrector_loss(matched, curl(prev), prev, lam, 0.02, 1.0) == doctest::Approx(expect + lam * sigma0()).epsilon(1e-12));

    CHECK_THROWS_AS(corrector_loss(u, ScalarField2D(n, n + 1), still, lam, 0.0, 1.0), DimensionError);
}

TEST_CASE("property: corrector gradients match finite differences") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 3; ++trial) {
        const int n = 8;
        auto u = oracle::random_vector(n, n, rng);
        const auto prev = oracle::random_vector(n, n, rng);
        const auto w = oracle::random_scalar(n, n, rng);
        const auto lg = corrector_loss_grad(u, w, prev, 0.3, 0.05, 1.0);
        std::vector<double*> ptr;
        std::vector<double> analytic;
        for (ScalarField2D* c : {&u.u, &u.v})
            for (double& v : c->data()) ptr.push_back(&v);
        for (const ScalarField2D* c : {&lg.grad.u, &lg.grad.v}) analytic.insert(analytic.end(), c->data().begin(), c->data().end());
        CHECK(oracle::max_gradient_error(ptr, analytic, [&] { return corrector_loss(u, w, prev, 0.3, 0.05, 1.0); }) < 1e-4);

        const auto est = oracle::random_vector(n, n, rng);
        auto p = random_params(rng);
        const auto sg = corrector_step_grad(prev, est, w, p, 0.3);
        CHECK(sg.value == doctest::Approx(corrector_loss(correct_step(prev, est, p), w, prev, 0.3, p.nu, p.dt)).epsilon(1e-14));
        auto theta = p.flatten();
        std::vector<double*> tp;
        for (double& v : theta) tp.push_back(&v);
        const auto loss = [&] {
            auto q = p;
            q.assign(theta);
            return corrector_loss(correct_step(prev, est, q), w, prev, 0.3, q.nu, q.dt);
        };
        CHECK(oracle::max_gradient_error(tp, sg.grad, loss) < 1e-4);
    }
}

TEST_CASE("corrector training") {
    const int n = 16;
    std::vector<VectorField2D> est;
    for (int t = 0; t < 6; ++t) est.push_back(smooth_flow(n, 0.2 * t) + 0.05 * std::sin(3.0 * t) * VectorField2D(n, n, 1.0, -1.0));
    const auto p0 = CorrectorParams::initial();

    TrainOptions frozen;
    frozen.epochs = 5;
    frozen.step = 0.0;
    const auto f = train_corrector(est, p0, frozen);
    CHECK(f.params == p0);
    REQUIRE(f.curve.size() == 6);
    for (double v : f.curve) CHECK(v == f.curve[0]);

    // First recorded loss is that of the plain average scheme.
    double avg = 0.0;
    VectorField2D prev = est[0];
    for (std::size_t t = 1; t < est.size(); ++t) {
        const auto u = correct_step(prev, est[t], p0);
        avg += corrector_loss(u, curl(est[t - 1]), prev, frozen.lambda_d, p0.nu, p0.dt);
        prev = u;
    }
    CHECK(f.curve[0] == doctest::Approx(avg / 5.0).epsilon(1e-14));

    TrainOptions own = frozen;
    own.vorticity = VorticitySource::Corrected;
    double own_avg = 0.0;
    prev = est[0];
    for (std::size_t t = 1; t < est.size(); ++t) {
        const auto u = correct_step(prev, est[t], p0);
        own_avg += corrector_loss(u, curl(prev), prev, frozen.lambda_d, p0.nu, p0.dt);
        prev = u;
    }
    CHECK(train_corrector(est, p0, own).curve[0] == doctest::Approx(own_avg / 5.0).epsilon(1e-14));

    TrainOptions opts;
    opts.epochs = 30;
    const auto a = train_corrector(est, p0, opts);
    const auto b = train_corrector(est, p0, opts);
    CHECK(a.curve == b.curve);
    CHECK(a.params == b.params);
    CHECK(a.curve.size() == 31);
    CHECK(a.curve[static_cast<std::size_t>(a.best_epoch)] <= a.curve[0]);
    CHECK(a.curve[static_cast<std::size_t>(a.best_epoch)] < a.curve[0]);

    CHECK_THROWS_AS(train_corrector(std::span(est).first(2), p0, opts), ConfigError);
    auto bad = est;
    bad[3].u(4, 5) = std::nan("");
    try {
        train_corrector(bad, p0, opts);
        FAIL("expected a numerical error");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("frame 3") != std::string::npos);
    }
}
