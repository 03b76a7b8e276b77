#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "test_util.hpp"

#include "dhym/flow.hpp"

using namespace dhym;
using namespace dhym::test;

namespace {
Mat diag2(double a, double b) {
    Mat m(2);
    m.at(0, 0) = a;
    m.at(1, 1) = b;
    return m;
}

FlowConfig quick_config() {
    FlowConfig c;
    c.integrator = Integrator::Euler;
    c.dt_safety = 1.0;
    c.tol_theta = 1e-9;
    c.max_steps = 50000;
    c.record_per_step = true;
    return c;
}
} // namespace

TEST_CASE("flow right-hand side") {
    SUBCASE("constant-curvature data is an exact fixed point") {
        const GridSpec g = make_grid(2, 8);
        SpectralEngine eng(g);
        const BundleSpec b = BundleSpec::make(KahlerData::identity(2), diag2(3.0, 3.0));
        const FlowState s = make_flow_state(eng, b, RealField(g));
        CHECK(max_abs(flow_rhs(s)) == 0.0); // exact: theta and Z share every bit
        const FlowState s2 = flow_step(eng, b, s, 1e-3, Integrator::Euler);
        CHECK(sup_diff(s2.phi, s.phi) < 1e-15);
    }
    SUBCASE("n=1 small amplitude linearizes to the heat operator") {
        const GridSpec g = make_grid(1, 16);
        SpectralEngine eng(g);
        const BundleSpec b = BundleSpec::make(KahlerData::identity(1), Mat(1));
        const double eps = 1e-6;
        const RealField phi = fill(g, [&](const auto& c) { return eps * std::cos(2.0 * M_PI * c[0]); });
        const FlowState s = make_flow_state(eng, b, phi);
        const RealField r = flow_rhs(s);
        const RealField want =
            fill(g, [&](const auto& c) { return -M_PI * M_PI * eps * std::cos(2.0 * M_PI * c[0]); });
        CHECK(sup_diff(r, want) < 1e-9 * M_PI * M_PI * eps + 1e-15);
    }
    SUBCASE("mean of the rhs is mean theta minus the target") {
        const GridSpec g = make_grid(2, 8);
        SpectralEngine eng(g);
        const BundleSpec b = BundleSpec::make(KahlerData::identity(2), diag2(3.0, 2.0));
        const FlowState s = make_flow_state(eng, b, eng.random_band_limited(3, 3, 0.05));
        CHECK(std::abs(integrate(flow_rhs(s)) - (s.stats.theta_mean() - s.theta_hat)) < 1e-12);
    }
}

TEST_CASE("CFL step size") {
    const FlowConfig cfg = [] {
        FlowConfig c;
        c.dt_safety = 0.8;
        return c;
    }();
    SUBCASE("flat bundle: Lambda = 1 and the documented value at N = 32") {
        const GridSpec g = make_grid(2, 32);
        SpectralEngine eng(g);
        const BundleSpec b = BundleSpec::make(KahlerData::identity(2), Mat(2));
        const FlowState s = make_flow_state(eng, b, RealField(g));
        const double dt = cfl_dt(s, cfg);
        const double want = 0.8 / (32.0 * 32.0 * M_PI * M_PI * 2.0);
        CHECK(dt == doctest::Approx(want).epsilon(1e-12));
        CHECK(want == doctest::Approx(3.958e-5).epsilon(2e-3));
    }
    SUBCASE("large eigenvalues grow dt up to the tenfold cap") {
        const GridSpec g = make_grid(2, 16);
        SpectralEngine eng(g);
        const BundleSpec b = BundleSpec::make(KahlerData::identity(2), diag2(50.0, 50.0));
        const FlowState s = make_flow_state(eng, b, RealField(g));
        const double cap = 10.0 * 0.8 * g.dx() * g.dx() / (M_PI * M_PI * 2.0);
        CHECK(cfl_dt(s, cfg) == doctest::Approx(cap).epsilon(1e-13));
    }
}

TEST_CASE("Euler step against a hand-rolled oracle") {
    const GridSpec g = make_grid(2, 8);
    SpectralEngine eng(g);
    const BundleSpec b = BundleSpec::make(KahlerData::identity(2), diag2(3.0, 3.0));
    const RealField phi0 = eng.random_band_limited(11, 3, 0.05);
    const FlowState s = make_flow_state(eng, b, phi0);
    const double dt = 1.7e-4;
    const FlowState s1 = flow_step(eng, b, s, dt, Integrator::Euler);

    // oracle: recompute theta and the target phase through the slow API
    const HermitianField F = curvature(eng, b, phi0);
    const EigenField lam = endo_eigenvalues(b.metric, F);
    const RealField th = theta_field(lam);
    const cplx Z = integrate(zeta_field(lam));
    const double that = lift_target_phase(Z, integrate(th), 2);
    double worst = 0.0;
    for (std::int64_t i = 0; i < g.npts; ++i)
        worst = std::max(worst, std::abs(s1.phi[i] - (phi0[i] + dt * (th[i] - that))));
    CHECK(worst < 1e-14);
}

TEST_CASE("RK4 reproduces the linear heat decay to 1e-6 over 100 steps") {
    const GridSpec g = make_grid(1, 16);
    SpectralEngine eng(g);
    const BundleSpec b = BundleSpec::make(KahlerData::identity(1), Mat(1));
    const double amp = 1e-6;
    const RealField phi0 = fill(g, [&](const auto& c) { return amp * std::cos(2.0 * M_PI * c[0]); });
    FlowState s = make_flow_state(eng, b, phi0);
    FlowConfig cfg;
    cfg.dt_safety = 0.8;
    const double dt = cfl_dt(s, cfg);
    for (int k = 0; k < 100; ++k) s = flow_step(eng, b, s, dt, Integrator::RK4);
    const double t = 100.0 * dt;
    const double decay = std::exp(-M_PI * M_PI * t); // quarter Laplacian on the unit mode
    const RealField want = fill(g, [&](const auto& c) { return amp * decay * std::cos(2.0 * M_PI * c[0]); });
    CHECK(sup_diff(s.phi, want) / (amp * decay) < 1e-6);
}

TEST_CASE("run_flow converges on small grids") {
    SUBCASE("n=2 hypercritical bundle relaxes to a constant potential") {
        const GridSpec g = make_grid(2, 8);
        SpectralEngine eng(g);
        const BundleSpec b = BundleSpec::make(KahlerData::identity(2), diag2(3.0, 3.0));
        FlowConfig cfg = quick_config();
        cfg.require_hypercritical = true;
        const FlowResult r = run_flow(eng, b, eng.random_band_limited(7, 3, 0.05), cfg);
        CHECK(r.status == FlowStatus::Converged);
        CHECK(r.state.sup_theta_dev() < cfg.tol_theta);
        const double mean = integrate(r.state.phi);
        double sup = 0.0;
        for (std::int64_t i = 0; i < g.npts; ++i) sup = std::max(sup, std::abs(r.state.phi[i] - mean));
        CHECK(sup < 1e-6);
        CHECK(r.max_theta_hat_drift < 1e-9);
        // per-step monitors were recorded and monotone
        REQUIRE(r.per_step.size() > 2);
        for (std::size_t i = 1; i < r.per_step.size(); ++i) {
            CHECK(r.per_step[i].V <= r.per_step[i - 1].V + 1e-10);
            CHECK(r.per_step[i].theta_min >= r.per_step[i - 1].theta_min - 1e-10);
            CHECK(r.per_step[i].theta_max <= r.per_step[i - 1].theta_max + 1e-10);
            CHECK(r.per_step[i].v_max <= r.per_step[i - 1].v_max + 1e-10);
            CHECK(r.per_step[i].lam_min > 0.0);
        }
    }
    SUBCASE("n=1 flow lands on the constant curvature representative") {
        const GridSpec g = make_grid(1, 16);
        SpectralEngine eng(g);
        Mat B(1);
        B.at(0, 0) = 2.0;
        const BundleSpec b = BundleSpec::make(KahlerData::identity(1), B);
        FlowConfig cfg = quick_config();
        cfg.tol_theta = 1e-10;
        const FlowResult r = run_flow(eng, b, eng.random_band_limited(5, 4, 0.1), cfg);
        CHECK(r.status == FlowStatus::Converged);
        const HermitianField F = curvature(eng, b, r.state.phi);
        double worst = 0.0;
        for (std::int64_t i = 0; i < g.npts; ++i) worst = std::max(worst, std::abs(F.diag[0][i] - 2.0));
        CHECK(worst < 1e-7);
        // the potential is reconstructed by the Poisson oracle
        RealField rho(g);
        for (std::int64_t i = 0; i < g.npts; ++i) rho[i] = F.diag[0][i] - 2.0;
        const double m = integrate(rho);
        for (auto& x : rho.v) x -= m;
        const RealField u = eng.poisson_solve(rho, Mat::identity(1));
        const double mean_phi = integrate(r.state.phi);
        double dev = 0.0;
        for (std::int64_t i = 0; i < g.npts; ++i)
            dev = std::max(dev, std::abs((r.state.phi[i] - mean_phi) - u[i]));
        CHECK(dev < 1e-7);
    }
}

TEST_CASE("hypercritical precondition is enforced with the offending extremum") {
    const GridSpec g = make_grid(2, 8);
    SpectralEngine eng(g);
    const BundleSpec b = BundleSpec::make(KahlerData::identity(2), diag2(0.1, 0.1));
    FlowConfig cfg = quick_config();
    cfg.require_hypercritical = true;
    CHECK_THROWS_WITH_AS(run_flow(eng, b, RealField(g), cfg), doctest::Contains("hypercritical"), Error);
}

TEST_CASE("an artificially low blow-up threshold halts the flow with a checkpoint") {
    const GridSpec g = make_grid(2, 8);
    SpectralEngine eng(g);
    const BundleSpec b = BundleSpec::make(KahlerData::identity(2), diag2(3.0, 3.0));
    FlowConfig cfg = quick_config();
    cfg.grad_blowup_factor = 0.5; // below the starting value by construction
    const std::string ckpt = (std::filesystem::temp_directory_path() / "dhym_monitor_test.ckpt").string();
    std::filesystem::remove(ckpt);
    cfg.checkpoint_path = ckpt;
    const FlowResult r = run_flow(eng, b, eng.random_band_limited(7, 3, 0.05), cfg);
    CHECK(r.status == FlowStatus::MonitorViolation);
    CHECK(r.message.find("grad F") != std::string::npos);
    CHECK(std::filesystem::exists(ckpt));
    const CheckpointData d = checkpoint_read(ckpt);
    CHECK(d.n == 2);
    CHECK(d.N == 8);
    std::filesystem::remove(ckpt);
}

TEST_CASE("uniqueness experiment") {
    const GridSpec g = make_grid(2, 8);
    SpectralEngine eng(g);
    const BundleSpec b = BundleSpec::make(KahlerData::identity(2), diag2(3.0, 3.0));
    FlowConfig cfg = quick_config();
    cfg.record_per_step = false;
    SUBCASE("constant shifts are exactly equivariant") {
        const RealField a = eng.random_band_limited(19, 3, 0.05);
        RealField shifted = a;
        for (auto& x : shifted.v) x += 5.0;
        const UniquenessResult u = uniqueness_experiment(eng, b, a, shifted, cfg);
        CHECK(u.deviation < 1e-12);
    }
    SUBCASE("independent seeds and the sign-flipped start agree after mean removal") {
        const RealField a = eng.random_band_limited(19, 3, 0.05);
        const RealField c = eng.random_band_limited(20, 3, 0.05);
        const UniquenessResult u = uniqueness_experiment(eng, b, a, c, cfg);
        CHECK(u.deviation < 1e-6);
        RealField neg = a;
        for (auto& x : neg.v) x = -x;
        const UniquenessResult u2 = uniqueness_experiment(eng, b, a, neg, cfg);
        CHECK(u2.deviation < 1e-6);
    }
}

TEST_CASE("checkpoints round-trip and resume deterministically") {
    const GridSpec g = make_grid(2, 8);
    SpectralEngine eng(g);
    const BundleSpec b = BundleSpec::make(KahlerData::identity(2), diag2(3.0, 3.0));
    const auto tmp = std::filesystem::temp_directory_path();

    SUBCASE("write then read is bitwise") {
        CheckpointData d;
        d.n = 2;
        d.N = 8;
        d.t = 0.123456789123456789;
        d.step = 77;
        d.dt = 3.958e-5;
        d.config_hash = 0xdeadbeefcafef00dull;
        d.phi = eng.random_band_limited(3, 3, 0.05);
        const std::string path = (tmp / "dhym_rt.ckpt").string();
        checkpoint_write(d, path);
        const CheckpointData e = checkpoint_read(path);
        CHECK(e.t == d.t);
        CHECK(e.dt == d.dt);
        CHECK(e.step == d.step);
        CHECK(e.config_hash == d.config_hash);
        CHECK(sup_diff(e.phi, d.phi) == 0.0);
        std::filesystem::remove(path);
    }
    SUBCASE("a truncated file is rejected without constructing state") {
        CheckpointData d;
        d.n = 2;
        d.N = 8;
        d.phi = RealField(g);
        const std::string path = (tmp / "dhym_trunc.ckpt").string();
        checkpoint_write(d, path);
        std::filesystem::resize_file(path, std::filesystem::file_size(path) - 16);
        CHECK_THROWS_WITH_AS(checkpoint_read(path), doctest::Contains("truncated"), Error);
        std::filesystem::remove(path);
    }
    SUBCASE("a foreign magic line is a version mismatch") {
        const std::string path = (tmp / "dhym_magic.ckpt").string();
        std::FILE* f = std::fopen(path.c_str(), "wb");
        std::fputs("DHYM-CKPT v9\nn=2\n", f);
        std::fclose(f);
        CHECK_THROWS_WITH_AS(checkpoint_read(path), doctest::Contains("version mismatch"), Error);
        std::filesystem::remove(path);
    }
    SUBCASE("resume replays the uninterrupted run bit for bit") {
        FlowConfig cfg = quick_config();
        cfg.max_steps = 60;
        cfg.monitor_cadence = 5;
        const RealField phi0 = eng.random_band_limited(7, 3, 0.05);

        // uninterrupted: 120 steps
        FlowConfig cfg_full = cfg;
        cfg_full.max_steps = 120;
        const FlowResult full = run_flow(eng, b, phi0, cfg_full);

        // interrupted at 60 with a checkpoint, then resumed for 60 more
        const std::string path = (tmp / "dhym_resume.ckpt").string();
        FlowConfig cfg_a = cfg;
        cfg_a.checkpoint_path = path;
        const FlowResult part = run_flow(eng, b, phi0, cfg_a);
        CHECK(part.status == FlowStatus::MaxSteps);
        const FlowResult rest = resume_flow(eng, b, checkpoint_read(path), cfg);
        CHECK(rest.state.step == full.state.step);
        CHECK(rest.state.t == full.state.t);
        CHECK(sup_diff(rest.state.phi, full.state.phi) == 0.0);
        // diagnostics after the resume point coincide exactly
        REQUIRE(full.per_step.size() == 121);
        REQUIRE(rest.per_step.size() == 61);
        for (std::size_t i = 0; i < rest.per_step.size(); ++i) {
            CHECK(rest.per_step[i].V == full.per_step[60 + i].V);
            CHECK(rest.per_step[i].theta_min == full.per_step[60 + i].theta_min);
        }
        std::filesystem::remove(path);
    }
    SUBCASE("dimension mismatch on resume") {
        CheckpointData d;
        d.n = 1;
        d.N = 8;
        d.phi = RealField(make_grid(1, 8));
        FlowConfig cfg = quick_config();
        CHECK_THROWS_WITH_AS(resume_flow(eng, b, d, cfg), doctest::Contains("dimensions"), Error);
    }
}

TEST_CASE("gradient-flow identity along a short run") {
    const GridSpec g = make_grid(2, 8);
    SpectralEngine eng(g);
    const BundleSpec b = BundleSpec::make(KahlerData::identity(2), diag2(3.0, 3.0));
    FlowConfig cfg = quick_config();
    cfg.max_steps = 400;
    cfg.monitor_cadence = 50;
    const FlowResult r = run_flow(eng, b, eng.random_band_limited(7, 3, 0.05), cfg);
    REQUIRE(r.per_step.size() > 101);
    // centered difference of V across one step vs -int |H|^2 v at cadence rows
    int checked = 0;
    for (const DiagnosticsRecord& d : r.diagnostics) {
        // find the matching per-step index by time
        for (std::size_t i = 1; i + 1 < r.per_step.size(); ++i) {
            if (std::abs(r.per_step[i].t - d.t) < 1e-15 && r.per_step[i].sup_theta_dev > 1e-6) {
                const double dt_a = r.per_step[i].t - r.per_step[i - 1].t;
                const double dt_b = r.per_step[i + 1].t - r.per_step[i].t;
                if (std::abs(dt_a - dt_b) > 1e-15) break; // uneven steps, skip
                const double slope = (r.per_step[i + 1].V - r.per_step[i - 1].V) / (dt_a + dt_b);
                const double target = -d.h_sq_v_integral;
                CHECK(std::abs(slope - target) <= std::max(5.0 * dt_a, 1e-8) * std::abs(target) + 1e-12);
                ++checked;
                break;
            }
        }
    }
    CHECK(checked >= 3);
}
