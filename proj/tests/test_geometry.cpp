#include <doctest.h>

#include <cmath>

#include "test_util.hpp"

#include "dhym/geometry.hpp"

using namespace dhym;
using namespace dhym::test;

namespace {
constexpr double kTwoPi = 2.0 * M_PI;

Mat diag2(double a, double b) {
    Mat m(2);
    m.at(0, 0) = a;
    m.at(1, 1) = b;
    return m;
}
} // namespace

TEST_CASE("pointwise zeta / theta / v on the worked tuples") {
    SUBCASE("flat point") {
        const double lam[] = {0.0, 0.0};
        CHECK(zeta_pointwise(lam) == cplx(1.0, 0.0));
        CHECK(theta_pointwise(lam) == 0.0);
        CHECK(vmod_pointwise(lam) == 1.0);
    }
    SUBCASE("lambda = (3,3)") {
        const double lam[] = {3.0, 3.0};
        CHECK(std::abs(zeta_pointwise(lam) - cplx(-8.0, 6.0)) < 1e-14);
        CHECK(theta_pointwise(lam) == doctest::Approx(2.4980915447965089).epsilon(1e-14));
        CHECK(vmod_pointwise(lam) == doctest::Approx(10.0).epsilon(1e-14));
        // lifted principal argument agrees
        CHECK(std::abs(std::atan2(6.0, -8.0) - theta_pointwise(lam)) < 1e-13);
    }
    SUBCASE("lambda = (1,1)") {
        const double lam[] = {1.0, 1.0};
        CHECK(std::abs(zeta_pointwise(lam) - cplx(0.0, 2.0)) < 1e-14);
        CHECK(theta_pointwise(lam) == doctest::Approx(M_PI / 2).epsilon(1e-14));
        CHECK(vmod_pointwise(lam) == doctest::Approx(2.0).epsilon(1e-14));
    }
}

TEST_CASE("curvature of the background and of a cosine potential") {
    SUBCASE("zero potential reproduces B") {
        const GridSpec g = make_grid(2, 8);
        SpectralEngine eng(g);
        const BundleSpec bundle = BundleSpec::make(KahlerData::identity(2), diag2(3.0, 3.0));
        const HermitianField F = curvature(eng, bundle, RealField(g));
        CHECK(sup_diff(F.diag[0], fill(g, [](const auto&) { return 3.0; })) < 1e-15);
        CHECK(max_abs(F.upper_re[0]) < 1e-15);
        CHECK(bundle.ample);
    }
    SUBCASE("n=1 cosine") {
        const GridSpec g = make_grid(1, 16);
        SpectralEngine eng(g);
        const BundleSpec bundle = BundleSpec::make(KahlerData::identity(1), Mat(1));
        const RealField phi = fill(g, [](const auto& c) { return std::cos(kTwoPi * c[0]); });
        const HermitianField F = curvature(eng, bundle, phi);
        const RealField want = fill(g, [](const auto& c) { return -M_PI * M_PI * std::cos(kTwoPi * c[0]); });
        CHECK(sup_diff(F.diag[0], want) < 1e-11);
    }
    SUBCASE("entrywise mean of F equals B") {
        const GridSpec g = make_grid(2, 12);
        SpectralEngine eng(g);
        Mat B = diag2(1.0, -2.0);
        B.at(0, 1) = cplx(0.5, 0.25);
        B.at(1, 0) = cplx(0.5, -0.25);
        const BundleSpec bundle = BundleSpec::make(KahlerData::identity(2), B);
        const HermitianField F = curvature(eng, bundle, eng.random_band_limited(3, 4, 0.8));
        CHECK(std::abs(integrate(F.diag[0]) - 1.0) < 1e-12);
        CHECK(std::abs(integrate(F.diag[1]) + 2.0) < 1e-12);
        CHECK(std::abs(integrate(F.upper_re[0]) - 0.5) < 1e-12);
        CHECK(std::abs(integrate(F.upper_im[0]) - 0.25) < 1e-12);
    }
}

TEST_CASE("endo eigenvalues against the Jacobi oracle, general metric") {
    const GridSpec g = make_grid(2, 8);
    SpectralEngine eng(g);
    Mat gm = diag2(2.0, 1.0);
    gm.at(0, 1) = cplx(0.2, -0.3);
    gm.at(1, 0) = cplx(0.2, 0.3);
    const KahlerData metric = KahlerData::make(gm);
    Mat B = diag2(3.0, 1.0);
    const BundleSpec bundle = BundleSpec::make(metric, B);
    const HermitianField F = curvature(eng, bundle, eng.random_band_limited(5, 3, 0.4));
    const EigenField lam = endo_eigenvalues(metric, F);
    PinnedRng rng(7);
    double worst = 0.0;
    for (int s = 0; s < 200; ++s) {
        const std::int64_t i = static_cast<std::int64_t>(rng.next_u64() % static_cast<std::uint64_t>(g.npts));
        Mat f(2);
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) f.at(r, c) = F.entry(r, c, i);
        const auto ref = jacobi_eigenvalues_oracle(Mat(metric.isqrt * f * metric.isqrt));
        for (int j = 0; j < 2; ++j)
            worst = std::max(worst, std::abs(lam.lam[static_cast<std::size_t>(j)][i] - ref[static_cast<std::size_t>(j)]));
    }
    CHECK(worst < 1e-11);

    SUBCASE("constant diagonal field") {
        const BundleSpec b2 = BundleSpec::make(KahlerData::identity(2), diag2(3.0, 3.0));
        const EigenField l2 = endo_eigenvalues(KahlerData::identity(2), curvature(eng, b2, RealField(g)));
        CHECK(std::abs(l2.lam[0][17] - 3.0) < 1e-14);
        CHECK(std::abs(l2.lam[1][17] - 3.0) < 1e-14);
    }
}

TEST_CASE("eta and its inverse") {
    SUBCASE("F = 0 gives eta = g") {
        const GridSpec g = make_grid(2, 8);
        SpectralEngine eng(g);
        Mat gm = diag2(2.0, 1.0);
        const KahlerData metric = KahlerData::make(gm);
        const HermitianField F(g, 2); // zero
        const HermitianField e = eta(metric, F);
        CHECK(std::abs(e.diag[0][3] - 2.0) < 1e-15);
        CHECK(std::abs(e.diag[1][3] - 1.0) < 1e-15);
    }
    SUBCASE("scalar example: g=1, F=2 gives eta=5") {
        const GridSpec g = make_grid(1, 8);
        HermitianField F(g, 1);
        for (auto& x : F.diag[0].v) x = 2.0;
        const KahlerData metric = KahlerData::identity(1);
        const HermitianField e = eta(metric, F);
        CHECK(e.diag[0][0] == doctest::Approx(5.0).epsilon(1e-15));
        const HermitianField ei = eta_inverse(e);
        CHECK(ei.diag[0][0] == doctest::Approx(0.2).epsilon(1e-15));
    }
    SUBCASE("pencil eigenvalues of eta are 1 + lambda^2") {
        const GridSpec g = make_grid(2, 8);
        SpectralEngine eng(g);
        Mat gm = diag2(1.5, 1.0);
        gm.at(0, 1) = cplx(0.1, 0.2);
        gm.at(1, 0) = cplx(0.1, -0.2);
        const KahlerData metric = KahlerData::make(gm);
        const BundleSpec bundle = BundleSpec::make(metric, diag2(2.0, 1.0));
        const HermitianField F = curvature(eng, bundle, eng.random_band_limited(9, 3, 0.3));
        const HermitianField e = eta(metric, F);
        const EigenField lam = endo_eigenvalues(metric, F);
        double worst = 0.0, psd = 1e300;
        for (std::int64_t i = 0; i < g.npts; i += 7) {
            Mat em(2);
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c) em.at(r, c) = e.entry(r, c, i);
            const auto ev = jacobi_eigenvalues_oracle(Mat(metric.isqrt * em * metric.isqrt));
            const double l0 = lam.lam[0][i], l1 = lam.lam[1][i];
            const double w0 = 1.0 + std::min(l0 * l0, l1 * l1);
            const double w1 = 1.0 + std::max(l0 * l0, l1 * l1);
            worst = std::max(worst, std::abs(ev[0] - w0));
            worst = std::max(worst, std::abs(ev[1] - w1));
            psd = std::min(psd, ev[0] - 1.0); // eta - g is PSD
        }
        CHECK(worst < 1e-11);
        CHECK(psd > -1e-12);
    }
}

TEST_CASE("kappa calibration density") {
    const GridSpec g = make_grid(2, 8);
    SUBCASE("theta == theta_hat gives kappa == 1") {
        ComplexField zeta(g);
        const cplx z = cplx(-8.0, 6.0);
        for (auto& x : zeta.v) x = z;
        const RealField k = kappa(zeta, std::atan2(6.0, -8.0));
        CHECK(std::abs(k[5] - 1.0) < 1e-15);
    }
    SUBCASE("a quarter turn away gives kappa == 0") {
        ComplexField zeta(g);
        for (auto& x : zeta.v) x = cplx(0.0, 2.0); // theta = pi/2 = theta_hat + pi/2
        const RealField k = kappa(zeta, 0.0);
        CHECK(std::abs(k[0]) < 1e-15);
    }
    SUBCASE("kappa never exceeds one") {
        SpectralEngine eng(g);
        const BundleSpec bundle = BundleSpec::make(KahlerData::identity(2), diag2(3.0, 3.0));
        const HermitianField F = curvature(eng, bundle, eng.random_band_limited(13, 3, 0.05));
        const EigenField lam = endo_eigenvalues(bundle.metric, F);
        const ComplexField z = zeta_field(lam);
        const RealField k = kappa(z, 2.0);
        CHECK(max_abs(k) <= 1.0 + 1e-13);
    }
}

TEST_CASE("stability form coefficient and field") {
    const GridSpec g = make_grid(2, 8);
    SpectralEngine eng(g);
    SUBCASE("theta_hat = pi/2 leaves F unchanged") {
        const BundleSpec bundle = BundleSpec::make(KahlerData::identity(2), diag2(1.0, 1.0));
        const HermitianField F = curvature(eng, bundle, RealField(g));
        const HermitianField om = omega_stability_form(bundle.metric, F, M_PI / 2, 2);
        CHECK(std::abs(om.diag[0][0] - 1.0) < 1e-15);
        CHECK(std::abs(om.diag[1][0] - 1.0) < 1e-15);
    }
    SUBCASE("B = diag(2,1): omega = diag(5/3, 2/3), positive definite") {
        const double theta_hat = std::atan2(3.0, -1.0); // arg of (1+2i)(1+i)
        CHECK(theta_hat == doctest::Approx(1.8925468811915387).epsilon(1e-12));
        CHECK(omega_coefficient(theta_hat, 2) == doctest::Approx(-1.0 / 3.0).epsilon(1e-13));
        const BundleSpec bundle = BundleSpec::make(KahlerData::identity(2), diag2(2.0, 1.0));
        const HermitianField F = curvature(eng, bundle, RealField(g));
        const HermitianField om = omega_stability_form(bundle.metric, F, theta_hat, 2);
        CHECK(om.diag[0][0] == doctest::Approx(5.0 / 3.0).epsilon(1e-13));
        CHECK(om.diag[1][0] == doctest::Approx(2.0 / 3.0).epsilon(1e-13));
    }
    SUBCASE("higher-dimensional branch requires the supercritical range") {
        CHECK_THROWS_WITH_AS(omega_coefficient(1.2, 3), doctest::Contains("supercritical"), Error);
        CHECK(omega_coefficient(M_PI - 0.2, 3) == doctest::Approx(std::tan(0.2)).epsilon(1e-10));
    }
    SUBCASE("cotangent pole routes to the degree-zero path") {
        CHECK_THROWS_WITH_AS(omega_coefficient(0.0, 2), doctest::Contains("degree-zero"), Error);
    }
}

TEST_CASE("identity oracle: (I + iK)^{-1} decomposition") {
    CHECK(oracle_ident(Mat(2)) == 0.0);
    Mat k1(1);
    k1.at(0, 0) = 2.0;
    CHECK(oracle_ident(k1) < 1e-15);
    PinnedRng rng(41);
    double worst = 0.0;
    for (int s = 0; s < 1000; ++s) {
        const int n = 1 + s % 3;
        worst = std::max(worst, oracle_ident(random_hermitian(rng, n, 5.0)));
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("inverse-metric identity oracle") {
    SUBCASE("F = 0") {
        CHECK(oracle_ginverse(Mat::identity(2), Mat(2)) < 1e-15);
    }
    SUBCASE("scalar: 1 = 1/5 + 4/5") {
        Mat g1 = Mat::identity(1);
        Mat f1(1);
        f1.at(0, 0) = 2.0;
        CHECK(oracle_ginverse(g1, f1) < 1e-15);
    }
    SUBCASE("random fields") {
        const GridSpec g = make_grid(2, 8);
        SpectralEngine eng(g);
        Mat gm = diag2(1.3, 0.9);
        gm.at(0, 1) = cplx(0.1, 0.05);
        gm.at(1, 0) = cplx(0.1, -0.05);
        const KahlerData metric = KahlerData::make(gm);
        const BundleSpec bundle = BundleSpec::make(metric, diag2(2.0, 1.0));
        const HermitianField F = curvature(eng, bundle, eng.random_band_limited(17, 3, 0.5));
        CHECK(oracle_ginverse_field(metric, F) < 1e-11);
    }
}

TEST_CASE("log-determinant argument versus the arctangent sum") {
    CHECK(oracle_theta_log_vs_arctan(Mat(2)) == 0.0);
    {
        Mat k = diag2(3.0, 3.0); // lands in the second quadrant, needs the lift
        CHECK(oracle_theta_log_vs_arctan(k) < 1e-13);
    }
    PinnedRng rng(43);
    double worst = 0.0;
    for (int s = 0; s < 1000; ++s) {
        const int n = 1 + s % 3;
        worst = std::max(worst, oracle_theta_log_vs_arctan(random_hermitian(rng, n, 30.0)));
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("variation of theta: finite differences hit the trace formula") {
    SUBCASE("dK = 0") {
        const double eps[] = {1e-3, 1e-4};
        const DeltaThetaReport r = oracle_delta_theta(Mat::identity(2), Mat(2), eps);
        CHECK(r.fd_error[0] == 0.0);
        CHECK(r.fd_error[1] == 0.0);
    }
    SUBCASE("n=1 at the origin: d theta = dK") {
        Mat K(1), dK = Mat::identity(1);
        const double eps[] = {1e-3, 1e-4};
        const DeltaThetaReport r = oracle_delta_theta(K, dK, eps);
        CHECK(r.fd_error[1] < 1e-8); // arctan'(0) = 1
    }
    SUBCASE("random pairs: order >= 1.9 and error < 1e-6 at eps = 1e-4") {
        PinnedRng rng(47);
        const double eps[] = {1e-3, 1e-4, 1e-5};
        double worst_err = 0.0, worst_order = 99.0;
        for (int s = 0; s < 100; ++s) {
            const int n = 1 + s % 3;
            const DeltaThetaReport r =
                oracle_delta_theta(random_hermitian(rng, n, 2.0), random_hermitian(rng, n, 1.0), eps);
            worst_err = std::max(worst_err, r.fd_error[1]);
            worst_order = std::min(worst_order, r.observed_order);
        }
        CHECK(worst_err < 1e-6);
        CHECK(worst_order >= 1.9);
    }
}

TEST_CASE("phase scan: one fused pass equals the naive route") {
    const GridSpec g = make_grid(2, 8);
    SpectralEngine eng(g);
    Mat B = diag2(3.0, 2.0);
    B.at(0, 1) = cplx(0.25, -0.125);
    B.at(1, 0) = cplx(0.25, 0.125);
    const BundleSpec bundle = BundleSpec::make(KahlerData::identity(2), B);
    const RealField phi = eng.random_band_limited(19, 3, 0.05);
    const HermitianField hess = eng.ddbar(phi);
    RealField theta(g);
    const PhaseScanStats st = phase_scan(bundle, hess, 1.0, theta);

    // naive recomputation through the pointwise API
    const HermitianField F = curvature(eng, bundle, phi);
    const EigenField lam = endo_eigenvalues(bundle.metric, F);
    const RealField theta_ref = theta_field(lam);
    const RealField v_ref = vmod_field(lam);
    const ComplexField z_ref = zeta_field(lam);
    CHECK(sup_diff(theta, theta_ref) < 1e-12);
    CHECK(std::abs(st.volume() - integrate(v_ref)) < 1e-12);
    CHECK(std::abs(st.z_invariant() - integrate(z_ref)) < 1e-12);
    double tmin = 1e300, tmax = -1e300, vmax = -1e300, lmin = 1e300, lmax = -1e300, kmax = -1e300;
    double mlsq = 1e300;
    for (std::int64_t i = 0; i < g.npts; ++i) {
        tmin = std::min(tmin, theta_ref[i]);
        tmax = std::max(tmax, theta_ref[i]);
        vmax = std::max(vmax, v_ref[i]);
        lmin = std::min(lmin, lam.lam[0][i]);
        lmax = std::max(lmax, lam.lam[1][i]);
        mlsq = std::min(mlsq, std::min(lam.lam[0][i] * lam.lam[0][i], lam.lam[1][i] * lam.lam[1][i]));
        kmax = std::max(kmax, std::cos(theta_ref[i] - 1.0));
    }
    CHECK(std::abs(st.theta_min - tmin) < 1e-12);
    CHECK(std::abs(st.theta_max - tmax) < 1e-12);
    CHECK(std::abs(st.v_max - vmax) < 1e-12);
    CHECK(std::abs(st.lam_min - lmin) < 1e-12);
    CHECK(std::abs(st.lam_max - lmax) < 1e-12);
    CHECK(std::abs(st.min_lam_sq - mlsq) < 1e-12);
    CHECK(std::abs(st.kappa_max - kmax) < 1e-12);

    SUBCASE("the full variant also writes sorted eigenvalue planes") {
        EigenField lam2(g, 2);
        RealField theta2(g);
        (void)phase_scan_full(bundle, hess, 1.0, theta2, lam2);
        CHECK(sup_diff(lam2.lam[0], lam.lam[0]) < 1e-12);
        CHECK(sup_diff(lam2.lam[1], lam.lam[1]) < 1e-12);
    }
}

TEST_CASE("pointwise inequalities on random data") {
    const GridSpec g = make_grid(2, 8);
    SpectralEngine eng(g);
    const KahlerData metric = KahlerData::identity(2);
    const BundleSpec bundle = BundleSpec::make(metric, diag2(1.0, -1.0));
    const HermitianField F = curvature(eng, bundle, eng.random_band_limited(23, 3, 0.8));
    const EigenField lam = endo_eigenvalues(metric, F);
    const RealField v = vmod_field(lam);
    const RealField th = theta_field(lam);
    double worst = 0.0;
    for (std::int64_t i = 0; i < g.npts; ++i) {
        CHECK(v[i] >= 1.0 - 1e-14);                    // v >= 1
        CHECK(std::abs(th[i]) < 2.0 * M_PI / 2.0);     // |theta| < n pi/2
        Mat f(2);
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) f.at(r, c) = F.entry(r, c, i);
        const double fn = std::sqrt(matrix_norm_sq_g(metric, f));
        worst = std::max(worst, fn - v[i]); // v >= |F|_g
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("zeta from eigenvalues equals the direct determinant") {
    const GridSpec g = make_grid(2, 8);
    SpectralEngine eng(g);
    Mat gm = diag2(1.5, 0.8);
    const KahlerData metric = KahlerData::make(gm);
    const BundleSpec bundle = BundleSpec::make(metric, diag2(2.0, -1.0));
    const HermitianField F = curvature(eng, bundle, eng.random_band_limited(29, 3, 0.6));
    const ComplexField z = zeta_field(endo_eigenvalues(metric, F));
    double worst = 0.0;
    for (std::int64_t i = 0; i < g.npts; i += 3) {
        Mat f(2);
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) f.at(r, c) = F.entry(r, c, i);
        const cplx zd = det(Mat(Mat::identity(2) + cplx(0, 1) * (metric.ginv * f)));
        worst = std::max(worst, std::abs(z[i] - zd));
    }
    CHECK(worst < 1e-12);
}
