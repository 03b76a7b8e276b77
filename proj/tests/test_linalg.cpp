#include <doctest.h>

#include "test_util.hpp"

#include "dhym/linalg.hpp"

using namespace dhym;
using dhym::test::jacobi_eigenvalues_oracle;
using dhym::test::random_hermitian;

TEST_CASE("closed-form eigenvalues match the Jacobi oracle") {
    PinnedRng rng(17);
    double worst = 0.0;
    for (int s = 0; s < 2000; ++s) {
        const int n = 1 + s % 3;
        const Mat m = random_hermitian(rng, n, 50.0);
        const auto got = herm_eigenvalues(m);
        const auto ref = jacobi_eigenvalues_oracle(m);
        for (int j = 0; j < n; ++j)
            worst = std::max(worst, std::abs(got[static_cast<std::size_t>(j)] - ref[static_cast<std::size_t>(j)]));
    }
    CHECK(worst < 1e-11);
}

TEST_CASE("degenerate spectra are handled") {
    Mat m = Mat::identity(3);
    auto ev = herm_eigenvalues(m);
    CHECK(ev[0] == doctest::Approx(1.0));
    CHECK(ev[2] == doctest::Approx(1.0));

    // double eigenvalue with one separated
    Mat d(3);
    d.at(0, 0) = 2.0;
    d.at(1, 1) = 2.0;
    d.at(2, 2) = -1.0;
    d.at(0, 1) = cplx(0.0, 1e-8);
    d.at(1, 0) = cplx(0.0, -1e-8);
    ev = herm_eigenvalues(d);
    const auto ref = jacobi_eigenvalues_oracle(d);
    for (int j = 0; j < 3; ++j)
        CHECK(std::abs(ev[static_cast<std::size_t>(j)] - ref[static_cast<std::size_t>(j)]) < 1e-11);
}

TEST_CASE("inverse and determinant are consistent") {
    PinnedRng rng(23);
    for (int s = 0; s < 200; ++s) {
        const int n = 1 + s % 3;
        Mat m = random_hermitian(rng, n, 2.0);
        for (int i = 0; i < n; ++i) m.at(i, i) += 5.0; // keep it invertible
        const Mat p = m * inverse(m);
        CHECK(frobenius_norm(p - Mat::identity(n)) < 1e-12);
    }
}

TEST_CASE("herm_power produces the inverse square root") {
    PinnedRng rng(29);
    for (int s = 0; s < 100; ++s) {
        const int n = 1 + s % 3;
        Mat h = random_hermitian(rng, n, 1.0);
        Mat g = Mat::identity(n);
        const double f = frobenius_norm(h);
        if (f > 0)
            g = g + Mat(cplx(0.45 / f) * h); // eigenvalues within [0.55, 1.45]
        const Mat w = herm_power(g, -0.5);
        CHECK(frobenius_norm(Mat(w * g * w) - Mat::identity(n)) < 1e-12);
        CHECK(hermitian_defect(w) < 1e-13);
    }
    CHECK_THROWS_AS(herm_power(Mat(cplx(-1.0) * Mat::identity(2)), -0.5), Error);
}

TEST_CASE("eigensystem reconstructs the matrix") {
    PinnedRng rng(31);
    for (int s = 0; s < 100; ++s) {
        const int n = 1 + s % 3;
        const Mat m = random_hermitian(rng, n, 3.0);
        std::array<double, 3> ev{};
        Mat v(n);
        herm_eigensystem(m, ev, v);
        Mat d(n);
        for (int i = 0; i < n; ++i) d.at(i, i) = ev[static_cast<std::size_t>(i)];
        CHECK(frobenius_norm(Mat(v * d * adjoint(v)) - m) < 1e-12);
        CHECK(ev[0] <= ev[static_cast<std::size_t>(n - 1)]);
    }
}
