#include <doctest.h>

#include "test_util.hpp"

#include "dhym/core.hpp"

using namespace dhym;

TEST_CASE("make_grid accepts and rejects per the contract") {
    const GridSpec g1 = make_grid(1, 8);
    CHECK(g1.npts == 64);
    CHECK(g1.dx() == doctest::Approx(0.125));
    const GridSpec g2 = make_grid(2, 32);
    CHECK(g2.npts == 1048576);
    CHECK_THROWS_AS(make_grid(2, 7), Error);   // odd N
    CHECK_THROWS_AS(make_grid(0, 16), Error);  // n out of range
    CHECK_THROWS_AS(make_grid(4, 16), Error);
    CHECK_THROWS_AS(make_grid(2, 6), Error);   // N too small
    CHECK_THROWS_AS(make_grid(3, 64, 30000000), Error); // above the point budget
}

TEST_CASE("pairwise sums match a long-double reference") {
    PinnedRng rng(3);
    const std::int64_t len = 100000;
    dvec v(static_cast<std::size_t>(len));
    long double ref = 0.0L;
    for (auto& x : v) {
        x = rng.sym(1.0);
        ref += static_cast<long double>(x);
    }
    const double got = sum_array(v.data(), len);
    CHECK(std::abs(got - static_cast<double>(ref)) < 1e-12);
}

TEST_CASE("reductions do not depend on the worker-thread count") {
    PinnedRng rng(11);
    const GridSpec g = make_grid(2, 8);
    RealField f(g);
    for (auto& x : f.v) x = rng.sym(2.0);
    set_worker_threads(1);
    const double s1 = integrate(f);
    const double m1 = max_abs(f);
    set_worker_threads(2);
    const double s2 = integrate(f);
    const double m2 = max_abs(f);
    set_worker_threads(0);
    CHECK(s1 == s2); // bitwise
    CHECK(m1 == m2);
}

TEST_CASE("integrate is the exact grid mean") {
    const GridSpec g = make_grid(1, 16);
    RealField ones(g);
    for (auto& x : ones.v) x = 1.0;
    CHECK(integrate(ones) == 1.0); // exact
}

TEST_CASE("hermitian field accessor mirrors the upper triangle") {
    const GridSpec g = make_grid(2, 8);
    HermitianField h(g, 2);
    h.diag[0][5] = 2.0;
    h.upper_re[0][5] = 1.5;
    h.upper_im[0][5] = -0.25;
    CHECK(h.entry(0, 1, 5) == cplx(1.5, -0.25));
    CHECK(h.entry(1, 0, 5) == cplx(1.5, 0.25));
    CHECK(h.entry(0, 0, 5) == cplx(2.0, 0.0));
}
