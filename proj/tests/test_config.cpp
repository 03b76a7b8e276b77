#include <doctest.h>

#include "test_util.hpp"

#include "dhym/config.hpp"

using namespace dhym;

namespace {
const char* kMinimal = R"(
[problem]
n = 2
N = 32
B = diag 3 3
phi0 = band_limited seed=7 bandwidth=4 amplitude=0.05
)";
}

TEST_CASE("a minimal config parses with defaults") {
    const RunConfig c = parse_config(kMinimal);
    CHECK(c.problem.n == 2);
    CHECK(c.problem.N == 32);
    CHECK(c.problem.B.at(0, 0) == cplx(3.0, 0.0));
    CHECK(c.problem.g.at(0, 0) == cplx(1.0, 0.0)); // default identity
    CHECK(c.problem.phi0.kind == FieldInit::Kind::BandLimited);
    CHECK(c.problem.phi0.seed == 7);
    CHECK(c.flow.integrator == Integrator::RK4);
    CHECK(c.flow.dt_safety == 0.8);
    CHECK(c.hash != 0);
    CHECK(c.hash == parse_config(kMinimal).hash); // deterministic
}

TEST_CASE("non-Hermitian entries are named") {
    const char* cfg = R"(
[problem]
n = 2
N = 16
B = full 1 0  2 0.5  2 0.4  1 0
)";
    CHECK_THROWS_WITH_AS(parse_config(cfg), doctest::Contains("(0,1)"), Error);
}

TEST_CASE("odd N is rejected with the contract message") {
    const char* cfg = R"(
[problem]
n = 2
N = 7
B = diag 1 1
)";
    CHECK_THROWS_WITH_AS(parse_config(cfg), doctest::Contains("N must be even"), Error);
}

TEST_CASE("all violations are reported together with line numbers") {
    const char* cfg = R"([problem]
n = 2
N = 16
B = diag 1 1
bogus_key = 1

[flow]
integrator = leapfrog
dt_safety = 1.5
)";
    try {
        parse_config(cfg);
        FAIL("expected a parse failure");
    } catch (const Error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("3 problem(s)") != std::string::npos);
        CHECK(msg.find("line 5") != std::string::npos); // bogus_key
        CHECK(msg.find("line 8") != std::string::npos); // integrator
        CHECK(msg.find("line 9") != std::string::npos); // dt_safety
    }
}

TEST_CASE("unknown sections and modes are rejected") {
    CHECK_THROWS_WITH_AS(parse_config("[nope]\nx = 1\n"), doctest::Contains("unknown section"), Error);
    const char* cfg = R"(
[problem]
n = 1
N = 8
[output]
mode = dance
)";
    CHECK_THROWS_WITH_AS(parse_config(cfg), doctest::Contains("unknown mode"), Error);
}

TEST_CASE("band-limited parameters are validated against the grid") {
    const char* cfg = R"(
[problem]
n = 1
N = 8
phi0 = band_limited seed=1 bandwidth=4 amplitude=0.1
)";
    CHECK_THROWS_WITH_AS(parse_config(cfg), doctest::Contains("bandwidth"), Error);
}

TEST_CASE("referenced files must exist") {
    const char* cfg = R"(
[problem]
n = 1
N = 8
phi0 = file /nonexistent/there.ckpt
)";
    CHECK_THROWS_WITH_AS(parse_config(cfg), doctest::Contains("does not exist"), Error);
}

TEST_CASE("metric must be positive definite") {
    const char* cfg = R"(
[problem]
n = 2
N = 16
g = diag 1 -1
B = diag 1 1
)";
    CHECK_THROWS_WITH_AS(parse_config(cfg), doctest::Contains("positive definite"), Error);
}

TEST_CASE("build_field realizes the three recipes") {
    const RunConfig c = parse_config(kMinimal);
    const GridSpec g = make_grid(c.problem.n, c.problem.N);
    SpectralEngine eng(g);
    const RealField f = build_field(eng, c.problem.phi0);
    CHECK(std::abs(max_abs(f) - 0.05) < 1e-12);
    FieldInit zero;
    CHECK(max_abs(build_field(eng, zero)) == 0.0);
}
