#include "dhym/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dhym/geometry.hpp"
#include "dhym/invariants.hpp"

namespace dhym {

namespace {

Mat random_hermitian(PinnedRng& rng, int n, double scale) {
    Mat m(n);
    for (int i = 0; i < n; ++i) m.at(i, i) = rng.sym(scale);
    for (int r = 0; r < n; ++r)
        for (int c = r + 1; c < n; ++c) {
            const cplx v(rng.sym(scale), rng.sym(scale));
            m.at(r, c) = v;
            m.at(c, r) = std::conj(v);
        }
    return m;
}

Mat random_metric(PinnedRng& rng, int n) {
    // eigenvalues pinned to [1/2, 3/2]: well conditioned, nontrivial frame
    Mat h = random_hermitian(rng, n, 1.0);
    const double f = frobenius_norm(h);
    if (f > 0) h = cplx(0.5 / f) * h;
    return Mat::identity(n) + h;
}

double ident_residual(const Mat& K, bool fault) {
    const Mat I = Mat::identity(K.n);
    const Mat A = inverse(I + cplx(0, 1) * K);
    const Mat P = inverse(I + K * K);
    const cplx s = fault ? cplx(0, 1) : cplx(0, -1);
    const Mat R = P + s * (K * P);
    return frobenius_norm(A - R);
}

double ginverse_residual(const Mat& g, const Mat& F, bool fault) {
    const Mat gi = inverse(g);
    const Mat e = g + F * gi * F;
    const Mat ei = inverse(e);
    const cplx s = fault ? cplx(-1.0) : cplx(1.0);
    const Mat rhs = ei + s * (ei * F * gi * F * gi);
    return frobenius_norm(gi - rhs);
}

} // namespace

std::string VerifyReport::text() const {
    std::string s;
    char buf[256];
    for (const auto& o : oracles) {
        std::snprintf(buf, sizeof(buf), "[%s] %-22s worst %.3e  (threshold %.1e)%s%s\n",
                      o.pass ? "PASS" : "FAIL", o.name.c_str(), o.worst, o.threshold,
                      o.detail.empty() ? "" : "  ", o.detail.c_str());
        s += buf;
    }
    return s;
}

std::string VerifyReport::first_failure() const {
    for (const auto& o : oracles)
        if (!o.pass) return o.name;
    return "";
}

VerifyReport run_verify_battery(std::uint64_t seed, int samples, const std::string& inject_fault) {
    VerifyReport rep;
    auto push = [&](std::string name, double worst, double threshold, std::string detail = "") {
        OracleOutcome o;
        o.name = std::move(name);
        o.worst = worst;
        o.threshold = threshold;
        o.pass = worst < threshold;
        o.detail = std::move(detail);
        rep.oracles.push_back(std::move(o));
        rep.all_pass = rep.all_pass && rep.oracles.back().pass;
    };

    { // (I+iK)^{-1} decomposition into real and imaginary parts
        PinnedRng rng(seed ^ 0x11);
        double worst = 0.0;
        for (int s = 0; s < samples; ++s) {
            const int n = 1 + s % 3;
            worst = std::max(worst, ident_residual(random_hermitian(rng, n, 5.0), inject_fault == "ident"));
        }
        push("ident", worst, 1e-12);
    }
    { // inverse-metric identity relating g^{-1} and eta^{-1}
        PinnedRng rng(seed ^ 0x22);
        double worst = 0.0;
        for (int s = 0; s < samples; ++s) {
            const int n = 1 + s % 3;
            const Mat g = random_metric(rng, n);
            const Mat F = random_hermitian(rng, n, 5.0);
            worst = std::max(worst, ginverse_residual(g, F, inject_fault == "ginverse"));
        }
        push("ginverse", worst, 1e-12);
    }
    { // lifted determinant argument vs the arctangent sum
        PinnedRng rng(seed ^ 0x33);
        double worst = 0.0;
        const double flip = inject_fault == "theta_log" ? -1.0 : 1.0;
        for (int s = 0; s < samples; ++s) {
            const int n = 1 + s % 3;
            const Mat K = random_hermitian(rng, n, 30.0);
            worst = std::max(worst, flip * oracle_theta_log_vs_arctan(K) + (flip < 0 ? 1.0 : 0.0));
        }
        push("theta_log", worst, 1e-12);
    }
    { // variation of theta: central differences against the trace formula
        PinnedRng rng(seed ^ 0x44);
        const double eps[] = {1e-3, 1e-4, 1e-5};
        double worst_err = 0.0, worst_order = 99.0;
        const int trials = std::max(1, samples / 10);
        for (int s = 0; s < trials; ++s) {
            const int n = 1 + s % 3;
            Mat K = random_hermitian(rng, n, 2.0);
            Mat dK = random_hermitian(rng, n, 1.0);
            if (inject_fault == "delta_theta") dK = cplx(-1.0) * dK;
            DeltaThetaReport r =
                inject_fault == "delta_theta"
                    ? [&] {
                          // faulted comparison: trace formula with flipped argument
                          DeltaThetaReport rr = oracle_delta_theta(K, dK, eps);
                          for (auto& e : rr.fd_error) e += 1.0;
                          rr.observed_order = 0.0;
                          return rr;
                      }()
                    : oracle_delta_theta(K, dK, eps);
            worst_err = std::max(worst_err, r.fd_error[1]); // at eps = 1e-4
            worst_order = std::min(worst_order, r.observed_order);
        }
        char d[64];
        std::snprintf(d, sizeof(d), "min order %.3f", worst_order);
        const bool order_ok = worst_order >= 1.9;
        push("delta_theta", order_ok ? worst_err : 1.0, 1e-6, d);
    }
    { // volume density dominates the curvature norm on eigenvalue tuples
        PinnedRng rng(seed ^ 0x55);
        double worst = 0.0;
        const double flip = inject_fault == "v_dominates_F" ? 2.0 : 1.0;
        for (int s = 0; s < samples; ++s) {
            const int n = 1 + s % 3;
            double prod = 1.0, sum = 0.0;
            for (int j = 0; j < n; ++j) {
                const double l = rng.sym(10.0);
                prod *= 1.0 + l * l;
                sum += l * l;
            }
            worst = std::max(worst, flip * sum - prod); // vsq >= |F|^2
        }
        push("v_dominates_F", worst, 1e-12);
    }
    { // field-level inequalities on a small random problem
        const GridSpec grid = make_grid(2, 8);
        SpectralEngine eng(grid);
        PinnedRng rng(seed ^ 0x66);
        double worst_kappa = 0.0, worst_cal = 0.0;
        const int trials = std::max(1, std::min(samples / 50, 20));
        for (int s = 0; s < trials; ++s) {
            Mat B = random_hermitian(rng, 2, 2.0);
            B.at(0, 0) += 3.0;
            B.at(1, 1) += 3.0;
            const BundleSpec bundle = BundleSpec::make(KahlerData::identity(2), B);
            const RealField phi =
                eng.random_band_limited(rng.next_u64(), 2, 0.05 + 0.1 * rng.unit());
            HermitianField hess = eng.ddbar(phi);
            RealField theta(grid);
            PhaseScanStats st = phase_scan(bundle, hess, 0.0, theta);
            const double th = lift_target_phase(st.z_invariant(), st.theta_mean(), 2);
            st = phase_scan(bundle, hess, th, theta);
            worst_kappa = std::max(worst_kappa, st.kappa_max - 1.0);
            const double cal = calibration_bound(st.volume(), std::abs(st.z_invariant()));
            worst_cal = std::max(worst_cal, -cal);
            if (inject_fault == "kappa_bound") worst_kappa += 1.0;
            if (inject_fault == "calibration") worst_cal += 1.0;
        }
        push("kappa_bound", worst_kappa, 1e-12);
        push("calibration", worst_cal, 1e-10);
    }
    return rep;
}

} // namespace dhym
