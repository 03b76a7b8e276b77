#include "dhym/invariants.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <omp.h>

namespace dhym {

double lift_target_phase(cplx Z, double anchor, int n) {
    if (std::abs(Z) == 0.0) throw Error("target phase undefined: Z_L = 0");
    const double arg = std::atan2(Z.imag(), Z.real());
    const double k = std::round((anchor - arg) / (2.0 * M_PI));
    const double th = arg + 2.0 * M_PI * k;
    const double lim = n * M_PI / 2.0;
    if (!(th > -lim && th < lim))
        throw Error("lifted target phase " + std::to_string(th) +
                    " leaves (-n pi/2, n pi/2): inconsistent phase data");
    return th;
}

namespace {
PhaseScanStats scan_of(const SpectralEngine& eng, const BundleSpec& bundle, const RealField& phi,
                       RealField& theta) {
    HermitianField hess(eng.grid(), eng.grid().n);
    eng.ddbar(eng.forward(phi), hess);
    return phase_scan(bundle, hess, 0.0, theta);
}
} // namespace

cplx z_invariant(const SpectralEngine& eng, const BundleSpec& bundle, const RealField& phi) {
    RealField theta(eng.grid());
    return scan_of(eng, bundle, phi, theta).z_invariant();
}

double volume_functional(const SpectralEngine& eng, const BundleSpec& bundle, const RealField& phi) {
    RealField theta(eng.grid());
    return scan_of(eng, bundle, phi, theta).volume();
}

PhaseFlags phase_flags(const RealField& theta, int n) {
    const std::int64_t npts = theta.size();
    double minabs = std::numeric_limits<double>::infinity();
#pragma omp parallel for schedule(static) reduction(min : minabs) num_threads(worker_threads())
    for (std::int64_t i = 0; i < npts; ++i) minabs = std::min(minabs, std::abs(theta[i]));
    PhaseFlags f;
    f.supercritical = minabs > (n - 2) * M_PI / 2.0;
    f.hypercritical = minabs > (n - 1) * M_PI / 2.0;
    return f;
}

PhaseFlags phase_flags_minmax(double theta_min, double theta_max, int n) {
    double minabs = 0.0;
    if (theta_min > 0.0) minabs = theta_min;
    else if (theta_max < 0.0) minabs = -theta_max;
    PhaseFlags f;
    f.supercritical = minabs > (n - 2) * M_PI / 2.0;
    f.hypercritical = minabs > (n - 1) * M_PI / 2.0;
    return f;
}

StabilityResult stability_check(const KahlerData& g, const Mat& B, double theta_hat, int n) {
    StabilityResult r;
    if (n == 1) {
        r.stable = true;
        r.margin = std::numeric_limits<double>::quiet_NaN();
        r.note = "n=1: a constant-curvature representative always exists";
        return r;
    }
    Mat Bw = B;
    double th = theta_hat;
    if (th < 0.0) {
        // work on the dual bundle, Z_{L^-1} = conj(Z_L)
        Bw = cplx(-1.0) * B;
        th = -th;
        r.reflected = true;
    }
    if (th == 0.0 || std::abs(std::sin(th)) < 1e-14) {
        r.degree_zero = true;
        r.stable = true;
        r.margin = std::numeric_limits<double>::quiet_NaN();
        r.note = "degree zero: trace-free representative exists, equation solved by the Poisson route";
        return r;
    }
    const double c = omega_coefficient(th, n);
    const Mat omega = Mat(cplx(c) * g.g) + Bw;
    const Mat pencil = g.isqrt * omega * g.isqrt;
    r.margin = herm_eigenvalues(pencil)[0];
    r.stable = r.margin > 0.0;
    return r;
}

SurfaceCharges surface_charges(const KahlerData& g, const HermitianField& F, cplx Z) {
    if (F.n != 2) throw Error("surface_charges: defined for n = 2");
    SurfaceCharges c;
    c.a1_zeta = Z.imag();
    c.a2_zeta = 1.0 - Z.real();
    const std::int64_t npts = F.grid.npts;
    RealField trk(F.grid), detk(F.grid);
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::int64_t i = 0; i < npts; ++i) {
        Mat f(2);
        for (int r = 0; r < 2; ++r)
            for (int cc = 0; cc < 2; ++cc) f.at(r, cc) = F.entry(r, cc, i);
        const Mat k = g.ginv * f;
        trk[i] = trace(k).real();
        detk[i] = det(k).real();
    }
    c.a1_form = integrate(trk);
    c.a2_form = integrate(detk);
    return c;
}

CovectorField mean_curvature(const SpectralEngine& eng, const HermitianField& eta_inv,
                             const HermitianField& F) {
    const GridSpec grid = F.grid;
    const int n = F.n;
    CovectorField H(grid, n);
    ComplexField entry(grid);
    for (int j = 0; j < n; ++j) {
        ComplexField& Hj = H.comp[static_cast<std::size_t>(j)];
        for (int q = 0; q < n; ++q)
            for (int p = 0; p < n; ++p) {
                // H_j += eta^{p qbar} d_j F(q,p)
                const std::int64_t npts = grid.npts;
#pragma omp parallel for schedule(static) num_threads(worker_threads())
                for (std::int64_t i = 0; i < npts; ++i) entry[i] = F.entry(q, p, i);
                const ComplexField dF = eng.dz(entry, j);
#pragma omp parallel for schedule(static) num_threads(worker_threads())
                for (std::int64_t i = 0; i < npts; ++i) Hj[i] += eta_inv.entry(p, q, i) * dF[i];
            }
    }
    return H;
}

RealField h_norm_sq(const CovectorField& H, const HermitianField& eta_inv) {
    const GridSpec grid = H.grid;
    RealField out(grid);
    const std::int64_t npts = grid.npts;
    const int n = H.n;
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::int64_t i = 0; i < npts; ++i) {
        cplx s = 0.0;
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                s += eta_inv.entry(j, k, i) * H.comp[static_cast<std::size_t>(j)][i] *
                     std::conj(H.comp[static_cast<std::size_t>(k)][i]);
        out[i] = s.real();
    }
    return out;
}

RealField grad_F_norm_sq(const SpectralEngine& eng, const Spectrum& phiHat, const KahlerData& g) {
    const GridSpec grid = eng.grid();
    const int n = grid.n;
    RealField acc(grid);
    ComplexField tmp(grid);
    const Mat* W = g.is_identity ? nullptr : &g.isqrt;
    const std::int64_t npts = grid.npts;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c) {
                eng.ddbar_deriv(phiHat, a, b, c, tmp, W);
#pragma omp parallel for schedule(static) num_threads(worker_threads())
                for (std::int64_t i = 0; i < npts; ++i) acc[i] += std::norm(tmp[i]);
            }
    return acc;
}

double calibration_bound(double V, double absZ) { return V - absZ; }

std::string InvariantReport::to_kv_text() const {
    char buf[256];
    std::string s;
    auto kv = [&](const char* key, double val) {
        std::snprintf(buf, sizeof(buf), "%s=%.16e\n", key, val);
        s += buf;
    };
    auto kb = [&](const char* key, bool val) { s += std::string(key) + "=" + (val ? "1" : "0") + "\n"; };
    s += "n=" + std::to_string(n) + "\n";
    kv("Z_re", Z.real());
    kv("Z_im", Z.imag());
    kv("abs_Z", abs_Z);
    kv("theta_hat", theta_hat);
    if (has_a12) {
        kv("a1", a1);
        kv("a2", a2);
    }
    kv("V", V);
    kv("theta_min", theta_min);
    kv("theta_max", theta_max);
    kb("supercritical", supercritical);
    kb("hypercritical", hypercritical);
    kb("ample", ample);
    kb("stable", stable);
    kv("stability_margin", stability_margin);
    kb("degree_zero", degree_zero);
    return s;
}

InvariantReport compute_invariants(const SpectralEngine& eng, const BundleSpec& bundle,
                                   const RealField& phi) {
    const GridSpec grid = eng.grid();
    HermitianField hess(grid, grid.n);
    eng.ddbar(eng.forward(phi), hess);
    RealField theta(grid);
    const PhaseScanStats st = phase_scan(bundle, hess, 0.0, theta);

    InvariantReport rep;
    rep.n = grid.n;
    rep.Z = st.z_invariant();
    rep.abs_Z = std::abs(rep.Z);
    rep.theta_hat = lift_target_phase(rep.Z, st.theta_mean(), grid.n);
    rep.V = st.volume();
    rep.theta_min = st.theta_min;
    rep.theta_max = st.theta_max;
    const PhaseFlags fl = phase_flags_minmax(st.theta_min, st.theta_max, grid.n);
    rep.supercritical = fl.supercritical;
    rep.hypercritical = fl.hypercritical;
    rep.ample = bundle.ample;
    rep.degree_zero = std::abs(trace(Mat(bundle.metric.ginv * bundle.B)).real()) < 1e-12;
    if (grid.n == 2) {
        rep.has_a12 = true;
        rep.a1 = rep.Z.imag();
        rep.a2 = 1.0 - rep.Z.real();
    }
    if (grid.n >= 2) {
        try {
            const StabilityResult sr = stability_check(bundle.metric, bundle.B, rep.theta_hat, grid.n);
            rep.stable = sr.stable;
            rep.stability_margin = sr.margin;
        } catch (const Error&) {
            rep.stable = false;
            rep.stability_margin = std::numeric_limits<double>::quiet_NaN();
        }
    } else {
        rep.stable = true;
        rep.stability_margin = std::numeric_limits<double>::quiet_NaN();
    }
    return rep;
}

} // namespace dhym
