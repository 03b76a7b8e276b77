#include "dhym/surface_ma.hpp"

#include <algorithm>
#include <cmath>

#include <omp.h>

#include "dhym/report.hpp"

namespace dhym {

const char* to_string(MAStatus s) {
    switch (s) {
    case MAStatus::Converged: return "Converged";
    case MAStatus::MaxSteps: return "MaxSteps";
    case MAStatus::PositivityLoss: return "PositivityLoss";
    }
    return "?";
}

double cot_hat_from_charges(double a1, double a2) {
    if (a1 == 0.0)
        throw Error("cot_hat_from_charges: a1 = 0 is the degree-zero case; use the Poisson route");
    return (1.0 - a2) / a1;
}

MASetup make_ma_setup(const SpectralEngine& eng, const KahlerData& g, const Mat& B,
                      const RealField& psi0, double eps_pos) {
    if (eng.grid().n != 2) throw Error("make_ma_setup: the Monge-Ampere route requires n = 2");
    MASetup s;
    Mat Bw = B;
    RealField psi = psi0;
    const Mat K0 = g.ginv * B;
    double a1 = trace(K0).real();
    double a2 = det(K0).real();
    if (std::abs(a1) < 1e-14)
        throw Error("make_ma_setup: a1 = 0 (degree zero); use degree_zero_solve");
    if (a1 < 0.0) {
        // work on the dual bundle: Z flips to its conjugate
        Bw = cplx(-1.0) * B;
        const std::int64_t len = psi.size();
#pragma omp parallel for schedule(static) num_threads(worker_threads())
        for (std::int64_t i = 0; i < len; ++i) psi[i] = -psi[i];
        a1 = -a1;
        s.reflected = true;
    }
    s.bundle = BundleSpec::make(g, Bw);
    s.theta_hat = std::atan2(a1, 1.0 - a2); // in (0, pi) since a1 > 0
    s.cot_hat = cot_hat_from_charges(a1, a2);
    s.rhs_const = 1.0 + s.cot_hat * s.cot_hat;
    s.eps_pos = eps_pos;
    s.psi0 = std::move(psi);

    const Mat omega0 = Mat(cplx(s.cot_hat) * g.g) + Bw;
    s.stability_margin = herm_eigenvalues(Mat(g.isqrt * omega0 * g.isqrt))[0];
    if (s.stability_margin <= 0.0)
        throw Error("make_ma_setup: the bundle is not stable (pencil margin " +
                    std::to_string(s.stability_margin) + " <= 0)");

    s.M0 = eng.ddbar(s.psi0);
    const std::int64_t npts = eng.grid().npts;
    for (int r = 0; r < 2; ++r) {
        const double br = omega0.at(r, r).real();
        double* p = s.M0.diag[static_cast<std::size_t>(r)].v.data();
#pragma omp parallel for schedule(static) num_threads(worker_threads())
        for (std::int64_t i = 0; i < npts; ++i) p[i] += br;
    }
    {
        const cplx b = omega0.at(0, 1);
        double* pre = s.M0.upper_re[0].v.data();
        double* pim = s.M0.upper_im[0].v.data();
#pragma omp parallel for schedule(static) num_threads(worker_threads())
        for (std::int64_t i = 0; i < npts; ++i) {
            pre[i] += b.real();
            pim[i] += b.imag();
        }
    }
    return s;
}

namespace {

struct MAScan {
    double res_max = 0.0;    // max |det M - rhs det g|
    double min_eig = 1e300;  // pencil min eigenvalue of (M, g)
    double max_inv_eig = 0.0; // largest eigenvalue of M^{-1} against g
};

// rhs_out (optional) receives log(det M / (rhs_const det g)).
MAScan ma_scan(const MASetup& s, const HermitianField& D, RealField* rhs_out) {
    const GridSpec grid = s.M0.grid;
    const std::int64_t npts = grid.npts;
    const bool ident = s.bundle.metric.is_identity;
    const double logC = std::log(s.rhs_const * s.bundle.metric.det_g);
    const double detg = s.bundle.metric.det_g;
    const std::int64_t nchunks = (npts + kReduceChunk - 1) / kReduceChunk;
    std::vector<MAScan> parts(static_cast<std::size_t>(nchunks));
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::int64_t ci = 0; ci < nchunks; ++ci) {
        const std::int64_t lo = ci * kReduceChunk;
        const std::int64_t hi = std::min(lo + kReduceChunk, npts);
        MAScan cs;
        for (std::int64_t i = lo; i < hi; ++i) {
            const double m00 = s.M0.diag[0][i] + D.diag[0][i];
            const double m11 = s.M0.diag[1][i] + D.diag[1][i];
            const double mre = s.M0.upper_re[0][i] + D.upper_re[0][i];
            const double mim = s.M0.upper_im[0][i] + D.upper_im[0][i];
            double dt, emin, emax;
            if (ident) {
                dt = m00 * m11 - (mre * mre + mim * mim);
                const double mid = 0.5 * (m00 + m11), h = 0.5 * (m00 - m11);
                const double rad = std::sqrt(h * h + mre * mre + mim * mim);
                emin = mid - rad;
                emax = mid + rad;
            } else {
                Mat m(2);
                m.at(0, 0) = m00;
                m.at(1, 1) = m11;
                m.at(0, 1) = cplx(mre, mim);
                m.at(1, 0) = cplx(mre, -mim);
                const Mat ms = s.bundle.metric.isqrt * m * s.bundle.metric.isqrt;
                const auto ev = herm_eigenvalues(ms);
                emin = ev[0];
                emax = ev[1];
                dt = (emin * emax) * detg; // det M = det(pencil) det g
            }
            cs.res_max = std::max(cs.res_max, std::abs(dt - s.rhs_const * detg));
            cs.min_eig = std::min(cs.min_eig, emin);
            if (emin > 0.0) cs.max_inv_eig = std::max(cs.max_inv_eig, 1.0 / emin);
            else cs.max_inv_eig = std::max(cs.max_inv_eig, 1e300);
            (void)emax;
            if (rhs_out) (*rhs_out)[i] = std::log(std::max(dt, 1e-300)) - logC;
        }
        parts[static_cast<std::size_t>(ci)] = cs;
    }
    MAScan out;
    for (const MAScan& p : parts) {
        out.res_max = std::max(out.res_max, p.res_max);
        out.min_eig = std::min(out.min_eig, p.min_eig);
        out.max_inv_eig = std::max(out.max_inv_eig, p.max_inv_eig);
    }
    return out;
}

} // namespace

RealField ma_residual(const SpectralEngine& eng, const MASetup& setup, const RealField& phi) {
    HermitianField D = eng.ddbar(phi);
    const GridSpec grid = eng.grid();
    RealField out(grid);
    const std::int64_t npts = grid.npts;
    const bool ident = setup.bundle.metric.is_identity;
    const double detg = setup.bundle.metric.det_g;
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::int64_t i = 0; i < npts; ++i) {
        const double m00 = setup.M0.diag[0][i] + D.diag[0][i];
        const double m11 = setup.M0.diag[1][i] + D.diag[1][i];
        const double mre = setup.M0.upper_re[0][i] + D.upper_re[0][i];
        const double mim = setup.M0.upper_im[0][i] + D.upper_im[0][i];
        double dt;
        if (ident) {
            dt = m00 * m11 - (mre * mre + mim * mim);
        } else {
            Mat m(2);
            m.at(0, 0) = m00;
            m.at(1, 1) = m11;
            m.at(0, 1) = cplx(mre, mim);
            m.at(1, 0) = cplx(mre, -mim);
            dt = det(m).real();
        }
        out[i] = dt - setup.rhs_const * detg;
    }
    return out;
}

MAResult ma_solve(const SpectralEngine& eng, const MASetup& setup, const RealField& phi0,
                  const MAOptions& opts) {
    const GridSpec grid = eng.grid();
    MAResult res;
    RealField phi = phi0;
    Spectrum spec(grid);
    HermitianField D(grid, 2);
    RealField rhs(grid);

    DiagnosticsCsv csv;
    if (!opts.csv_path.empty()) csv.open(opts.csv_path, "ma");
    RealField theta_tmp(grid);
    auto emit = [&](const MAScan& sc, double t, double dt_used) {
        if (!csv.is_open()) return;
        // shared stream format; the phase block comes from the full curvature
        RealField total(grid);
        const std::int64_t len = phi.size();
#pragma omp parallel for schedule(static) num_threads(worker_threads())
        for (std::int64_t i = 0; i < len; ++i) total[i] = setup.psi0[i] + phi[i];
        HermitianField hess = eng.ddbar(total);
        const PhaseScanStats st = phase_scan(setup.bundle, hess, setup.theta_hat, theta_tmp);
        DiagnosticsRecord r;
        r.t = t;
        r.dt = dt_used;
        r.V = st.volume();
        r.abs_Z = std::abs(st.z_invariant());
        r.theta_hat = setup.theta_hat;
        r.theta_min = st.theta_min;
        r.theta_max = st.theta_max;
        r.sup_theta_dev = std::max(std::abs(st.theta_max - setup.theta_hat),
                                   std::abs(st.theta_min - setup.theta_hat));
        r.v_max = st.v_max;
        r.h_sq_max = std::numeric_limits<double>::quiet_NaN();
        r.grad_F_sq_max = max_abs(grad_F_norm_sq(eng, eng.forward(total), setup.bundle.metric));
        r.lam_min = st.lam_min;
        r.lam_max = st.lam_max;
        r.omega_min_eig = sc.min_eig;
        r.kappa_max = st.kappa_max;
        csv.add(r);
    };

    eng.forward_into(phi, spec);
    eng.ddbar(spec, D);
    MAScan sc = ma_scan(setup, D, &rhs);
    if (sc.min_eig <= setup.eps_pos) {
        res.status = MAStatus::PositivityLoss;
        res.message = "initial data violates the positivity floor (min eig " +
                      std::to_string(sc.min_eig) + " <= " + std::to_string(setup.eps_pos) + ")";
        res.phi = std::move(phi);
        res.min_eig_final = sc.min_eig;
        res.residual_sup = sc.res_max;
        return res;
    }

    const double dx2 = grid.dx() * grid.dx();
    RealField cand(grid), rhs_cand(grid);
    std::int64_t step = 0;
    double t = 0.0, last_dt = 0.0;
    emit(sc, t, 0.0);
    while (true) {
        if (sc.res_max < opts.tol_residual) {
            res.status = MAStatus::Converged;
            break;
        }
        if (step >= opts.max_steps) {
            res.status = MAStatus::MaxSteps;
            res.message = "step budget exhausted before the residual tolerance";
            break;
        }
        // explicit step of phi_dot = log(det M / (rhs const * det g)); the
        // linearization is Delta_M, so the time step follows the same
        // spectral bound with Lambda the largest eigenvalue of M^{-1}.
        double dt = 3.0 * opts.dt_safety * dx2 / (M_PI * M_PI * 2.0 * sc.max_inv_eig);
        bool accepted = false;
        for (int attempt = 0; attempt < 3 && !accepted; ++attempt, dt *= 0.5) {
            const std::int64_t len = phi.size();
#pragma omp parallel for schedule(static) num_threads(worker_threads())
            for (std::int64_t i = 0; i < len; ++i) cand[i] = phi[i] + dt * rhs[i];
            eng.forward_into(cand, spec);
            eng.ddbar(spec, D);
            const MAScan nsc = ma_scan(setup, D, &rhs_cand);
            if (nsc.min_eig > setup.eps_pos && std::isfinite(nsc.res_max)) {
                std::swap(phi, cand);
                std::swap(rhs, rhs_cand);
                sc = nsc;
                accepted = true;
                t += dt;
                last_dt = dt;
                ++step;
            }
        }
        if (!accepted) {
            res.status = MAStatus::PositivityLoss;
            res.message = "positivity floor breached after dt halvings at step " + std::to_string(step);
            break;
        }
        if (step % opts.monitor_cadence == 0) emit(sc, t, last_dt);
    }

    res.steps = step;
    res.residual_sup = sc.res_max;
    res.min_eig_final = sc.min_eig;
    // report with the normalization sup phi = 0
    double mx = -1e300;
    const std::int64_t len = phi.size();
#pragma omp parallel for schedule(static) reduction(max : mx) num_threads(worker_threads())
    for (std::int64_t i = 0; i < len; ++i) mx = std::max(mx, phi[i]);
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::int64_t i = 0; i < len; ++i) phi[i] -= mx;
    res.phi = std::move(phi);
    if (res.status == MAStatus::Converged) {
        RealField total(grid);
        const std::int64_t len2 = res.phi.size();
#pragma omp parallel for schedule(static) num_threads(worker_threads())
        for (std::int64_t i = 0; i < len2; ++i) total[i] = setup.psi0[i] + res.phi[i];
        HermitianField hess = eng.ddbar(total);
        RealField th(grid);
        const PhaseScanStats st = phase_scan(setup.bundle, hess, setup.theta_hat, th);
        res.theta_dev = std::max(std::abs(st.theta_max - setup.theta_hat),
                                 std::abs(st.theta_min - setup.theta_hat));
    }
    return res;
}

double verify_dhym_equivalence(const SpectralEngine& eng, const MASetup& setup, const RealField& phi) {
    const GridSpec grid = eng.grid();
    RealField total(grid);
    const std::int64_t len = phi.size();
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::int64_t i = 0; i < len; ++i) total[i] = setup.psi0[i] + phi[i];
    HermitianField F = curvature(eng, setup.bundle, total);
    const KahlerData& g = setup.bundle.metric;
    const double tn = std::tan(setup.theta_hat);
    const bool use_tan = std::abs(tn) <= 1.0;
    const double ct = setup.cot_hat;
    double worst = 0.0;
    const std::int64_t npts = grid.npts;
#pragma omp parallel for schedule(static) reduction(max : worst) num_threads(worker_threads())
    for (std::int64_t i = 0; i < npts; ++i) {
        Mat f(2);
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) f.at(r, c) = F.entry(r, c, i);
        const Mat k = g.ginv * f;
        const double trk = trace(k).real();
        const double dtk = det(k).real();
        const double re = 1.0 - dtk, im = trk;
        const double v = std::sqrt(re * re + im * im);
        const double resid = use_tan ? std::abs(im - tn * re) : std::abs(re - ct * im);
        worst = std::max(worst, resid / v);
    }
    return worst;
}

RealField degree_zero_solve(const SpectralEngine& eng, const KahlerData& g, const Mat& B,
                            const RealField& psi0) {
    const double a1 = trace(Mat(g.ginv * B)).real();
    if (std::abs(a1) > 1e-12)
        throw Error("degree_zero_solve: a1 = " + std::to_string(a1) + " is nonzero; not a degree-zero bundle");
    const GridSpec grid = eng.grid();
    HermitianField D = eng.ddbar(psi0);
    RealField rho(grid);
    const std::int64_t npts = grid.npts;
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::int64_t i = 0; i < npts; ++i) {
        Mat f = B;
        for (int r = 0; r < grid.n; ++r) f.at(r, r) += D.diag[static_cast<std::size_t>(r)][i];
        int u = 0;
        for (int r = 0; r < grid.n; ++r)
            for (int c = r + 1; c < grid.n; ++c, ++u) {
                const cplx d(D.upper_re[static_cast<std::size_t>(u)][i], D.upper_im[static_cast<std::size_t>(u)][i]);
                f.at(r, c) += d;
                f.at(c, r) += std::conj(d);
            }
        rho[i] = -trace(Mat(g.ginv * f)).real();
    }
    return eng.poisson_solve(rho, g.ginv);
}

CrossValidation cross_validate_routes(const SpectralEngine& eng, const KahlerData& g, const Mat& B,
                                      const RealField& psi0, const MAOptions& ma_opts,
                                      const FlowConfig& flow_cfg) {
    CrossValidation cv;
    MASetup setup = make_ma_setup(eng, g, B, psi0, ma_opts.eps_pos);
    RealField zero(eng.grid());
    cv.ma = ma_solve(eng, setup, zero, ma_opts);
    if (cv.ma.status != MAStatus::Converged)
        throw Error(std::string("cross_validate_routes: MA route failed: ") + to_string(cv.ma.status) +
                    " " + cv.ma.message);

    const BundleSpec bundle = BundleSpec::make(g, B);
    cv.flow = run_flow(eng, bundle, psi0, flow_cfg);
    if (cv.flow.status != FlowStatus::Converged)
        throw Error(std::string("cross_validate_routes: flow route failed: ") + to_string(cv.flow.status) +
                    " " + cv.flow.message);

    // MA total potential relative to h0 (undo the reflection if one happened)
    RealField u_ma(eng.grid());
    const std::int64_t len = u_ma.size();
    const double sgn = setup.reflected ? -1.0 : 1.0;
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::int64_t i = 0; i < len; ++i) u_ma[i] = sgn * (setup.psi0[i] + cv.ma.phi[i]);
    cv.deviation = mean_removed_deviation(u_ma, cv.flow.state.phi);
    cv.ma_theta_dev = cv.ma.theta_dev;
    cv.flow_theta_dev = cv.flow.state.sup_theta_dev();
    return cv;
}

} // namespace dhym
