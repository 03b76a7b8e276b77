#include "dhym/flow.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include <omp.h>

#include "dhym/report.hpp"

namespace dhym {

void FlowConfig::validate() const {
    if (!(dt_safety > 0.0 && dt_safety <= 1.0)) throw Error("FlowConfig: dt_safety must be in (0, 1]");
    if (!(tol_theta > 0.0)) throw Error("FlowConfig: tol_theta must be positive");
    if (max_steps < 0) throw Error("FlowConfig: max_steps must be nonnegative");
    if (monitor_cadence < 1) throw Error("FlowConfig: monitor_cadence must be >= 1");
    if (!(monotonicity_slack > 0.0)) throw Error("FlowConfig: monotonicity_slack must be positive");
    if (!(grad_blowup_factor > 0.0)) throw Error("FlowConfig: grad_blowup_factor must be positive");
    if (!(theta_hat_drift_limit > 0.0)) throw Error("FlowConfig: theta_hat_drift_limit must be positive");
}

const char* to_string(FlowStatus s) {
    switch (s) {
    case FlowStatus::Converged: return "Converged";
    case FlowStatus::MaxSteps: return "MaxSteps";
    case FlowStatus::MonitorViolation: return "MonitorViolation";
    case FlowStatus::NonFinite: return "NonFinite";
    }
    return "?";
}

namespace {

void refresh(const SpectralEngine& eng, const BundleSpec& bundle, FlowState& s, double anchor) {
    eng.forward_into(s.phi, s.phi_hat);
    eng.ddbar(s.phi_hat, s.hess);
    s.stats = phase_scan(bundle, s.hess, anchor, s.theta);
    s.theta_hat = lift_target_phase(s.stats.z_invariant(), s.stats.theta_mean(), s.phi.grid.n);
}

struct Workspace {
    RealField k1, k2, k3, k4, phi_s, theta_s;
    HermitianField hess_s;
    Spectrum spec_s;
    explicit Workspace(const GridSpec& g)
        : k1(g), k2(g), k3(g), k4(g), phi_s(g), theta_s(g), hess_s(g, g.n), spec_s(g) {}
};

// theta of an off-step stage potential; no target-phase update.
void stage_theta(const SpectralEngine& eng, const BundleSpec& bundle, const RealField& phi_s,
                 double anchor, Workspace& ws) {
    eng.forward_into(phi_s, ws.spec_s);
    eng.ddbar(ws.spec_s, ws.hess_s);
    RealField& th = ws.theta_s;
    (void)phase_scan(bundle, ws.hess_s, anchor, th);
}

void axpy(RealField& out, const RealField& x, double a, const RealField& y) {
    const std::int64_t len = x.size();
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::int64_t i = 0; i < len; ++i) out[i] = x[i] + a * y[i];
}

void step_into(const SpectralEngine& eng, const BundleSpec& bundle, const FlowState& s, double dt,
               Integrator integ, FlowState& out, Workspace& ws) {
    const std::int64_t len = s.phi.size();
    const double th_hat = s.theta_hat;
    if (!(out.phi.grid == s.phi.grid)) {
        out.phi = RealField(s.phi.grid);
        out.hess = HermitianField(s.phi.grid, s.phi.grid.n);
        out.theta = RealField(s.phi.grid);
    }
    if (integ == Integrator::Euler) {
#pragma omp parallel for schedule(static) num_threads(worker_threads())
        for (std::int64_t i = 0; i < len; ++i) out.phi[i] = s.phi[i] + dt * (s.theta[i] - th_hat);
    } else {
        // classical RK4; every stage re-derives curvature from its own potential
#pragma omp parallel for schedule(static) num_threads(worker_threads())
        for (std::int64_t i = 0; i < len; ++i) ws.k1[i] = s.theta[i] - th_hat;
        axpy(ws.phi_s, s.phi, 0.5 * dt, ws.k1);
        stage_theta(eng, bundle, ws.phi_s, th_hat, ws);
#pragma omp parallel for schedule(static) num_threads(worker_threads())
        for (std::int64_t i = 0; i < len; ++i) ws.k2[i] = ws.theta_s[i] - th_hat;
        axpy(ws.phi_s, s.phi, 0.5 * dt, ws.k2);
        stage_theta(eng, bundle, ws.phi_s, th_hat, ws);
#pragma omp parallel for schedule(static) num_threads(worker_threads())
        for (std::int64_t i = 0; i < len; ++i) ws.k3[i] = ws.theta_s[i] - th_hat;
        axpy(ws.phi_s, s.phi, dt, ws.k3);
        stage_theta(eng, bundle, ws.phi_s, th_hat, ws);
#pragma omp parallel for schedule(static) num_threads(worker_threads())
        for (std::int64_t i = 0; i < len; ++i) ws.k4[i] = ws.theta_s[i] - th_hat;
        const double w = dt / 6.0;
#pragma omp parallel for schedule(static) num_threads(worker_threads())
        for (std::int64_t i = 0; i < len; ++i)
            out.phi[i] = s.phi[i] + w * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]);
    }
    out.t = s.t + dt;
    out.step = s.step + 1;
    out.dt = dt;
    refresh(eng, bundle, out, th_hat);
}

enum class Check { Ok, Violation, NonFinite };

struct CheckResult {
    Check kind = Check::Ok;
    std::string message;
};

CheckResult check_monitors(const FlowState& cand, const FlowState& prev, const FlowConfig& cfg) {
    const PhaseScanStats& c = cand.stats;
    const PhaseScanStats& p = prev.stats;
    char buf[256];
    auto fail = [&](const char* what, double a, double b) {
        std::snprintf(buf, sizeof(buf), "%s (%.12e vs %.12e) at step %lld", what, a, b,
                      static_cast<long long>(cand.step));
        return CheckResult{Check::Violation, buf};
    };
    if (!std::isfinite(c.volume()) || !std::isfinite(c.theta_min) || !std::isfinite(c.theta_max) ||
        !std::isfinite(c.v_max) || !std::isfinite(cand.theta_hat))
        return {Check::NonFinite, "non-finite field statistics at step " + std::to_string(cand.step)};
    const double slack = cfg.monotonicity_slack;
    if (c.volume() > p.volume() + slack) return fail("volume functional increased", c.volume(), p.volume());
    if (c.theta_min < p.theta_min - slack) return fail("min theta decreased", c.theta_min, p.theta_min);
    if (c.theta_max > p.theta_max + slack) return fail("max theta increased", c.theta_max, p.theta_max);
    const PhaseFlags pf = phase_flags_minmax(p.theta_min, p.theta_max, prev.phi.grid.n);
    if (pf.hypercritical && c.v_max > p.v_max + slack)
        return fail("max volume density increased in the hypercritical regime", c.v_max, p.v_max);
    if (c.kappa_max > 1.0 + slack) return fail("calibration density exceeded one", c.kappa_max, 1.0);
    const double drift = std::abs(cand.theta_hat - prev.theta_hat);
    if (drift > cfg.theta_hat_drift_limit)
        return fail("target phase drifted", cand.theta_hat, prev.theta_hat);
    return {};
}

struct DiagContext {
    double grad_threshold = 0.0;
};

DiagnosticsRecord make_record(const SpectralEngine& eng, const BundleSpec& bundle, const FlowState& s,
                              double grad_sq_max, double h_sq_max) {
    DiagnosticsRecord r;
    r.t = s.t;
    r.dt = s.dt;
    r.V = s.stats.volume();
    r.abs_Z = std::abs(s.stats.z_invariant());
    r.theta_hat = s.theta_hat;
    r.theta_min = s.stats.theta_min;
    r.theta_max = s.stats.theta_max;
    r.sup_theta_dev = s.sup_theta_dev();
    r.v_max = s.stats.v_max;
    r.h_sq_max = h_sq_max;
    r.grad_F_sq_max = grad_sq_max;
    r.lam_min = s.stats.lam_min;
    r.lam_max = s.stats.lam_max;
    r.kappa_max = s.stats.kappa_max;
    r.omega_min_eig = std::numeric_limits<double>::quiet_NaN();
    if (bundle.n() == 2 && std::abs(std::sin(s.theta_hat)) >= 1e-12) {
        // pencil eigenvalues of Omega = c g + F against g are c + lambda_j
        r.omega_min_eig = omega_coefficient(s.theta_hat, 2) + s.stats.lam_min;
    }
    (void)eng;
    return r;
}

// |H|^2_eta extrema and int |H|^2_eta v, via H = d theta.
struct HDiag {
    double h_sq_max = 0.0;
    double h_sq_v_integral = 0.0;
};

HDiag h_diagnostics(const SpectralEngine& eng, const BundleSpec& bundle, const FlowState& s) {
    const GridSpec grid = s.phi.grid;
    const int n = grid.n;
    Spectrum th = eng.forward(s.theta);
    CovectorField H = eng.holomorphic_gradient(th);
    const std::int64_t npts = grid.npts;
    const std::int64_t nchunks = (npts + kReduceChunk - 1) / kReduceChunk;
    std::vector<double> part_max(static_cast<std::size_t>(nchunks), 0.0);
    std::vector<double> part_sum(static_cast<std::size_t>(nchunks), 0.0);
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::int64_t ci = 0; ci < nchunks; ++ci) {
        const std::int64_t lo = ci * kReduceChunk;
        const std::int64_t hi = std::min(lo + kReduceChunk, npts);
        double mx = 0.0;
        const double sum = pairwise_sum(hi - lo, [&](std::int64_t o) {
            const std::int64_t i = lo + o;
            Mat f = bundle.B;
            for (int r = 0; r < n; ++r) f.at(r, r) += s.hess.diag[static_cast<std::size_t>(r)][i];
            int u = 0;
            for (int r = 0; r < n; ++r)
                for (int c = r + 1; c < n; ++c, ++u) {
                    const cplx d(s.hess.upper_re[static_cast<std::size_t>(u)][i],
                                 s.hess.upper_im[static_cast<std::size_t>(u)][i]);
                    f.at(r, c) += d;
                    f.at(c, r) += std::conj(d);
                }
            const Mat e = bundle.metric.g + f * bundle.metric.ginv * f;
            const Mat ei = inverse(e);
            cplx hs = 0.0;
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                    hs += ei.at(j, k) * H.comp[static_cast<std::size_t>(j)][i] *
                          std::conj(H.comp[static_cast<std::size_t>(k)][i]);
            const Mat ks = bundle.metric.is_identity ? f : Mat(bundle.metric.isqrt * f * bundle.metric.isqrt);
            const auto ev = herm_eigenvalues(ks);
            double vsq = 1.0;
            for (int j = 0; j < n; ++j) vsq *= 1.0 + ev[static_cast<std::size_t>(j)] * ev[static_cast<std::size_t>(j)];
            const double hv = hs.real();
            mx = std::max(mx, hv);
            return hv * std::sqrt(vsq);
        });
        part_max[static_cast<std::size_t>(ci)] = mx;
        part_sum[static_cast<std::size_t>(ci)] = sum;
    }
    HDiag d;
    for (double m : part_max) d.h_sq_max = std::max(d.h_sq_max, m);
    d.h_sq_v_integral = sum_array(part_sum.data(), static_cast<std::int64_t>(part_sum.size())) /
                        static_cast<double>(npts);
    return d;
}

} // namespace

RealField flow_rhs(const FlowState& state) {
    RealField r(state.phi.grid);
    const std::int64_t len = r.size();
    const double th = state.theta_hat;
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::int64_t i = 0; i < len; ++i) r[i] = state.theta[i] - th;
    return r;
}

double cfl_dt(const FlowState& state, const FlowConfig& cfg) {
    const GridSpec& g = state.phi.grid;
    const double lambda = 1.0 / (1.0 + std::max(0.0, state.stats.min_lam_sq));
    const double dx2 = g.dx() * g.dx();
    const double base = cfg.dt_safety * dx2 / (M_PI * M_PI * g.n * lambda);
    const double cap = 10.0 * cfg.dt_safety * dx2 / (M_PI * M_PI * g.n);
    return std::min(base, cap);
}

FlowState make_flow_state(const SpectralEngine& eng, const BundleSpec& bundle, const RealField& phi0) {
    FlowState s;
    s.phi = phi0;
    s.hess = HermitianField(eng.grid(), eng.grid().n);
    s.theta = RealField(eng.grid());
    refresh(eng, bundle, s, 0.0);
    // second pass so the kappa reduction is anchored at the actual target phase
    refresh(eng, bundle, s, s.theta_hat);
    return s;
}

FlowState flow_step(const SpectralEngine& eng, const BundleSpec& bundle, const FlowState& state,
                    double dt, Integrator integ) {
    Workspace ws(eng.grid());
    FlowState out;
    step_into(eng, bundle, state, dt, integ, out, ws);
    return out;
}

namespace {

FlowResult run_loop(const SpectralEngine& eng, const BundleSpec& bundle, FlowState&& start,
                    const FlowConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg.validate();
    const GridSpec grid = eng.grid();
    FlowResult res;
    FlowState state = std::move(start);
    const std::int64_t step0 = state.step;

    if (cfg.require_hypercritical) {
        const PhaseFlags f = phase_flags(state.theta, grid.n);
        if (!f.hypercritical)
            throw Error("run_flow: hypercritical phase required but min theta = " +
                        std::to_string(state.stats.theta_min) + " <= (n-1) pi/2 = " +
                        std::to_string((grid.n - 1) * M_PI / 2.0));
    }

    res.initial_grad_sq = max_abs(grad_F_norm_sq(eng, state.phi_hat, bundle.metric));
    const double grad_threshold = cfg.grad_blowup_factor * res.initial_grad_sq;

    DiagnosticsCsv csv;
    if (!cfg.csv_path.empty()) csv.open(cfg.csv_path, "flow");
    auto emit_diag = [&](const FlowState& s) {
        const double grad = max_abs(grad_F_norm_sq(eng, s.phi_hat, bundle.metric));
        const HDiag hd = h_diagnostics(eng, bundle, s);
        DiagnosticsRecord r = make_record(eng, bundle, s, grad, hd.h_sq_max);
        r.h_sq_max = hd.h_sq_max;
        res.diagnostics.push_back(r);
        res.diagnostics.back().h_sq_v_integral = hd.h_sq_v_integral;
        if (csv.is_open()) csv.add(r);
        return grad;
    };
    auto step_record = [&](const FlowState& s, double drift) {
        if (!cfg.record_per_step) return;
        StepRecord r;
        r.t = s.t;
        r.dt = s.dt;
        r.V = s.stats.volume();
        r.theta_min = s.stats.theta_min;
        r.theta_max = s.stats.theta_max;
        r.v_max = s.stats.v_max;
        r.lam_min = s.stats.lam_min;
        r.theta_hat = s.theta_hat;
        r.sup_theta_dev = s.sup_theta_dev();
        r.drift = drift;
        res.per_step.push_back(r);
    };

    step_record(state, 0.0);
    {
        const double g0 = emit_diag(state);
        if (g0 > grad_threshold && res.initial_grad_sq > 0.0 && cfg.grad_blowup_factor < 1.0) {
            // an artificially low threshold trips immediately
            res.status = FlowStatus::MonitorViolation;
            res.message = "grad F monitor above threshold at start";
        }
    }

    Workspace ws(grid);
    FlowState cand;
    bool halted = !res.message.empty();
    while (!halted) {
        if (state.sup_theta_dev() < cfg.tol_theta) {
            res.status = FlowStatus::Converged;
            break;
        }
        if (state.step - step0 >= cfg.max_steps) {
            res.status = FlowStatus::MaxSteps;
            res.message = "step budget exhausted before convergence";
            break;
        }
        const double dt = cfl_dt(state, cfg);
        step_into(eng, bundle, state, dt, cfg.integrator, cand, ws);
        CheckResult chk = check_monitors(cand, state, cfg);
        if (chk.kind == Check::Violation) {
            step_into(eng, bundle, state, dt / 2.0, cfg.integrator, cand, ws);
            chk = check_monitors(cand, state, cfg);
            if (chk.kind == Check::Violation) {
                res.status = FlowStatus::MonitorViolation;
                res.message = chk.message + " (after dt/2 retry)";
                break;
            }
        }
        if (chk.kind == Check::NonFinite) {
            res.status = FlowStatus::NonFinite;
            res.message = chk.message;
            break;
        }
        const double drift = std::abs(cand.theta_hat - state.theta_hat);
        res.max_theta_hat_drift = std::max(res.max_theta_hat_drift, drift);
        std::swap(state, cand);
        step_record(state, drift);
        if ((state.step - step0) % cfg.monitor_cadence == 0) {
            const double grad = emit_diag(state);
            if (grad > grad_threshold) {
                res.status = FlowStatus::MonitorViolation;
                res.message = "grad F monitor: " + std::to_string(grad) + " above threshold " +
                              std::to_string(grad_threshold) + " at step " + std::to_string(state.step);
                break;
            }
        }
    }
    if ((state.step - step0) % cfg.monitor_cadence != 0) emit_diag(state);

    if (!cfg.checkpoint_path.empty()) {
        CheckpointData ck;
        ck.n = grid.n;
        ck.N = grid.N;
        ck.t = state.t;
        ck.step = state.step;
        ck.dt = state.dt;
        ck.config_hash = cfg.config_hash;
        ck.phi = state.phi;
        checkpoint_write(ck, cfg.checkpoint_path);
    }
    res.state = std::move(state);
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

} // namespace

FlowResult run_flow(const SpectralEngine& eng, const BundleSpec& bundle, const RealField& phi0,
                    const FlowConfig& cfg) {
    return run_loop(eng, bundle, make_flow_state(eng, bundle, phi0), cfg);
}

FlowResult resume_flow(const SpectralEngine& eng, const BundleSpec& bundle, const CheckpointData& ckpt,
                       const FlowConfig& cfg) {
    if (ckpt.n != eng.grid().n || ckpt.N != eng.grid().N)
        throw Error("resume_flow: checkpoint dimensions (n=" + std::to_string(ckpt.n) + ", N=" +
                    std::to_string(ckpt.N) + ") do not match the configured grid");
    if (cfg.config_hash != 0 && ckpt.config_hash != 0 && cfg.config_hash != ckpt.config_hash)
        throw Error("resume_flow: config hash mismatch; refusing to resume a different run");
    FlowState s = make_flow_state(eng, bundle, ckpt.phi);
    s.t = ckpt.t;
    s.step = ckpt.step;
    s.dt = ckpt.dt;
    return run_loop(eng, bundle, std::move(s), cfg);
}

double mean_removed_deviation(const RealField& a, const RealField& b) {
    if (!(a.grid == b.grid)) throw Error("mean_removed_deviation: grid mismatch");
    RealField d(a.grid);
    const std::int64_t len = a.size();
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::int64_t i = 0; i < len; ++i) d[i] = a[i] - b[i];
    const double mean = integrate(d);
    double sup = 0.0;
#pragma omp parallel for schedule(static) reduction(max : sup) num_threads(worker_threads())
    for (std::int64_t i = 0; i < len; ++i) sup = std::max(sup, std::abs(d[i] - mean));
    return sup;
}

UniquenessResult uniqueness_experiment(const SpectralEngine& eng, const BundleSpec& bundle,
                                       const RealField& phi0_a, const RealField& phi0_b,
                                       const FlowConfig& cfg) {
    UniquenessResult r;
    r.run_a = run_flow(eng, bundle, phi0_a, cfg);
    r.run_b = run_flow(eng, bundle, phi0_b, cfg);
    if (r.run_a.status != FlowStatus::Converged)
        throw Error(std::string("uniqueness_experiment: first run did not converge: ") + r.run_a.message);
    if (r.run_b.status != FlowStatus::Converged)
        throw Error(std::string("uniqueness_experiment: second run did not converge: ") + r.run_b.message);
    r.deviation = mean_removed_deviation(r.run_a.state.phi, r.run_b.state.phi);
    return r;
}

} // namespace dhym
