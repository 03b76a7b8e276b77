#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dhym/checkpoint.hpp"
#include "dhym/invariants.hpp"

namespace dhym {

enum class Integrator { Euler, RK4 };

struct FlowConfig {
    double dt_safety = 0.8; // sigma in (0, 1]
    Integrator integrator = Integrator::RK4;
    double tol_theta = 1e-8;
    std::int64_t max_steps = 500000;
    int monitor_cadence = 10;
    double monotonicity_slack = 1e-10;
    double grad_blowup_factor = 1e3;
    double theta_hat_drift_limit = 1e-9;
    bool require_hypercritical = false;
    bool record_per_step = false; // keep per-step extrema series in memory
    std::string csv_path;         // diagnostics stream (empty = none)
    std::string checkpoint_path;  // written at termination (empty = none)
    std::uint64_t config_hash = 0;

    void validate() const;
};

struct FlowState {
    RealField phi;
    Spectrum phi_hat;    // forward(phi), kept in sync with phi
    HermitianField hess; // ddbar(phi)
    RealField theta;
    PhaseScanStats stats;
    double theta_hat = 0.0;
    double t = 0.0;
    std::int64_t step = 0;
    double dt = 0.0;

    double sup_theta_dev() const {
        return std::max(std::abs(stats.theta_max - theta_hat), std::abs(stats.theta_min - theta_hat));
    }
};

/// Quantities of the monitored-record contract, one row per cadence step.
struct DiagnosticsRecord {
    double t = 0, dt = 0, V = 0, abs_Z = 0, theta_hat = 0;
    double theta_min = 0, theta_max = 0, sup_theta_dev = 0;
    double v_max = 0, h_sq_max = 0, grad_F_sq_max = 0;
    double lam_min = 0, lam_max = 0;
    double omega_min_eig = 0; // n = 2 only, NaN otherwise
    double kappa_max = 0;
    // kept in memory for the gradient-flow cross-check; not a CSV column
    double h_sq_v_integral = 0;
};

/// Cheap per-step extrema kept in memory when record_per_step is set.
struct StepRecord {
    double t = 0, dt = 0, V = 0;
    double theta_min = 0, theta_max = 0, v_max = 0, lam_min = 0;
    double theta_hat = 0, sup_theta_dev = 0, drift = 0;
};

enum class FlowStatus { Converged, MaxSteps, MonitorViolation, NonFinite };
const char* to_string(FlowStatus s);

struct FlowResult {
    FlowStatus status = FlowStatus::MaxSteps;
    FlowState state;
    std::vector<DiagnosticsRecord> diagnostics;
    std::vector<StepRecord> per_step;
    double max_theta_hat_drift = 0.0;
    double initial_grad_sq = 0.0;
    std::string message;
    double wall_seconds = 0.0;
};

/// theta - theta_hat; the mean is deliberately not projected out.
RealField flow_rhs(const FlowState& state);

/// dt = sigma dx^2 / (pi^2 n Lambda) with Lambda the largest eigenvalue of
/// eta^{-1} against g over the grid, capped at 10x the Lambda = 1 value.
double cfl_dt(const FlowState& state, const FlowConfig& cfg);

/// One explicit step (all stages re-derive curvature data spectrally).
FlowState flow_step(const SpectralEngine& eng, const BundleSpec& bundle, const FlowState& state,
                    double dt, Integrator integ);

FlowState make_flow_state(const SpectralEngine& eng, const BundleSpec& bundle, const RealField& phi0);

FlowResult run_flow(const SpectralEngine& eng, const BundleSpec& bundle, const RealField& phi0,
                    const FlowConfig& cfg);
FlowResult resume_flow(const SpectralEngine& eng, const BundleSpec& bundle, const CheckpointData& ckpt,
                       const FlowConfig& cfg);

struct UniquenessResult {
    FlowResult run_a, run_b;
    double deviation = 0.0; // sup |(phi_a - phi_b) - mean(phi_a - phi_b)|
};
UniquenessResult uniqueness_experiment(const SpectralEngine& eng, const BundleSpec& bundle,
                                       const RealField& phi0_a, const RealField& phi0_b,
                                       const FlowConfig& cfg);

/// Mean-removed difference sup-norm, the uniqueness metric.
double mean_removed_deviation(const RealField& a, const RealField& b);

} // namespace dhym
