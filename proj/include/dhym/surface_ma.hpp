#pragma once

#include "dhym/flow.hpp"

namespace dhym {

/// n=2 Monge-Ampere route.  After the optional reflection to the dual bundle
/// the target phase sits in (0, pi) and the constant part of
/// M0 = cot(theta_hat) g + B + ddbar(psi0) is positive definite.
struct MASetup {
    BundleSpec bundle;
    bool reflected = false;
    double theta_hat = 0.0; // in (0, pi)
    double cot_hat = 0.0;
    double rhs_const = 0.0; // 1 + cot^2(theta_hat)
    double eps_pos = 1e-6;
    double stability_margin = 0.0;
    RealField psi0;    // background potential (negated when reflected)
    HermitianField M0; // cot*g + B + ddbar(psi0)
};

/// cot(theta_hat) = (1 - a2)/a1; a1 = 0 belongs to the degree-zero route.
double cot_hat_from_charges(double a1, double a2);

MASetup make_ma_setup(const SpectralEngine& eng, const KahlerData& g, const Mat& B,
                      const RealField& psi0, double eps_pos = 1e-6);

/// det(M0 + ddbar phi) - (1 + cot^2) det g, pointwise.
RealField ma_residual(const SpectralEngine& eng, const MASetup& setup, const RealField& phi);

enum class MAStatus { Converged, MaxSteps, PositivityLoss };
const char* to_string(MAStatus s);

struct MAOptions {
    double dt_safety = 0.8;
    double tol_residual = 1e-8;
    std::int64_t max_steps = 400000;
    int monitor_cadence = 10;
    double eps_pos = 1e-6;
    std::string csv_path;
};

struct MAResult {
    MAStatus status = MAStatus::MaxSteps;
    RealField phi; // normalized to sup phi = 0 on success
    double residual_sup = 0.0;
    double min_eig_final = 0.0;
    std::int64_t steps = 0;
    std::string message;
    double theta_dev = 0.0; // sup |theta - theta_hat| of the final metric
};

/// Parabolic log-determinant solve of the surface equation.
MAResult ma_solve(const SpectralEngine& eng, const MASetup& setup, const RealField& phi0,
                  const MAOptions& opts);

/// sup over the grid of the defining-equation residual of the curvature of
/// e^{-(psi0+phi)} h0, normalized by the volume density.
double verify_dhym_equivalence(const SpectralEngine& eng, const MASetup& setup, const RealField& phi);

/// Degree-zero case: solve tr_g(B + ddbar(psi0 + phi)) = 0 by a Poisson solve.
RealField degree_zero_solve(const SpectralEngine& eng, const KahlerData& g, const Mat& B,
                            const RealField& psi0);

struct CrossValidation {
    MAResult ma;
    FlowResult flow;
    double deviation = 0.0;     // mean-removed sup difference of the total potentials
    double ma_theta_dev = 0.0;  // sup |theta - theta_hat| of the MA metric
    double flow_theta_dev = 0.0;
};

/// Solve the same stable surface problem by both routes and compare.
CrossValidation cross_validate_routes(const SpectralEngine& eng, const KahlerData& g, const Mat& B,
                                      const RealField& psi0, const MAOptions& ma_opts,
                                      const FlowConfig& flow_cfg);

} // namespace dhym
