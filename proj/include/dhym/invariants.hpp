#pragma once

#include <string>

#include "dhym/geometry.hpp"

namespace dhym {

/// Principal argument of Z lifted by a multiple of 2 pi to the branch nearest
/// `anchor` (the grid mean of the phase field); must land in (-n pi/2, n pi/2).
double lift_target_phase(cplx Z, double anchor, int n);

cplx z_invariant(const SpectralEngine& eng, const BundleSpec& bundle, const RealField& phi);
double volume_functional(const SpectralEngine& eng, const BundleSpec& bundle, const RealField& phi);

struct PhaseFlags {
    bool supercritical = false;
    bool hypercritical = false;
};
/// Evaluated as min over the grid of |theta|.
PhaseFlags phase_flags(const RealField& theta, int n);
/// Conservative variant from grid extrema only (sign-definite fields exact).
PhaseFlags phase_flags_minmax(double theta_min, double theta_max, int n);

struct StabilityResult {
    bool stable = false;
    double margin = 0.0; // min eigenvalue of the (c g + B, g) pencil
    bool reflected = false;   // checked on the dual bundle (-B)
    bool degree_zero = false; // theta_hat = 0 route
    std::string note;
};
/// Positivity of the stability form decided by the constant representative.
StabilityResult stability_check(const KahlerData& g, const Mat& B, double theta_hat, int n);

/// The two n=2 charge routes: from Z_L = 1 - a2 + i a1 and from the form
/// integrals a1 = int tr(g^-1 F), a2 = int det(g^-1 F).
struct SurfaceCharges {
    double a1_zeta = 0.0, a2_zeta = 0.0;
    double a1_form = 0.0, a2_form = 0.0;
};
SurfaceCharges surface_charges(const KahlerData& g, const HermitianField& F, cplx Z);

/// H_j = eta^{p qbar} d_j F_{qbar p} (the local-coordinates route).
CovectorField mean_curvature(const SpectralEngine& eng, const HermitianField& eta_inv,
                             const HermitianField& F);

/// |H|^2_eta = eta^{j kbar} H_j conj(H_k); nonnegative.
RealField h_norm_sq(const CovectorField& H, const HermitianField& eta_inv);

/// |grad F|^2_g from the potential spectrum (the constant background drops out).
RealField grad_F_norm_sq(const SpectralEngine& eng, const Spectrum& phiHat, const KahlerData& g);

/// V - |Z|; the calibration inequality demands this be >= -1e-10.
double calibration_bound(double V, double absZ);

struct InvariantReport {
    int n = 0;
    cplx Z{};
    double abs_Z = 0.0;
    double theta_hat = 0.0;
    double a1 = 0.0, a2 = 0.0;
    bool has_a12 = false;
    double V = 0.0;
    double theta_min = 0.0, theta_max = 0.0;
    bool supercritical = false, hypercritical = false;
    bool ample = false, stable = false;
    double stability_margin = 0.0;
    bool degree_zero = false;

    std::string to_kv_text() const;
};

InvariantReport compute_invariants(const SpectralEngine& eng, const BundleSpec& bundle,
                                   const RealField& phi);

} // namespace dhym
