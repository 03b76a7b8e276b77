#pragma once

#include <span>
#include <vector>

#include "dhym/core.hpp"
#include "dhym/linalg.hpp"
#include "dhym/spectral.hpp"

namespace dhym {

/// Constant Kahler metric on the flat torus.  g(r,c) = g_{rbar c} is Hermitian
/// positive definite; the inverse and inverse square root are precomputed so
/// pencil computations go through the Hermitian similarity g^{-1/2} F g^{-1/2}.
struct KahlerData {
    Mat g;
    Mat ginv;
    Mat isqrt;     // g^{-1/2}
    double det_g = 1.0;
    bool is_identity = true;

    static KahlerData make(const Mat& g);
    static KahlerData identity(int n);
};

/// Line bundle data: constant background curvature matrix B (the curvature of
/// the reference metric h0) over a Kahler torus.
struct BundleSpec {
    KahlerData metric;
    Mat B;
    bool ample = false; // g^{-1} B positive definite

    static BundleSpec make(const KahlerData& g, const Mat& B);
    int n() const { return B.n; }
};

// --- pointwise maps on eigenvalue tuples -----------------------------------

cplx zeta_pointwise(std::span<const double> lam);
double theta_pointwise(std::span<const double> lam);
double vmod_pointwise(std::span<const double> lam);

// --- field operations -------------------------------------------------------

/// F = B + ddbar(phi).
HermitianField curvature(const SpectralEngine& eng, const BundleSpec& bundle, const RealField& phi);

/// Sorted eigenvalues of K = g^{-1} F at every point.
EigenField endo_eigenvalues(const KahlerData& g, const HermitianField& F);

ComplexField zeta_field(const EigenField& lam);
RealField theta_field(const EigenField& lam);
RealField vmod_field(const EigenField& lam);

/// Induced metric eta = g + F g^{-1} F and its pointwise inverse.
HermitianField eta(const KahlerData& g, const HermitianField& F);
HermitianField eta_inverse(const HermitianField& eta_field, double cond_limit = 1e12);

/// Calibration density kappa = Re(e^{-i theta_hat} zeta/|zeta|).
RealField kappa(const ComplexField& zeta, double theta_hat);

/// Stability form coefficient matrix c*g + F with c = cot(theta_hat) for n=2
/// and c = -tan(theta_hat - (n-1) pi/2) in the supercritical higher-dimensional case.
HermitianField omega_stability_form(const KahlerData& g, const HermitianField& F, double theta_hat, int n);
double omega_coefficient(double theta_hat, int n);

/// |F|_g^2 at one point given the matrix in the orthonormal frame.
double matrix_norm_sq_g(const KahlerData& g, const Mat& F);

// --- fused scan used by the flow --------------------------------------------

/// Grid reductions produced in one pass over the curvature data.
struct PhaseScanStats {
    cplx zeta_sum{};
    double v_sum = 0.0;
    double theta_sum = 0.0;
    double theta_min = 0.0, theta_max = 0.0;
    double lam_min = 0.0, lam_max = 0.0;
    double min_lam_sq = 0.0; // min over grid and slots of lambda_j^2
    double v_max = 0.0;
    double kappa_max = -1.0; // cos(theta - anchor)

    std::int64_t npts = 0;
    cplx z_invariant() const { return zeta_sum / static_cast<double>(npts); }
    double volume() const { return v_sum / static_cast<double>(npts); }
    double theta_mean() const { return theta_sum / static_cast<double>(npts); }
};

/// One pass over F = B + hess computing the phase field and all cheap
/// reductions.  `anchor` is the target phase used for the kappa reduction.
/// theta_out must be allocated on the same grid.
PhaseScanStats phase_scan(const BundleSpec& bundle, const HermitianField& hess, double anchor,
                          RealField& theta_out);

/// Same pass, additionally writing the sorted eigenvalue planes.
PhaseScanStats phase_scan_full(const BundleSpec& bundle, const HermitianField& hess, double anchor,
                               RealField& theta_out, EigenField& lam_out);

// --- identity oracles --------------------------------------------------------

/// || (I+iK)^{-1} - [(I+K^2)^{-1} - iK(I+K^2)^{-1}] ||_F for Hermitian K.
double oracle_ident(const Mat& K);

/// || g^{-1} - [eta^{-1} + eta^{-1} F g^{-1} F g^{-1}] ||_F at one matrix pair.
double oracle_ginverse(const Mat& g, const Mat& F);
/// Max of the same residual over a curvature field.
double oracle_ginverse_field(const KahlerData& g, const HermitianField& F);

/// | lifted arg det(I+iK) - sum_j arctan(lambda_j) |; the determinant route is
/// evaluated independently of the eigenvalue route.
double oracle_theta_log_vs_arctan(const Mat& K);

struct DeltaThetaReport {
    std::vector<double> eps;
    std::vector<double> fd_error; // |central difference - trace formula|
    double observed_order = 0.0;  // slope over the first decade
};
/// Central-difference check of the variation formula
/// d theta = Tr((I+K^2)^{-1} dK).
DeltaThetaReport oracle_delta_theta(const Mat& K, const Mat& dK, std::span<const double> eps);

} // namespace dhym
