#pragma once

#include <cstdint>

#include "dhym/core.hpp"
#include "dhym/linalg.hpp"

// Forward declarations of FFTW opaque types so this header stays light.
struct fftw_plan_s;

namespace dhym {

/// Half-spectrum of a real field in r2c layout (last axis 0..N/2), holding
/// UNNORMALIZED forward-transform values (plain sums over the grid, not
/// means).  Consumers fold the 1/npts normalization into their multipliers.
struct Spectrum {
    GridSpec grid;
    cvec v;

    Spectrum() = default;
    explicit Spectrum(const GridSpec& g) : grid(g), v(static_cast<std::size_t>(g.npts / g.N) * (g.N / 2 + 1), cplx{}) {}
    std::int64_t rows() const { return grid.npts / grid.N; }
    int cols() const { return grid.N / 2 + 1; }
    std::int64_t size() const { return static_cast<std::int64_t>(v.size()); }
};

/// Spectral calculus on the discrete torus.
///
/// Conventions, fixed once for the whole project:
///   z^j = x^j + i y^j,  d/dz^j = (d/dx^j - i d/dy^j)/2,
///   d/dzbar^j = (d/dx^j + i d/dy^j)/2.
/// A mode exp(2 pi i (p.x + q.y)) therefore has
///   dz multiplier  w_j = pi (q_j + i p_j),   dzbar multiplier -conj(w_j).
/// First-derivative multipliers annihilate the Nyquist frequency (results are
/// exact for |m| <= N/2 - 1); pure second derivatives d_j d_jbar keep the full
/// Nyquist term pi^2 (p_j^2 + q_j^2).
///
/// The complex Hessian is stored with ddbar(phi)(r,c) = d_c d_rbar phi, so the
/// curvature of e^{-phi} h0 is F(r,c) = B(r,c) + ddbar(phi)(r,c).
class SpectralEngine {
public:
    explicit SpectralEngine(const GridSpec& g);
    ~SpectralEngine();
    SpectralEngine(const SpectralEngine&) = delete;
    SpectralEngine& operator=(const SpectralEngine&) = delete;

    const GridSpec& grid() const { return grid_; }

    Spectrum forward(const RealField& f) const;
    void forward_into(const RealField& f, Spectrum& s) const;
    RealField inverse_real(const Spectrum& s) const;
    double mean_of(const Spectrum& s) const { return s.v[0].real() / static_cast<double>(grid_.npts); }

    ComplexField dz(const ComplexField& f, int j) const;
    ComplexField dzbar(const ComplexField& f, int j) const;
    ComplexField dz(const RealField& f, int j) const;
    ComplexField dzbar(const RealField& f, int j) const;

    void ddbar(const Spectrum& phiHat, HermitianField& out) const;
    HermitianField ddbar(const RealField& phi) const;

    /// Both ddbar evaluation routes produce identical fields; Auto picks the
    /// faster one for the grid.  Pinning a strategy is intended for tests.
    enum class DdbarStrategy { Auto, HalfSpectrum, PackedComplex };
    void set_ddbar_strategy(DdbarStrategy s) { strategy_ = s; }

    /// comp[j] = d_{z^j} f for a real scalar f given by its spectrum.
    CovectorField holomorphic_gradient(const Spectrum& fHat) const;

    /// out = d_{z^l} (ddbar phi)(r,c) for any index pair.  When `frame` is
    /// given, every derivative index is contracted with it first (used to
    /// evaluate g-norms through w -> g^{-1/2} w in Fourier space).
    void ddbar_deriv(const Spectrum& phiHat, int l, int r, int c, ComplexField& out,
                     const Mat* frame = nullptr) const;

    /// Solve g^{j kbar} d_j d_kbar u = rho with mean-zero rho; u has mean zero.
    RealField poisson_solve(const RealField& rho, const Mat& ginv, double mean_tol = 1e-10) const;

    /// Deterministic mean-zero band-limited field with sup-norm = amplitude.
    RealField random_band_limited(std::uint64_t seed, int bandwidth, double amplitude) const;

private:
    struct Plans;

    void build_ddbar_half(const Spectrum& phiHat, HermitianField& out) const;
    void build_ddbar_packed(const Spectrum& phiHat, HermitianField& out) const;
    // Expand mult(m) * phiHat(m) over the full lattice into dst; parity is the
    // sign of mult under m -> -m (multipliers here are exactly even or odd).
    template <class MulFn>
    void expand_full(const Spectrum& phiHat, int parity, cvec& dst, const MulFn& mul) const;
    std::int64_t mirror_row(std::int64_t row) const;

    GridSpec grid_;
    double scale_ = 0.0; // 1/npts
    std::vector<int> sf_;   // signed frequency per axis index (Nyquist = +N/2)
    std::vector<int> sfz_;  // signed frequency with Nyquist zeroed
    Plans* plans_ = nullptr;
    DdbarStrategy strategy_ = DdbarStrategy::Auto;
    mutable std::vector<cvec> halfbuf_; // scratch half-spectra for builds
    mutable cvec fullbuf_;              // scratch full lattice
    mutable cvec fullbuf2_;
};

} // namespace dhym
