#pragma once

#include <complex>
#include <cstdint>
#include <new>
#include <stdexcept>
#include <string>
#include <vector>

namespace dhym {

using cplx = std::complex<double>;

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// 64-byte aligned allocator so field storage is directly usable by SIMD FFT plans.
template <class T>
struct AlignedAlloc {
    using value_type = T;
    AlignedAlloc() = default;
    template <class U>
    AlignedAlloc(const AlignedAlloc<U>&) {}
    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(64)));
    }
    void deallocate(T* p, std::size_t) { ::operator delete(p, std::align_val_t(64)); }
    template <class U>
    bool operator==(const AlignedAlloc<U>&) const { return true; }
};

using dvec = std::vector<double, AlignedAlloc<double>>;
using cvec = std::vector<cplx, AlignedAlloc<cplx>>;

/// Discrete flat torus: n complex dimensions, N real samples per axis,
/// 2n real axes of unit period, N^(2n) points total.  Axis ordering is
/// [x^1, y^1, ..., x^n, y^n] row-major with the last axis (y^n) fastest,
/// so complex axis j owns real axes 2j (x) and 2j+1 (y).
struct GridSpec {
    int n = 0;          // complex dimension, 1..3
    int N = 0;          // samples per real axis, even, >= 8
    std::int64_t npts = 0;

    double dx() const { return 1.0 / N; }
    int real_dim() const { return 2 * n; }
    bool operator==(const GridSpec&) const = default;
};

inline constexpr std::int64_t kDefaultPointBudget = 30'000'000;

GridSpec make_grid(int n, int N, std::int64_t point_budget = kDefaultPointBudget);

struct RealField {
    GridSpec grid;
    dvec v;

    RealField() = default;
    explicit RealField(const GridSpec& g) : grid(g), v(g.npts, 0.0) {}
    double& operator[](std::int64_t i) { return v[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return v[static_cast<std::size_t>(i)]; }
    std::int64_t size() const { return static_cast<std::int64_t>(v.size()); }
};

struct ComplexField {
    GridSpec grid;
    cvec v;

    ComplexField() = default;
    explicit ComplexField(const GridSpec& g) : grid(g), v(g.npts, cplx{}) {}
    cplx& operator[](std::int64_t i) { return v[static_cast<std::size_t>(i)]; }
    cplx operator[](std::int64_t i) const { return v[static_cast<std::size_t>(i)]; }
    std::int64_t size() const { return static_cast<std::int64_t>(v.size()); }
};

/// Grid of Hermitian n x n coefficient matrices M, with M(r,c) carrying the
/// barred index r and unbarred index c (curvature stores F(r,c) = F_{rbar c}).
/// Diagonal entries are real planes; strict-upper entries are stored as
/// separate re/im planes; the lower triangle is implied by conjugation.
struct HermitianField {
    GridSpec grid;
    int n = 0;
    std::vector<RealField> diag;                 // n planes
    std::vector<RealField> upper_re, upper_im;   // n(n-1)/2 planes each, (0,1),(0,2),(1,2)

    HermitianField() = default;
    HermitianField(const GridSpec& g, int n_) : grid(g), n(n_) {
        diag.assign(static_cast<std::size_t>(n), RealField(g));
        const int nu = n * (n - 1) / 2;
        upper_re.assign(static_cast<std::size_t>(nu), RealField(g));
        upper_im.assign(static_cast<std::size_t>(nu), RealField(g));
    }
    static int upper_index(int r, int c, int n) { return r * n - r * (r + 1) / 2 + (c - r - 1); }
    cplx entry(int r, int c, std::int64_t i) const {
        if (r == c) return diag[static_cast<std::size_t>(r)][i];
        if (r < c) {
            const int u = upper_index(r, c, n);
            return {upper_re[static_cast<std::size_t>(u)][i], upper_im[static_cast<std::size_t>(u)][i]};
        }
        const int u = upper_index(c, r, n);
        return {upper_re[static_cast<std::size_t>(u)][i], -upper_im[static_cast<std::size_t>(u)][i]};
    }
};

/// Grid of sorted real eigenvalue tuples, one plane per slot.
struct EigenField {
    GridSpec grid;
    int n = 0;
    std::vector<RealField> lam; // lam[0] <= ... <= lam[n-1] pointwise

    EigenField() = default;
    EigenField(const GridSpec& g, int n_) : grid(g), n(n_) {
        lam.assign(static_cast<std::size_t>(n), RealField(g));
    }
};

/// Grid of complex n-covectors (holomorphic components).
struct CovectorField {
    GridSpec grid;
    int n = 0;
    std::vector<ComplexField> comp;

    CovectorField() = default;
    CovectorField(const GridSpec& g, int n_) : grid(g), n(n_) {
        comp.assign(static_cast<std::size_t>(n), ComplexField(g));
    }
};

// ---------------------------------------------------------------------------
// Deterministic reductions.  Work is split into fixed-size chunks whose
// partials are combined pairwise in a fixed order, so results are
// bit-identical for any worker-thread count.
// ---------------------------------------------------------------------------

inline constexpr std::int64_t kReduceChunk = 8192;

namespace detail {
template <class F>
double pairwise_sum_impl(std::int64_t lo, std::int64_t hi, const F& f) {
    const std::int64_t len = hi - lo;
    if (len <= 32) {
        double s = 0.0;
        for (std::int64_t i = lo; i < hi; ++i) s += f(i);
        return s;
    }
    const std::int64_t mid = lo + len / 2;
    return pairwise_sum_impl(lo, mid, f) + pairwise_sum_impl(mid, hi, f);
}
} // namespace detail

template <class F>
double pairwise_sum(std::int64_t len, const F& f) {
    if (len == 0) return 0.0;
    return detail::pairwise_sum_impl(0, len, f);
}

double sum_array(const double* v, std::int64_t len);
cplx sum_array(const cplx* v, std::int64_t len);
double max_abs_array(const double* v, std::int64_t len);

double integrate(const RealField& f);
cplx integrate(const ComplexField& f);
double max_abs(const RealField& f);

/// Worker threads used by pointwise maps; results never depend on this.
int worker_threads();
void set_worker_threads(int k);

/// Minimal xorshift generator with a pinned stream: identical sequences on
/// every platform and build, which the determinism contracts rely on.
struct PinnedRng {
    std::uint64_t state;

    explicit PinnedRng(std::uint64_t seed) : state(seed * 0x9E3779B97F4A7C15ull + 0x2545F4914F6CDD1Dull) {}
    std::uint64_t next_u64() {
        state ^= state >> 12;
        state ^= state << 25;
        state ^= state >> 27;
        return state * 0x2545F4914F6CDD1Dull;
    }
    double unit() { return static_cast<double>(next_u64() >> 11) * 0x1p-53; } // [0, 1)
    double sym(double a) { return a * (2.0 * unit() - 1.0); }                // (-a, a)
    /// standard normal via Box-Muller on the pinned stream
    double gauss() {
        const double u1 = unit(), u2 = unit();
        return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }
};

} // namespace dhym
