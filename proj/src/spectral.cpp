#include "dhym/spectral.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <mutex>

#include <fftw3.h>
#include <omp.h>

namespace dhym {

namespace {

std::mutex g_planner_mutex; // FFTW planner is not thread-safe
std::once_flag g_fft_once;

void fft_global_init() {
    std::call_once(g_fft_once, [] { fftw_init_threads(); });
}

inline fftw_complex* fc(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }
inline const fftw_complex* fc(const cplx* p) { return reinterpret_cast<const fftw_complex*>(p); }

} // namespace

struct SpectralEngine::Plans {
    fftw_plan r2c = nullptr;
    fftw_plan c2r = nullptr;
    fftw_plan fwd_ip = nullptr; // in-place complex forward
    fftw_plan bwd_ip = nullptr; // in-place complex backward
    double* wr = nullptr;
    fftw_complex* wh = nullptr;
    fftw_complex* wc = nullptr;
};

SpectralEngine::SpectralEngine(const GridSpec& g) : grid_(g) {
    fft_global_init();
    scale_ = 1.0 / static_cast<double>(g.npts);
    sf_.resize(static_cast<std::size_t>(g.N));
    sfz_.resize(static_cast<std::size_t>(g.N));
    for (int i = 0; i < g.N; ++i) {
        sf_[static_cast<std::size_t>(i)] = (i <= g.N / 2) ? i : i - g.N;
        sfz_[static_cast<std::size_t>(i)] = (i == g.N / 2) ? 0 : sf_[static_cast<std::size_t>(i)];
    }
    const std::int64_t half = (g.npts / g.N) * (g.N / 2 + 1);

    plans_ = new Plans;
    std::lock_guard<std::mutex> lock(g_planner_mutex);
    // Fixed decomposition: two-way threaded transforms for large grids, serial
    // for small ones.  The choice depends only on the grid, never on the
    // runtime thread budget, so outputs are reproducible.
    fftw_plan_with_nthreads(g.npts >= (std::int64_t{1} << 17) ? 2 : 1);
    plans_->wr = fftw_alloc_real(static_cast<std::size_t>(g.npts));
    plans_->wh = fftw_alloc_complex(static_cast<std::size_t>(half));
    plans_->wc = fftw_alloc_complex(static_cast<std::size_t>(g.npts));
    std::array<int, 6> dims{};
    for (int a = 0; a < g.real_dim(); ++a) dims[static_cast<std::size_t>(a)] = g.N;
    plans_->r2c = fftw_plan_dft_r2c(g.real_dim(), dims.data(), plans_->wr, plans_->wh, FFTW_ESTIMATE);
    plans_->c2r = fftw_plan_dft_c2r(g.real_dim(), dims.data(), plans_->wh, plans_->wr, FFTW_ESTIMATE);
    plans_->fwd_ip = fftw_plan_dft(g.real_dim(), dims.data(), plans_->wc, plans_->wc, FFTW_FORWARD, FFTW_ESTIMATE);
    plans_->bwd_ip = fftw_plan_dft(g.real_dim(), dims.data(), plans_->wc, plans_->wc, FFTW_BACKWARD, FFTW_ESTIMATE);
    if (!plans_->r2c || !plans_->c2r || !plans_->fwd_ip || !plans_->bwd_ip)
        throw Error("SpectralEngine: FFTW plan creation failed");
}

SpectralEngine::~SpectralEngine() {
    std::lock_guard<std::mutex> lock(g_planner_mutex);
    fftw_destroy_plan(plans_->r2c);
    fftw_destroy_plan(plans_->c2r);
    fftw_destroy_plan(plans_->fwd_ip);
    fftw_destroy_plan(plans_->bwd_ip);
    fftw_free(plans_->wr);
    fftw_free(plans_->wh);
    fftw_free(plans_->wc);
    delete plans_;
}

Spectrum SpectralEngine::forward(const RealField& f) const {
    Spectrum s(grid_);
    forward_into(f, s);
    return s;
}

void SpectralEngine::forward_into(const RealField& f, Spectrum& s) const {
    if (!(f.grid == grid_)) throw Error("forward: grid mismatch");
    if (!(s.grid == grid_)) s = Spectrum(grid_);
    // out-of-place r2c preserves its input
    fftw_execute_dft_r2c(plans_->r2c, const_cast<double*>(f.v.data()), fc(s.v.data()));
}

RealField SpectralEngine::inverse_real(const Spectrum& s) const {
    RealField out(grid_);
    const std::int64_t len = s.size();
    cvec tmp(s.v); // c2r clobbers its input
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::int64_t i = 0; i < len; ++i) tmp[static_cast<std::size_t>(i)] *= scale_;
    fftw_execute_dft_c2r(plans_->c2r, fc(tmp.data()), out.v.data());
    return out;
}

std::int64_t SpectralEngine::mirror_row(std::int64_t row) const {
    const int L = grid_.real_dim() - 1;
    const int N = grid_.N;
    std::int64_t m = 0, r = row;
    std::array<int, 5> idx{};
    for (int a = L - 1; a >= 0; --a) {
        idx[static_cast<std::size_t>(a)] = static_cast<int>(r % N);
        r /= N;
    }
    for (int a = 0; a < L; ++a) {
        const int i = idx[static_cast<std::size_t>(a)];
        m = m * N + (i == 0 ? 0 : N - i);
    }
    return m;
}

namespace {
// Per-point multiplier data handed to the half-lattice loops.
struct ModeData {
    std::array<cplx, 3> w;     // first-derivative dz multipliers, Nyquist zeroed
    std::array<double, 3> wsq; // pi^2 (p^2 + q^2), full Nyquist
};
} // namespace

// Iterates the half lattice, calling fn(pointIndex, row, k, md) with md the
// per-point multiplier data.  Rows are chunked; arithmetic per point is fixed,
// so results never depend on the thread count.
template <class Fn>
static void for_each_half_point(const GridSpec& grid, const std::vector<int>& sf,
                                const std::vector<int>& sfz, const Fn& fn) {
    const int N = grid.N;
    const int n = grid.n;
    const int L = 2 * n - 1;
    const int cols = N / 2 + 1;
    const std::int64_t rows = grid.npts / N;
    const double pi = M_PI;

#pragma omp parallel num_threads(worker_threads())
    {
        const int nt = omp_get_num_threads();
        const int tid = omp_get_thread_num();
        const std::int64_t lo = rows * tid / nt;
        const std::int64_t hi = rows * (tid + 1) / nt;
        std::array<int, 5> idx{};
        std::int64_t r = lo;
        for (int a = L - 1; a >= 0; --a) {
            idx[static_cast<std::size_t>(a)] = static_cast<int>(r % N);
            r /= N;
        }
        for (std::int64_t row = lo; row < hi; ++row) {
            ModeData md{};
            // complex axes 0..n-2 fully determined by the row
            for (int j = 0; j + 1 < n; ++j) {
                const int p = idx[static_cast<std::size_t>(2 * j)];
                const int q = idx[static_cast<std::size_t>(2 * j + 1)];
                md.w[static_cast<std::size_t>(j)] =
                    pi * cplx(sfz[static_cast<std::size_t>(q)], sfz[static_cast<std::size_t>(p)]);
                const double pf = sf[static_cast<std::size_t>(p)], qf = sf[static_cast<std::size_t>(q)];
                md.wsq[static_cast<std::size_t>(j)] = pi * pi * (pf * pf + qf * qf);
            }
            const int plast = idx[static_cast<std::size_t>(2 * n - 2)];
            const double pz = pi * sfz[static_cast<std::size_t>(plast)];
            const double pf = sf[static_cast<std::size_t>(plast)];
            const std::int64_t base = row * cols;
            for (int k = 0; k < cols; ++k) {
                const double qz = (k == N / 2) ? 0.0 : pi * k;
                md.w[static_cast<std::size_t>(n - 1)] = cplx(qz, pz);
                md.wsq[static_cast<std::size_t>(n - 1)] =
                    pi * pi * (pf * pf) + pi * pi * static_cast<double>(k) * static_cast<double>(k);
                fn(base + k, row, k, md);
            }
            for (int a = L - 1; a >= 0; --a) {
                if (++idx[static_cast<std::size_t>(a)] < N) break;
                idx[static_cast<std::size_t>(a)] = 0;
            }
        }
    }
}

void SpectralEngine::build_ddbar_half(const Spectrum& phiHat, HermitianField& out) const {
    const int n = grid_.n;
    const int nbuf = n * n;
    const std::int64_t half = phiHat.size();
    if (halfbuf_.size() < static_cast<std::size_t>(nbuf)) halfbuf_.resize(static_cast<std::size_t>(nbuf));
    for (auto& b : halfbuf_)
        if (b.size() != static_cast<std::size_t>(half)) b.assign(static_cast<std::size_t>(half), cplx{});

    // buffers: [0..n-1] diagonals, then per upper entry (re, im)
    cplx* bufs[9];
    for (int i = 0; i < nbuf; ++i) bufs[i] = halfbuf_[static_cast<std::size_t>(i)].data();
    const double sc = scale_;
    const cplx* ph = phiHat.v.data();

    for_each_half_point(grid_, sf_, sfz_, [&](std::int64_t i, std::int64_t, int, const ModeData& md) {
        const cplx p = ph[i];
        for (int j = 0; j < n; ++j) bufs[j][i] = (-sc * md.wsq[static_cast<std::size_t>(j)]) * p;
        int u = 0;
        for (int r = 0; r < n; ++r)
            for (int c = r + 1; c < n; ++c, ++u) {
                // ddbar(phi)(r,c) = d_c d_rbar phi -> multiplier -w_c conj(w_r)
                const cplx mu = -sc * md.w[static_cast<std::size_t>(c)] * std::conj(md.w[static_cast<std::size_t>(r)]);
                bufs[n + 2 * u][i] = mu.real() * p;
                bufs[n + 2 * u + 1][i] = mu.imag() * p;
            }
    });

    for (int j = 0; j < n; ++j)
        fftw_execute_dft_c2r(plans_->c2r, fc(bufs[j]), out.diag[static_cast<std::size_t>(j)].v.data());
    int u = 0;
    for (int r = 0; r < n; ++r)
        for (int c = r + 1; c < n; ++c, ++u) {
            fftw_execute_dft_c2r(plans_->c2r, fc(bufs[n + 2 * u]), out.upper_re[static_cast<std::size_t>(u)].v.data());
            fftw_execute_dft_c2r(plans_->c2r, fc(bufs[n + 2 * u + 1]), out.upper_im[static_cast<std::size_t>(u)].v.data());
        }
}

void SpectralEngine::build_ddbar_packed(const Spectrum& phiHat, HermitianField& out) const {
    // n == 2 fast path for large grids: one packed complex transform yields
    // both diagonals, a second yields the off-diagonal entry.
    const int N = grid_.N;
    const std::int64_t npts = grid_.npts;
    if (fullbuf_.size() != static_cast<std::size_t>(npts)) fullbuf_.assign(static_cast<std::size_t>(npts), cplx{});
    if (fullbuf2_.size() != static_cast<std::size_t>(npts)) fullbuf2_.assign(static_cast<std::size_t>(npts), cplx{});
    cplx* A = fullbuf_.data();
    cplx* B = fullbuf2_.data();
    const cplx* ph = phiHat.v.data();
    const double sc = scale_;

    std::vector<std::int64_t> mrow(static_cast<std::size_t>(npts / N));
    const std::int64_t rows = npts / N;
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::int64_t r = 0; r < rows; ++r) mrow[static_cast<std::size_t>(r)] = mirror_row(r);

    for_each_half_point(grid_, sf_, sfz_, [&](std::int64_t i, std::int64_t row, int k, const ModeData& md) {
        const cplx p = ph[i];
        const cplx pc = std::conj(p);
        const cplx pair = sc * cplx(-md.wsq[0], -md.wsq[1]); // mu00 + i mu11 (both real)
        const cplx mu01 = -sc * md.w[1] * std::conj(md.w[0]);
        const std::int64_t f = row * N + k;
        A[f] = pair * p;
        B[f] = mu01 * p;
        const std::int64_t g = mrow[static_cast<std::size_t>(row)] * N + ((N - k) % N);
        // both multipliers are even under m -> -m
        A[g] = pair * pc;
        B[g] = mu01 * pc;
    });

    fftw_execute_dft(plans_->bwd_ip, fc(A), fc(A));
    fftw_execute_dft(plans_->bwd_ip, fc(B), fc(B));

    double* d0 = out.diag[0].v.data();
    double* d1 = out.diag[1].v.data();
    double* ure = out.upper_re[0].v.data();
    double* uim = out.upper_im[0].v.data();
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::int64_t i = 0; i < npts; ++i) {
        d0[i] = A[i].real();
        d1[i] = A[i].imag();
        ure[i] = B[i].real();
        uim[i] = B[i].imag();
    }
}

void SpectralEngine::ddbar(const Spectrum& phiHat, HermitianField& out) const {
    if (!(out.grid == grid_) || out.n != grid_.n) out = HermitianField(grid_, grid_.n);
    bool packed = grid_.n == 2 && grid_.N >= 44;
    if (strategy_ == DdbarStrategy::HalfSpectrum) packed = false;
    if (strategy_ == DdbarStrategy::PackedComplex) {
        if (grid_.n != 2) throw Error("ddbar: the packed route is an n = 2 evaluation");
        packed = true;
    }
    if (packed) build_ddbar_packed(phiHat, out);
    else build_ddbar_half(phiHat, out);
}

HermitianField SpectralEngine::ddbar(const RealField& phi) const {
    HermitianField out(grid_, grid_.n);
    ddbar(forward(phi), out);
    return out;
}

template <class MulFn>
void SpectralEngine::expand_full(const Spectrum& phiHat, int parity, cvec& dst, const MulFn& mul) const {
    const int N = grid_.N;
    const std::int64_t npts = grid_.npts;
    if (dst.size() != static_cast<std::size_t>(npts)) dst.assign(static_cast<std::size_t>(npts), cplx{});
    cplx* D = dst.data();
    const cplx* ph = phiHat.v.data();
    const double par = static_cast<double>(parity);

    const std::int64_t rows = npts / N;
    std::vector<std::int64_t> mrow(static_cast<std::size_t>(rows));
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::int64_t r = 0; r < rows; ++r) mrow[static_cast<std::size_t>(r)] = mirror_row(r);

    for_each_half_point(grid_, sf_, sfz_, [&](std::int64_t i, std::int64_t row, int k, const ModeData& md) {
        const cplx m = mul(md);
        const cplx v = m * ph[i];
        D[row * N + k] = v;
        D[mrow[static_cast<std::size_t>(row)] * N + ((N - k) % N)] = par * m * std::conj(ph[i]);
    });
}

CovectorField SpectralEngine::holomorphic_gradient(const Spectrum& fHat) const {
    CovectorField out(grid_, grid_.n);
    for (int j = 0; j < grid_.n; ++j) {
        cvec& dst = out.comp[static_cast<std::size_t>(j)].v;
        const double sc = scale_;
        expand_full(fHat, -1, dst, [&, j](const ModeData& md) { return sc * md.w[static_cast<std::size_t>(j)]; });
        fftw_execute_dft(plans_->bwd_ip, fc(dst.data()), fc(dst.data()));
    }
    return out;
}

void SpectralEngine::ddbar_deriv(const Spectrum& phiHat, int l, int r, int c, ComplexField& out,
                                 const Mat* frame) const {
    if (!(out.grid == grid_)) out = ComplexField(grid_);
    const double sc = scale_;
    const int n = grid_.n;
    // multiplier w_l * (-w_c conj(w_r)) is odd under m -> -m
    expand_full(phiHat, -1, out.v, [&, l, r, c](const ModeData& md) {
        if (!frame)
            return -sc * md.w[static_cast<std::size_t>(l)] * md.w[static_cast<std::size_t>(c)] *
                   std::conj(md.w[static_cast<std::size_t>(r)]);
        std::array<cplx, 3> wt{};
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) wt[static_cast<std::size_t>(a)] += frame->at(a, b) * md.w[static_cast<std::size_t>(b)];
        return -sc * wt[static_cast<std::size_t>(l)] * wt[static_cast<std::size_t>(c)] *
               std::conj(wt[static_cast<std::size_t>(r)]);
    });
    fftw_execute_dft(plans_->bwd_ip, fc(out.v.data()), fc(out.v.data()));
}

namespace {
// Full-lattice signed frequencies for the complex-input derivative paths.
template <class Fn>
void for_each_full_point(const GridSpec& grid, const std::vector<int>& sfz, const Fn& fn) {
    const int N = grid.N;
    const int n = grid.n;
    const int L = 2 * n;
    const std::int64_t npts = grid.npts;
    const double pi = M_PI;
#pragma omp parallel num_threads(worker_threads())
    {
        const int nt = omp_get_num_threads();
        const int tid = omp_get_thread_num();
        const std::int64_t lo = npts * tid / nt;
        const std::int64_t hi = npts * (tid + 1) / nt;
        std::array<int, 6> idx{};
        std::int64_t r = lo;
        for (int a = L - 1; a >= 0; --a) {
            idx[static_cast<std::size_t>(a)] = static_cast<int>(r % N);
            r /= N;
        }
        for (std::int64_t i = lo; i < hi; ++i) {
            std::array<cplx, 3> w{};
            for (int j = 0; j < n; ++j) {
                const int p = idx[static_cast<std::size_t>(2 * j)];
                const int q = idx[static_cast<std::size_t>(2 * j + 1)];
                w[static_cast<std::size_t>(j)] =
                    pi * cplx(sfz[static_cast<std::size_t>(q)], sfz[static_cast<std::size_t>(p)]);
            }
            fn(i, w);
            for (int a = L - 1; a >= 0; --a) {
                if (++idx[static_cast<std::size_t>(a)] < N) break;
                idx[static_cast<std::size_t>(a)] = 0;
            }
        }
    }
}
} // namespace

ComplexField SpectralEngine::dz(const ComplexField& f, int j) const {
    if (j < 0 || j >= grid_.n) throw Error("dz: axis out of range");
    ComplexField out = f;
    fftw_execute_dft(plans_->fwd_ip, fc(out.v.data()), fc(out.v.data()));
    const double sc = scale_;
    for_each_full_point(grid_, sfz_, [&](std::int64_t i, const std::array<cplx, 3>& w) {
        out.v[static_cast<std::size_t>(i)] *= sc * w[static_cast<std::size_t>(j)];
    });
    fftw_execute_dft(plans_->bwd_ip, fc(out.v.data()), fc(out.v.data()));
    return out;
}

ComplexField SpectralEngine::dzbar(const ComplexField& f, int j) const {
    if (j < 0 || j >= grid_.n) throw Error("dzbar: axis out of range");
    ComplexField out = f;
    fftw_execute_dft(plans_->fwd_ip, fc(out.v.data()), fc(out.v.data()));
    const double sc = scale_;
    for_each_full_point(grid_, sfz_, [&](std::int64_t i, const std::array<cplx, 3>& w) {
        out.v[static_cast<std::size_t>(i)] *= -sc * std::conj(w[static_cast<std::size_t>(j)]);
    });
    fftw_execute_dft(plans_->bwd_ip, fc(out.v.data()), fc(out.v.data()));
    return out;
}

ComplexField SpectralEngine::dz(const RealField& f, int j) const {
    ComplexField c(grid_);
    for (std::int64_t i = 0; i < f.size(); ++i) c[i] = f[i];
    return dz(c, j);
}

ComplexField SpectralEngine::dzbar(const RealField& f, int j) const {
    ComplexField c(grid_);
    for (std::int64_t i = 0; i < f.size(); ++i) c[i] = f[i];
    return dzbar(c, j);
}

RealField SpectralEngine::poisson_solve(const RealField& rho, const Mat& ginv, double mean_tol) const {
    if (ginv.n != grid_.n) throw Error("poisson_solve: metric order mismatch");
    Spectrum s = forward(rho);
    const double mean = std::abs(s.v[0]) * scale_;
    if (mean >= mean_tol)
        throw Error("poisson_solve: right-hand side violates the zero-mean compatibility condition "
                    "(|mean| = " + std::to_string(mean) + ")");
    const std::int64_t half = s.size();
    cvec u(static_cast<std::size_t>(half), cplx{});
    const double sc = scale_;
    for_each_half_point(grid_, sf_, sfz_, [&](std::int64_t i, std::int64_t, int, const ModeData& md) {
        double diagq = 0.0;
        cplx cross = 0.0;
        for (int j = 0; j < grid_.n; ++j) {
            diagq += ginv.at(j, j).real() * md.wsq[static_cast<std::size_t>(j)];
            for (int k = j + 1; k < grid_.n; ++k)
                cross += ginv.at(j, k) * md.w[static_cast<std::size_t>(j)] * std::conj(md.w[static_cast<std::size_t>(k)]);
        }
        const double symbol = -(diagq + 2.0 * cross.real());
        u[static_cast<std::size_t>(i)] = (symbol == 0.0) ? cplx{} : sc * s.v[static_cast<std::size_t>(i)] / symbol;
    });
    RealField out(grid_);
    fftw_execute_dft_c2r(plans_->c2r, fc(u.data()), out.v.data());
    return out;
}

RealField SpectralEngine::random_band_limited(std::uint64_t seed, int bandwidth, double amplitude) const {
    if (bandwidth >= grid_.N / 2)
        throw Error("random_band_limited: bandwidth must be < N/2 (got " + std::to_string(bandwidth) + ")");
    if (bandwidth < 0) throw Error("random_band_limited: negative bandwidth");
    RealField out(grid_);
    if (amplitude == 0.0) return out;

    // pinned generator; the traversal order below is part of the
    // determinism contract.
    PinnedRng rng(seed);

    const int N = grid_.N;
    const int n = grid_.n;
    const int L = 2 * n - 1;
    const int cols = N / 2 + 1;
    const std::int64_t rows = grid_.npts / N;
    const double sigma = std::max(bandwidth, 1) / 2.0;

    cvec spec(static_cast<std::size_t>(rows) * cols, cplx{});
    std::array<int, 5> idx{};
    for (std::int64_t row = 0; row < rows; ++row) {
        bool in_band_row = true, self_row = true;
        double m2row = 0.0;
        for (int a = 0; a < L; ++a) {
            const int f = sf_[static_cast<std::size_t>(idx[static_cast<std::size_t>(a)])];
            if (std::abs(f) > bandwidth) in_band_row = false;
            if (idx[static_cast<std::size_t>(a)] != 0 && idx[static_cast<std::size_t>(a)] != N / 2) self_row = false;
            m2row += static_cast<double>(f) * f;
        }
        if (in_band_row) {
            for (int k = 0; k <= std::min(bandwidth, cols - 1); ++k) {
                if (row == 0 && k == 0) continue; // mean-zero: no constant mode
                const double m2 = m2row + static_cast<double>(k) * k;
                const double weight = std::exp(-m2 / (2.0 * sigma * sigma));
                const double u1 = rng.unit(), u2 = rng.unit();
                const double rad = std::sqrt(-2.0 * std::log(1.0 - u1));
                const double a = rad * std::cos(2.0 * M_PI * u2) * weight;
                const double b = rad * std::sin(2.0 * M_PI * u2) * weight;
                const bool self = self_row && (k == 0 || k == N / 2);
                spec[static_cast<std::size_t>(row * cols + k)] = self ? cplx(a, 0.0) : cplx(a, b);
            }
        }
        for (int a = L - 1; a >= 0; --a) {
            if (++idx[static_cast<std::size_t>(a)] < N) break;
            idx[static_cast<std::size_t>(a)] = 0;
        }
    }
    fftw_execute_dft_c2r(plans_->c2r, fc(spec.data()), out.v.data());
    const double sup = max_abs(out);
    if (sup == 0.0) throw Error("random_band_limited: empty band");
    const double s = amplitude / sup;
    for (auto& x : out.v) x *= s;
    return out;
}

} // namespace dhym
