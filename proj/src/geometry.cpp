#include "dhym/geometry.hpp"

#include <algorithm>
#include <cmath>

#include <omp.h>

#if defined(__AVX512F__)
#include <immintrin.h>
extern "C" {
__m512d _ZGVeN8v_atan(__m512d);
__m512d _ZGVeN8vv_atan2(__m512d, __m512d);
__m512d _ZGVeN8v_cos(__m512d);
}
#endif

namespace dhym {

KahlerData KahlerData::make(const Mat& g) {
    if (!is_hermitian(g)) throw Error("KahlerData: metric matrix is not Hermitian");
    const auto ev = herm_eigenvalues(g);
    for (int i = 0; i < g.n; ++i)
        if (ev[static_cast<std::size_t>(i)] <= 0.0) throw Error("KahlerData: metric matrix is not positive definite");
    KahlerData k;
    k.g = g;
    k.ginv = inverse(g);
    k.isqrt = herm_power(g, -0.5);
    k.det_g = det(g).real();
    k.is_identity = frobenius_norm(g - Mat::identity(g.n)) < 1e-14;
    return k;
}

KahlerData KahlerData::identity(int n) { return make(Mat::identity(n)); }

BundleSpec BundleSpec::make(const KahlerData& g, const Mat& B) {
    if (B.n != g.g.n) throw Error("BundleSpec: dimension mismatch between metric and curvature");
    if (!is_hermitian(B)) throw Error("BundleSpec: background curvature matrix is not Hermitian");
    BundleSpec s;
    s.metric = g;
    s.B = B;
    const Mat S = g.isqrt * B * g.isqrt;
    s.ample = herm_eigenvalues(S)[0] > 0.0;
    return s;
}

cplx zeta_pointwise(std::span<const double> lam) {
    cplx z = 1.0;
    for (double l : lam) z *= cplx(1.0, l);
    return z;
}

double theta_pointwise(std::span<const double> lam) {
    double t = 0.0;
    for (double l : lam) t += std::atan(l);
    return t;
}

double vmod_pointwise(std::span<const double> lam) {
    double p = 1.0;
    for (double l : lam) p *= 1.0 + l * l;
    return std::sqrt(p);
}

HermitianField curvature(const SpectralEngine& eng, const BundleSpec& bundle, const RealField& phi) {
    HermitianField F = eng.ddbar(phi);
    const int n = bundle.n();
    const std::int64_t npts = F.grid.npts;
    for (int j = 0; j < n; ++j) {
        const double b = bundle.B.at(j, j).real();
        double* p = F.diag[static_cast<std::size_t>(j)].v.data();
#pragma omp parallel for schedule(static) num_threads(worker_threads())
        for (std::int64_t i = 0; i < npts; ++i) p[i] += b;
    }
    int u = 0;
    for (int r = 0; r < n; ++r)
        for (int c = r + 1; c < n; ++c, ++u) {
            const cplx b = bundle.B.at(r, c);
            double* pre = F.upper_re[static_cast<std::size_t>(u)].v.data();
            double* pim = F.upper_im[static_cast<std::size_t>(u)].v.data();
#pragma omp parallel for schedule(static) num_threads(worker_threads())
            for (std::int64_t i = 0; i < npts; ++i) {
                pre[i] += b.real();
                pim[i] += b.imag();
            }
        }
    return F;
}

namespace {

Mat matrix_at(const HermitianField& H, std::int64_t i) {
    Mat m(H.n);
    for (int r = 0; r < H.n; ++r)
        for (int c = 0; c < H.n; ++c) m.at(r, c) = H.entry(r, c, i);
    return m;
}

void store_herm(HermitianField& H, std::int64_t i, const Mat& m) {
    for (int r = 0; r < H.n; ++r) H.diag[static_cast<std::size_t>(r)][i] = m.at(r, r).real();
    int u = 0;
    for (int r = 0; r < H.n; ++r)
        for (int c = r + 1; c < H.n; ++c, ++u) {
            H.upper_re[static_cast<std::size_t>(u)][i] = m.at(r, c).real();
            H.upper_im[static_cast<std::size_t>(u)][i] = m.at(r, c).imag();
        }
}

} // namespace

EigenField endo_eigenvalues(const KahlerData& g, const HermitianField& F) {
    EigenField out(F.grid, F.n);
    const std::int64_t npts = F.grid.npts;
    const bool ident = g.is_identity;
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::int64_t i = 0; i < npts; ++i) {
        Mat m = matrix_at(F, i);
        if (!ident) m = g.isqrt * m * g.isqrt;
        const auto ev = herm_eigenvalues(m);
        for (int j = 0; j < F.n; ++j) out.lam[static_cast<std::size_t>(j)][i] = ev[static_cast<std::size_t>(j)];
    }
    return out;
}

ComplexField zeta_field(const EigenField& lam) {
    ComplexField out(lam.grid);
    const std::int64_t npts = lam.grid.npts;
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::int64_t i = 0; i < npts; ++i) {
        cplx z = 1.0;
        for (int j = 0; j < lam.n; ++j) z *= cplx(1.0, lam.lam[static_cast<std::size_t>(j)][i]);
        out[i] = z;
    }
    return out;
}

RealField theta_field(const EigenField& lam) {
    RealField out(lam.grid);
    const std::int64_t npts = lam.grid.npts;
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::int64_t i = 0; i < npts; ++i) {
        double t = 0.0;
        for (int j = 0; j < lam.n; ++j) t += std::atan(lam.lam[static_cast<std::size_t>(j)][i]);
        out[i] = t;
    }
    return out;
}

RealField vmod_field(const EigenField& lam) {
    RealField out(lam.grid);
    const std::int64_t npts = lam.grid.npts;
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::int64_t i = 0; i < npts; ++i) {
        double p = 1.0;
        for (int j = 0; j < lam.n; ++j) {
            const double l = lam.lam[static_cast<std::size_t>(j)][i];
            p *= 1.0 + l * l;
        }
        out[i] = std::sqrt(p);
    }
    return out;
}

HermitianField eta(const KahlerData& g, const HermitianField& F) {
    HermitianField out(F.grid, F.n);
    const std::int64_t npts = F.grid.npts;
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::int64_t i = 0; i < npts; ++i) {
        const Mat f = matrix_at(F, i);
        store_herm(out, i, g.g + f * g.ginv * f);
    }
    return out;
}

HermitianField eta_inverse(const HermitianField& eta_field, double cond_limit) {
    HermitianField out(eta_field.grid, eta_field.n);
    const std::int64_t npts = eta_field.grid.npts;
    bool bad = false;
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::int64_t i = 0; i < npts; ++i) {
        const Mat e = matrix_at(eta_field, i);
        const auto ev = herm_eigenvalues(e);
        const double lo = ev[0], hi = ev[static_cast<std::size_t>(eta_field.n - 1)];
        if (!(lo > 0.0) || hi / lo > cond_limit) {
#pragma omp atomic write
            bad = true;
        } else {
            store_herm(out, i, inverse(e));
        }
    }
    if (bad) throw Error("eta_inverse: condition number beyond " + std::to_string(cond_limit));
    return out;
}

RealField kappa(const ComplexField& zeta, double theta_hat) {
    RealField out(zeta.grid);
    const std::int64_t npts = zeta.grid.npts;
    const cplx rot = std::exp(cplx(0.0, -theta_hat));
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::int64_t i = 0; i < npts; ++i) out[i] = (rot * zeta[i] / std::abs(zeta[i])).real();
    return out;
}

double omega_coefficient(double theta_hat, int n) {
    if (n == 2) {
        const double s = std::sin(theta_hat);
        if (std::abs(s) < 1e-12)
            throw Error("omega_coefficient: cot(theta_hat) undefined at theta_hat = k*pi; "
                        "this class is handled by the degree-zero path");
        return std::cos(theta_hat) / s;
    }
    if (n >= 3) {
        if (theta_hat <= (n - 2) * M_PI / 2.0)
            throw Error("omega_coefficient: supercritical branch requires theta_hat > (n-2)*pi/2");
        return -std::tan(theta_hat - (n - 1) * M_PI / 2.0);
    }
    throw Error("omega_coefficient: stability form defined for n >= 2");
}

HermitianField omega_stability_form(const KahlerData& g, const HermitianField& F, double theta_hat, int n) {
    const double c = omega_coefficient(theta_hat, n);
    HermitianField out(F.grid, F.n);
    const std::int64_t npts = F.grid.npts;
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::int64_t i = 0; i < npts; ++i) {
        const Mat f = matrix_at(F, i);
        store_herm(out, i, Mat(c * Mat::identity(F.n)) * g.g + f);
    }
    return out;
}

double matrix_norm_sq_g(const KahlerData& g, const Mat& F) {
    const Mat s = g.is_identity ? F : Mat(g.isqrt * F * g.isqrt);
    const double f = frobenius_norm(s);
    return f * f;
}

// ---------------------------------------------------------------------------
// fused phase scan
// ---------------------------------------------------------------------------

namespace {

struct ChunkStats {
    double zr = 0.0, zi = 0.0, vs = 0.0, ts = 0.0;
    double tmin = 1e300, tmax = -1e300;
    double lmin = 1e300, lmax = -1e300;
    double mlsq = 1e300;
    double vmax = -1e300, kmax = -1e300;
};

ChunkStats combine(const ChunkStats& a, const ChunkStats& b) {
    ChunkStats r;
    r.zr = a.zr + b.zr;
    r.zi = a.zi + b.zi;
    r.vs = a.vs + b.vs;
    r.ts = a.ts + b.ts;
    r.tmin = std::min(a.tmin, b.tmin);
    r.tmax = std::max(a.tmax, b.tmax);
    r.lmin = std::min(a.lmin, b.lmin);
    r.lmax = std::max(a.lmax, b.lmax);
    r.mlsq = std::min(a.mlsq, b.mlsq);
    r.vmax = std::max(a.vmax, b.vmax);
    r.kmax = std::max(a.kmax, b.kmax);
    return r;
}

#if defined(__AVX512F__)
inline double hsum(__m512d v) { return _mm512_reduce_add_pd(v); }

// n = 2, identity metric fast path; processes one chunk of multiple-of-8 size.
void scan_chunk_n2_avx(const double* d0, const double* d1, const double* ur, const double* ui,
                       double b00, double b11, double br, double bi, double anchor,
                       std::int64_t lo, std::int64_t hi, double* theta, double* l1out, double* l2out,
                       ChunkStats& cs) {
    const __m512d vb00 = _mm512_set1_pd(b00), vb11 = _mm512_set1_pd(b11);
    const __m512d vbr = _mm512_set1_pd(br), vbi = _mm512_set1_pd(bi);
    const __m512d vhalf = _mm512_set1_pd(0.5), vone = _mm512_set1_pd(1.0);
    const __m512d vanc = _mm512_set1_pd(anchor);
    __m512d azr = _mm512_setzero_pd(), azi = _mm512_setzero_pd();
    __m512d avs = _mm512_setzero_pd(), ats = _mm512_setzero_pd();
    __m512d atmin = _mm512_set1_pd(1e300), atmax = _mm512_set1_pd(-1e300);
    __m512d almin = _mm512_set1_pd(1e300), almax = _mm512_set1_pd(-1e300);
    __m512d amlsq = _mm512_set1_pd(1e300);
    __m512d avmax = _mm512_set1_pd(-1e300), akmax = _mm512_set1_pd(-1e300);

    for (std::int64_t i = lo; i < hi; i += 8) {
        const __m512d f00 = _mm512_add_pd(_mm512_load_pd(d0 + i), vb00);
        const __m512d f11 = _mm512_add_pd(_mm512_load_pd(d1 + i), vb11);
        const __m512d fre = _mm512_add_pd(_mm512_load_pd(ur + i), vbr);
        const __m512d fim = _mm512_add_pd(_mm512_load_pd(ui + i), vbi);
        const __m512d mid = _mm512_mul_pd(vhalf, _mm512_add_pd(f00, f11));
        const __m512d hh = _mm512_mul_pd(vhalf, _mm512_sub_pd(f00, f11));
        const __m512d off2 = _mm512_fmadd_pd(fre, fre, _mm512_mul_pd(fim, fim));
        const __m512d rad = _mm512_sqrt_pd(_mm512_fmadd_pd(hh, hh, off2));
        const __m512d l1 = _mm512_sub_pd(mid, rad);
        const __m512d l2 = _mm512_add_pd(mid, rad);
        const __m512d dt = _mm512_sub_pd(_mm512_mul_pd(f00, f11), off2);
        const __m512d tr = _mm512_add_pd(f00, f11);
        const __m512d zr = _mm512_sub_pd(vone, dt);
        const __m512d th = _ZGVeN8vv_atan2(tr, zr);
        const __m512d vv = _mm512_sqrt_pd(_mm512_fmadd_pd(zr, zr, _mm512_mul_pd(tr, tr)));
        const __m512d kp = _ZGVeN8v_cos(_mm512_sub_pd(th, vanc));

        _mm512_store_pd(theta + i, th);
        if (l1out) {
            _mm512_store_pd(l1out + i, l1);
            _mm512_store_pd(l2out + i, l2);
        }
        azr = _mm512_add_pd(azr, zr);
        azi = _mm512_add_pd(azi, tr);
        avs = _mm512_add_pd(avs, vv);
        ats = _mm512_add_pd(ats, th);
        atmin = _mm512_min_pd(atmin, th);
        atmax = _mm512_max_pd(atmax, th);
        almin = _mm512_min_pd(almin, l1);
        almax = _mm512_max_pd(almax, l2);
        const __m512d lsq = _mm512_min_pd(_mm512_mul_pd(l1, l1), _mm512_mul_pd(l2, l2));
        amlsq = _mm512_min_pd(amlsq, lsq);
        avmax = _mm512_max_pd(avmax, vv);
        akmax = _mm512_max_pd(akmax, kp);
    }
    cs.zr = hsum(azr);
    cs.zi = hsum(azi);
    cs.vs = hsum(avs);
    cs.ts = hsum(ats);
    cs.tmin = _mm512_reduce_min_pd(atmin);
    cs.tmax = _mm512_reduce_max_pd(atmax);
    cs.lmin = _mm512_reduce_min_pd(almin);
    cs.lmax = _mm512_reduce_max_pd(almax);
    cs.mlsq = _mm512_reduce_min_pd(amlsq);
    cs.vmax = _mm512_reduce_max_pd(avmax);
    cs.kmax = _mm512_reduce_max_pd(akmax);
}
#endif

PhaseScanStats scan_impl(const BundleSpec& bundle, const HermitianField& hess, double anchor,
                         RealField& theta_out, EigenField* lam_out) {
    const GridSpec grid = hess.grid;
    const int n = bundle.n();
    const std::int64_t npts = grid.npts;
    if (!(theta_out.grid == grid)) theta_out = RealField(grid);
    if (lam_out && (!(lam_out->grid == grid) || lam_out->n != n)) *lam_out = EigenField(grid, n);

    const std::int64_t nchunks = (npts + kReduceChunk - 1) / kReduceChunk;
    std::vector<ChunkStats> parts(static_cast<std::size_t>(nchunks));

    bool fast = false;
#if defined(__AVX512F__)
    fast = (n == 2) && bundle.metric.is_identity && (npts % 8 == 0);
#endif

#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::int64_t c = 0; c < nchunks; ++c) {
        const std::int64_t lo = c * kReduceChunk;
        const std::int64_t hi = std::min(lo + kReduceChunk, npts);
        ChunkStats cs;
#if defined(__AVX512F__)
        if (fast) {
            scan_chunk_n2_avx(hess.diag[0].v.data(), hess.diag[1].v.data(), hess.upper_re[0].v.data(),
                              hess.upper_im[0].v.data(), bundle.B.at(0, 0).real(), bundle.B.at(1, 1).real(),
                              bundle.B.at(0, 1).real(), bundle.B.at(0, 1).imag(), anchor, lo, hi,
                              theta_out.v.data(), lam_out ? lam_out->lam[0].v.data() : nullptr,
                              lam_out ? lam_out->lam[1].v.data() : nullptr, cs);
            parts[static_cast<std::size_t>(c)] = cs;
            continue;
        }
#endif
        const bool ident = bundle.metric.is_identity;
        for (std::int64_t i = lo; i < hi; ++i) {
            Mat f = bundle.B;
            for (int r = 0; r < n; ++r) f.at(r, r) += hess.diag[static_cast<std::size_t>(r)][i];
            int u = 0;
            for (int r = 0; r < n; ++r)
                for (int col = r + 1; col < n; ++col, ++u) {
                    const cplx d(hess.upper_re[static_cast<std::size_t>(u)][i],
                                 hess.upper_im[static_cast<std::size_t>(u)][i]);
                    f.at(r, col) += d;
                    f.at(col, r) += std::conj(d);
                }
            if (!ident) f = bundle.metric.isqrt * f * bundle.metric.isqrt;
            const auto ev = herm_eigenvalues(f);
            double th = 0.0, vsq = 1.0;
            cplx z = 1.0;
            for (int j = 0; j < n; ++j) {
                const double l = ev[static_cast<std::size_t>(j)];
                th += std::atan(l);
                vsq *= 1.0 + l * l;
                z *= cplx(1.0, l);
                cs.lmin = std::min(cs.lmin, l);
                cs.lmax = std::max(cs.lmax, l);
                cs.mlsq = std::min(cs.mlsq, l * l);
                if (lam_out) lam_out->lam[static_cast<std::size_t>(j)][i] = l;
            }
            const double vv = std::sqrt(vsq);
            theta_out[i] = th;
            cs.zr += z.real();
            cs.zi += z.imag();
            cs.vs += vv;
            cs.ts += th;
            cs.tmin = std::min(cs.tmin, th);
            cs.tmax = std::max(cs.tmax, th);
            cs.vmax = std::max(cs.vmax, vv);
            cs.kmax = std::max(cs.kmax, std::cos(th - anchor));
        }
        parts[static_cast<std::size_t>(c)] = cs;
    }

    // fixed pairwise combine
    std::vector<ChunkStats> cur = std::move(parts);
    while (cur.size() > 1) {
        std::vector<ChunkStats> next((cur.size() + 1) / 2);
        for (std::size_t i = 0; i < next.size(); ++i)
            next[i] = (2 * i + 1 < cur.size()) ? combine(cur[2 * i], cur[2 * i + 1]) : cur[2 * i];
        cur = std::move(next);
    }
    const ChunkStats& t = cur[0];
    PhaseScanStats out;
    out.zeta_sum = cplx(t.zr, t.zi);
    out.v_sum = t.vs;
    out.theta_sum = t.ts;
    out.theta_min = t.tmin;
    out.theta_max = t.tmax;
    out.lam_min = t.lmin;
    out.lam_max = t.lmax;
    out.min_lam_sq = t.mlsq;
    out.v_max = t.vmax;
    out.kappa_max = t.kmax;
    out.npts = npts;
    return out;
}

} // namespace

PhaseScanStats phase_scan(const BundleSpec& bundle, const HermitianField& hess, double anchor,
                          RealField& theta_out) {
    return scan_impl(bundle, hess, anchor, theta_out, nullptr);
}

PhaseScanStats phase_scan_full(const BundleSpec& bundle, const HermitianField& hess, double anchor,
                               RealField& theta_out, EigenField& lam_out) {
    return scan_impl(bundle, hess, anchor, theta_out, &lam_out);
}

// ---------------------------------------------------------------------------
// identity oracles
// ---------------------------------------------------------------------------

double oracle_ident(const Mat& K) {
    const Mat I = Mat::identity(K.n);
    const Mat A = inverse(I + cplx(0, 1) * K);
    const Mat P = inverse(I + K * K);
    const Mat R = P - cplx(0, 1) * (K * P);
    return frobenius_norm(A - R);
}

double oracle_ginverse(const Mat& g, const Mat& F) {
    const Mat gi = inverse(g);
    const Mat e = g + F * gi * F;
    const Mat ei = inverse(e);
    const Mat rhs = ei + ei * F * gi * F * gi;
    return frobenius_norm(gi - rhs);
}

double oracle_ginverse_field(const KahlerData& g, const HermitianField& F) {
    const std::int64_t npts = F.grid.npts;
    double worst = 0.0;
#pragma omp parallel for schedule(static) reduction(max : worst) num_threads(worker_threads())
    for (std::int64_t i = 0; i < npts; ++i) worst = std::max(worst, oracle_ginverse(g.g, matrix_at(F, i)));
    return worst;
}

double oracle_theta_log_vs_arctan(const Mat& K) {
    const auto ev = herm_eigenvalues(K);
    double ts = 0.0;
    for (int j = 0; j < K.n; ++j) ts += std::atan(ev[static_cast<std::size_t>(j)]);
    const cplx zd = det(Mat(Mat::identity(K.n) + cplx(0, 1) * K));
    const double arg = std::atan2(zd.imag(), zd.real());
    const double lift = std::round((ts - arg) / (2.0 * M_PI));
    return std::abs(arg + 2.0 * M_PI * lift - ts);
}

DeltaThetaReport oracle_delta_theta(const Mat& K, const Mat& dK, std::span<const double> eps) {
    auto theta_of = [](const Mat& m) {
        const auto ev = herm_eigenvalues(m);
        double t = 0.0;
        for (int j = 0; j < m.n; ++j) t += std::atan(ev[static_cast<std::size_t>(j)]);
        return t;
    };
    const double exact = trace(Mat(inverse(Mat(Mat::identity(K.n) + K * K)) * dK)).real();
    DeltaThetaReport rep;
    for (double e : eps) {
        const Mat kp = K + cplx(e) * dK;
        const Mat km = K - cplx(e) * dK;
        const double fd = (theta_of(kp) - theta_of(km)) / (2.0 * e);
        rep.eps.push_back(e);
        rep.fd_error.push_back(std::abs(fd - exact));
    }
    if (rep.eps.size() >= 2 && rep.fd_error[1] > 0.0) {
        rep.observed_order = std::log10(rep.fd_error[0] / rep.fd_error[1]) / std::log10(rep.eps[0] / rep.eps[1]);
    } else {
        rep.observed_order = (rep.fd_error.empty() || rep.fd_error[0] == 0.0) ? 99.0 : 0.0;
    }
    return rep;
}

} // namespace dhym
