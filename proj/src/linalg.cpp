#include "dhym/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace dhym {

Mat Mat::identity(int n) {
    Mat m(n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

Mat Mat::diag_real(int n, const double* d) {
    Mat m(n);
    for (int i = 0; i < n; ++i) m.at(i, i) = d[i];
    return m;
}

Mat operator+(const Mat& x, const Mat& y) {
    Mat r(x.n);
    for (int i = 0; i < x.n * x.n; ++i) r.a[i] = x.a[i] + y.a[i];
    return r;
}

Mat operator-(const Mat& x, const Mat& y) {
    Mat r(x.n);
    for (int i = 0; i < x.n * x.n; ++i) r.a[i] = x.a[i] - y.a[i];
    return r;
}

Mat operator*(const Mat& x, const Mat& y) {
    Mat r(x.n);
    for (int i = 0; i < x.n; ++i)
        for (int k = 0; k < x.n; ++k) {
            const cplx xv = x.at(i, k);
            for (int j = 0; j < x.n; ++j) r.at(i, j) += xv * y.at(k, j);
        }
    return r;
}

Mat operator*(cplx s, const Mat& x) {
    Mat r(x.n);
    for (int i = 0; i < x.n * x.n; ++i) r.a[i] = s * x.a[i];
    return r;
}

Mat adjoint(const Mat& x) {
    Mat r(x.n);
    for (int i = 0; i < x.n; ++i)
        for (int j = 0; j < x.n; ++j) r.at(i, j) = std::conj(x.at(j, i));
    return r;
}

cplx det(const Mat& x) {
    switch (x.n) {
    case 1: return x.at(0, 0);
    case 2: return x.at(0, 0) * x.at(1, 1) - x.at(0, 1) * x.at(1, 0);
    case 3:
        return x.at(0, 0) * (x.at(1, 1) * x.at(2, 2) - x.at(1, 2) * x.at(2, 1)) -
               x.at(0, 1) * (x.at(1, 0) * x.at(2, 2) - x.at(1, 2) * x.at(2, 0)) +
               x.at(0, 2) * (x.at(1, 0) * x.at(2, 1) - x.at(1, 1) * x.at(2, 0));
    default: throw Error("det: unsupported order");
    }
}

cplx trace(const Mat& x) {
    cplx t = 0.0;
    for (int i = 0; i < x.n; ++i) t += x.at(i, i);
    return t;
}

Mat inverse(const Mat& x) {
    const cplx d = det(x);
    if (std::abs(d) == 0.0) throw Error("inverse: singular matrix");
    Mat r(x.n);
    switch (x.n) {
    case 1:
        r.at(0, 0) = 1.0 / d;
        break;
    case 2:
        r.at(0, 0) = x.at(1, 1) / d;
        r.at(0, 1) = -x.at(0, 1) / d;
        r.at(1, 0) = -x.at(1, 0) / d;
        r.at(1, 1) = x.at(0, 0) / d;
        break;
    case 3: {
        auto cof = [&](int r0, int c0) {
            int rr[2], cc[2], k = 0;
            for (int i = 0; i < 3; ++i)
                if (i != r0) rr[k++] = i;
            k = 0;
            for (int j = 0; j < 3; ++j)
                if (j != c0) cc[k++] = j;
            cplx m = x.at(rr[0], cc[0]) * x.at(rr[1], cc[1]) - x.at(rr[0], cc[1]) * x.at(rr[1], cc[0]);
            return (((r0 + c0) & 1) ? -m : m);
        };
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.at(i, j) = cof(j, i) / d;
        break;
    }
    default: throw Error("inverse: unsupported order");
    }
    return r;
}

double frobenius_norm(const Mat& x) {
    double s = 0.0;
    for (int i = 0; i < x.n * x.n; ++i) s += std::norm(x.a[i]);
    return std::sqrt(s);
}

double hermitian_defect(const Mat& x) { return frobenius_norm(x - adjoint(x)); }

bool is_hermitian(const Mat& x, double tol) {
    double scale = std::max(frobenius_norm(x), 1.0);
    return hermitian_defect(x) <= tol * scale;
}

namespace {

// One Newton step on the characteristic polynomial; skipped near multiple roots.
void polish_roots(double c0, double c1, double c2, double scale, double* lam, int n) {
    // p(x) = x^n - c2 x^(n-1) + c1 x^(n-2) - c0 ... written per order below
    for (int i = 0; i < n; ++i) {
        double x = lam[i], p, dp;
        if (n == 2) {
            p = x * x - c2 * x + c1;
            dp = 2 * x - c2;
        } else {
            p = ((x - c2) * x + c1) * x - c0;
            dp = (3 * x - 2 * c2) * x + c1;
        }
        if (std::abs(dp) > 1e-8 * std::max(scale * scale, 1.0)) {
            double nx = x - p / dp;
            if (std::abs(nx - x) < 1e-6 * std::max(scale, 1.0)) lam[i] = nx;
        }
    }
}

} // namespace

std::array<double, 3> herm_eigenvalues(const Mat& m) {
    std::array<double, 3> lam{0.0, 0.0, 0.0};
    switch (m.n) {
    case 1:
        lam[0] = m.at(0, 0).real();
        break;
    case 2: {
        const double a = m.at(0, 0).real(), d = m.at(1, 1).real();
        const double mid = 0.5 * (a + d), h = 0.5 * (a - d);
        const double r = std::sqrt(h * h + std::norm(m.at(0, 1)));
        lam[0] = mid - r;
        lam[1] = mid + r;
        const double tr = a + d;
        const double dt = a * d - std::norm(m.at(0, 1));
        double l2[2] = {lam[0], lam[1]};
        polish_roots(0.0, dt, tr, std::max(std::abs(lam[0]), std::abs(lam[1])), l2, 2);
        lam[0] = std::min(l2[0], l2[1]);
        lam[1] = std::max(l2[0], l2[1]);
        break;
    }
    case 3: {
        const double a = m.at(0, 0).real(), b = m.at(1, 1).real(), c = m.at(2, 2).real();
        const double q = (a + b + c) / 3.0;
        const double p1 = std::norm(m.at(0, 1)) + std::norm(m.at(0, 2)) + std::norm(m.at(1, 2));
        const double p2 = (a - q) * (a - q) + (b - q) * (b - q) + (c - q) * (c - q) + 2.0 * p1;
        if (p2 <= 0.0) {
            lam = {q, q, q};
            break;
        }
        const double p = std::sqrt(p2 / 6.0);
        Mat B(3);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) B.at(i, j) = (m.at(i, j) - (i == j ? cplx(q) : cplx(0.0))) / p;
        double r = 0.5 * det(B).real();
        r = std::clamp(r, -1.0, 1.0);
        const double phi = std::acos(r) / 3.0;
        const double e1 = q + 2.0 * p * std::cos(phi);
        const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0);
        const double e2 = 3.0 * q - e1 - e3;
        lam = {e3, e2, e1};
        std::sort(lam.begin(), lam.end());
        // characteristic coefficients of the original matrix
        const double tr = a + b + c;
        const double c1 = (a * b - std::norm(m.at(0, 1))) + (a * c - std::norm(m.at(0, 2))) +
                          (b * c - std::norm(m.at(1, 2)));
        const double c0 = det(m).real();
        polish_roots(c0, c1, tr, std::max({std::abs(lam[0]), std::abs(lam[2]), 1.0}), lam.data(), 3);
        std::sort(lam.begin(), lam.end());
        break;
    }
    default: throw Error("herm_eigenvalues: unsupported order");
    }
    return lam;
}

void herm_eigensystem(const Mat& m, std::array<double, 3>& evals, Mat& evecs) {
    const int n = m.n;
    Mat A = m;
    Mat V = Mat::identity(n);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += std::norm(A.at(p, q));
        if (off < 1e-30 * std::max(1.0, std::norm(trace(A)))) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                const cplx apq = A.at(p, q);
                if (std::abs(apq) == 0.0) continue;
                const double app = A.at(p, p).real(), aqq = A.at(q, q).real();
                const double absa = std::abs(apq);
                const cplx phase = apq / absa;
                const double tau = (aqq - app) / (2.0 * absa);
                const double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double cth = 1.0 / std::sqrt(1.0 + t * t);
                const double sth = t * cth;
                // J = I except J(p,p)=c, J(q,q)=c, J(p,q)=s*phase, J(q,p)=-s*conj(phase)
                Mat J = Mat::identity(n);
                J.at(p, p) = cth;
                J.at(q, q) = cth;
                J.at(p, q) = sth * phase;
                J.at(q, p) = -sth * std::conj(phase);
                A = adjoint(J) * A * J;
                V = V * J;
            }
    }
    evals = {0.0, 0.0, 0.0};
    // sort ascending with matching columns
    std::array<int, 3> idx{0, 1, 2};
    std::array<double, 3> d{0.0, 0.0, 0.0};
    for (int i = 0; i < n; ++i) d[i] = A.at(i, i).real();
    std::sort(idx.begin(), idx.begin() + n, [&](int i, int j) { return d[i] < d[j]; });
    Mat Vs(n);
    for (int j = 0; j < n; ++j) {
        evals[j] = d[idx[j]];
        for (int i = 0; i < n; ++i) Vs.at(i, j) = V.at(i, idx[j]);
    }
    evecs = Vs;
}

Mat herm_power(const Mat& m, double p) {
    std::array<double, 3> ev{};
    Mat V(m.n);
    herm_eigensystem(m, ev, V);
    Mat D(m.n);
    for (int i = 0; i < m.n; ++i) {
        if (ev[i] <= 0.0 && p != std::floor(p))
            throw Error("herm_power: matrix not positive definite");
        D.at(i, i) = std::pow(ev[i], p);
    }
    return V * D * adjoint(V);
}

} // namespace dhym
