#include "dhym/core.hpp"

#include <algorithm>
#include <cmath>

#include <omp.h>

namespace dhym {

GridSpec make_grid(int n, int N, std::int64_t point_budget) {
    if (n < 1 || n > 3) throw Error("make_grid: complex dimension n must be 1, 2 or 3 (got " + std::to_string(n) + ")");
    if (N < 8) throw Error("make_grid: N must be >= 8 (got " + std::to_string(N) + ")");
    if (N % 2 != 0) throw Error("make_grid: N must be even (got " + std::to_string(N) + ")");
    std::int64_t npts = 1;
    for (int a = 0; a < 2 * n; ++a) {
        npts *= N;
        if (npts > point_budget)
            throw Error("make_grid: N^(2n) = " + std::to_string(N) + "^" + std::to_string(2 * n) +
                        " exceeds the point budget of " + std::to_string(point_budget));
    }
    return GridSpec{n, N, npts};
}

namespace {
int g_threads = 0; // 0 = library default

template <class Acc, class T>
Acc chunked_sum(const T* v, std::int64_t len) {
    const std::int64_t nchunks = (len + kReduceChunk - 1) / kReduceChunk;
    std::vector<Acc> partial(static_cast<std::size_t>(std::max<std::int64_t>(nchunks, 1)), Acc{});
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (std::int64_t c = 0; c < nchunks; ++c) {
        const std::int64_t lo = c * kReduceChunk;
        const std::int64_t hi = std::min(lo + kReduceChunk, len);
        if constexpr (std::is_same_v<Acc, double>) {
            partial[static_cast<std::size_t>(c)] =
                pairwise_sum(hi - lo, [&](std::int64_t i) { return v[lo + i]; });
        } else {
            double re = pairwise_sum(hi - lo, [&](std::int64_t i) { return v[lo + i].real(); });
            double im = pairwise_sum(hi - lo, [&](std::int64_t i) { return v[lo + i].imag(); });
            partial[static_cast<std::size_t>(c)] = Acc{re, im};
        }
    }
    std::vector<Acc> cur = std::move(partial);
    while (cur.size() > 1) {
        std::vector<Acc> next((cur.size() + 1) / 2);
        for (std::size_t i = 0; i < next.size(); ++i)
            next[i] = (2 * i + 1 < cur.size()) ? cur[2 * i] + cur[2 * i + 1] : cur[2 * i];
        cur = std::move(next);
    }
    return cur.empty() ? Acc{} : cur[0];
}
} // namespace

double sum_array(const double* v, std::int64_t len) { return chunked_sum<double>(v, len); }
cplx sum_array(const cplx* v, std::int64_t len) { return chunked_sum<cplx>(v, len); }

double max_abs_array(const double* v, std::int64_t len) {
    double m = 0.0;
#pragma omp parallel for schedule(static) reduction(max : m) num_threads(worker_threads())
    for (std::int64_t i = 0; i < len; ++i) m = std::max(m, std::abs(v[i]));
    return m;
}

double integrate(const RealField& f) {
    return sum_array(f.v.data(), f.size()) / static_cast<double>(f.grid.npts);
}

cplx integrate(const ComplexField& f) {
    return sum_array(f.v.data(), f.size()) / static_cast<double>(f.grid.npts);
}

double max_abs(const RealField& f) { return max_abs_array(f.v.data(), f.size()); }

int worker_threads() {
    if (g_threads > 0) return g_threads;
    return std::min(omp_get_max_threads(), 16);
}

void set_worker_threads(int k) { g_threads = std::max(0, k); }

} // namespace dhym
