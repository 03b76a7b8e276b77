#pragma once

#include <array>
#include <cstdint>

#include "dhym/core.hpp"

namespace dhym {

/// Dense complex matrix of runtime order n <= 3, row-major.
struct Mat {
    int n = 0;
    std::array<cplx, 9> a{};

    Mat() = default;
    explicit Mat(int n_) : n(n_) {}
    static Mat identity(int n);
    static Mat diag_real(int n, const double* d);

    cplx& at(int r, int c) { return a[static_cast<std::size_t>(r * n + c)]; }
    cplx at(int r, int c) const { return a[static_cast<std::size_t>(r * n + c)]; }
};

Mat operator+(const Mat& x, const Mat& y);
Mat operator-(const Mat& x, const Mat& y);
Mat operator*(const Mat& x, const Mat& y);
Mat operator*(cplx s, const Mat& x);
Mat adjoint(const Mat& x);

cplx det(const Mat& x);
cplx trace(const Mat& x);
Mat inverse(const Mat& x);

double frobenius_norm(const Mat& x);
double hermitian_defect(const Mat& x); // ||M - M^dagger||_F
bool is_hermitian(const Mat& x, double tol = 1e-12);

/// Sorted (ascending) eigenvalues of a Hermitian matrix, closed-form
/// characteristic-polynomial solve with one Newton polish per root.
std::array<double, 3> herm_eigenvalues(const Mat& m);

/// Full eigensystem of a Hermitian matrix by cyclic complex Jacobi rotations.
/// evecs columns are the eigenvectors; used for constant-matrix preprocessing
/// (matrix powers of the base metric), not in per-point kernels.
void herm_eigensystem(const Mat& m, std::array<double, 3>& evals, Mat& evecs);

/// M^p for Hermitian positive definite M (p = -0.5 gives the inverse square root).
Mat herm_power(const Mat& m, double p);

} // namespace dhym
