#pragma once

#include <Eigen/Dense>
#include <complex>

namespace qdmd::linalg {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

// Caps BLAS/LAPACK threading and the library's own worker pools.
void set_threads(int n);
int threads();

struct RealSvd {
  MatrixXd u;       // m x k, orthonormal columns
  VectorXd sigma;   // k, descending
  MatrixXd v;       // n x k, orthonormal columns
};

struct ComplexSvd {
  MatrixXcd u;
  VectorXd sigma;
  MatrixXcd v;
};

// Thin (economy) SVD, divide-and-conquer LAPACK backend. Input is taken by
// value because the backend overwrites it.
RealSvd svd_econ(MatrixXd a);
ComplexSvd svd_econ(MatrixXcd a);

// Singular values only (cheaper; used for spectra diagnostics).
VectorXd singular_values(MatrixXd a);
VectorXd singular_values(MatrixXcd a);

struct ComplexEig {
  VectorXcd values;
  MatrixXcd vectors;  // columns, unit 2-norm
};

// Dense nonsymmetric eigendecomposition. The real overload keeps conjugate
// pairs exactly conjugate (LAPACK dgeev packs them as such). Throws
// EigenFailure when the QR iteration does not converge.
ComplexEig eig(const MatrixXd& a);
ComplexEig eig(const MatrixXcd& a);

// Eigenvalues and eigenvectors of a real symmetric matrix, ascending.
void sym_eig(MatrixXd a, VectorXd& values, MatrixXd& vectors);

// x minimizing ||a x - b||_2 through the SVD pseudoinverse with a relative
// singular-value cutoff.
VectorXcd pinv_solve(const MatrixXcd& a, const VectorXcd& b, double rel_cutoff = 1e-12);

// 2-norm condition number estimate from the full singular spectrum.
double cond_2norm(const MatrixXcd& a);

}  // namespace qdmd::linalg
