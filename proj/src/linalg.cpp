#include "qdmd/linalg.hpp"

#include <lapacke.h>

#include <algorithm>
#include <atomic>
#include <thread>

#include "qdmd/errors.hpp"

extern "C" void openblas_set_num_threads(int);

namespace qdmd::linalg {

using cdouble = std::complex<double>;

namespace {

std::atomic<int> g_threads{0};

lapack_complex_double* lp(std::complex<double>* p) {
  return reinterpret_cast<lapack_complex_double*>(p);
}

}  // namespace

void set_threads(int n) {
  n = std::max(1, n);
  g_threads.store(n);
  openblas_set_num_threads(n);
}

int threads() {
  int n = g_threads.load();
  if (n <= 0) {
    n = static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
    set_threads(n);
  }
  return n;
}

RealSvd svd_econ(MatrixXd a) {
  threads();
  const lapack_int m = static_cast<lapack_int>(a.rows());
  const lapack_int n = static_cast<lapack_int>(a.cols());
  const lapack_int k = std::min(m, n);
  RealSvd out;
  out.u.resize(m, k);
  out.sigma.resize(k);
  MatrixXd vt(k, n);
  const lapack_int info =
      LAPACKE_dgesdd(LAPACK_COL_MAJOR, 'S', m, n, a.data(), m, out.sigma.data(),
                     out.u.data(), m, vt.data(), k);
  if (info != 0) throw EigenFailure("dgesdd failed, info=" + std::to_string(info));
  out.v = vt.transpose();
  return out;
}

ComplexSvd svd_econ(MatrixXcd a) {
  threads();
  const lapack_int m = static_cast<lapack_int>(a.rows());
  const lapack_int n = static_cast<lapack_int>(a.cols());
  const lapack_int k = std::min(m, n);
  ComplexSvd out;
  out.u.resize(m, k);
  out.sigma.resize(k);
  MatrixXcd vt(k, n);
  const lapack_int info =
      LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'S', m, n, lp(a.data()), m, out.sigma.data(),
                     lp(out.u.data()), m, lp(vt.data()), k);
  if (info != 0) throw EigenFailure("zgesdd failed, info=" + std::to_string(info));
  out.v = vt.adjoint();
  return out;
}

VectorXd singular_values(MatrixXd a) {
  threads();
  const lapack_int m = static_cast<lapack_int>(a.rows());
  const lapack_int n = static_cast<lapack_int>(a.cols());
  VectorXd s(std::min(m, n));
  const lapack_int info = LAPACKE_dgesdd(LAPACK_COL_MAJOR, 'N', m, n, a.data(), m,
                                         s.data(), nullptr, m, nullptr, 1);
  if (info != 0) throw EigenFailure("dgesdd failed, info=" + std::to_string(info));
  return s;
}

VectorXd singular_values(MatrixXcd a) {
  threads();
  const lapack_int m = static_cast<lapack_int>(a.rows());
  const lapack_int n = static_cast<lapack_int>(a.cols());
  VectorXd s(std::min(m, n));
  const lapack_int info = LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'N', m, n, lp(a.data()),
                                         m, s.data(), nullptr, 1, nullptr, 1);
  if (info != 0) throw EigenFailure("zgesdd failed, info=" + std::to_string(info));
  return s;
}

ComplexEig eig(const MatrixXd& a) {
  threads();
  const lapack_int n = static_cast<lapack_int>(a.rows());
  MatrixXd work = a;
  VectorXd wr(n), wi(n);
  MatrixXd vr(n, n);
  const lapack_int info =
      LAPACKE_dgeev(LAPACK_COL_MAJOR, 'N', 'V', n, work.data(), n, wr.data(),
                    wi.data(), nullptr, n, vr.data(), n);
  if (info != 0) throw EigenFailure("dgeev failed, info=" + std::to_string(info));
  ComplexEig out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (lapack_int j = 0; j < n; ++j) {
    out.values[j] = {wr[j], wi[j]};
    if (wi[j] > 0.0) {
      // columns j, j+1 hold Re and Im of the conjugate pair
      out.vectors.col(j) = vr.col(j).cast<cdouble>() + cdouble(0, 1) * vr.col(j + 1).cast<cdouble>();
      out.vectors.col(j + 1) = out.vectors.col(j).conjugate();
    } else if (wi[j] == 0.0) {
      out.vectors.col(j) = vr.col(j).cast<cdouble>();
    }
  }
  return out;
}

ComplexEig eig(const MatrixXcd& a) {
  threads();
  const lapack_int n = static_cast<lapack_int>(a.rows());
  MatrixXcd work = a;
  ComplexEig out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  const lapack_int info =
      LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'V', n, lp(work.data()), n,
                    lp(out.values.data()), nullptr, 1, lp(out.vectors.data()), n);
  if (info != 0) throw EigenFailure("zgeev failed, info=" + std::to_string(info));
  return out;
}

void sym_eig(MatrixXd a, VectorXd& values, MatrixXd& vectors) {
  threads();
  const lapack_int n = static_cast<lapack_int>(a.rows());
  values.resize(n);
  const lapack_int info =
      LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, a.data(), n, values.data());
  if (info != 0) throw EigenFailure("dsyevd failed, info=" + std::to_string(info));
  vectors = std::move(a);
}

VectorXcd pinv_solve(const MatrixXcd& a, const VectorXcd& b, double rel_cutoff) {
  ComplexSvd f = svd_econ(a);
  const double smax = f.sigma.size() ? f.sigma[0] : 0.0;
  VectorXcd c = f.u.adjoint() * b;
  for (Eigen::Index i = 0; i < f.sigma.size(); ++i) {
    if (smax > 0.0 && f.sigma[i] > rel_cutoff * smax)
      c[i] /= f.sigma[i];
    else
      c[i] = 0.0;
  }
  return f.v * c;
}

double cond_2norm(const MatrixXcd& a) {
  VectorXd s = singular_values(a);
  const double lo = s[s.size() - 1];
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return s[0] / lo;
}

}  // namespace qdmd::linalg
